#pragma once

// Scenario files, their dispatch to the library, and the reports they leave
// on disk. One scenario per TOML file:
//
//   name = "hum_weak"
//   task = "control"          # solve observe control carleman hardy caccioppoli
//                             # regional semilinear suite
//   seed = 7                  # required whenever random data is drawn
//   form = "divergence"       # or "non-divergence"
//   output = "out/hum_weak"   # relative to the file; default out/<name>
//   profile = {type = "prototype", alpha = 0.5, x0 = 0.5}
//   [grid]
//   N = 100                   # cells
//   M = 200                   # time steps
//   T = 1.0
//   [control]                 # options of the task, named after it
//   omega = [[0.3, 0.7]]
//
// Unknown keys anywhere are errors.

#include "degenctrl/coeff.hpp"
#include "degenctrl/config.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace degenctrl::cli {

using config::Json;
using Intervals = std::vector<std::pair<double, double>>;

enum class Task { Solve, Observe, Control, Carleman, Hardy, Caccioppoli, Regional, Semilinear, Suite };
std::string_view to_string(Task t);
Task parse_task(std::string_view text);

struct ProfileConfig {
    std::string type;  // prototype, constant, csv
    double alpha = 0.5;
    double x0 = 0.5;
    double value = 1.0;
    std::size_t samples = 1001;
    bool allow_override = false;
    std::filesystem::path csv;
    std::optional<double> csv_x0;
    std::optional<double> csv_K;
};

struct GridConfig {
    std::size_t N = 0;
    int M = 0;
    double T = 1.0;
    double grading = 1.0;
    double theta = 1.0;
};

struct Scenario {
    std::string name;
    Task task = Task::Solve;
    std::optional<std::uint64_t> seed;
    coeff::Form form = coeff::Form::Divergence;
    std::filesystem::path source;
    std::filesystem::path output;
    Json inputs;
    std::optional<ProfileConfig> profile;
    GridConfig grid;

    // task options; only the block of `task` is filled
    std::string data = "sine";  // u0 (or vT) choice: sine, random, zero
    int terms = 8;              // sine modes of random data
    Intervals omega;
    Intervals omega_inner;
    std::optional<double> epsilon;
    double reaction = 0.0;
    double residual_tol = 1e-2;
    double cg_tol = 1e-10;
    int cg_max_iters = 2000;
    std::string method = "power";  // observe: power, dense, both
    double c1 = 1.0;
    double margin = 0.1;
    double R = 1.0;
    int samples = 1;
    int s_points = 16;
    double exponent = 2.0;  // hardy: p = |x - x0|^exponent
    double hardy_x0 = 0.5;
    int tests = 100;
    double r_outer = 0.0;
    double r_inner = 0.0;
    double scale = 1e-2;  // semilinear: f(u) = scale sin(u)
    double picard_tol = 1e-6;
    int picard_max_iters = 20;
    bool binary = true;
    std::vector<std::filesystem::path> members;  // suite
};

// Parses and validates a scenario file, including the coefficient profile.
Scenario load_scenario(const std::filesystem::path& path);
// Same, from text; relative paths resolve against `base`.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base,
                        const std::string& source = "<string>");

coeff::CoefficientProfile build_profile(const Scenario& s);

enum class Verdict { Pass, Fail, Error };

struct Section {
    std::string name;
    std::string task;
    Verdict verdict = Verdict::Pass;
    Json results = Json::object();
    std::vector<std::string> artifacts;
    std::vector<std::string> warnings;
};

struct Report {
    std::string text;
    Json json;
};

// Sections in the given order; floating values carry 6 significant digits.
Report emit_report(const std::vector<Section>& sections);

// Rounds to 6 significant digits; inf and nan become strings.
Json number(double v);
Json numbers(const std::vector<double>& v);

// Runs the scenario and writes its artifacts (manifest.json, summary.txt and
// the task's CSV/JSON files) under s.output.
Section run(const Scenario& s);

// Exit status of the three subcommands: 0 pass, 2 fail, 1 error.
int run_command(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int suite_command(const std::filesystem::path& dir, std::ostream& out, std::ostream& err,
                  const std::optional<std::filesystem::path>& report = {});
int validate_command(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

// Full command line (argv[0] included).
int main_entry(int argc, char** argv);

}  // namespace degenctrl::cli
