#pragma once

// Reader for the TOML subset used by scenario files, producing an ordered
// JSON tree (declaration order is kept).
//
// Supported: comments, bare and quoted keys, dotted keys, [tables] and
// [dotted.tables], basic and literal strings, integers and floats (with
// underscores, exponents, inf and nan), booleans, arrays (nested and spread
// over several lines) and inline tables. Dates and array-of-tables are not.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace degenctrl::config {

using Json = nlohmann::ordered_json;

// Throws ConfigError naming the source and line on malformed input or a
// duplicate key.
Json parse_toml(std::string_view text, const std::string& source = "<string>");
Json read_toml_file(const std::filesystem::path& path);

// Key-tracking view of a table: every accessor marks the key as consumed and
// finish() rejects any key that was never asked for.
class Table {
public:
    Table(const Json& node, std::string path);

    bool has(const std::string& key) const;
    double number(const std::string& key);
    double number(const std::string& key, double fallback);
    long long integer(const std::string& key);
    long long integer(const std::string& key, long long fallback);
    bool boolean(const std::string& key, bool fallback);
    std::string string(const std::string& key);
    std::string string(const std::string& key, const std::string& fallback);
    // Subtable (a [table] or an inline table).
    Table table(const std::string& key);
    const Json& raw(const std::string& key);
    // [[lo, hi], ...] or a single [lo, hi].
    std::vector<std::pair<double, double>> intervals(const std::string& key);

    void finish() const;
    const std::string& path() const noexcept { return path_; }

private:
    const Json& get(const std::string& key);
    std::string where(const std::string& key) const;

    const Json* node_;
    std::string path_;
    std::vector<std::string> used_;
};

}  // namespace degenctrl::config
