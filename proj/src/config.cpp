#include "degenctrl/config.hpp"

#include "degenctrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace degenctrl::config {

namespace {

class Parser {
public:
    Parser(std::string_view text, std::string source) : s_(text), source_(std::move(source)) {}

    Json parse() {
        Json root = Json::object();
        Json* current = &root;
        while (true) {
            skip_blank_lines();
            if (eof()) break;
            if (peek() == '[') {
                if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '[') fail("arrays of tables are not supported");
                ++pos_;
                skip_ws();
                auto path = parse_key_path();
                skip_ws();
                expect(']');
                end_of_line();
                std::string joined;
                for (const auto& k : path) joined += (joined.empty() ? "" : ".") + k;
                if (!headers_.insert(joined).second) fail("table [" + joined + "] defined twice");
                current = &root;
                for (const auto& k : path) {
                    if (!current->contains(k)) (*current)[k] = Json::object();
                    current = &(*current)[k];
                    if (!current->is_object()) fail("key '" + k + "' is not a table");
                }
                continue;
            }
            parse_key_value(*current);
            end_of_line();
        }
        return root;
    }

private:
    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return s_[pos_]; }

    [[noreturn]] void fail(const std::string& what) const {
        const auto line = 1 + std::count(s_.begin(), s_.begin() + static_cast<long>(std::min(pos_, s_.size())), '\n');
        throw ConfigError(source_ + ":" + std::to_string(line) + ": " + what);
    }

    void expect(char c) {
        if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_comment() {
        if (!eof() && peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }

    void skip_blank_lines() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (eof()) return;
            if (peek() == '\r' || peek() == '\n') {
                ++pos_;
                continue;
            }
            return;
        }
    }

    // Whitespace, comments and newlines inside arrays.
    void skip_array_space() { skip_blank_lines(); }

    void end_of_line() {
        skip_ws();
        skip_comment();
        if (eof()) return;
        if (peek() == '\r') ++pos_;
        if (eof() || peek() != '\n') fail("unexpected text after value");
        ++pos_;
    }

    static bool bare_char(char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    }

    std::string parse_simple_key() {
        if (eof()) fail("expected a key");
        if (peek() == '"') return parse_basic_string();
        if (peek() == '\'') return parse_literal_string();
        const auto start = pos_;
        while (!eof() && bare_char(peek())) ++pos_;
        if (pos_ == start) fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    std::vector<std::string> parse_key_path() {
        std::vector<std::string> path{parse_simple_key()};
        skip_ws();
        while (!eof() && peek() == '.') {
            ++pos_;
            skip_ws();
            path.push_back(parse_simple_key());
            skip_ws();
        }
        return path;
    }

    void parse_key_value(Json& table) {
        auto path = parse_key_path();
        skip_ws();
        expect('=');
        skip_ws();
        Json value = parse_value();
        Json* target = &table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            if (!target->contains(path[i])) (*target)[path[i]] = Json::object();
            target = &(*target)[path[i]];
            if (!target->is_object()) fail("key '" + path[i] + "' is not a table");
        }
        if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
        (*target)[path.back()] = std::move(value);
    }

    Json parse_value() {
        if (eof()) fail("expected a value");
        const char c = peek();
        if (c == '"') return parse_basic_string();
        if (c == '\'') return parse_literal_string();
        if (c == '[') return parse_array();
        if (c == '{') return parse_inline_table();
        if (s_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return true;
        }
        if (s_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return false;
        }
        return parse_number();
    }

    std::string parse_basic_string() {
        expect('"');
        if (s_.substr(pos_, 2) == "\"\"") fail("multi-line strings are not supported");
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = s_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (eof()) fail("unterminated string");
            const char e = s_[pos_++];
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case 'b': out += '\b'; break;
                case 'f': out += '\f'; break;
                case 'u': {
                    if (pos_ + 4 > s_.size()) fail("bad \\u escape");
                    const unsigned long cp = std::stoul(std::string(s_.substr(pos_, 4)), nullptr, 16);
                    pos_ += 4;
                    if (cp < 0x80) {
                        out += static_cast<char>(cp);
                    } else if (cp < 0x800) {
                        out += static_cast<char>(0xC0 | (cp >> 6));
                        out += static_cast<char>(0x80 | (cp & 0x3F));
                    } else {
                        out += static_cast<char>(0xE0 | (cp >> 12));
                        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                        out += static_cast<char>(0x80 | (cp & 0x3F));
                    }
                    break;
                }
                default: fail(std::string("unknown escape \\") + e);
            }
        }
        return out;
    }

    std::string parse_literal_string() {
        expect('\'');
        const auto start = pos_;
        while (!eof() && peek() != '\'' && peek() != '\n') ++pos_;
        if (eof() || peek() != '\'') fail("unterminated string");
        std::string out(s_.substr(start, pos_ - start));
        ++pos_;
        return out;
    }

    Json parse_number() {
        const auto start = pos_;
        while (!eof() && (bare_char(peek()) || peek() == '.' || peek() == '+')) ++pos_;
        std::string tok(s_.substr(start, pos_ - start));
        if (tok.empty()) fail("expected a value");
        tok.erase(std::remove(tok.begin(), tok.end(), '_'), tok.end());
        std::string body = tok;
        double sign = 1.0;
        if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
            sign = body[0] == '-' ? -1.0 : 1.0;
            body.erase(0, 1);
        }
        if (body == "inf") return sign * std::numeric_limits<double>::infinity();
        if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
        const bool is_float = tok.find_first_of(".eE") != std::string::npos;
        std::size_t used = 0;
        try {
            if (is_float) {
                const double v = std::stod(tok, &used);
                if (used == tok.size()) return v;
            } else {
                const long long v = std::stoll(tok, &used, 10);
                if (used == tok.size()) return v;
            }
        } catch (const std::exception&) {
        }
        fail("invalid value '" + tok + "'");
    }

    Json parse_array() {
        expect('[');
        Json arr = Json::array();
        while (true) {
            skip_array_space();
            if (eof()) fail("unterminated array");
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            arr.push_back(parse_value());
            skip_array_space();
            if (eof()) fail("unterminated array");
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() != ']') fail("expected ',' or ']' in array");
        }
    }

    Json parse_inline_table() {
        expect('{');
        Json t = Json::object();
        skip_ws();
        if (!eof() && peek() == '}') {
            ++pos_;
            return t;
        }
        while (true) {
            skip_ws();
            parse_key_value(t);
            skip_ws();
            if (eof()) fail("unterminated inline table");
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            expect('}');
            return t;
        }
    }

    std::string_view s_;
    std::string source_;
    std::size_t pos_ = 0;
    std::set<std::string> headers_;
};

}  // namespace

Json parse_toml(std::string_view text, const std::string& source) { return Parser(text, source).parse(); }

Json read_toml_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str(), path.string());
}

// ---------------------------------------------------------------------------

Table::Table(const Json& node, std::string path) : node_(&node), path_(std::move(path)) {
    if (!node.is_object()) throw ConfigError(path_ + ": expected a table");
}

std::string Table::where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

bool Table::has(const std::string& key) const { return node_->contains(key); }

const Json& Table::get(const std::string& key) {
    if (!node_->contains(key)) throw ConfigError("missing key '" + where(key) + "'");
    if (std::find(used_.begin(), used_.end(), key) == used_.end()) used_.push_back(key);
    return (*node_)[key];
}

double Table::number(const std::string& key) {
    const auto& v = get(key);
    if (!v.is_number()) throw ConfigError("'" + where(key) + "' must be a number");
    return v.get<double>();
}

double Table::number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

long long Table::integer(const std::string& key) {
    const auto& v = get(key);
    if (!v.is_number_integer()) throw ConfigError("'" + where(key) + "' must be an integer");
    return v.get<long long>();
}

long long Table::integer(const std::string& key, long long fallback) { return has(key) ? integer(key) : fallback; }

bool Table::boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = get(key);
    if (!v.is_boolean()) throw ConfigError("'" + where(key) + "' must be true or false");
    return v.get<bool>();
}

std::string Table::string(const std::string& key) {
    const auto& v = get(key);
    if (!v.is_string()) throw ConfigError("'" + where(key) + "' must be a string");
    return v.get<std::string>();
}

std::string Table::string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
}

Table Table::table(const std::string& key) { return Table(get(key), where(key)); }

const Json& Table::raw(const std::string& key) { return get(key); }

std::vector<std::pair<double, double>> Table::intervals(const std::string& key) {
    const auto& v = get(key);
    auto pair_of = [&](const Json& p) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw ConfigError("'" + where(key) + "' must hold [lo, hi] pairs");
        return std::pair<double, double>{p[0].get<double>(), p[1].get<double>()};
    };
    std::vector<std::pair<double, double>> out;
    if (v.is_array() && v.size() == 2 && v[0].is_number()) {
        out.push_back(pair_of(v));
    } else if (v.is_array()) {
        for (const auto& p : v) out.push_back(pair_of(p));
    } else {
        throw ConfigError("'" + where(key) + "' must hold [lo, hi] pairs");
    }
    return out;
}

void Table::finish() const {
    for (auto it = node_->begin(); it != node_->end(); ++it)
        if (std::find(used_.begin(), used_.end(), it.key()) == used_.end())
            throw ConfigError("unknown key '" + where(it.key()) + "'");
}

}  // namespace degenctrl::config
