#include "dygenc/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dygenc/errors.hpp"

namespace dygenc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

std::vector<ConfigEntry> parse_config_entries(const std::string& text, const std::string& origin) {
    std::vector<ConfigEntry> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + "missing key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        out.push_back({std::move(key), std::move(value), line_no});
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    unsigned long long x = 0;
    if (!v.empty() && std::isdigit(static_cast<unsigned char>(v[0]))) {
        try {
            x = std::stoull(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
    }
    if (used == 0 || used != v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(x)) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    std::string l;
    for (char c : v) l.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
    if (l == "false" || l == "0" || l == "no" || l == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& value, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : value) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

} // namespace dygenc
