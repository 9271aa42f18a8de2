#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dygenc {

// One "key = value" line of a structured text config.
struct ConfigEntry {
    std::string key;
    std::string value;
    std::size_t line;
};

// '#' starts a comment, blank lines are skipped, values may be double-quoted.
// Malformed lines throw ConfigError naming origin and line.
std::vector<ConfigEntry> parse_config_entries(const std::string& text, const std::string& origin);
std::string read_text_file(const std::string& path);

std::uint64_t parse_uint(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::vector<std::string> split_list(const std::string& value, char sep = ',');

} // namespace dygenc
