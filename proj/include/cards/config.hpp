#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cards::harness {

/// Key-value configuration with nested sections:
///
///   # comment
///   top = 1
///   [grid]
///   seeds = 1, 2, 3
///   [grid.deck]
///   size = 2
///
/// Section headers prefix subsequent keys ("grid.seeds", "grid.deck.size");
/// later assignments to the same key win.  Lines that are neither blank,
/// comment, header, nor `key = value` raise std::runtime_error with the line
/// number.
struct Config {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) != 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key) const;  // throws when missing

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;  // true/false/1/0/yes/no

    /// Comma-separated list, items trimmed, empty items dropped; missing key
    /// gives an empty list.
    std::vector<std::string> get_list(const std::string& key) const;
    std::vector<std::int64_t> get_int_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);

}  // namespace cards::harness
