#include "cards/config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace cards::harness {

namespace {

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_line(std::size_t lineno, const std::string& line) {
    throw std::runtime_error("config line " + std::to_string(lineno) + ": cannot parse '" +
                             line + "'");
}

}  // namespace

std::string Config::get(const std::string& key, const std::string& fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

std::string Config::require(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw std::runtime_error("config: missing required key '" + key + "'");
    return it->second;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t used = 0;
        const std::int64_t v = std::stoll(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' is not an integer: '" + it->second +
                                 "'");
    }
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' is not a number: '" + it->second +
                                 "'");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config: key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
    const auto it = values.find(key);
    std::vector<std::string> out;
    if (it == values.end()) return out;
    std::size_t pos = 0;
    while (pos <= it->second.size()) {
        const std::size_t comma = it->second.find(',', pos);
        const std::string item =
            trim(it->second.substr(pos, comma == std::string::npos ? std::string::npos
                                                                   : comma - pos));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<std::int64_t> Config::get_int_list(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const std::string& item : get_list(key)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoll(item, &used));
            if (used != item.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::runtime_error("config: key '" + key + "' has a non-integer item: '" +
                                     item + "'");
        }
    }
    return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : get_list(key)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::runtime_error("config: key '" + key + "' has a non-numeric item: '" +
                                     item + "'");
        }
    }
    return out;
}

Config parse_config(const std::string& text) {
    Config cfg;
    std::string section;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos
                                                                    : nl - pos);
        ++lineno;
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;

        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') bad_line(lineno, line);
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) bad_line(lineno, line);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) bad_line(lineno, line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) bad_line(lineno, line);
        cfg.values[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    return parse_config(text);
}

}  // namespace cards::harness
