#include "ddif/run_config.hpp"

#include <algorithm>
#include <cerrno>
#include <climits>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace ddif {
namespace {

std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

bool known(const std::string& key, std::span<const std::string> known_keys) {
    return std::find(known_keys.begin(), known_keys.end(), key) != known_keys.end();
}

void split_assignment(const std::string& text, std::string& key, std::string& value,
                      const std::string& where) {
    auto eq = text.find('=');
    if (eq == std::string::npos)
        throw ParseError(where + ": expected key=value, got '" + text + "'");
    key = trim(text.substr(0, eq));
    value = trim(text.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path, std::span<const std::string> known_keys) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::string key, value;
        split_assignment(line, key, value, path + ":" + std::to_string(lineno));
        if (!known(key, known_keys))
            throw ParseError(path + ":" + std::to_string(lineno) + ": unknown config key '" + key +
                             "'");
        if (cfg.values_.count(key))
            throw ParseError(path + ":" + std::to_string(lineno) + ": duplicate config key '" +
                             key + "'");
        cfg.values_[key] = value;
    }
    return cfg;
}

void RunConfig::set(const std::string& assignment, std::span<const std::string> known_keys) {
    std::string key, value;
    split_assignment(assignment, key, value, "--set");
    if (!known(key, known_keys)) throw ParseError("--set: unknown config key '" + key + "'");
    values_[key] = value;
}

void RunConfig::set_value(const std::string& key, const std::string& value) {
    values_[key] = value;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    std::string v = it == values_.end() ? fallback : it->second;
    consumed_[key] = v;
    return v;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", fallback);
        consumed_[key] = buf;
        return fallback;
    }
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0' || errno == ERANGE)
        throw ParseError("config key '" + key + "': not a number: '" + it->second + "'");
    consumed_[key] = it->second;
    return v;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        consumed_[key] = std::to_string(fallback);
        return fallback;
    }
    errno = 0;
    char* end = nullptr;
    long v = std::strtol(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0' || errno == ERANGE || v < INT_MIN || v > INT_MAX)
        throw ParseError("config key '" + key + "': not an integer: '" + it->second + "'");
    consumed_[key] = it->second;
    return static_cast<int>(v);
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        consumed_[key] = std::to_string(fallback);
        return fallback;
    }
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0' || errno == ERANGE ||
        it->second.find('-') != std::string::npos)
        throw ParseError("config key '" + key + "': not an unsigned integer: '" + it->second +
                         "'");
    consumed_[key] = it->second;
    return static_cast<std::uint64_t>(v);
}

}  // namespace ddif
