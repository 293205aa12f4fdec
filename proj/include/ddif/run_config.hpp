#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ddif/errors.hpp"

namespace ddif {

// Flat key=value run configuration. '#' starts a comment, blank lines are
// skipped, keys must come from the known-key schema (unknown keys are
// rejected at parse time, duplicates too). Every value a tool reads is
// recorded, defaults included, so the run manifest can echo the exact
// effective configuration.
class RunConfig {
  public:
    RunConfig() = default;

    static RunConfig from_file(const std::string& path, std::span<const std::string> known_keys);

    // One "key=value" override (--set). The key must be known.
    void set(const std::string& assignment, std::span<const std::string> known_keys);
    void set_value(const std::string& key, const std::string& value);

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    // Everything read so far, as key -> effective value.
    const std::map<std::string, std::string>& consumed() const { return consumed_; }
    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> consumed_;
};

}  // namespace ddif
