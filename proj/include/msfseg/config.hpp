#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>

namespace msfseg {

/// Line-based `key = value` run configuration with `#` comments. Unknown
/// keys are rejected against a per-command whitelist, and getters with
/// defaults record the effective value so the fully resolved config can be
/// written next to a run's outputs.
class RunConfig {
public:
    RunConfig() = default;

    static RunConfig from_file(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key);  // required; throws if missing
    std::string get_string(const std::string& key, const std::string& fallback);
    long long get_int(const std::string& key, long long fallback);
    long long get_int(const std::string& key);  // required
    double get_double(const std::string& key, double fallback);
    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback);

    /// Throws listing every key not in `allowed`.
    void require_known(std::span<const char* const> allowed) const;

    /// Sorted `key = value` lines.
    void write_resolved(const std::filesystem::path& path) const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace msfseg
