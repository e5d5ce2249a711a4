#include "msfseg/config.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace msfseg {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path.string());
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     " is not `key = value`: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config: empty key on line " + std::to_string(lineno));
        if (cfg.values_.count(key))
            throw std::runtime_error("config: duplicate key: " + key);
        cfg.values_[key] = value;
    }
    return cfg;
}

std::string RunConfig::get_string(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("config: missing required key: " + key);
    return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) {
    const auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    values_[key] = fallback;
    return fallback;
}

long long RunConfig::get_int(const std::string& key, long long fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        values_[key] = std::to_string(fallback);
        return fallback;
    }
    return std::stoll(it->second);
}

long long RunConfig::get_int(const std::string& key) {
    return std::stoll(get_string(key));
}

double RunConfig::get_double(const std::string& key, double fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", fallback);
        values_[key] = buf;
        return fallback;
    }
    return std::stod(it->second);
}

std::uint64_t RunConfig::get_seed(const std::string& key, std::uint64_t fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        values_[key] = std::to_string(fallback);
        return fallback;
    }
    return std::stoull(it->second);
}

void RunConfig::require_known(std::span<const char* const> allowed) const {
    std::string unknown;
    for (const auto& [key, value] : values_) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end()) {
            if (!unknown.empty()) unknown += ", ";
            unknown += key;
        }
    }
    if (!unknown.empty()) throw std::runtime_error("config: unknown keys: " + unknown);
}

void RunConfig::write_resolved(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("config: cannot write " + path.string());
    for (const auto& [key, value] : values_) os << key << " = " << value << "\n";
}

}  // namespace msfseg
