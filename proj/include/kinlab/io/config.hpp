#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinlab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key=value configuration with dotted sections ("md.N=1000"). Parsing is
// strict: every key must be consumed by the experiment that runs, unknown
// keys are rejected to prevent silent typos.
class Config {
  public:
    Config() = default;

    static Config parse_text(const std::string& text) {
        Config c;
        std::stringstream ss(text);
        std::string line;
        int lineno = 0;
        while (std::getline(ss, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            if (c.kv_.count(key))
                throw ConfigError("config: duplicate key '" + key + "'");
            c.kv_[key] = value;
        }
        return c;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_text(ss.str());
    }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        touch(key);
        const auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }
    std::string require_string(const std::string& key) const {
        touch(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError("config: missing required key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        touch(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        return to_double(key, it->second);
    }
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        touch(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        return to_int(key, it->second);
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        touch(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        return static_cast<std::uint64_t>(to_int(key, it->second));
    }
    bool get_bool(const std::string& key, bool fallback) const {
        touch(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError("config: key '" + key + "' expects true/false");
    }
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const {
        touch(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        std::vector<double> out;
        std::stringstream ss(it->second);
        std::string cell;
        while (std::getline(ss, cell, ';')) out.push_back(to_double(key, trim(cell)));
        return out;
    }

    // strict parsing: any key never requested by the experiment is a typo
    void reject_unknown_keys() const {
        for (const auto& [k, v] : kv_)
            if (!touched_.count(k)) throw ConfigError("config: unknown key '" + k + "'");
    }

    // resolved (defaults folded in by the caller) canonical text: sorted keys
    std::string canonical_text() const {
        std::string out;
        for (const auto& [k, v] : kv_) out += k + "=" + v + "\n";
        return out;
    }

  private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }
    static double to_double(const std::string& key, const std::string& v) {
        try {
            std::size_t pos;
            const double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return x;
        } catch (...) {
            throw ConfigError("config: key '" + key + "' is not a number: '" + v + "'");
        }
    }
    static std::int64_t to_int(const std::string& key, const std::string& v) {
        try {
            std::size_t pos;
            const std::int64_t x = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return x;
        } catch (...) {
            throw ConfigError("config: key '" + key + "' is not an integer: '" + v + "'");
        }
    }
    void touch(const std::string& key) const { touched_.insert(key); }

    std::map<std::string, std::string> kv_;
    mutable std::set<std::string> touched_;
};

}  // namespace kinlab
