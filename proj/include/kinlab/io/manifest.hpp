#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

namespace kinlab {

inline constexpr const char* KINLAB_VERSION = "0.1.0";

// FNV-1a over bytes; used for config hashes and output checksums.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string fnv1a_hex(const std::string& data) {
    std::ostringstream os;
    os << std::hex << fnv1a(data);
    return os.str();
}

inline std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return fnv1a_hex(ss.str());
}

// Run record written next to the outputs, including on failure. Timestamps
// make the manifest itself non-reproducible; the data outputs are the
// byte-stable artifacts.
class RunManifest {
  public:
    RunManifest(std::string experiment, const std::string& resolved_config)
        : experiment_(std::move(experiment)),
          config_hash_(fnv1a_hex(resolved_config)),
          start_(now_iso()) {}

    void add_output(const std::string& path) { outputs_[path] = file_checksum(path); }
    void set_status(const std::string& status, const std::string& message = "") {
        status_ = status;
        message_ = message;
    }
    const std::string& config_hash() const { return config_hash_; }

    void write(const std::string& path) const {
        nlohmann::json j;
        j["experiment"] = experiment_;
        j["code_version"] = KINLAB_VERSION;
        j["config_hash"] = config_hash_;
        j["started"] = start_;
        j["finished"] = now_iso();
        j["status"] = status_;
        if (!message_.empty()) j["message"] = message_;
        nlohmann::json outs = nlohmann::json::object();
        for (const auto& [p, sum] : outputs_) outs[p] = sum;
        j["outputs"] = outs;
        std::ofstream out(path, std::ios::binary);
        out << j.dump(2) << '\n';
    }

  private:
    static std::string now_iso() {
        const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
        return buf;
    }

    std::string experiment_;
    std::string config_hash_;
    std::string start_;
    std::string status_ = "running";
    std::string message_;
    std::map<std::string, std::string> outputs_;
};

}  // namespace kinlab
