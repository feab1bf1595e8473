#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sbx {

inline constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a over the raw config text with line endings normalized, so the
/// hash matches across platforms for identical configuration.
inline std::uint64_t config_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : text) {
        if (c == '\r') continue;
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

struct RunManifest {
    std::uint64_t config_hash_value = 0;
    std::uint64_t seed = 0;
    int replicas_completed = 0;
    std::vector<int> truncated_indices;
    double wall_time_ms = 0.0;

    nlohmann::json to_json() const {
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(config_hash_value));
        nlohmann::json j;
        j["config_hash"] = std::string("fnv1a64:") + hex;
        j["seed"] = seed;
        j["tool_version"] = kToolVersion;
        j["replicas"] = {{"completed", replicas_completed},
                         {"truncated", truncated_indices.size()},
                         {"truncated_indices", truncated_indices}};
        j["wall_time_ms"] = wall_time_ms;
        return j;
    }
};

/// Fixed-format float: shortest round-trip representation, locale-free.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::string& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path.string());
        out_ << header << "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ",";
            out_ << cells[i];
        }
        out_ << "\n";
    }

  private:
    std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out << j.dump(2) << "\n";
}

} // namespace sbx
