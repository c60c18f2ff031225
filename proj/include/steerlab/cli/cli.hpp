#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace steerlab::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Written next to every subcommand's outputs; enough to reproduce them.
struct RunManifest {
    std::string subcommand;
    std::string config_json;  // resolved configuration
    std::map<std::string, std::string> input_hashes;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::string timestamp;  // excluded from determinism comparisons

    std::string to_json() const;
};

void write_manifest(const RunManifest& manifest, const std::string& path);

// Entry point shared by the binary and the tests. Returns the process
// exit code.
int run(const std::vector<std::string>& args);

}  // namespace steerlab::cli
