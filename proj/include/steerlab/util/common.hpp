#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace steerlab {

// FNV-1a 64-bit. Used for artifact hashes in run manifests and for
// deterministic data splits; not cryptographic.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

std::string hex64(std::uint64_t v);

// Whole-file read/write. Throws std::runtime_error on I/O failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
std::uint64_t hash_file(const std::string& path);

// Split text into lines, dropping a trailing empty line. Used by the
// JSON-lines readers.
std::vector<std::string> split_lines(const std::string& text);

// Fixed-format float for file output; keeps goldens byte-stable.
std::string format_double(double v, int precision = 6);

}  // namespace steerlab
