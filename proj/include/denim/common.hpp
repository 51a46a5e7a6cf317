#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace denim {

inline constexpr const char* kVersion = "denim 0.1.0";

// Error hierarchy. Every throw site names the offending field or value so the
// CLI can print a one-line summary.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad values inside a config file or spec struct.
struct ConfigError : Error {
    using Error::Error;
};

// Bad argument to an operation (shape mismatch, negative sigma, ...).
struct ArgError : Error {
    using Error::Error;
};

// Operation called on an object in the wrong state (missing classifier, ...).
struct StateError : Error {
    using Error::Error;
};

// Filesystem / serialization failures, always with the path in the message.
struct IoError : Error {
    using Error::Error;
};

// Training aborted (non-finite loss, diverged attack gradient, ...).
struct TrainError : Error {
    using Error::Error;
};

// FNV-1a, used for config hashes embedded in artifacts.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

std::string to_hex(std::uint64_t v);

}  // namespace denim
