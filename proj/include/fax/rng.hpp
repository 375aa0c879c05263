#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fax {

// Deterministic per-component seed derivation from one root seed, so
// every pipeline stage draws from its own stream.
inline std::uint64_t split_seed(std::uint64_t root, std::string_view tag) {
    std::uint64_t h = 1469598103934665603ull ^ root;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view tag) {
    return std::mt19937_64(split_seed(root, tag));
}

}  // namespace fax
