#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace triplex {

// Error taxonomy mirrored by CLI exit codes.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : error {
    using error::error;
};
struct input_error : error {
    using error::error;
};
struct internal_error : error {
    using error::error;
};

// The three pruning components. Index order matters: budgets, minima and
// bandit arms are addressed as (downstream, nodes, node_features).
enum class Component : int { downstream = 0, nodes = 1, node_features = 2 };

inline constexpr int kNumComponents = 3;

inline const char* arm_name(Component c) {
    switch (c) {
        case Component::downstream: return "downstream";
        case Component::nodes: return "nodes";
        case Component::node_features: return "graph_feat";
    }
    return "?";
}

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive stable sub-seeds from (seed, key) pairs
// so cached quantities do not depend on evaluation order.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_string(const std::string& s) {
    // FNV-1a, stable across platforms.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::size_t rand_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

inline double rand_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace triplex
