#pragma once

#include "triplex/synth.hpp"

namespace fixtures {

// Small connected instance with 2 node feature columns and 3 downstream
// features, paired with a one-layer pipeline.
inline triplex::PlantedInstance small_planted(std::uint64_t seed = 3) {
    return triplex::make_planted_instance(6, 2, 2, 3, seed);
}

inline triplex::PlantedInstance bench_planted(std::uint64_t seed) {
    return triplex::make_planted_instance(20, 2, 3, 3, seed);
}

}  // namespace fixtures
