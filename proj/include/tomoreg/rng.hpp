// Seeded uniform draws with a fixed bit-level construction, so generated
// fixtures are identical across standard libraries (std distributions do
// not guarantee that).
#pragma once

#include <cstdint>
#include <random>

namespace tomoreg {

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

}  // namespace tomoreg
