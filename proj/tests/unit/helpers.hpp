// Shared helpers for the unit suites: deterministic random fills and
// relative-error comparison.
#pragma once

#include <cmath>
#include <random>

#include "tomoreg/field.hpp"
#include "tomoreg/volume.hpp"

namespace testutil {

inline double rel_err(double got, double want) {
    const double denom = std::max(std::abs(want), 1e-300);
    return std::abs(got - want) / denom;
}

// Error relative to a reference scale (for quantities that may be ~0).
inline double scaled_err(double got, double want, double scale) {
    return std::abs(got - want) / std::max(std::abs(want), scale);
}

inline void fill_random(std::vector<double>& v, std::mt19937_64& rng, double lo = -1.0,
                        double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& x : v) x = dist(rng);
}

inline tomoreg::Volume3D random_volume(std::array<int, 3> dims, tomoreg::Vec3 spacing,
                                       tomoreg::Vec3 origin, std::uint64_t seed,
                                       double lo = -1.0, double hi = 1.0) {
    tomoreg::Volume3D v(dims, spacing, origin);
    std::mt19937_64 rng(seed);
    fill_random(v.data, rng, lo, hi);
    return v;
}

inline tomoreg::VectorField3 random_field(std::array<int, 3> dims, tomoreg::Vec3 spacing,
                                          tomoreg::Vec3 origin, std::uint64_t seed,
                                          double lo = -1.0, double hi = 1.0) {
    tomoreg::VectorField3 f(dims, spacing, origin);
    std::mt19937_64 rng(seed);
    fill_random(f.data, rng, lo, hi);
    return f;
}

}  // namespace testutil
