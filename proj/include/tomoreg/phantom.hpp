// Synthetic data generation: additive geometric phantoms with antialiased
// boundaries and landmark annotations, plus analytically invertible
// synthetic deformations for ground-truth registration experiments.
#pragma once

#include <cstdint>
#include <vector>

#include "tomoreg/field.hpp"
#include "tomoreg/landmarks.hpp"
#include "tomoreg/vec.hpp"
#include "tomoreg/volume.hpp"

namespace tomoreg {

enum class PrimitiveKind { kEllipsoid, kBox, kBead };

struct PhantomPrimitive {
    PrimitiveKind kind = PrimitiveKind::kEllipsoid;
    Vec3 center;       // world mm
    Vec3 radii;        // semi-axes (ellipsoid), half extents (box), or all
                       // equal to the bead radius
    double intensity = 1.0;  // added inside the primitive
};

// Smooth additive background: seeded positive Gaussian blobs.
struct BackgroundSpec {
    int num_blobs = 0;
    double amplitude = 0.0;  // per-blob amplitudes drawn in [amplitude/2, amplitude]
    double sigma_min_mm = 0.0;
    double sigma_max_mm = 0.0;
    std::uint64_t seed = 1;
};

struct PhantomSpec {
    VolumeGrid grid;
    std::vector<PhantomPrimitive> primitives;
    BackgroundSpec background;
};

struct Phantom {
    Volume3D volume;
    LandmarkSet landmarks;
};

// Rasterizes the primitives additively with 2x supersampling (boundary
// antialiasing). Landmarks: every primitive center; ellipsoids and boxes
// additionally contribute their six axis surface / face-center points.
// Throws on primitives extending outside the grid.
Phantom make_phantom(const PhantomSpec& spec);

struct GaussianBump {
    Vec3 center;      // world mm
    Vec3 amplitude;   // peak velocity, mm per unit flow time
    double sigma_mm = 1.0;
};

// A synthetic deformation with an exact inverse. The gaussian-bump kind is
// the time-1 flow of the static velocity field sum_j a_j exp(-|x-c_j|^2 /
// (2 sigma_j^2)); its inverse is the time-1 flow of the negated field.
struct SyntheticDeformation {
    enum class Kind { kTranslation, kRigid, kGaussianBumps };
    Kind kind = Kind::kTranslation;

    Vec3 translation;

    Vec3 rotation_axis{0, 0, 1};
    double rotation_angle_rad = 0.0;
    Vec3 rotation_center;

    std::vector<GaussianBump> bumps;
    int flow_steps = 64;  // RK4 steps for the bump flow
};

// Velocity of the bump field at a point.
Vec3 bump_velocity(const std::vector<GaussianBump>& bumps, const Vec3& p);

// Forward point transport Psi(p) and its inverse.
Vec3 deform_point(const SyntheticDeformation& d, const Vec3& p);
Vec3 deform_point_inverse(const SyntheticDeformation& d, const Vec3& p);

// Enforces the diffeomorphism/resolvability bounds for gaussian bumps:
// sum_j ||a_j|| e^{-1/2} / sigma_j <= 0.9 and sigma_j >= 2 x max spacing.
void validate_deformation(const SyntheticDeformation& d, const Vec3& grid_spacing);

struct DeformedPhantom {
    Volume3D volume;        // vol resampled through the inverse map
    LandmarkSet landmarks;  // forward-transported points
    DeformationMap map;     // ground-truth inverse map on the volume grid
};

DeformedPhantom apply_synthetic_deformation(const Volume3D& vol, const LandmarkSet& landmarks,
                                            const SyntheticDeformation& d);

}  // namespace tomoreg
