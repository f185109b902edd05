// Deformation models: dense affine maps, trilinear warping, the
// multi-Gaussian smoothing kernel, and geodesic shooting (EPDiff plus
// semi-Lagrangian map advection) with hand-written adjoints for every step.
#pragma once

#include <array>
#include <vector>

#include "tomoreg/field.hpp"
#include "tomoreg/vec.hpp"
#include "tomoreg/volume.hpp"

namespace tomoreg {

// phi(x) = A x + b, parameterized by row-major A followed by b.
struct AffineParams {
    Mat3 A = Mat3::identity();
    Vec3 b;

    static constexpr int kCount = 12;
    std::array<double, kCount> flatten() const;
    static AffineParams from_flat(const double* p);

    Vec3 apply(const Vec3& x) const { return A * x + b; }
};

// Dense map with map(x) = A x + b at every grid point.
DeformationMap affine_to_map(const AffineParams& p, const std::array<int, 3>& dims,
                             const Vec3& spacing, const Vec3& origin);

// Pull a map-space gradient back onto the affine parameters:
// A_bar = sum_x map_bar(x) x^T, b_bar = sum_x map_bar(x).
struct AffineGrad {
    Mat3 A = Mat3::diag(0.0, 0.0, 0.0);
    Vec3 b;
    std::array<double, AffineParams::kCount> flatten() const;
};
AffineGrad affine_vjp(const VectorField3& map_bar);

// out(x) = vol(map(x)), trilinear, zero outside the volume. Output lives on
// the map grid.
Volume3D warp(const Volume3D& vol, const DeformationMap& map);

struct WarpVjp {
    Volume3D vol_bar;
    VectorField3 map_bar;
};
WarpVjp warp_vjp(const Volume3D& vol, const DeformationMap& map, const Volume3D& upstream);

// K = sum_g weights[g] * Gaussian(sigmas[g]); applied per channel with
// separable correlation and zero padding. Symmetric positive definite.
// Sigmas must be strictly increasing and weights positive, summing to 1.
struct MultiGaussianKernel {
    std::vector<double> sigmas_mm;
    std::vector<double> weights;
    void validate() const;
};

// Defaults: sigmas (0.05, 0.10, 0.20) x shortest volume extent, weights
// (0.2, 0.3, 0.5).
MultiGaussianKernel default_kernel(const Volume3D& vol);

VectorField3 kernel_apply(const MultiGaussianKernel& k, const VectorField3& m);

// E(theta) = sum_x <theta(x), (K theta)(x)> * voxel_volume. If grad_out is
// non-null it receives dE/dtheta = 2 * voxel_volume * (K theta).
double lddmm_regularizer(const MultiGaussianKernel& k, const VectorField3& theta,
                         VectorField3* grad_out = nullptr);

// One explicit Euler step of EPDiff:
// m' = m - dt * (div(v) m + (Dv)^T m + (Dm) v), central differences.
VectorField3 epdiff_step(const VectorField3& m, const VectorField3& v, double dt);

struct EpdiffVjp {
    VectorField3 m_bar;
    VectorField3 v_bar;
};
EpdiffVjp epdiff_step_vjp(const VectorField3& m, const VectorField3& v, double dt,
                          const VectorField3& upstream);

// Semi-Lagrangian advection step map'(x) = map(x - dt v(x)). The map is
// interpolated through its displacement from identity with clamped-edge
// sampling, so advecting the identity by v = 0 returns the identity exactly.
DeformationMap advect_map(const DeformationMap& map, const VectorField3& v, double dt);

struct AdvectVjp {
    VectorField3 map_bar;
    VectorField3 v_bar;
};
AdvectVjp advect_map_vjp(const DeformationMap& map, const VectorField3& v, double dt,
                         const VectorField3& upstream);

// Geodesic shooting: m(0) = theta, per step v = K m, map <- advect(map, v),
// m <- epdiff_step(m, v), with dt = 1 / num_timesteps. map(0) is the
// identity unless an initial map (e.g. an affine pre-registration) is given;
// the initial map is treated as a constant. The tape stores the per-step
// inputs needed by the reverse pass.
struct ShootingStep {
    VectorField3 m;
    VectorField3 v;
    DeformationMap map;
};
struct ShootingTape {
    double dt = 0.0;
    std::vector<ShootingStep> steps;
};
struct ShootingResult {
    DeformationMap map;
    ShootingTape tape;
};
ShootingResult integrate_shooting(const VectorField3& theta, const MultiGaussianKernel& kernel,
                                  int num_timesteps, const DeformationMap* initial_map = nullptr);

// Reverse pass through the tape: gradient of a scalar loss w.r.t. theta
// given its gradient w.r.t. the final map.
VectorField3 shooting_vjp(const ShootingTape& tape, const MultiGaussianKernel& kernel,
                          const VectorField3& map_bar);

// det(D map) per voxel, central differences (one-sided at the boundary).
Volume3D jacobian_determinant(const DeformationMap& map);

}  // namespace tomoreg
