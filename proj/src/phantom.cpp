#include "tomoreg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tomoreg/rng.hpp"
#include "tomoreg/transform.hpp"

namespace tomoreg {

namespace {

bool inside_primitive(const PhantomPrimitive& p, const Vec3& x) {
    const Vec3 d = x - p.center;
    switch (p.kind) {
        case PrimitiveKind::kBox:
            return std::abs(d.x) <= p.radii.x && std::abs(d.y) <= p.radii.y &&
                   std::abs(d.z) <= p.radii.z;
        case PrimitiveKind::kEllipsoid:
        case PrimitiveKind::kBead: {
            const Vec3 q = d.cwise_div(p.radii);
            return q.norm2() <= 1.0;
        }
    }
    return false;
}

void check_in_bounds(const PhantomPrimitive& p, const Volume3D& vol) {
    const Vec3 lo = vol.world_min() - vol.spacing * 0.5;
    const Vec3 hi = vol.world_max() + vol.spacing * 0.5;
    const Vec3 pmin = p.center - p.radii;
    const Vec3 pmax = p.center + p.radii;
    if (pmin.x < lo.x || pmin.y < lo.y || pmin.z < lo.z || pmax.x > hi.x || pmax.y > hi.y ||
        pmax.z > hi.z)
        throw std::invalid_argument("make_phantom: primitive extends outside the grid");
}

void append_landmarks(const PhantomPrimitive& p, LandmarkSet& set) {
    set.points.push_back(p.center);
    if (p.kind == PrimitiveKind::kEllipsoid || p.kind == PrimitiveKind::kBox) {
        set.points.push_back(p.center + Vec3(p.radii.x, 0, 0));
        set.points.push_back(p.center - Vec3(p.radii.x, 0, 0));
        set.points.push_back(p.center + Vec3(0, p.radii.y, 0));
        set.points.push_back(p.center - Vec3(0, p.radii.y, 0));
        set.points.push_back(p.center + Vec3(0, 0, p.radii.z));
        set.points.push_back(p.center - Vec3(0, 0, p.radii.z));
    }
}

void rasterize(const PhantomPrimitive& p, Volume3D& vol) {
    if (!(p.radii.x > 0 && p.radii.y > 0 && p.radii.z > 0))
        throw std::invalid_argument("make_phantom: primitive radii must be > 0");
    if (!std::isfinite(p.intensity))
        throw std::invalid_argument("make_phantom: primitive intensity must be finite");
    check_in_bounds(p, vol);

    // Voxel range covering the primitive.
    const Vec3 qmin = vol.world_to_voxel(p.center - p.radii);
    const Vec3 qmax = vol.world_to_voxel(p.center + p.radii);
    const int i0 = std::max(0, static_cast<int>(std::floor(qmin.x)) - 1);
    const int j0 = std::max(0, static_cast<int>(std::floor(qmin.y)) - 1);
    const int k0 = std::max(0, static_cast<int>(std::floor(qmin.z)) - 1);
    const int i1 = std::min(vol.dims[0] - 1, static_cast<int>(std::ceil(qmax.x)) + 1);
    const int j1 = std::min(vol.dims[1] - 1, static_cast<int>(std::ceil(qmax.y)) + 1);
    const int k1 = std::min(vol.dims[2] - 1, static_cast<int>(std::ceil(qmax.z)) + 1);

    // 2x2x2 subsamples at +-1/4 voxel.
    for (int k = k0; k <= k1; ++k)
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                int hits = 0;
                for (int sk = 0; sk < 2; ++sk)
                    for (int sj = 0; sj < 2; ++sj)
                        for (int si = 0; si < 2; ++si) {
                            const Vec3 q{i + (si ? 0.25 : -0.25), j + (sj ? 0.25 : -0.25),
                                         k + (sk ? 0.25 : -0.25)};
                            if (inside_primitive(p, vol.voxel_to_world(q))) ++hits;
                        }
                if (hits) vol.at(i, j, k) += p.intensity * (hits / 8.0);
            }
}

void add_background(const BackgroundSpec& bg, Volume3D& vol) {
    if (bg.num_blobs <= 0) return;
    if (!(bg.amplitude > 0) || !(bg.sigma_min_mm > 0) || !(bg.sigma_max_mm >= bg.sigma_min_mm))
        throw std::invalid_argument("make_phantom: invalid background spec");
    std::mt19937_64 rng(bg.seed);
    const Vec3 lo = vol.world_min();
    const Vec3 hi = vol.world_max();
    for (int b = 0; b < bg.num_blobs; ++b) {
        const Vec3 c{uniform_range(rng, lo.x, hi.x), uniform_range(rng, lo.y, hi.y),
                     uniform_range(rng, lo.z, hi.z)};
        const double amp = uniform_range(rng, 0.5 * bg.amplitude, bg.amplitude);
        const double sigma = uniform_range(rng, bg.sigma_min_mm, bg.sigma_max_mm);
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        for (int k = 0; k < vol.dims[2]; ++k)
            for (int j = 0; j < vol.dims[1]; ++j)
                for (int i = 0; i < vol.dims[0]; ++i) {
                    const Vec3 d = vol.voxel_center(i, j, k) - c;
                    vol.at(i, j, k) += amp * std::exp(-d.norm2() * inv2s2);
                }
    }
}

}  // namespace

Phantom make_phantom(const PhantomSpec& spec) {
    Phantom out{spec.grid.make(0.0), {}};
    for (const auto& p : spec.primitives) {
        rasterize(p, out.volume);
        append_landmarks(p, out.landmarks);
    }
    add_background(spec.background, out.volume);
    return out;
}

Vec3 bump_velocity(const std::vector<GaussianBump>& bumps, const Vec3& p) {
    Vec3 v;
    for (const auto& b : bumps) {
        const double r2 = (p - b.center).norm2();
        v += b.amplitude * std::exp(-r2 / (2.0 * b.sigma_mm * b.sigma_mm));
    }
    return v;
}

namespace {

// Time-1 RK4 flow of the (possibly negated) bump field.
Vec3 flow_point(const std::vector<GaussianBump>& bumps, Vec3 p, int steps, double sign) {
    const double h = sign / steps;
    for (int s = 0; s < steps; ++s) {
        const Vec3 k1 = bump_velocity(bumps, p);
        const Vec3 k2 = bump_velocity(bumps, p + k1 * (h / 2));
        const Vec3 k3 = bump_velocity(bumps, p + k2 * (h / 2));
        const Vec3 k4 = bump_velocity(bumps, p + k3 * h);
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    return p;
}

Mat3 rigid_rotation(const SyntheticDeformation& d) {
    return Mat3::rotation(d.rotation_axis, d.rotation_angle_rad);
}

}  // namespace

Vec3 deform_point(const SyntheticDeformation& d, const Vec3& p) {
    switch (d.kind) {
        case SyntheticDeformation::Kind::kTranslation:
            return p + d.translation;
        case SyntheticDeformation::Kind::kRigid: {
            const Mat3 R = rigid_rotation(d);
            return R * (p - d.rotation_center) + d.rotation_center + d.translation;
        }
        case SyntheticDeformation::Kind::kGaussianBumps:
            return flow_point(d.bumps, p, d.flow_steps, +1.0);
    }
    throw std::logic_error("deform_point: unreachable");
}

Vec3 deform_point_inverse(const SyntheticDeformation& d, const Vec3& p) {
    switch (d.kind) {
        case SyntheticDeformation::Kind::kTranslation:
            return p - d.translation;
        case SyntheticDeformation::Kind::kRigid: {
            const Mat3 R = rigid_rotation(d);
            Vec3 q = p - d.rotation_center - d.translation;
            // R^T (orthonormal inverse).
            return Vec3{R(0, 0) * q.x + R(1, 0) * q.y + R(2, 0) * q.z,
                        R(0, 1) * q.x + R(1, 1) * q.y + R(2, 1) * q.z,
                        R(0, 2) * q.x + R(1, 2) * q.y + R(2, 2) * q.z} +
                   d.rotation_center;
        }
        case SyntheticDeformation::Kind::kGaussianBumps:
            return flow_point(d.bumps, p, d.flow_steps, -1.0);
    }
    throw std::logic_error("deform_point_inverse: unreachable");
}

void validate_deformation(const SyntheticDeformation& d, const Vec3& grid_spacing) {
    if (d.kind != SyntheticDeformation::Kind::kGaussianBumps) return;
    if (d.flow_steps < 1)
        throw std::invalid_argument("synthetic deformation: flow_steps must be >= 1");
    const double max_sp = std::max({grid_spacing.x, grid_spacing.y, grid_spacing.z});
    double lipschitz = 0.0;
    for (const auto& b : d.bumps) {
        if (!(b.sigma_mm > 0))
            throw std::invalid_argument("synthetic deformation: bump sigma must be > 0");
        if (b.sigma_mm < 2.0 * max_sp)
            throw std::invalid_argument(
                "synthetic deformation: bump sigma must be >= 2x the grid spacing");
        lipschitz += b.amplitude.norm() * std::exp(-0.5) / b.sigma_mm;
    }
    if (lipschitz > 0.9)
        throw std::invalid_argument(
            "synthetic deformation: bump amplitudes exceed the diffeomorphism bound "
            "(sum ||a|| e^{-1/2} / sigma must be <= 0.9)");
}

DeformedPhantom apply_synthetic_deformation(const Volume3D& vol, const LandmarkSet& landmarks,
                                            const SyntheticDeformation& d) {
    validate_deformation(d, vol.spacing);

    DeformedPhantom out;
    out.map = VectorField3::zeros_like(vol);
    const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2];
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const Vec3 x = vol.voxel_center(i, j, k);
                out.map.set(out.map.index(i, j, k), deform_point_inverse(d, x));
            }
    out.volume = warp(vol, out.map);
    out.landmarks.points.reserve(landmarks.size());
    for (const Vec3& p : landmarks.points) out.landmarks.points.push_back(deform_point(d, p));
    return out;
}

}  // namespace tomoreg
