// Per-voxel 3-vector fields on a volume grid: momentum, velocity, and
// deformation maps. A DeformationMap stores the map inverse (target grid ->
// source world coordinates) as absolute world positions per grid point.
#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tomoreg/vec.hpp"
#include "tomoreg/volume.hpp"

namespace tomoreg {

struct VectorField3 {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 spacing{1, 1, 1};
    Vec3 origin{0, 0, 0};
    // Channel-planar storage: channel c occupies [c*n, (c+1)*n), x-fastest.
    std::vector<double> data;

    VectorField3() = default;
    VectorField3(std::array<int, 3> d, Vec3 sp, Vec3 og, double fill = 0.0)
        : dims(d), spacing(sp), origin(og) {
        if (d[0] < 1 || d[1] < 1 || d[2] < 1)
            throw std::invalid_argument("VectorField3: dims must be >= 1 in every axis");
        if (!(sp.x > 0 && sp.y > 0 && sp.z > 0))
            throw std::invalid_argument("VectorField3: spacing must be > 0");
        data.assign(3 * voxel_count(), fill);
    }
    static VectorField3 zeros_like(const Volume3D& v) {
        return VectorField3(v.dims, v.spacing, v.origin);
    }
    static VectorField3 zeros_like(const VectorField3& f) {
        return VectorField3(f.dims, f.spacing, f.origin);
    }

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    double* channel(int c) { return data.data() + static_cast<std::size_t>(c) * voxel_count(); }
    const double* channel(int c) const {
        return data.data() + static_cast<std::size_t>(c) * voxel_count();
    }

    Vec3 at(std::size_t idx) const {
        const std::size_t n = voxel_count();
        return {data[idx], data[n + idx], data[2 * n + idx]};
    }
    Vec3 at(int i, int j, int k) const { return at(index(i, j, k)); }
    void set(std::size_t idx, const Vec3& v) {
        const std::size_t n = voxel_count();
        data[idx] = v.x;
        data[n + idx] = v.y;
        data[2 * n + idx] = v.z;
    }
    void add(std::size_t idx, const Vec3& v) {
        const std::size_t n = voxel_count();
        data[idx] += v.x;
        data[n + idx] += v.y;
        data[2 * n + idx] += v.z;
    }

    bool same_grid(const VectorField3& o) const {
        return dims == o.dims &&
               spacing.x == o.spacing.x && spacing.y == o.spacing.y && spacing.z == o.spacing.z &&
               origin.x == o.origin.x && origin.y == o.origin.y && origin.z == o.origin.z;
    }
    bool same_grid(const Volume3D& o) const {
        return dims == o.dims &&
               spacing.x == o.spacing.x && spacing.y == o.spacing.y && spacing.z == o.spacing.z &&
               origin.x == o.origin.x && origin.y == o.origin.y && origin.z == o.origin.z;
    }

    Vec3 voxel_to_world(const Vec3& q) const { return origin + q.cwise_mul(spacing); }
    Vec3 world_to_voxel(const Vec3& p) const { return (p - origin).cwise_div(spacing); }
    double voxel_volume() const { return spacing.x * spacing.y * spacing.z; }

    double max_abs() const;
};

using DeformationMap = VectorField3;

// map(x) = x for every grid point, stored as world coordinates.
DeformationMap identity_map(std::array<int, 3> dims, Vec3 spacing, Vec3 origin);
inline DeformationMap identity_map_like(const Volume3D& v) {
    return identity_map(v.dims, v.spacing, v.origin);
}

// y += a*x (grids must match).
void field_axpy(double a, const VectorField3& x, VectorField3& y);
// Plain elementwise dot product (no voxel volume factor); deterministic
// serial accumulation.
double field_dot(const VectorField3& a, const VectorField3& b);

}  // namespace tomoreg
