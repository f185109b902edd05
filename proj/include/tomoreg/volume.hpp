// Scalar voxel/pixel containers and trilinear interpolation with adjoints.
//
// Conventions used throughout the library:
//  - World coordinates are millimetres. The receiver plane of the scan
//    geometry is the canonical world frame: receiver centre at the origin,
//    plane normal +z.
//  - Volume data is stored x-fastest: index = i + nx*(j + ny*k).
//  - `origin` is the world position of the centre of voxel (0,0,0).
//  - Sampling outside the grid reads zero (zero-padding boundary).
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tomoreg/vec.hpp"

namespace tomoreg {

struct Volume3D {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 spacing{1, 1, 1};
    Vec3 origin{0, 0, 0};
    std::vector<double> data;

    Volume3D() = default;
    Volume3D(std::array<int, 3> d, Vec3 sp, Vec3 og, double fill = 0.0)
        : dims(d), spacing(sp), origin(og) {
        if (d[0] < 1 || d[1] < 1 || d[2] < 1)
            throw std::invalid_argument("Volume3D: dims must be >= 1 in every axis");
        if (!(sp.x > 0 && sp.y > 0 && sp.z > 0))
            throw std::invalid_argument("Volume3D: spacing must be > 0 in every axis");
        data.assign(voxel_count(), fill);
    }

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    double& at(int i, int j, int k) { return data[index(i, j, k)]; }
    double at(int i, int j, int k) const { return data[index(i, j, k)]; }

    bool same_grid(const Volume3D& o) const {
        return dims == o.dims &&
               spacing.x == o.spacing.x && spacing.y == o.spacing.y && spacing.z == o.spacing.z &&
               origin.x == o.origin.x && origin.y == o.origin.y && origin.z == o.origin.z;
    }

    double voxel_volume() const { return spacing.x * spacing.y * spacing.z; }

    Vec3 voxel_to_world(const Vec3& q) const { return origin + q.cwise_mul(spacing); }
    Vec3 world_to_voxel(const Vec3& p) const { return (p - origin).cwise_div(spacing); }
    Vec3 voxel_center(int i, int j, int k) const {
        return voxel_to_world(Vec3(i, j, k));
    }

    // World position of the first / last voxel centre.
    Vec3 world_min() const { return origin; }
    Vec3 world_max() const {
        return voxel_to_world(Vec3(dims[0] - 1, dims[1] - 1, dims[2] - 1));
    }

    double min_value() const;
    double max_value() const;
    double sum() const;
};

// Grid description without payload, e.g. the target grid of a
// reconstruction before any data exists.
struct VolumeGrid {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 spacing{1, 1, 1};
    Vec3 origin{0, 0, 0};

    Volume3D make(double fill = 0.0) const { return Volume3D(dims, spacing, origin, fill); }
};

struct Image2D {
    int nw = 0, nh = 0;          // pixels
    double pw = 1.0, ph = 1.0;   // mm / pixel
    std::vector<double> data;    // w-fastest: index = iw + nw*ih

    Image2D() = default;
    Image2D(int w, int h, double sw, double sh, double fill = 0.0)
        : nw(w), nh(h), pw(sw), ph(sh) {
        if (w < 1 || h < 1) throw std::invalid_argument("Image2D: dims must be >= 1");
        if (!(sw > 0 && sh > 0)) throw std::invalid_argument("Image2D: spacing must be > 0");
        data.assign(static_cast<std::size_t>(w) * h, fill);
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(nw) * nh; }
    std::size_t index(int iw, int ih) const {
        return static_cast<std::size_t>(iw) + static_cast<std::size_t>(nw) * ih;
    }
    double& at(int iw, int ih) { return data[index(iw, ih)]; }
    double at(int iw, int ih) const { return data[index(iw, ih)]; }

    bool same_shape(const Image2D& o) const { return nw == o.nw && nh == o.nh; }

    double min_value() const;
    double max_value() const;
};

// Trilinear interpolation at continuous voxel coordinate q; zero outside.
double trilinear_sample(const Volume3D& v, const Vec3& q);

// Spatial gradient of trilinear_sample w.r.t. q (voxel units).
Vec3 trilinear_sample_grad(const Volume3D& v, const Vec3& q);

// Adjoint of trilinear_sample: distributes upstream over the (up to) eight
// corner voxels, and reports the gradient w.r.t. q.
struct TrilinearVjp {
    int n_corners = 0;
    std::array<std::size_t, 8> corner_index{};
    std::array<double, 8> corner_grad{};
    Vec3 q_grad;  // upstream * d(sample)/dq, voxel units
};
TrilinearVjp trilinear_sample_vjp(const Volume3D& v, const Vec3& q, double upstream);

// Fast-path scatter used by hot adjoint loops: grad.data[corner] += w*upstream.
void trilinear_scatter(Volume3D& grad, const Vec3& q, double upstream);

}  // namespace tomoreg
