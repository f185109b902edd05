// Low-level discrete operators on scalar grids: finite differences with
// exact adjoints, and separable Gaussian filtering. Shared by the transform
// model, the similarity measures, and the reconstruction regularizers.
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "tomoreg/field.hpp"
#include "tomoreg/volume.hpp"

namespace tomoreg {

// Layout descriptor for a scalar grid embedded in a flat array (covers
// Volume3D data, Image2D data, and single channels of a VectorField3).
struct GridView {
    std::array<int, 3> dims{1, 1, 1};
    std::array<std::ptrdiff_t, 3> strides{1, 1, 1};
    std::array<double, 3> spacing{1, 1, 1};

    static GridView of(const Volume3D& v) {
        return {{v.dims[0], v.dims[1], v.dims[2]},
                {1, v.dims[0], static_cast<std::ptrdiff_t>(v.dims[0]) * v.dims[1]},
                {v.spacing.x, v.spacing.y, v.spacing.z}};
    }
    static GridView of(const Image2D& im) {
        return {{im.nw, im.nh, 1}, {1, im.nw, static_cast<std::ptrdiff_t>(im.nw) * im.nh},
                {im.pw, im.ph, 1}};
    }
    static GridView of(const VectorField3& f) {
        return {{f.dims[0], f.dims[1], f.dims[2]},
                {1, f.dims[0], static_cast<std::ptrdiff_t>(f.dims[0]) * f.dims[1]},
                {f.spacing.x, f.spacing.y, f.spacing.z}};
    }
    std::size_t count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
};

// d/dx_axis by central differences, one-sided at the boundary, in world
// units (1/mm). Grids with a single sample along the axis get derivative 0.
void central_derivative(const double* in, double* out, const GridView& g, int axis);

// Exact transpose of central_derivative: out += D^T upstream.
void central_derivative_adjoint(const double* upstream, double* out_accum,
                                const GridView& g, int axis);

// Forward difference (out[i] = (in[i+1]-in[i])/h, zero at the far boundary)
// and its transpose; used by the total-variation term.
void forward_derivative(const double* in, double* out, const GridView& g, int axis);
void forward_derivative_adjoint(const double* upstream, double* out_accum,
                                const GridView& g, int axis);

// Sampled 1D Gaussian, truncated at radius ceil(4*sigma/h), scaled by the
// sample step so the taps sum to ~1 (truncation error < 1e-4 for sigma >= h).
// Taps are the closed-form normal density; they are not renormalized.
std::vector<double> gaussian_taps(double sigma_mm, double spacing_mm);

// Separable correlation with the given taps along one axis, zero padding.
void blur_axis(const double* in, double* out, const GridView& g, int axis,
               const std::vector<double>& taps);

// Full separable 3D Gaussian blur (x, then y, then z), zero padding.
void gaussian_blur(const double* in, double* out, const GridView& g, double sigma_mm);

}  // namespace tomoreg
