#include "tomoreg/fieldops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tomoreg {

namespace {

// Iterate all 1D lines running along `axis`; cb(base_offset) is invoked with
// the flat offset of the first element of each line.
template <typename Fn>
void for_each_line(const GridView& g, int axis, Fn&& cb) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) collapse(2)
#endif
    for (int u = 0; u < g.dims[a1]; ++u)
        for (int v = 0; v < g.dims[a2]; ++v)
            cb(static_cast<std::ptrdiff_t>(u) * g.strides[a1] +
               static_cast<std::ptrdiff_t>(v) * g.strides[a2]);
}

}  // namespace

void central_derivative(const double* in, double* out, const GridView& g, int axis) {
    const int n = g.dims[axis];
    const std::ptrdiff_t s = g.strides[axis];
    const double h = g.spacing[axis];
    for_each_line(g, axis, [&](std::ptrdiff_t base) {
        const double* f = in + base;
        double* o = out + base;
        if (n == 1) {
            o[0] = 0.0;
            return;
        }
        o[0] = (f[s] - f[0]) / h;
        for (int i = 1; i < n - 1; ++i)
            o[static_cast<std::ptrdiff_t>(i) * s] =
                (f[(i + 1) * s] - f[(i - 1) * s]) / (2.0 * h);
        o[static_cast<std::ptrdiff_t>(n - 1) * s] = (f[(n - 1) * s] - f[(n - 2) * s]) / h;
    });
}

void central_derivative_adjoint(const double* upstream, double* out_accum,
                                const GridView& g, int axis) {
    const int n = g.dims[axis];
    const std::ptrdiff_t s = g.strides[axis];
    const double h = g.spacing[axis];
    for_each_line(g, axis, [&](std::ptrdiff_t base) {
        const double* u = upstream + base;
        double* o = out_accum + base;
        if (n == 1) return;
        // Scatter the transpose of the forward stencil row by row.
        o[0] -= u[0] / h;
        o[s] += u[0] / h;
        for (int i = 1; i < n - 1; ++i) {
            const double c = u[static_cast<std::ptrdiff_t>(i) * s] / (2.0 * h);
            o[(i - 1) * s] -= c;
            o[(i + 1) * s] += c;
        }
        const double c = u[static_cast<std::ptrdiff_t>(n - 1) * s] / h;
        o[(n - 2) * s] -= c;
        o[(n - 1) * s] += c;
    });
}

void forward_derivative(const double* in, double* out, const GridView& g, int axis) {
    const int n = g.dims[axis];
    const std::ptrdiff_t s = g.strides[axis];
    const double h = g.spacing[axis];
    for_each_line(g, axis, [&](std::ptrdiff_t base) {
        const double* f = in + base;
        double* o = out + base;
        for (int i = 0; i < n - 1; ++i)
            o[static_cast<std::ptrdiff_t>(i) * s] = (f[(i + 1) * s] - f[i * s]) / h;
        o[static_cast<std::ptrdiff_t>(n - 1) * s] = 0.0;
    });
}

void forward_derivative_adjoint(const double* upstream, double* out_accum,
                                const GridView& g, int axis) {
    const int n = g.dims[axis];
    const std::ptrdiff_t s = g.strides[axis];
    const double h = g.spacing[axis];
    for_each_line(g, axis, [&](std::ptrdiff_t base) {
        const double* u = upstream + base;
        double* o = out_accum + base;
        for (int i = 0; i < n - 1; ++i) {
            const double c = u[static_cast<std::ptrdiff_t>(i) * s] / h;
            o[static_cast<std::ptrdiff_t>(i) * s] -= c;
            o[(i + 1) * s] += c;
        }
    });
}

std::vector<double> gaussian_taps(double sigma_mm, double spacing_mm) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_mm / spacing_mm)));
    std::vector<double> taps(2 * radius + 1);
    const double norm = spacing_mm / (sigma_mm * std::sqrt(2.0 * std::numbers::pi));
    for (int i = -radius; i <= radius; ++i) {
        const double x = i * spacing_mm;
        taps[i + radius] = norm * std::exp(-0.5 * x * x / (sigma_mm * sigma_mm));
    }
    return taps;
}

void blur_axis(const double* in, double* out, const GridView& g, int axis,
               const std::vector<double>& taps) {
    const int n = g.dims[axis];
    const std::ptrdiff_t s = g.strides[axis];
    const int radius = (static_cast<int>(taps.size()) - 1) / 2;
    for_each_line(g, axis, [&](std::ptrdiff_t base) {
        const double* f = in + base;
        double* o = out + base;
        for (int i = 0; i < n; ++i) {
            const int lo = std::max(-radius, -i);
            const int hi = std::min(radius, n - 1 - i);
            double acc = 0.0;
            for (int t = lo; t <= hi; ++t)
                acc += taps[t + radius] * f[(i + t) * s];
            o[static_cast<std::ptrdiff_t>(i) * s] = acc;
        }
    });
}

void gaussian_blur(const double* in, double* out, const GridView& g, double sigma_mm) {
    std::vector<double> tmp(g.count());
    const auto tx = gaussian_taps(sigma_mm, g.spacing[0]);
    const auto ty = gaussian_taps(sigma_mm, g.spacing[1]);
    blur_axis(in, out, g, 0, tx);
    blur_axis(out, tmp.data(), g, 1, ty);
    if (g.dims[2] > 1) {
        const auto tz = gaussian_taps(sigma_mm, g.spacing[2]);
        blur_axis(tmp.data(), out, g, 2, tz);
    } else {
        std::copy(tmp.begin(), tmp.end(), out);
    }
}

}  // namespace tomoreg
