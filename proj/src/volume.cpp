#include "tomoreg/volume.hpp"

#include <algorithm>
#include <numeric>

namespace tomoreg {

double Volume3D::min_value() const {
    return data.empty() ? 0.0 : *std::min_element(data.begin(), data.end());
}
double Volume3D::max_value() const {
    return data.empty() ? 0.0 : *std::max_element(data.begin(), data.end());
}
double Volume3D::sum() const { return std::accumulate(data.begin(), data.end(), 0.0); }

double Image2D::min_value() const {
    return data.empty() ? 0.0 : *std::min_element(data.begin(), data.end());
}
double Image2D::max_value() const {
    return data.empty() ? 0.0 : *std::max_element(data.begin(), data.end());
}

namespace {

struct Corners {
    // Base voxel and fractional offsets of q. Corners falling outside the
    // grid read as zero and receive no scatter.
    int i0, j0, k0;
    double fx, fy, fz;
};

inline Corners decompose(const Vec3& q) {
    const double xf = std::floor(q.x), yf = std::floor(q.y), zf = std::floor(q.z);
    return {static_cast<int>(xf), static_cast<int>(yf), static_cast<int>(zf),
            q.x - xf, q.y - yf, q.z - zf};
}

inline bool corner_in(const Volume3D& v, int i, int j, int k) {
    return i >= 0 && j >= 0 && k >= 0 && i < v.dims[0] && j < v.dims[1] && k < v.dims[2];
}

}  // namespace

double trilinear_sample(const Volume3D& v, const Vec3& q) {
    const Corners c = decompose(q);
    // Entirely outside the padded support.
    if (c.i0 < -1 || c.j0 < -1 || c.k0 < -1 ||
        c.i0 >= v.dims[0] || c.j0 >= v.dims[1] || c.k0 >= v.dims[2])
        return 0.0;
    const double wx[2] = {1.0 - c.fx, c.fx};
    const double wy[2] = {1.0 - c.fy, c.fy};
    const double wz[2] = {1.0 - c.fz, c.fz};
    double s = 0.0;
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                const int i = c.i0 + di, j = c.j0 + dj, k = c.k0 + dk;
                if (!corner_in(v, i, j, k)) continue;
                s += wx[di] * wy[dj] * wz[dk] * v.data[v.index(i, j, k)];
            }
    return s;
}

Vec3 trilinear_sample_grad(const Volume3D& v, const Vec3& q) {
    const Corners c = decompose(q);
    if (c.i0 < -1 || c.j0 < -1 || c.k0 < -1 ||
        c.i0 >= v.dims[0] || c.j0 >= v.dims[1] || c.k0 >= v.dims[2])
        return {};
    const double wx[2] = {1.0 - c.fx, c.fx};
    const double wy[2] = {1.0 - c.fy, c.fy};
    const double wz[2] = {1.0 - c.fz, c.fz};
    const double dx[2] = {-1.0, 1.0};
    Vec3 g;
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                const int i = c.i0 + di, j = c.j0 + dj, k = c.k0 + dk;
                if (!corner_in(v, i, j, k)) continue;
                const double val = v.data[v.index(i, j, k)];
                g.x += dx[di] * wy[dj] * wz[dk] * val;
                g.y += wx[di] * dx[dj] * wz[dk] * val;
                g.z += wx[di] * wy[dj] * dx[dk] * val;
            }
    return g;
}

TrilinearVjp trilinear_sample_vjp(const Volume3D& v, const Vec3& q, double upstream) {
    TrilinearVjp out;
    const Corners c = decompose(q);
    if (c.i0 < -1 || c.j0 < -1 || c.k0 < -1 ||
        c.i0 >= v.dims[0] || c.j0 >= v.dims[1] || c.k0 >= v.dims[2])
        return out;
    const double wx[2] = {1.0 - c.fx, c.fx};
    const double wy[2] = {1.0 - c.fy, c.fy};
    const double wz[2] = {1.0 - c.fz, c.fz};
    const double dx[2] = {-1.0, 1.0};
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                const int i = c.i0 + di, j = c.j0 + dj, k = c.k0 + dk;
                if (!corner_in(v, i, j, k)) continue;
                const double val = v.data[v.index(i, j, k)];
                out.corner_index[out.n_corners] = v.index(i, j, k);
                out.corner_grad[out.n_corners] = upstream * wx[di] * wy[dj] * wz[dk];
                ++out.n_corners;
                out.q_grad.x += upstream * dx[di] * wy[dj] * wz[dk] * val;
                out.q_grad.y += upstream * wx[di] * dx[dj] * wz[dk] * val;
                out.q_grad.z += upstream * wx[di] * wy[dj] * dx[dk] * val;
            }
    return out;
}

void trilinear_scatter(Volume3D& grad, const Vec3& q, double upstream) {
    const Corners c = decompose(q);
    if (c.i0 < -1 || c.j0 < -1 || c.k0 < -1 ||
        c.i0 >= grad.dims[0] || c.j0 >= grad.dims[1] || c.k0 >= grad.dims[2])
        return;
    const double wx[2] = {1.0 - c.fx, c.fx};
    const double wy[2] = {1.0 - c.fy, c.fy};
    const double wz[2] = {1.0 - c.fz, c.fz};
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                const int i = c.i0 + di, j = c.j0 + dj, k = c.k0 + dk;
                if (!corner_in(grad, i, j, k)) continue;
                grad.data[grad.index(i, j, k)] += upstream * wx[di] * wy[dj] * wz[dk];
            }
}

}  // namespace tomoreg
