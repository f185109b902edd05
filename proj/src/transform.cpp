#include "tomoreg/transform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tomoreg/fieldops.hpp"

namespace tomoreg {

std::array<double, AffineParams::kCount> AffineParams::flatten() const {
    std::array<double, kCount> out{};
    for (int i = 0; i < 9; ++i) out[i] = A.m[i];
    out[9] = b.x;
    out[10] = b.y;
    out[11] = b.z;
    return out;
}

AffineParams AffineParams::from_flat(const double* p) {
    AffineParams a;
    for (int i = 0; i < 9; ++i) a.A.m[i] = p[i];
    a.b = {p[9], p[10], p[11]};
    return a;
}

std::array<double, AffineParams::kCount> AffineGrad::flatten() const {
    std::array<double, AffineParams::kCount> out{};
    for (int i = 0; i < 9; ++i) out[i] = A.m[i];
    out[9] = b.x;
    out[10] = b.y;
    out[11] = b.z;
    return out;
}

DeformationMap affine_to_map(const AffineParams& p, const std::array<int, 3>& dims,
                             const Vec3& spacing, const Vec3& origin) {
    if (std::abs(p.A.det()) <= 1e-12)
        throw std::invalid_argument("affine_to_map: singular matrix");
    DeformationMap map(dims, spacing, origin);
    const std::size_t n = map.voxel_count();
    double* cx = map.channel(0);
    double* cy = map.channel(1);
    double* cz = map.channel(2);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                const Vec3 x = map.voxel_to_world(Vec3(i, j, k));
                const Vec3 y = p.apply(x);
                const std::size_t idx = map.index(i, j, k);
                cx[idx] = y.x;
                cy[idx] = y.y;
                cz[idx] = y.z;
            }
    (void)n;
    return map;
}

AffineGrad affine_vjp(const VectorField3& map_bar) {
    AffineGrad g;
    for (int k = 0; k < map_bar.dims[2]; ++k)
        for (int j = 0; j < map_bar.dims[1]; ++j)
            for (int i = 0; i < map_bar.dims[0]; ++i) {
                const Vec3 x = map_bar.voxel_to_world(Vec3(i, j, k));
                const Vec3 yb = map_bar.at(map_bar.index(i, j, k));
                g.A(0, 0) += yb.x * x.x;
                g.A(0, 1) += yb.x * x.y;
                g.A(0, 2) += yb.x * x.z;
                g.A(1, 0) += yb.y * x.x;
                g.A(1, 1) += yb.y * x.y;
                g.A(1, 2) += yb.y * x.z;
                g.A(2, 0) += yb.z * x.x;
                g.A(2, 1) += yb.z * x.y;
                g.A(2, 2) += yb.z * x.z;
                g.b += yb;
            }
    return g;
}

Volume3D warp(const Volume3D& vol, const DeformationMap& map) {
    Volume3D out(map.dims, map.spacing, map.origin, 0.0);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.voxel_count());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t idx = 0; idx < n; ++idx)
        out.data[idx] = trilinear_sample(vol, vol.world_to_voxel(map.at(idx)));
    return out;
}

WarpVjp warp_vjp(const Volume3D& vol, const DeformationMap& map, const Volume3D& upstream) {
    if (!map.same_grid(upstream))
        throw std::invalid_argument("warp_vjp: upstream grid does not match the map grid");
    WarpVjp out{Volume3D(vol.dims, vol.spacing, vol.origin, 0.0), VectorField3::zeros_like(map)};
    const std::size_t n = map.voxel_count();
    const Vec3 inv_sp{1.0 / vol.spacing.x, 1.0 / vol.spacing.y, 1.0 / vol.spacing.z};
    for (std::size_t idx = 0; idx < n; ++idx) {
        const double u = upstream.data[idx];
        if (u == 0.0) continue;
        const Vec3 q = vol.world_to_voxel(map.at(idx));
        const TrilinearVjp v = trilinear_sample_vjp(vol, q, u);
        for (int c = 0; c < v.n_corners; ++c) out.vol_bar.data[v.corner_index[c]] += v.corner_grad[c];
        out.map_bar.set(idx, v.q_grad.cwise_mul(inv_sp));
    }
    return out;
}

void MultiGaussianKernel::validate() const {
    if (sigmas_mm.empty() || sigmas_mm.size() != weights.size())
        throw std::invalid_argument("kernel: sigmas and weights must be non-empty, same length");
    double wsum = 0.0;
    for (std::size_t i = 0; i < sigmas_mm.size(); ++i) {
        const double s = sigmas_mm[i];
        const double w = weights[i];
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("kernel: sigmas must be finite and > 0");
        if (i > 0 && !(s > sigmas_mm[i - 1]))
            throw std::invalid_argument("kernel: sigmas must be strictly increasing");
        if (!(w > 0.0) || !std::isfinite(w))
            throw std::invalid_argument("kernel: weights must be finite and > 0");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("kernel: weights must sum to 1");
}

MultiGaussianKernel default_kernel(const Volume3D& vol) {
    const double ex = vol.dims[0] * vol.spacing.x;
    const double ey = vol.dims[1] * vol.spacing.y;
    const double ez = vol.dims[2] * vol.spacing.z;
    const double shortest = std::min({ex, ey, ez});
    return {{0.05 * shortest, 0.10 * shortest, 0.20 * shortest}, {0.2, 0.3, 0.5}};
}

VectorField3 kernel_apply(const MultiGaussianKernel& k, const VectorField3& m) {
    k.validate();
    VectorField3 out = VectorField3::zeros_like(m);
    const GridView g = GridView::of(m);
    const std::size_t n = m.voxel_count();
    std::vector<double> tmp(n);
    for (int c = 0; c < 3; ++c) {
        const double* in = m.channel(c);
        double* oc = out.channel(c);
        for (std::size_t gi = 0; gi < k.sigmas_mm.size(); ++gi) {
            gaussian_blur(in, tmp.data(), g, k.sigmas_mm[gi]);
            const double w = k.weights[gi];
            for (std::size_t i = 0; i < n; ++i) oc[i] += w * tmp[i];
        }
    }
    return out;
}

double lddmm_regularizer(const MultiGaussianKernel& k, const VectorField3& theta,
                         VectorField3* grad_out) {
    VectorField3 kt = kernel_apply(k, theta);
    const double vv = theta.voxel_volume();
    const double value = field_dot(theta, kt) * vv;
    if (grad_out) {
        for (double& x : kt.data) x *= 2.0 * vv;
        *grad_out = std::move(kt);
    }
    return value;
}

namespace {

// 3x3 block of per-axis central derivatives of a vector field's channels.
// d[c][a] holds d(channel c)/d(x_a) in world units.
struct ChannelDerivs {
    std::array<std::array<std::vector<double>, 3>, 3> d;
};

ChannelDerivs all_derivatives(const VectorField3& f) {
    ChannelDerivs out;
    const GridView g = GridView::of(f);
    const std::size_t n = f.voxel_count();
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a) {
            out.d[c][a].resize(n);
            central_derivative(f.channel(c), out.d[c][a].data(), g, a);
        }
    return out;
}

}  // namespace

VectorField3 epdiff_step(const VectorField3& m, const VectorField3& v, double dt) {
    if (!m.same_grid(v)) throw std::invalid_argument("epdiff_step: grids do not match");
    const std::size_t n = m.voxel_count();
    const ChannelDerivs dv = all_derivatives(v);
    const ChannelDerivs dm = all_derivatives(m);

    VectorField3 out = VectorField3::zeros_like(m);
    for (int c = 0; c < 3; ++c) {
        const double* mc = m.channel(c);
        double* oc = out.channel(c);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            const double div_v = dv.d[0][0][i] + dv.d[1][1][i] + dv.d[2][2][i];
            double acc = div_v * mc[i];
            for (int a = 0; a < 3; ++a) {
                acc += dv.d[a][c][i] * m.channel(a)[i];   // (Dv)^T m
                acc += dm.d[c][a][i] * v.channel(a)[i];   // (Dm) v
            }
            oc[i] = mc[i] - dt * acc;
        }
    }
    return out;
}

EpdiffVjp epdiff_step_vjp(const VectorField3& m, const VectorField3& v, double dt,
                          const VectorField3& upstream) {
    if (!m.same_grid(v) || !m.same_grid(upstream))
        throw std::invalid_argument("epdiff_step_vjp: grids do not match");
    const std::size_t n = m.voxel_count();
    const GridView g = GridView::of(m);
    const ChannelDerivs dv = all_derivatives(v);
    const ChannelDerivs dm = all_derivatives(m);

    EpdiffVjp out{VectorField3::zeros_like(m), VectorField3::zeros_like(m)};

    // Identity term plus the three pointwise pieces that need no adjoints.
    std::vector<double> div_v(n);
    for (std::size_t i = 0; i < n; ++i)
        div_v[i] = dv.d[0][0][i] + dv.d[1][1][i] + dv.d[2][2][i];

    for (int c = 0; c < 3; ++c) {
        const double* uc = upstream.channel(c);
        double* mbc = out.m_bar.channel(c);
        for (std::size_t i = 0; i < n; ++i) mbc[i] = uc[i] - dt * div_v[i] * uc[i];
    }
    // (Dv)^T m term, w.r.t. m: m_bar_a -= dt * sum_c d(v_a)/d(x_c) u_c.
    // (Dm) v term, w.r.t. v:   v_bar_a -= dt * sum_c d(m_c)/d(x_a) u_c.
    for (int a = 0; a < 3; ++a) {
        double* mba = out.m_bar.channel(a);
        double* vba = out.v_bar.channel(a);
        for (int c = 0; c < 3; ++c) {
            const double* uc = upstream.channel(c);
            const double* dva_c = dv.d[a][c].data();
            const double* dmc_a = dm.d[c][a].data();
            for (std::size_t i = 0; i < n; ++i) {
                mba[i] -= dt * dva_c[i] * uc[i];
                vba[i] -= dt * dmc_a[i] * uc[i];
            }
        }
    }

    // div(v) m term, w.r.t. v: v_bar_a += D_a^T (-dt * sum_c m_c u_c).
    std::vector<double> buf(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) s += m.channel(c)[i] * upstream.channel(c)[i];
        buf[i] = -dt * s;
    }
    for (int a = 0; a < 3; ++a) central_derivative_adjoint(buf.data(), out.v_bar.channel(a), g, a);

    // (Dv)^T m term, w.r.t. v: v_bar_a += D_c^T (-dt * m_a u_c).
    // (Dm) v term, w.r.t. m:   m_bar_c += D_a^T (-dt * v_a u_c).
    for (int a = 0; a < 3; ++a)
        for (int c = 0; c < 3; ++c) {
            const double* uc = upstream.channel(c);
            const double* ma = m.channel(a);
            for (std::size_t i = 0; i < n; ++i) buf[i] = -dt * ma[i] * uc[i];
            central_derivative_adjoint(buf.data(), out.v_bar.channel(a), g, c);

            const double* va = v.channel(a);
            for (std::size_t i = 0; i < n; ++i) buf[i] = -dt * va[i] * uc[i];
            central_derivative_adjoint(buf.data(), out.m_bar.channel(c), g, a);
        }

    return out;
}

namespace {

// Clamped-edge trilinear sample of a vector field at voxel coordinate q,
// with corner weights (for scatter) and the value Jacobian w.r.t. q.
// Clamped axes carry zero derivative.
struct FieldSample {
    Vec3 value;
    int n = 0;
    std::array<std::size_t, 8> idx{};
    std::array<double, 8> w{};
    Mat3 jac = Mat3::diag(0.0, 0.0, 0.0);  // jac(c, a) = d(value_c)/d(q_a), voxel units
};

FieldSample sample_field_clamped(const VectorField3& f, Vec3 q, bool need_jacobian) {
    FieldSample out;
    int i0[3];
    double fr[3];
    bool clamped[3];
    const double qc_in[3] = {q.x, q.y, q.z};
    for (int a = 0; a < 3; ++a) {
        const int d = f.dims[a];
        double qa = qc_in[a];
        clamped[a] = (qa <= 0.0) || (qa >= d - 1) || (d == 1);
        qa = std::clamp(qa, 0.0, static_cast<double>(d - 1));
        int base = static_cast<int>(std::floor(qa));
        base = std::clamp(base, 0, std::max(d - 2, 0));
        i0[a] = base;
        fr[a] = qa - base;
    }
    const double wx[2] = {1.0 - fr[0], fr[0]};
    const double wy[2] = {1.0 - fr[1], fr[1]};
    const double wz[2] = {1.0 - fr[2], fr[2]};
    const double dxs[2] = {-1.0, 1.0};
    for (int dk = 0; dk < 2; ++dk) {
        const int k = std::min(i0[2] + dk, f.dims[2] - 1);
        for (int dj = 0; dj < 2; ++dj) {
            const int j = std::min(i0[1] + dj, f.dims[1] - 1);
            for (int di = 0; di < 2; ++di) {
                const int i = std::min(i0[0] + di, f.dims[0] - 1);
                const double w = wx[di] * wy[dj] * wz[dk];
                const std::size_t idx = f.index(i, j, k);
                const Vec3 val = f.at(idx);
                out.value += val * w;
                out.idx[out.n] = idx;
                out.w[out.n] = w;
                ++out.n;
                if (need_jacobian) {
                    const double gx = dxs[di] * wy[dj] * wz[dk];
                    const double gy = wx[di] * dxs[dj] * wz[dk];
                    const double gz = wx[di] * wy[dj] * dxs[dk];
                    out.jac(0, 0) += gx * val.x;
                    out.jac(1, 0) += gx * val.y;
                    out.jac(2, 0) += gx * val.z;
                    out.jac(0, 1) += gy * val.x;
                    out.jac(1, 1) += gy * val.y;
                    out.jac(2, 1) += gy * val.z;
                    out.jac(0, 2) += gz * val.x;
                    out.jac(1, 2) += gz * val.y;
                    out.jac(2, 2) += gz * val.z;
                }
            }
        }
    }
    if (need_jacobian)
        for (int a = 0; a < 3; ++a)
            if (clamped[a])
                for (int c = 0; c < 3; ++c) out.jac(c, a) = 0.0;
    return out;
}

VectorField3 displacement_of(const DeformationMap& map) {
    VectorField3 u = VectorField3::zeros_like(map);
    for (int k = 0; k < map.dims[2]; ++k)
        for (int j = 0; j < map.dims[1]; ++j)
            for (int i = 0; i < map.dims[0]; ++i) {
                const std::size_t idx = map.index(i, j, k);
                u.set(idx, map.at(idx) - map.voxel_to_world(Vec3(i, j, k)));
            }
    return u;
}

}  // namespace

DeformationMap advect_map(const DeformationMap& map, const VectorField3& v, double dt) {
    if (!map.same_grid(v)) throw std::invalid_argument("advect_map: grids do not match");
    const VectorField3 u = displacement_of(map);
    DeformationMap out = VectorField3::zeros_like(map);
    const int nx = map.dims[0], ny = map.dims[1], nz = map.dims[2];
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const std::size_t idx = map.index(i, j, k);
                const Vec3 x = map.voxel_to_world(Vec3(i, j, k));
                const Vec3 y = x - v.at(idx) * dt;
                const FieldSample s = sample_field_clamped(u, u.world_to_voxel(y), false);
                out.set(idx, y + s.value);
            }
    return out;
}

AdvectVjp advect_map_vjp(const DeformationMap& map, const VectorField3& v, double dt,
                         const VectorField3& upstream) {
    if (!map.same_grid(v) || !map.same_grid(upstream))
        throw std::invalid_argument("advect_map_vjp: grids do not match");
    const VectorField3 u = displacement_of(map);
    AdvectVjp out{VectorField3::zeros_like(map), VectorField3::zeros_like(map)};
    const Vec3 inv_sp{1.0 / map.spacing.x, 1.0 / map.spacing.y, 1.0 / map.spacing.z};
    const int nx = map.dims[0], ny = map.dims[1], nz = map.dims[2];
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const std::size_t idx = map.index(i, j, k);
                const Vec3 pb = upstream.at(idx);
                if (pb.x == 0.0 && pb.y == 0.0 && pb.z == 0.0) continue;
                const Vec3 x = map.voxel_to_world(Vec3(i, j, k));
                const Vec3 y = x - v.at(idx) * dt;
                const FieldSample s = sample_field_clamped(u, u.world_to_voxel(y), true);
                // Displacement corners receive the interpolation weights;
                // u = map - id, so this is the map gradient directly.
                for (int c = 0; c < s.n; ++c) out.map_bar.add(s.idx[c], pb * s.w[c]);
                // y enters both directly and through the sample position:
                // y_bar = pb + (J / spacing)^T pb, then v_bar = -dt * y_bar.
                Vec3 yb = pb;
                yb.x += (s.jac(0, 0) * pb.x + s.jac(1, 0) * pb.y + s.jac(2, 0) * pb.z) * inv_sp.x;
                yb.y += (s.jac(0, 1) * pb.x + s.jac(1, 1) * pb.y + s.jac(2, 1) * pb.z) * inv_sp.y;
                yb.z += (s.jac(0, 2) * pb.x + s.jac(1, 2) * pb.y + s.jac(2, 2) * pb.z) * inv_sp.z;
                out.v_bar.set(idx, yb * (-dt));
            }
    return out;
}

ShootingResult integrate_shooting(const VectorField3& theta, const MultiGaussianKernel& kernel,
                                  int num_timesteps, const DeformationMap* initial_map) {
    kernel.validate();
    if (num_timesteps < 1) throw std::invalid_argument("integrate_shooting: num_timesteps < 1");
    if (initial_map && !initial_map->same_grid(theta))
        throw std::invalid_argument("integrate_shooting: initial map grid does not match theta");
    const double dt = 1.0 / num_timesteps;

    ShootingResult out;
    out.tape.dt = dt;
    out.tape.steps.reserve(num_timesteps);
    VectorField3 m = theta;
    DeformationMap map =
        initial_map ? *initial_map : identity_map(theta.dims, theta.spacing, theta.origin);
    for (int t = 0; t < num_timesteps; ++t) {
        VectorField3 v = kernel_apply(kernel, m);
        out.tape.steps.push_back({m, v, map});
        map = advect_map(map, v, dt);
        m = epdiff_step(m, v, dt);
    }
    out.map = std::move(map);
    return out;
}

VectorField3 shooting_vjp(const ShootingTape& tape, const MultiGaussianKernel& kernel,
                          const VectorField3& map_bar) {
    if (tape.steps.empty()) throw std::invalid_argument("shooting_vjp: empty tape");
    VectorField3 m_bar = VectorField3::zeros_like(map_bar);
    VectorField3 map_bar_cur = map_bar;
    for (std::size_t s = tape.steps.size(); s-- > 0;) {
        const ShootingStep& st = tape.steps[s];
        AdvectVjp av = advect_map_vjp(st.map, st.v, tape.dt, map_bar_cur);
        VectorField3 v_bar = std::move(av.v_bar);
        EpdiffVjp ev = epdiff_step_vjp(st.m, st.v, tape.dt, m_bar);
        field_axpy(1.0, ev.v_bar, v_bar);
        m_bar = std::move(ev.m_bar);
        VectorField3 kv = kernel_apply(kernel, v_bar);
        field_axpy(1.0, kv, m_bar);
        map_bar_cur = std::move(av.map_bar);
    }
    return m_bar;
}

Volume3D jacobian_determinant(const DeformationMap& map) {
    const ChannelDerivs d = all_derivatives(map);
    Volume3D out(map.dims, map.spacing, map.origin, 0.0);
    const std::size_t n = out.voxel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const double a00 = d.d[0][0][i], a01 = d.d[0][1][i], a02 = d.d[0][2][i];
        const double a10 = d.d[1][0][i], a11 = d.d[1][1][i], a12 = d.d[1][2][i];
        const double a20 = d.d[2][0][i], a21 = d.d[2][1][i], a22 = d.d[2][2][i];
        out.data[i] = a00 * (a11 * a22 - a12 * a21) - a01 * (a10 * a22 - a12 * a20) +
                      a02 * (a10 * a21 - a11 * a20);
    }
    return out;
}

}  // namespace tomoreg
