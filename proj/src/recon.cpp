#include "tomoreg/recon.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tomoreg/errors.hpp"
#include "tomoreg/fieldops.hpp"
#include "tomoreg/optim.hpp"

namespace tomoreg {

double tv_norm(const Volume3D& vol, double tv_epsilon, Volume3D* grad) {
    const GridView g = GridView::of(vol);
    const std::size_t n = g.count();
    const double eps2 = tv_epsilon * tv_epsilon;
    const double inv_n = 1.0 / static_cast<double>(n);

    std::array<std::vector<double>, 3> d;
    for (int a = 0; a < 3; ++a) {
        d[a].resize(n);
        forward_derivative(vol.data.data(), d[a].data(), g, a);
    }
    double total = 0.0;
    std::vector<double> mag(n);
    for (std::size_t i = 0; i < n; ++i) {
        mag[i] = std::sqrt(d[0][i] * d[0][i] + d[1][i] * d[1][i] + d[2][i] * d[2][i] + eps2);
        total += mag[i];
    }
    if (grad) {
        *grad = Volume3D(vol.dims, vol.spacing, vol.origin, 0.0);
        std::vector<double> w(n);
        for (int a = 0; a < 3; ++a) {
            for (std::size_t i = 0; i < n; ++i) w[i] = inv_n * d[a][i] / mag[i];
            forward_derivative_adjoint(w.data(), grad->data.data(), g, a);
        }
    }
    return total * inv_n;
}

double positivity_penalty(const Volume3D& vol, Volume3D* grad) {
    const std::size_t n = vol.voxel_count();
    const double inv_n = 1.0 / static_cast<double>(n);
    if (grad) *grad = Volume3D(vol.dims, vol.spacing, vol.origin, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (vol.data[i] < 0.0) {
            total -= vol.data[i];
            if (grad) grad->data[i] = -inv_n;
        }
    }
    return total * inv_n;
}

namespace {

// Mean absolute (optionally smoothed) projection residual for one emitter;
// fills the per-pixel upstream for the projector adjoint scaled by `scale`.
double l1_residual(const Image2D& proj, const Image2D& target, bool smooth, double delta,
                   double scale, Image2D* upstream) {
    if (!proj.same_shape(target)) throw std::invalid_argument("reconstruct: projection size mismatch");
    const std::size_t n = proj.pixel_count();
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = proj.data[i] - target.data[i];
        if (smooth) {
            const double m = std::sqrt(r * r + delta * delta);
            total += m;
            if (upstream) upstream->data[i] = scale * inv_n * r / m;
        } else {
            total += std::abs(r);
            if (upstream)
                upstream->data[i] = scale * inv_n * (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0));
        }
    }
    return total * inv_n;
}

}  // namespace

ReconResult reconstruct(const ProjectionStack& stack, const ScanGeometry& geom,
                        const VolumeGrid& grid, const ReconOptions& opt) {
    geom.validate();
    if (stack.size() != geom.emitters.size())
        throw std::invalid_argument("reconstruct: stack length does not match emitter count");
    if (opt.lambda1 < 0.0 || opt.lambda2 < 0.0)
        throw std::invalid_argument("reconstruct: penalty weights must be >= 0");

    const double dyn = stack.dynamic_range();
    const double tv_eps = opt.tv_epsilon > 0.0 ? opt.tv_epsilon : std::max(1e-6 * dyn, 1e-12);
    const double lr = opt.lr > 0.0 ? opt.lr : std::max(1e-2 * dyn, 1e-12);
    const int n_emit = static_cast<int>(geom.emitters.size());

    ReconResult result;
    int eval_counter = 0;
    Volume3D vol = grid.make(0.0);
    Image2D upstream;

    Objective objective = [&](const std::vector<double>& x, std::vector<double>* g) -> double {
        vol.data = x;
        Volume3D grad_vol;
        if (g) grad_vol = grid.make(0.0);

        double data_term = 0.0;
        for (int i = 0; i < n_emit; ++i) {
            const Image2D proj = project(vol, geom, i);
            if (g) upstream = Image2D(proj.nw, proj.nh, proj.pw, proj.ph, 0.0);
            data_term += l1_residual(proj, stack[static_cast<std::size_t>(i)], opt.smooth_l1,
                                     opt.smooth_l1_delta, 1.0 / n_emit, g ? &upstream : nullptr);
            if (g) {
                const Volume3D pb = project_vjp(vol, geom, i, upstream);
                for (std::size_t v = 0; v < grad_vol.data.size(); ++v)
                    grad_vol.data[v] += pb.data[v];
            }
        }
        data_term /= n_emit;

        Volume3D pos_grad, tv_grad;
        const double pos = positivity_penalty(vol, g ? &pos_grad : nullptr);
        const double tv = tv_norm(vol, tv_eps, g ? &tv_grad : nullptr);
        const double total = data_term + opt.lambda1 * pos + opt.lambda2 * tv;
        if (g) {
            g->resize(grad_vol.data.size());
            for (std::size_t v = 0; v < grad_vol.data.size(); ++v)
                (*g)[v] = grad_vol.data[v] + opt.lambda1 * pos_grad.data[v] +
                          opt.lambda2 * tv_grad.data[v];
            result.history.push_back({eval_counter++, total, data_term, pos, tv});
        }
        return total;
    };

    AdaptiveDescentOptions aopt;
    aopt.max_iters = opt.max_iters;
    aopt.lr = lr;
    aopt.convergence_rel = opt.convergence_rel;
    aopt.convergence_window = opt.convergence_window;
    OptimCallbacks cb;
    cb.on_warn = [](const std::string& msg) {
        std::fputs(("warning: " + msg + "\n").c_str(), stderr);
    };

    const std::size_t n_vox = grid.make(0.0).voxel_count();
    const OptimResult res =
        minimize_adaptive_descent(objective, std::vector<double>(n_vox, 0.0), aopt, cb);
    if (res.stop_reason.find("NaN") != std::string::npos ||
        res.stop_reason.find("not finite") != std::string::npos)
        throw NumericError("reconstruct: " + res.stop_reason);

    result.volume = grid.make(0.0);
    result.volume.data = res.x;
    result.iterations = res.iterations;
    result.converged = res.converged;
    result.stop_reason = res.stop_reason;
    return result;
}

}  // namespace tomoreg
