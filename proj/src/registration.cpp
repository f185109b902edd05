#include "tomoreg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "tomoreg/errors.hpp"
#include "tomoreg/optim.hpp"

namespace tomoreg {

namespace {

double volume_diagonal(const Volume3D& vol) {
    const Vec3 ext{vol.dims[0] * vol.spacing.x, vol.dims[1] * vol.spacing.y,
                   vol.dims[2] * vol.spacing.z};
    return ext.norm();
}

void check_stack(const ProjectionStack& stack, const ScanGeometry& geom) {
    if (stack.size() != geom.emitters.size())
        throw std::invalid_argument("registration: stack length does not match emitter count");
}

// Shared projection-space data term: accumulates (lambda/n) * sum Sim and,
// when vol_bar is non-null, the gradient w.r.t. the warped volume.
double projection_data_term(const Volume3D& warped, const ProjectionStack& stack,
                            const ScanGeometry& geom, const std::vector<int>& emitters,
                            double sim_weight, const SimilarityConfig& sim,
                            Volume3D* vol_bar) {
    const double n_used = static_cast<double>(emitters.size());
    const double scale = sim_weight / n_used;
    double total = 0.0;
    Image2D grad_im;
    for (int i : emitters) {
        const Image2D proj = project(warped, geom, i);
        const double s =
            similarity(proj, stack[static_cast<std::size_t>(i)], sim,
                       vol_bar ? &grad_im : nullptr, scale);
        total += s;
        if (vol_bar) {
            const Volume3D pb = project_vjp(warped, geom, i, grad_im);
            for (std::size_t v = 0; v < vol_bar->data.size(); ++v) vol_bar->data[v] += pb.data[v];
        }
    }
    return scale * total;
}

std::vector<int> all_emitters(const ScanGeometry& geom) {
    std::vector<int> ids(geom.emitters.size());
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

void throw_on_numeric_stop(const OptimResult& res, const std::string& stage) {
    if (res.stop_reason.find("NaN") != std::string::npos ||
        res.stop_reason.find("not finite") != std::string::npos ||
        res.stop_reason.find("diverged") != std::string::npos)
        throw NumericError(stage + ": " + res.stop_reason);
}

}  // namespace

double loss_3d2d_affine(const Volume3D& vol, const ProjectionStack& stack,
                        const ScanGeometry& geom, const AffineParams& params, double mu,
                        double sim_weight, const SimilarityConfig& sim,
                        std::array<double, 12>* grad, double* sim_term, double* reg_term,
                        const std::vector<int>* emitter_subset) {
    check_stack(stack, geom);
    std::vector<int> default_ids;
    if (!emitter_subset) default_ids = all_emitters(geom);
    const std::vector<int>& ids = emitter_subset ? *emitter_subset : default_ids;
    if (ids.empty()) throw std::invalid_argument("loss_3d2d_affine: empty emitter subset");

    const DeformationMap map = affine_to_map(params, vol.dims, vol.spacing, vol.origin);
    const Volume3D warped = warp(vol, map);

    Volume3D vol_bar;
    if (grad) vol_bar = Volume3D(vol.dims, vol.spacing, vol.origin, 0.0);
    const double sim_val =
        projection_data_term(warped, stack, geom, ids, sim_weight, sim, grad ? &vol_bar : nullptr);

    const double L2 = volume_diagonal(vol) * volume_diagonal(vol);
    double frob = 0.0;
    const Mat3 eye = Mat3::identity();
    for (int i = 0; i < 9; ++i) {
        const double d = params.A.m[i] - eye.m[i];
        frob += d * d;
    }
    const double reg_val = mu * (frob + params.b.norm2() / L2);

    if (grad) {
        const WarpVjp wv = warp_vjp(vol, map, vol_bar);
        AffineGrad ag = affine_vjp(wv.map_bar);
        for (int i = 0; i < 9; ++i) ag.A.m[i] += 2.0 * mu * (params.A.m[i] - eye.m[i]);
        ag.b += params.b * (2.0 * mu / L2);
        *grad = ag.flatten();
    }
    if (sim_term) *sim_term = sim_val;
    if (reg_term) *reg_term = reg_val;
    return reg_val + sim_val;
}

double loss_3d2d_lddmm(const Volume3D& vol, const ProjectionStack& stack,
                       const ScanGeometry& geom, const DeformationMap& pre_map,
                       const VectorField3& theta, const MultiGaussianKernel& kernel,
                       int num_timesteps, double sim_weight, const SimilarityConfig& sim,
                       VectorField3* grad, double* sim_term, double* reg_term) {
    check_stack(stack, geom);
    if (!theta.same_grid(vol))
        throw std::invalid_argument("loss_3d2d_lddmm: theta grid does not match volume");

    const ShootingResult sr = integrate_shooting(theta, kernel, num_timesteps, &pre_map);
    const Volume3D warped = warp(vol, sr.map);

    Volume3D vol_bar;
    if (grad) vol_bar = Volume3D(vol.dims, vol.spacing, vol.origin, 0.0);
    const double sim_val = projection_data_term(warped, stack, geom, all_emitters(geom),
                                                sim_weight, sim, grad ? &vol_bar : nullptr);

    VectorField3 reg_grad;
    const double reg_val = lddmm_regularizer(kernel, theta, grad ? &reg_grad : nullptr);

    if (grad) {
        const WarpVjp wv = warp_vjp(vol, sr.map, vol_bar);
        *grad = shooting_vjp(sr.tape, kernel, wv.map_bar);
        field_axpy(1.0, reg_grad, *grad);
    }
    if (sim_term) *sim_term = sim_val;
    if (reg_term) *reg_term = reg_val;
    return reg_val + sim_val;
}

double loss_3d3d_lddmm(const Volume3D& vol, const Volume3D& target, const VectorField3& theta,
                       const MultiGaussianKernel& kernel, int num_timesteps, double sim_weight,
                       const SimilarityConfig& sim, VectorField3* grad, double* sim_term,
                       double* reg_term) {
    if (!target.same_grid(vol))
        throw std::invalid_argument("loss_3d3d_lddmm: target grid does not match volume");
    if (!theta.same_grid(vol))
        throw std::invalid_argument("loss_3d3d_lddmm: theta grid does not match volume");

    const ShootingResult sr = integrate_shooting(theta, kernel, num_timesteps);
    const Volume3D warped = warp(vol, sr.map);

    Volume3D sim_grad;
    const double sim_val =
        similarity(warped, target, sim, grad ? &sim_grad : nullptr, sim_weight);

    VectorField3 reg_grad;
    const double reg_val = lddmm_regularizer(kernel, theta, grad ? &reg_grad : nullptr);

    if (grad) {
        const WarpVjp wv = warp_vjp(vol, sr.map, sim_grad);
        *grad = shooting_vjp(sr.tape, kernel, wv.map_bar);
        field_axpy(1.0, reg_grad, *grad);
    }
    if (sim_term) *sim_term = sim_weight * sim_val;
    if (reg_term) *reg_term = reg_val;
    return reg_val + sim_weight * sim_val;
}

RegistrationResult register_affine(const Volume3D& vol, const ProjectionStack& stack,
                                   const ScanGeometry& geom, const SimilarityConfig& sim,
                                   const AffineOptions& opt) {
    geom.validate();
    check_stack(stack, geom);

    RegistrationResult result;
    const int n_emit = static_cast<int>(geom.emitters.size());
    std::mt19937_64 rng(opt.seed);
    int eval_counter = 0;

    Objective objective = [&](const std::vector<double>& x, std::vector<double>* g) -> double {
        const AffineParams params = AffineParams::from_flat(x.data());
        std::vector<int> subset;
        const std::vector<int>* subset_ptr = nullptr;
        if (opt.emitter_subsample > 0 && opt.emitter_subsample < n_emit) {
            std::vector<int> ids(n_emit);
            std::iota(ids.begin(), ids.end(), 0);
            for (int i = 0; i < opt.emitter_subsample; ++i) {
                const std::size_t j =
                    i + static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n_emit - i));
                std::swap(ids[i], ids[j]);
            }
            subset.assign(ids.begin(), ids.begin() + opt.emitter_subsample);
            std::sort(subset.begin(), subset.end());
            subset_ptr = &subset;
        }
        std::array<double, 12> ga{};
        double sim_v = 0.0, reg_v = 0.0;
        const double total = loss_3d2d_affine(vol, stack, geom, params, opt.mu, opt.sim_weight,
                                              sim, g ? &ga : nullptr, &sim_v, &reg_v, subset_ptr);
        if (g) {
            g->assign(ga.begin(), ga.end());
            result.history.push_back({eval_counter++, total, sim_v, reg_v});
        }
        return total;
    };

    GradientDescentOptions gopt;
    gopt.max_iters = opt.max_iters;
    gopt.step_length = opt.step_length;
    gopt.convergence_rel = opt.convergence_rel;
    gopt.convergence_window = opt.convergence_window;
    const double L = volume_diagonal(vol);
    gopt.param_scale.assign(12, 1.0);
    gopt.param_scale[9] = gopt.param_scale[10] = gopt.param_scale[11] = L * L;

    const AffineParams init;
    const auto x0 = init.flatten();
    OptimCallbacks cb;
    cb.on_warn = [](const std::string& msg) { std::fputs(("warning: " + msg + "\n").c_str(), stderr); };
    const OptimResult res =
        minimize_gradient_descent(objective, {x0.begin(), x0.end()}, gopt, cb);
    throw_on_numeric_stop(res, "affine registration");

    result.affine = AffineParams::from_flat(res.x.data());
    result.map = affine_to_map(result.affine, vol.dims, vol.spacing, vol.origin);
    result.warped = warp(vol, result.map);
    result.iterations = res.iterations;
    result.converged = res.converged;
    result.stop_reason = res.stop_reason;
    return result;
}

namespace {

RegistrationResult run_lddmm(const Volume3D& vol, const MultiGaussianKernel& kernel,
                             const LddmmOptions& opt, const Objective& objective,
                             std::vector<LossRecord>& history,
                             const DeformationMap* pre_map) {
    const std::size_t n3 = 3 * vol.voxel_count();
    LbfgsOptions lopt;
    lopt.max_iters = opt.max_iters;
    lopt.history = opt.lbfgs_history;
    lopt.convergence_rel = opt.convergence_rel;
    lopt.convergence_window = opt.convergence_window;
    OptimCallbacks cb;
    cb.on_warn = [](const std::string& msg) { std::fputs(("warning: " + msg + "\n").c_str(), stderr); };

    const OptimResult res = minimize_lbfgs(objective, std::vector<double>(n3, 0.0), lopt, cb);
    throw_on_numeric_stop(res, "lddmm registration");

    RegistrationResult result;
    result.history = std::move(history);
    result.momentum = VectorField3(vol.dims, vol.spacing, vol.origin);
    result.momentum.data = res.x;
    result.map = integrate_shooting(result.momentum, kernel, opt.num_timesteps, pre_map).map;
    result.warped = warp(vol, result.map);
    result.iterations = res.iterations;
    result.converged = res.converged;
    result.stop_reason = res.stop_reason;
    return result;
}

}  // namespace

RegistrationResult register_lddmm(const Volume3D& vol, const ProjectionStack& stack,
                                  const ScanGeometry& geom, const DeformationMap& pre_map,
                                  const MultiGaussianKernel& kernel, const SimilarityConfig& sim,
                                  const LddmmOptions& opt) {
    geom.validate();
    check_stack(stack, geom);
    kernel.validate();

    std::vector<LossRecord> history;
    int eval_counter = 0;
    VectorField3 theta(vol.dims, vol.spacing, vol.origin);
    VectorField3 grad_field;

    Objective objective = [&](const std::vector<double>& x, std::vector<double>* g) -> double {
        theta.data = x;
        double sim_v = 0.0, reg_v = 0.0;
        const double total =
            loss_3d2d_lddmm(vol, stack, geom, pre_map, theta, kernel, opt.num_timesteps,
                            opt.sim_weight, sim, g ? &grad_field : nullptr, &sim_v, &reg_v);
        if (g) {
            *g = grad_field.data;
            history.push_back({eval_counter++, total, sim_v, reg_v});
        }
        return total;
    };

    RegistrationResult result = run_lddmm(vol, kernel, opt, objective, history, &pre_map);
    result.affine = AffineParams{};
    return result;
}

RegistrationResult register_3d3d(const Volume3D& vol, const Volume3D& target,
                                 const MultiGaussianKernel& kernel, const SimilarityConfig& sim,
                                 const LddmmOptions& opt) {
    kernel.validate();

    std::vector<LossRecord> history;
    int eval_counter = 0;
    VectorField3 theta(vol.dims, vol.spacing, vol.origin);
    VectorField3 grad_field;

    Objective objective = [&](const std::vector<double>& x, std::vector<double>* g) -> double {
        theta.data = x;
        double sim_v = 0.0, reg_v = 0.0;
        const double total = loss_3d3d_lddmm(vol, target, theta, kernel, opt.num_timesteps,
                                             opt.sim_weight, sim, g ? &grad_field : nullptr,
                                             &sim_v, &reg_v);
        if (g) {
            *g = grad_field.data;
            history.push_back({eval_counter++, total, sim_v, reg_v});
        }
        return total;
    };

    return run_lddmm(vol, kernel, opt, objective, history, nullptr);
}

Volume3D apply_mask(const Volume3D& vol, const Volume3D& mask) {
    if (!vol.same_grid(mask)) throw std::invalid_argument("apply_mask: grids do not match");
    Volume3D out = vol;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
    return out;
}

}  // namespace tomoreg
