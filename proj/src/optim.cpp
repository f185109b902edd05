#include "tomoreg/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace tomoreg {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void warn(const OptimCallbacks& cb, const std::string& msg) {
    if (cb.on_warn) cb.on_warn(msg);
}

// Tracks the sustained-relative-change convergence rule shared by all three
// optimizers.
struct ConvergenceTracker {
    double rel = 1e-6;
    int window = 5;
    int streak = 0;
    double prev = 0.0;
    bool has_prev = false;

    bool update(double loss) {
        if (has_prev) {
            const double denom = std::max(std::abs(prev), 1e-300);
            if (std::abs(prev - loss) / denom < rel)
                ++streak;
            else
                streak = 0;
        }
        prev = loss;
        has_prev = true;
        return streak >= window;
    }
};

}  // namespace

OptimResult minimize_lbfgs(const Objective& f, std::vector<double> x0, const LbfgsOptions& opt,
                           const OptimCallbacks& cb) {
    OptimResult res;
    std::vector<double> x = std::move(x0);
    std::vector<double> g(x.size(), 0.0);
    double fx = f(x, &g);
    if (!std::isfinite(fx)) {
        res.x = std::move(x);
        res.loss = fx;
        res.stop_reason = "initial loss is not finite";
        return res;
    }
    const double f_initial = fx;
    res.x = x;
    res.loss = fx;

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    ConvergenceTracker conv{opt.convergence_rel, opt.convergence_window};
    conv.update(fx);

    std::vector<double> d, x_trial, g_new(x.size(), 0.0);
    for (int iter = 0; iter < opt.max_iters; ++iter) {
        const double gnorm = norm(g);
        if (gnorm < opt.grad_tolerance) {
            res.converged = true;
            res.stop_reason = "gradient norm below tolerance";
            break;
        }

        // Two-loop recursion for d = -H g.
        d = g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * dot(s_hist[i], d);
            axpy(-alpha[i], y_hist[i], d);
        }
        if (!s_hist.empty()) {
            const auto& s = s_hist.back();
            const auto& y = y_hist.back();
            const double gamma = dot(s, y) / std::max(dot(y, y), 1e-300);
            for (double& v : d) v *= gamma;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * dot(y_hist[i], d);
            axpy(alpha[i] - beta, s_hist[i], d);
        }
        for (double& v : d) v = -v;

        double gd = dot(g, d);
        if (!(gd < 0.0)) {
            // Not a descent direction; restart from steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = -g[i];
            gd = -gnorm * gnorm;
        }

        const bool fresh = s_hist.empty();
        double alpha0 = fresh ? 1.0 / std::max(gnorm, 1e-300) : 1.0;

        auto line_search = [&](const std::vector<double>& dir, double dir_gd,
                               double a0) -> double {
            double a = a0;
            for (int t = 0; t < opt.max_line_trials; ++t) {
                x_trial = x;
                axpy(a, dir, x_trial);
                const double ft = f(x_trial, nullptr);
                if (std::isnan(ft)) return -1.0;  // propagate as failure; caller aborts
                if (ft <= fx + opt.armijo_c * a * dir_gd) return a;
                a *= opt.backtrack_factor;
            }
            return 0.0;
        };

        double step = line_search(d, gd, alpha0);
        if (step == -1.0) {
            res.stop_reason = "line search produced NaN loss";
            warn(cb, "lbfgs: " + res.stop_reason);
            return res;
        }
        if (step == 0.0) {
            // Fall back to steepest descent once.
            warn(cb, "lbfgs: line search failed, falling back to steepest descent");
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = -g[i];
            gd = -gnorm * gnorm;
            step = line_search(d, gd, 1.0 / std::max(gnorm, 1e-300));
            if (step == -1.0) {
                res.stop_reason = "line search produced NaN loss";
                warn(cb, "lbfgs: " + res.stop_reason);
                return res;
            }
            if (step == 0.0) {
                res.stop_reason = "line search failed in steepest-descent fallback";
                warn(cb, "lbfgs: " + res.stop_reason);
                return res;
            }
        }

        x_trial = x;
        axpy(step, d, x_trial);
        const double f_new = f(x_trial, &g_new);
        if (std::isnan(f_new)) {
            res.stop_reason = "NaN loss";
            warn(cb, "lbfgs: " + res.stop_reason);
            return res;
        }
        if (f_new > opt.divergence_factor * std::max(std::abs(f_initial), 1e-300)) {
            res.stop_reason = "diverged: loss exceeded " +
                              std::to_string(opt.divergence_factor) + "x the initial loss";
            warn(cb, "lbfgs: " + res.stop_reason);
            return res;
        }

        // Curvature update.
        std::vector<double> s_vec = x_trial;
        axpy(-1.0, x, s_vec);
        std::vector<double> y_vec = g_new;
        axpy(-1.0, g, y_vec);
        const double sy = dot(s_vec, y_vec);
        if (sy > 1e-12 * norm(s_vec) * norm(y_vec)) {
            s_hist.push_back(std::move(s_vec));
            y_hist.push_back(std::move(y_vec));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        x = std::move(x_trial);
        std::swap(g, g_new);  // keep g_new sized for the next evaluation
        fx = f_new;
        res.iterations = iter + 1;
        if (fx < res.loss) {
            res.loss = fx;
            res.x = x;
        }
        if (cb.on_accept) cb.on_accept(iter + 1, fx);
        if (conv.update(fx)) {
            res.converged = true;
            res.stop_reason = "relative loss change below threshold";
            break;
        }
    }
    if (res.stop_reason.empty()) res.stop_reason = res.converged ? "converged" : "max iterations";
    return res;
}

OptimResult minimize_gradient_descent(const Objective& f, std::vector<double> x0,
                                      const GradientDescentOptions& opt,
                                      const OptimCallbacks& cb) {
    OptimResult res;
    std::vector<double> x = std::move(x0);
    if (!opt.param_scale.empty() && opt.param_scale.size() != x.size())
        throw std::invalid_argument("gradient descent: param_scale size mismatch");

    std::vector<double> g(x.size(), 0.0);
    double fx = f(x, &g);
    if (!std::isfinite(fx)) {
        res.x = std::move(x);
        res.loss = fx;
        res.stop_reason = "initial loss is not finite";
        return res;
    }
    const double f_initial = fx;
    res.x = x;
    res.loss = fx;
    ConvergenceTracker conv{opt.convergence_rel, opt.convergence_window};
    conv.update(fx);
    if (cb.on_accept) cb.on_accept(0, fx);

    std::vector<double> dir(x.size());
    for (int iter = 0; iter < opt.max_iters; ++iter) {
        for (std::size_t i = 0; i < x.size(); ++i)
            dir[i] = (opt.param_scale.empty() ? 1.0 : opt.param_scale[i]) * g[i];
        const double dnorm = norm(dir);
        if (dnorm < opt.grad_tolerance) {
            res.converged = true;
            res.stop_reason = "gradient norm below tolerance";
            break;
        }
        axpy(-opt.step_length / dnorm, dir, x);
        fx = f(x, &g);
        if (std::isnan(fx)) {
            res.stop_reason = "NaN loss";
            warn(cb, "gradient descent: " + res.stop_reason);
            return res;
        }
        if (fx > opt.divergence_factor * std::max(std::abs(f_initial), 1e-300)) {
            res.stop_reason = "diverged: loss exceeded " +
                              std::to_string(opt.divergence_factor) + "x the initial loss";
            warn(cb, "gradient descent: " + res.stop_reason);
            return res;
        }
        res.iterations = iter + 1;
        if (fx < res.loss) {
            res.loss = fx;
            res.x = x;
        }
        if (cb.on_accept) cb.on_accept(iter + 1, fx);
        if (conv.update(fx)) {
            res.converged = true;
            res.stop_reason = "relative loss change below threshold";
            break;
        }
    }
    if (res.stop_reason.empty()) res.stop_reason = res.converged ? "converged" : "max iterations";
    return res;
}

OptimResult minimize_adaptive_descent(const Objective& f, std::vector<double> x0,
                                      const AdaptiveDescentOptions& opt,
                                      const OptimCallbacks& cb) {
    OptimResult res;
    std::vector<double> x = std::move(x0);
    std::vector<double> g(x.size(), 0.0);
    double fx = f(x, &g);
    if (!std::isfinite(fx)) {
        res.x = std::move(x);
        res.loss = fx;
        res.stop_reason = "initial loss is not finite";
        return res;
    }
    res.x = x;
    res.loss = fx;
    ConvergenceTracker conv{opt.convergence_rel, opt.convergence_window};
    conv.update(fx);
    if (cb.on_accept) cb.on_accept(0, fx);

    const std::size_t n = x.size();
    std::vector<double> m(n, 0.0), v(n, 0.0), step(n), x_trial;
    double lr = opt.lr;
    double b1t = 1.0, b2t = 1.0;

    for (int iter = 0; iter < opt.max_iters; ++iter) {
        b1t *= opt.beta1;
        b2t *= opt.beta2;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
            const double mh = m[i] / (1.0 - b1t);
            const double vh = v[i] / (1.0 - b2t);
            step[i] = mh / (std::sqrt(vh) + opt.eps);
        }

        bool accepted = false;
        double f_trial = fx;
        auto try_direction = [&](const std::vector<double>& dir) {
            for (int bt = 0; bt < opt.max_backtracks; ++bt) {
                x_trial = x;
                axpy(-lr, dir, x_trial);
                f_trial = f(x_trial, nullptr);
                if (std::isnan(f_trial)) return false;
                if (f_trial <= fx) {
                    accepted = true;
                    return true;
                }
                lr *= opt.shrink;
            }
            return true;
        };
        if (!try_direction(step)) {
            res.stop_reason = "NaN loss";
            warn(cb, "adaptive descent: " + res.stop_reason);
            return res;
        }
        if (!accepted) {
            // The momentum direction can point uphill near a minimum; retry
            // along the raw gradient with fresh momentum before giving up.
            const double gn = norm(g);
            if (gn > 0.0) {
                std::vector<double> dir(n);
                for (std::size_t i = 0; i < n; ++i) dir[i] = g[i] / gn;
                lr = opt.lr;
                if (!try_direction(dir)) {
                    res.stop_reason = "NaN loss";
                    warn(cb, "adaptive descent: " + res.stop_reason);
                    return res;
                }
                if (accepted) {
                    std::fill(m.begin(), m.end(), 0.0);
                    std::fill(v.begin(), v.end(), 0.0);
                    b1t = b2t = 1.0;
                }
            }
        }
        if (!accepted) {
            res.stop_reason = "no decreasing step found";
            break;
        }
        x = std::move(x_trial);
        fx = f_trial;
        lr = std::min(lr * opt.grow, opt.lr);
        fx = f(x, &g);  // gradient for the next iteration, same point
        res.iterations = iter + 1;
        if (fx < res.loss) {
            res.loss = fx;
            res.x = x;
        }
        if (cb.on_accept) cb.on_accept(iter + 1, fx);
        if (conv.update(fx)) {
            res.converged = true;
            res.stop_reason = "relative loss change below threshold";
            break;
        }
    }
    if (res.stop_reason.empty()) res.stop_reason = res.converged ? "converged" : "max iterations";
    return res;
}

}  // namespace tomoreg
