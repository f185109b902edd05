// First-order optimizers over flat parameter vectors. The objective fills a
// gradient only when asked, so line searches run on cheap value-only
// evaluations.
#pragma once

#include <functional>
#include <string>
#include <vector>

namespace tomoreg {

// Returns the loss at x; when grad is non-null fills it (the optimizers pass
// a buffer already sized to x.size(), so writing in place is also fine).
using Objective = std::function<double(const std::vector<double>& x, std::vector<double>* grad)>;

struct OptimCallbacks {
    // Called after each accepted iterate with (iteration, loss).
    std::function<void(int, double)> on_accept;
    std::function<void(const std::string&)> on_warn;
};

struct OptimResult {
    std::vector<double> x;  // lowest-loss iterate seen
    double loss = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
};

struct LbfgsOptions {
    int max_iters = 100;
    int history = 10;
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    int max_line_trials = 20;
    double convergence_rel = 1e-6;  // relative loss change ...
    int convergence_window = 5;     // ... sustained this many iterations
    double divergence_factor = 1e3;
    double grad_tolerance = 1e-8;   // stop when the gradient norm falls below
};

// Two-loop recursion L-BFGS with backtracking Armijo line search. The first
// step uses alpha0 = 1/||g||; failed line searches fall back to a
// steepest-descent step with a warning; NaN losses abort.
OptimResult minimize_lbfgs(const Objective& f, std::vector<double> x0, const LbfgsOptions& opt,
                           const OptimCallbacks& cb = {});

struct GradientDescentOptions {
    int max_iters = 200;
    // Step length in preconditioned parameter space; the update is
    // x -= step_length * (scale .* g) / ||scale .* g||.
    double step_length = 0.01;
    // Optional per-parameter gradient scaling (empty = all ones).
    std::vector<double> param_scale;
    double convergence_rel = 1e-6;
    int convergence_window = 5;
    double divergence_factor = 1e3;
    double grad_tolerance = 1e-8;
};

// Fixed-step-length gradient descent (normalized direction). Tracks and
// returns the best iterate; loss may oscillate near the optimum.
OptimResult minimize_gradient_descent(const Objective& f, std::vector<double> x0,
                                      const GradientDescentOptions& opt,
                                      const OptimCallbacks& cb = {});

struct AdaptiveDescentOptions {
    int max_iters = 200;
    double lr = 1e-2;  // initial per-parameter step scale, value units
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grow = 1.05;    // learning-rate growth on accepted steps
    double shrink = 0.5;   // learning-rate backoff on rejected steps
    int max_backtracks = 30;
    double convergence_rel = 1e-6;
    int convergence_window = 5;
};

// Moment-scaled descent with monotone acceptance: each proposed step must
// not increase the loss; rejected steps halve the learning rate and retry
// along the same scaled direction.
OptimResult minimize_adaptive_descent(const Objective& f, std::vector<double> x0,
                                      const AdaptiveDescentOptions& opt,
                                      const OptimCallbacks& cb = {});

}  // namespace tomoreg
