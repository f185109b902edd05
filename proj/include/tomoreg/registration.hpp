// Projection-space registration: an affine stage driven by fixed-step
// gradient descent, an LDDMM shooting stage driven by L-BFGS, and the
// volumetric 3D/3D baseline. Loss evaluation composes the similarity,
// projector, warp, and transform adjoints in reverse order.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tomoreg/geometry.hpp"
#include "tomoreg/projector.hpp"
#include "tomoreg/similarity.hpp"
#include "tomoreg/transform.hpp"
#include "tomoreg/volume.hpp"

namespace tomoreg {

struct AffineOptions {
    double sim_weight = 0.01;  // lambda
    double mu = 0.0;           // weight of ||A - I||_F^2 + ||b||^2 / L^2
    int max_iters = 200;
    double step_length = 0.01;  // see minimize_gradient_descent
    double convergence_rel = 1e-6;
    int convergence_window = 5;
    int emitter_subsample = 0;  // emitters per iteration; 0 = full batch
    std::uint64_t seed = 0;
};

struct LddmmOptions {
    double sim_weight = 0.5;  // lambda
    int num_timesteps = 10;
    int max_iters = 100;
    int lbfgs_history = 10;
    double convergence_rel = 1e-6;
    int convergence_window = 5;
};

struct LossRecord {
    int iteration = 0;
    double total = 0.0;
    double sim = 0.0;
    double reg = 0.0;
};

struct RegistrationResult {
    AffineParams affine;     // meaningful for the affine stage
    VectorField3 momentum;   // meaningful for the LDDMM stages (empty otherwise)
    DeformationMap map;      // recomputed from the stored parameters
    Volume3D warped;
    std::vector<LossRecord> history;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
};

// total = mu*(||A-I||_F^2 + ||b||^2/L^2) + (lambda/n) * sum_i Sim(P_i[vol o map], stack_i).
// L is the diagonal of the volume's bounding box. grad, when non-null,
// receives the full 12-parameter gradient. emitter_subset restricts the sum
// (and the mean divisor) to the listed emitters.
double loss_3d2d_affine(const Volume3D& vol, const ProjectionStack& stack,
                        const ScanGeometry& geom, const AffineParams& params, double mu,
                        double sim_weight, const SimilarityConfig& sim,
                        std::array<double, 12>* grad, double* sim_term = nullptr,
                        double* reg_term = nullptr,
                        const std::vector<int>* emitter_subset = nullptr);

// total = <theta, K theta>*voxvol + (lambda/n) * sum_i Sim(P_i[vol o map], stack_i)
// with map = shooting from the affine pre-map.
double loss_3d2d_lddmm(const Volume3D& vol, const ProjectionStack& stack,
                       const ScanGeometry& geom, const DeformationMap& pre_map,
                       const VectorField3& theta, const MultiGaussianKernel& kernel,
                       int num_timesteps, double sim_weight, const SimilarityConfig& sim,
                       VectorField3* grad, double* sim_term = nullptr,
                       double* reg_term = nullptr);

// Volumetric variant: total = Reg + lambda * Sim(vol o map, target).
double loss_3d3d_lddmm(const Volume3D& vol, const Volume3D& target, const VectorField3& theta,
                       const MultiGaussianKernel& kernel, int num_timesteps, double sim_weight,
                       const SimilarityConfig& sim, VectorField3* grad,
                       double* sim_term = nullptr, double* reg_term = nullptr);

RegistrationResult register_affine(const Volume3D& vol, const ProjectionStack& stack,
                                   const ScanGeometry& geom, const SimilarityConfig& sim,
                                   const AffineOptions& opt);

// pre_map: affine pre-registration (identity allowed), used as map(0).
RegistrationResult register_lddmm(const Volume3D& vol, const ProjectionStack& stack,
                                  const ScanGeometry& geom, const DeformationMap& pre_map,
                                  const MultiGaussianKernel& kernel, const SimilarityConfig& sim,
                                  const LddmmOptions& opt);

RegistrationResult register_3d3d(const Volume3D& vol, const Volume3D& target,
                                 const MultiGaussianKernel& kernel, const SimilarityConfig& sim,
                                 const LddmmOptions& opt);

// Elementwise product, used to zero out image content outside a mask before
// registration.
Volume3D apply_mask(const Volume3D& vol, const Volume3D& mask);

}  // namespace tomoreg
