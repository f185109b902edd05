// Iterative limited-angle reconstruction: minimize the mean L1 projection
// residual plus positivity and smoothed total-variation penalties, by
// monotone adaptive descent through the projector adjoint, starting from a
// zero volume.
#pragma once

#include <string>
#include <vector>

#include "tomoreg/geometry.hpp"
#include "tomoreg/projector.hpp"
#include "tomoreg/volume.hpp"

namespace tomoreg {

struct ReconOptions {
    double lambda1 = 100.0;   // positivity weight
    double lambda2 = 1.0;     // total-variation weight
    double tv_epsilon = 0.0;  // <= 0: 1e-6 x stack dynamic range
    int max_iters = 200;
    double lr = 0.0;          // <= 0: 1e-2 x stack dynamic range
    bool smooth_l1 = false;   // |r| ~ sqrt(r^2 + delta^2)
    double smooth_l1_delta = 1e-6;
    double convergence_rel = 1e-6;
    int convergence_window = 5;
};

// (1/|Omega|) * sum_x sqrt(||grad I(x)||^2 + eps^2), forward differences
// with a zero-flux boundary. grad, when non-null, is overwritten with the
// gradient.
double tv_norm(const Volume3D& vol, double tv_epsilon, Volume3D* grad = nullptr);

// mean of max(-I, 0); gradient is -1/N on strictly negative voxels.
double positivity_penalty(const Volume3D& vol, Volume3D* grad = nullptr);

struct ReconLossRecord {
    int iteration = 0;
    double total = 0.0;
    double data = 0.0;
    double positivity = 0.0;
    double tv = 0.0;
};

struct ReconResult {
    Volume3D volume;  // lowest-loss iterate
    std::vector<ReconLossRecord> history;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
};

ReconResult reconstruct(const ProjectionStack& stack, const ScanGeometry& geom,
                        const VolumeGrid& grid, const ReconOptions& opt);

}  // namespace tomoreg
