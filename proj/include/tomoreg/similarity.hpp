// Similarity measures between projection images (and, for the volumetric
// baseline, between volumes): normalized gradient fields, mean squared
// difference, and mean absolute difference, each with an exact adjoint with
// respect to the first argument.
#pragma once

#include <string>
#include <vector>

#include "tomoreg/volume.hpp"

namespace tomoreg {

enum class SimilarityKind { kNgf, kSsd, kL1 };
enum class NgfVariant { kSquaredCosine, kPlain };

SimilarityKind similarity_kind_from_string(const std::string& s);
NgfVariant ngf_variant_from_string(const std::string& s);

struct SimilarityConfig {
    SimilarityKind kind = SimilarityKind::kNgf;
    NgfVariant variant = NgfVariant::kSquaredCosine;
    double ngf_epsilon = 0.0;  // must be > 0 when kind == kNgf
};

// Value of the measure; if grad_a is non-null it receives
// upstream * d(value)/d(a). Dimensions of a and b must match. For NGF the
// image gradients use central differences in world (mm) units.
double similarity(const Image2D& a, const Image2D& b, const SimilarityConfig& cfg,
                  Image2D* grad_a = nullptr, double upstream = 1.0);
double similarity(const Volume3D& a, const Volume3D& b, const SimilarityConfig& cfg,
                  Volume3D* grad_a = nullptr, double upstream = 1.0);

// 99th-percentile (nearest-rank on the sorted values) of the per-element
// gradient magnitude, used by the adaptive NGF epsilon rule.
double robust_max_gradient(const std::vector<Image2D>& images);
double robust_max_gradient(const Volume3D& vol);

// epsilon = 1e-2 * robust max gradient, floored at a tiny positive value so
// constant targets stay usable.
double ngf_auto_epsilon(double robust_max_grad);

}  // namespace tomoreg
