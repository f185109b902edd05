// Ray-cast projector: line integrals of a volume onto the receiver plane,
// one image per emitter, sampled on z = const planes. The adjoint
// (project_vjp) makes the projector usable inside gradient-based loops.
#pragma once

#include <vector>

#include "tomoreg/geometry.hpp"
#include "tomoreg/volume.hpp"

namespace tomoreg {

struct ProjectionStack {
    std::vector<Image2D> images;  // one per emitter, emitter order

    std::size_t size() const { return images.size(); }
    Image2D& operator[](std::size_t i) { return images[i]; }
    const Image2D& operator[](std::size_t i) const { return images[i]; }

    double min_value() const;
    double max_value() const;
    double dynamic_range() const { return max_value() - min_value(); }
};

// DRR for one emitter: for each pixel, sum volume samples at the ray/plane
// intersections and scale by the secant weight times the plane spacing.
Image2D project(const Volume3D& vol, const ScanGeometry& geom, int emitter_index);

// Adjoint of project w.r.t. the volume: scatters upstream*dz_weight*dz
// through the trilinear footprints of every sample position. Exact
// transpose of the linear map vol -> projection.
Volume3D project_vjp(const Volume3D& vol, const ScanGeometry& geom, int emitter_index,
                     const Image2D& upstream);

// All emitters, in emitter order.
ProjectionStack project_stack(const Volume3D& vol, const ScanGeometry& geom);

}  // namespace tomoreg
