// Stationary scan geometry: a fixed receiver plane at z=0 (centre at the
// world origin, normal +z) observed from a set of emitters above it, plus
// the stack of z = const integration planes used by the projector.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tomoreg/vec.hpp"
#include "tomoreg/volume.hpp"

namespace tomoreg {

struct ScanGeometry {
    int nw = 0, nh = 0;           // receiver pixels
    double pixel_spacing = 0.0;   // mm, square pixels
    std::vector<Vec3> emitters;   // mm, receiver-plane frame; e.z > 0
    int num_planes = 0;           // 0 = derive from the volume at projection time
    double plane_spacing = 0.0;   // mm; 0 = use the volume z-spacing

    double receiver_width() const { return nw * pixel_spacing; }
    double receiver_height() const { return nh * pixel_spacing; }

    // Centre of pixel (iw, ih); pixel grid is centred on the origin.
    Vec3 pixel_center(int iw, int ih) const {
        return {(iw - 0.5 * (nw - 1)) * pixel_spacing,
                (ih - 0.5 * (nh - 1)) * pixel_spacing, 0.0};
    }

    void validate() const {
        if (nw < 1 || nh < 1) throw std::invalid_argument("geometry: receiver pixels must be >= 1");
        if (!(pixel_spacing > 0)) throw std::invalid_argument("geometry: pixel spacing must be > 0");
        if (emitters.empty()) throw std::invalid_argument("geometry: emitter list is empty");
        for (std::size_t i = 0; i < emitters.size(); ++i) {
            if (!emitters[i].all_finite())
                throw std::invalid_argument("geometry: emitter " + std::to_string(i) + " not finite");
            if (!(emitters[i].z > 0))
                throw std::invalid_argument("geometry: emitter " + std::to_string(i) +
                                            " must lie strictly above the receiver plane (z > 0)");
        }
        if (num_planes < 0) throw std::invalid_argument("geometry: num_planes must be >= 1 (or 0 = auto)");
        if (plane_spacing < 0) throw std::invalid_argument("geometry: plane_spacing must be > 0 (or 0 = auto)");
    }
};

// Emitter i of n at (d*tan(a_i), 0, d) with a_i uniformly spaced over
// [-range/2, +range/2]; a single emitter sits on the axis.
std::vector<Vec3> arc_emitters(int count, double angle_range_deg, double source_distance_mm);

// Concrete plane stack for a given volume: planes z_k = k*dz, k = 0..Z-1.
struct IntegrationPlanes {
    int count = 0;
    double dz = 0.0;
};
// Applies the defaults when the geometry leaves them at 0: dz = volume
// z-spacing, count = enough planes to span the volume top.
IntegrationPlanes resolve_planes(const ScanGeometry& geom, const Volume3D& vol);

// Per-emitter ray set: one unit direction and secant weight per pixel.
struct RayBundle {
    Vec3 emitter;
    int nw = 0, nh = 0;
    std::vector<Vec3> dir;       // unit r_hat, pixel-major (w fastest)
    std::vector<double> dz_weight;  // ||r / (r.n)||, >= 1
    std::vector<double> plane_z;
};

RayBundle build_rays(const ScanGeometry& geom, int emitter_index,
                     const IntegrationPlanes& planes);

}  // namespace tomoreg
