#include "tomoreg/geometry.hpp"

#include <cmath>
#include <numbers>

namespace tomoreg {

std::vector<Vec3> arc_emitters(int count, double angle_range_deg, double source_distance_mm) {
    if (count < 1) throw std::invalid_argument("arc_emitters: count must be >= 1");
    if (!(source_distance_mm > 0))
        throw std::invalid_argument("arc_emitters: source distance must be > 0");
    if (!(angle_range_deg >= 0 && angle_range_deg < 180))
        throw std::invalid_argument("arc_emitters: angle range must be in [0, 180) degrees");
    const double half = 0.5 * angle_range_deg * std::numbers::pi / 180.0;
    std::vector<Vec3> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const double a = (count == 1) ? 0.0 : -half + (2.0 * half * i) / (count - 1);
        out.push_back({source_distance_mm * std::tan(a), 0.0, source_distance_mm});
    }
    return out;
}

IntegrationPlanes resolve_planes(const ScanGeometry& geom, const Volume3D& vol) {
    IntegrationPlanes p;
    p.dz = geom.plane_spacing > 0 ? geom.plane_spacing : vol.spacing.z;
    if (geom.num_planes > 0) {
        p.count = geom.num_planes;
    } else {
        // Planes z_k = k*dz up to (and including) the top voxel centre.
        const double z_top = vol.world_max().z;
        p.count = std::max(1, static_cast<int>(std::floor(z_top / p.dz)) + 1);
    }
    return p;
}

RayBundle build_rays(const ScanGeometry& geom, int emitter_index,
                     const IntegrationPlanes& planes) {
    geom.validate();
    if (emitter_index < 0 || emitter_index >= static_cast<int>(geom.emitters.size()))
        throw std::out_of_range("build_rays: emitter index out of range");
    if (planes.count < 1 || !(planes.dz > 0))
        throw std::invalid_argument("build_rays: invalid integration planes");

    const Vec3 e = geom.emitters[emitter_index];
    // r.n = -e.z for every pixel; a zero component would make rays parallel
    // to the integration planes.
    if (e.z == 0.0) throw std::invalid_argument("build_rays: ray parallel to planes (e.z == 0)");

    RayBundle rb;
    rb.emitter = e;
    rb.nw = geom.nw;
    rb.nh = geom.nh;
    rb.dir.resize(static_cast<std::size_t>(geom.nw) * geom.nh);
    rb.dz_weight.resize(rb.dir.size());
    rb.plane_z.resize(planes.count);
    for (int k = 0; k < planes.count; ++k) rb.plane_z[k] = k * planes.dz;

    for (int ih = 0; ih < geom.nh; ++ih)
        for (int iw = 0; iw < geom.nw; ++iw) {
            const Vec3 p = geom.pixel_center(iw, ih);
            const Vec3 r = p - e;
            const double rn = r.norm();
            const std::size_t idx = static_cast<std::size_t>(iw) + static_cast<std::size_t>(geom.nw) * ih;
            rb.dir[idx] = r / rn;
            rb.dz_weight[idx] = rn / e.z;  // ||r/(r.n)||, r.n = -e.z
        }
    return rb;
}

}  // namespace tomoreg
