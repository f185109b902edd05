#include "tomoreg/projector.hpp"

#include <algorithm>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tomoreg {

double ProjectionStack::min_value() const {
    double m = 0.0;
    bool first = true;
    for (const auto& im : images) {
        const double v = im.min_value();
        m = first ? v : std::min(m, v);
        first = false;
    }
    return m;
}

double ProjectionStack::max_value() const {
    double m = 0.0;
    bool first = true;
    for (const auto& im : images) {
        const double v = im.max_value();
        m = first ? v : std::max(m, v);
        first = false;
    }
    return m;
}

namespace {

// Sample position for plane k of a ray: x = e + lambda*r_hat with
// lambda = (z_k - e.z)/r_hat.z, which lands exactly on the plane. The z
// component is set to z_k directly so forward and adjoint agree bit for bit.
inline Vec3 plane_sample(const Vec3& e, const Vec3& rhat, double zk) {
    const double lambda = (zk - e.z) / rhat.z;
    return {e.x + lambda * rhat.x, e.y + lambda * rhat.y, zk};
}

}  // namespace

Image2D project(const Volume3D& vol, const ScanGeometry& geom, int emitter_index) {
    const IntegrationPlanes planes = resolve_planes(geom, vol);
    const RayBundle rb = build_rays(geom, emitter_index, planes);
    const double ez = rb.emitter.z;
    const double dz = planes.dz;

    Image2D out(geom.nw, geom.nh, geom.pixel_spacing, geom.pixel_spacing);
    const std::ptrdiff_t npix = static_cast<std::ptrdiff_t>(out.pixel_count());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t p = 0; p < npix; ++p) {
        const Vec3 rhat = rb.dir[p];
        double acc = 0.0;
        for (double zk : rb.plane_z) {
            if (zk >= ez) break;  // only the segment between receiver and emitter
            acc += trilinear_sample(vol, vol.world_to_voxel(plane_sample(rb.emitter, rhat, zk)));
        }
        out.data[p] = acc * rb.dz_weight[p] * dz;
    }
    return out;
}

Volume3D project_vjp(const Volume3D& vol, const ScanGeometry& geom, int emitter_index,
                     const Image2D& upstream) {
    if (upstream.nw != geom.nw || upstream.nh != geom.nh)
        throw std::invalid_argument("project_vjp: upstream dims do not match receiver");
    const IntegrationPlanes planes = resolve_planes(geom, vol);
    const RayBundle rb = build_rays(geom, emitter_index, planes);
    const double ez = rb.emitter.z;
    const double dz = planes.dz;
    const std::ptrdiff_t npix = static_cast<std::ptrdiff_t>(upstream.pixel_count());

    Volume3D grad(vol.dims, vol.spacing, vol.origin, 0.0);
#ifdef _OPENMP
    // Per-thread partial volumes, merged in thread order: deterministic for
    // a fixed thread count.
    int nthreads = 1;
#pragma omp parallel
    {
#pragma omp single
        nthreads = omp_get_num_threads();
    }
    if (nthreads > 1) {
        std::vector<std::vector<double>> partials(nthreads);
#pragma omp parallel
        {
            const int tid = omp_get_thread_num();
            auto& part = partials[tid];
            part.assign(grad.voxel_count(), 0.0);
            Volume3D view(vol.dims, vol.spacing, vol.origin, 0.0);
            view.data.swap(part);
#pragma omp for schedule(static)
            for (std::ptrdiff_t p = 0; p < npix; ++p) {
                const Vec3 rhat = rb.dir[p];
                const double w = upstream.data[p] * rb.dz_weight[p] * dz;
                for (double zk : rb.plane_z) {
                    if (zk >= ez) break;
                    trilinear_scatter(view, vol.world_to_voxel(plane_sample(rb.emitter, rhat, zk)), w);
                }
            }
            view.data.swap(part);
        }
        for (int t = 0; t < nthreads; ++t)
            for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += partials[t][i];
        return grad;
    }
#endif
    for (std::ptrdiff_t p = 0; p < npix; ++p) {
        const Vec3 rhat = rb.dir[p];
        const double w = upstream.data[p] * rb.dz_weight[p] * dz;
        for (double zk : rb.plane_z) {
            if (zk >= ez) break;
            trilinear_scatter(grad, vol.world_to_voxel(plane_sample(rb.emitter, rhat, zk)), w);
        }
    }
    return grad;
}

ProjectionStack project_stack(const Volume3D& vol, const ScanGeometry& geom) {
    geom.validate();
    ProjectionStack stack;
    stack.images.reserve(geom.emitters.size());
    for (std::size_t i = 0; i < geom.emitters.size(); ++i)
        stack.images.push_back(project(vol, geom, static_cast<int>(i)));
    return stack;
}

}  // namespace tomoreg
