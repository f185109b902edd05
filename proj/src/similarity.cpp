#include "tomoreg/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tomoreg/fieldops.hpp"

namespace tomoreg {

SimilarityKind similarity_kind_from_string(const std::string& s) {
    if (s == "ngf") return SimilarityKind::kNgf;
    if (s == "ssd") return SimilarityKind::kSsd;
    if (s == "l1") return SimilarityKind::kL1;
    throw std::invalid_argument("unknown similarity kind: " + s);
}

NgfVariant ngf_variant_from_string(const std::string& s) {
    if (s == "squared") return NgfVariant::kSquaredCosine;
    if (s == "plain") return NgfVariant::kPlain;
    throw std::invalid_argument("unknown ngf variant: " + s);
}

namespace {

double ssd_core(const double* a, const double* b, std::size_t n, double* grad, double upstream) {
    double acc = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
        if (grad) grad[i] = upstream * 2.0 * d * inv_n;
    }
    return acc * inv_n;
}

double l1_core(const double* a, const double* b, std::size_t n, double* grad, double upstream) {
    double acc = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += std::abs(d);
        if (grad) grad[i] = upstream * inv_n * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
    return acc * inv_n;
}

double ngf_core(const double* a, const double* b, const GridView& g, double eps,
                NgfVariant variant, double* grad, double upstream) {
    if (!(eps > 0.0)) throw std::invalid_argument("ngf: epsilon must be > 0");
    const std::size_t n = g.count();
    const double eps2 = eps * eps;
    const double inv_n = 1.0 / static_cast<double>(n);

    std::array<std::vector<double>, 3> ga, gb;
    for (int c = 0; c < 3; ++c) {
        ga[c].resize(n);
        gb[c].resize(n);
        central_derivative(a, ga[c].data(), g, c);
        central_derivative(b, gb[c].data(), g, c);
    }

    std::array<std::vector<double>, 3> abar;
    if (grad)
        for (int c = 0; c < 3; ++c) abar[c].assign(n, 0.0);

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ax = ga[0][i], ay = ga[1][i], az = ga[2][i];
        const double bx = gb[0][i], by = gb[1][i], bz = gb[2][i];
        const double s = ax * bx + ay * by + az * bz + eps2;
        const double na = std::sqrt(ax * ax + ay * ay + az * az + eps2);
        const double nb = std::sqrt(bx * bx + by * by + bz * bz + eps2);
        const double rho = s / (na * nb);
        const double phi = (variant == NgfVariant::kSquaredCosine) ? 1.0 - rho * rho : 1.0 - rho;
        total += phi;
        if (grad) {
            const double dphi = (variant == NgfVariant::kSquaredCosine) ? -2.0 * rho : -1.0;
            const double scale = upstream * inv_n * dphi;
            const double c1 = scale / (na * nb);
            const double c2 = scale * rho / (na * na);
            abar[0][i] = c1 * bx - c2 * ax;
            abar[1][i] = c1 * by - c2 * ay;
            abar[2][i] = c1 * bz - c2 * az;
        }
    }
    if (grad) {
        std::fill(grad, grad + n, 0.0);
        for (int c = 0; c < 3; ++c) central_derivative_adjoint(abar[c].data(), grad, g, c);
    }
    return total * inv_n;
}

double dispatch(const double* a, const double* b, const GridView& g, const SimilarityConfig& cfg,
                double* grad, double upstream) {
    switch (cfg.kind) {
        case SimilarityKind::kSsd:
            return ssd_core(a, b, g.count(), grad, upstream);
        case SimilarityKind::kL1:
            return l1_core(a, b, g.count(), grad, upstream);
        case SimilarityKind::kNgf:
            return ngf_core(a, b, g, cfg.ngf_epsilon, cfg.variant, grad, upstream);
    }
    throw std::logic_error("similarity: unreachable");
}

void collect_gradient_magnitudes(const double* x, const GridView& g, std::vector<double>& out) {
    const std::size_t n = g.count();
    std::array<std::vector<double>, 3> d;
    for (int c = 0; c < 3; ++c) {
        d[c].resize(n);
        central_derivative(x, d[c].data(), g, c);
    }
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(std::sqrt(d[0][i] * d[0][i] + d[1][i] * d[1][i] + d[2][i] * d[2][i]));
}

double percentile99(std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const std::size_t idx = static_cast<std::size_t>(
        std::llround(0.99 * static_cast<double>(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + idx, v.end());
    return v[idx];
}

}  // namespace

double similarity(const Image2D& a, const Image2D& b, const SimilarityConfig& cfg,
                  Image2D* grad_a, double upstream) {
    if (!a.same_shape(b)) throw std::invalid_argument("similarity: image dims differ");
    double* gptr = nullptr;
    if (grad_a) {
        *grad_a = Image2D(a.nw, a.nh, a.pw, a.ph, 0.0);
        gptr = grad_a->data.data();
    }
    return dispatch(a.data.data(), b.data.data(), GridView::of(a), cfg, gptr, upstream);
}

double similarity(const Volume3D& a, const Volume3D& b, const SimilarityConfig& cfg,
                  Volume3D* grad_a, double upstream) {
    if (!a.same_grid(b)) throw std::invalid_argument("similarity: volume grids differ");
    double* gptr = nullptr;
    if (grad_a) {
        *grad_a = Volume3D(a.dims, a.spacing, a.origin, 0.0);
        gptr = grad_a->data.data();
    }
    return dispatch(a.data.data(), b.data.data(), GridView::of(a), cfg, gptr, upstream);
}

double robust_max_gradient(const std::vector<Image2D>& images) {
    std::vector<double> mags;
    for (const auto& im : images) collect_gradient_magnitudes(im.data.data(), GridView::of(im), mags);
    return percentile99(mags);
}

double robust_max_gradient(const Volume3D& vol) {
    std::vector<double> mags;
    collect_gradient_magnitudes(vol.data.data(), GridView::of(vol), mags);
    return percentile99(mags);
}

double ngf_auto_epsilon(double robust_max_grad) {
    return std::max(1e-2 * robust_max_grad, 1e-12);
}

}  // namespace tomoreg
