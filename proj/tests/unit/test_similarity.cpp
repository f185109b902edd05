#include <doctest.h>

#include <cmath>
#include <random>

#include "tomoreg/similarity.hpp"

#include "helpers.hpp"

using namespace tomoreg;
using testutil::rel_err;
using testutil::scaled_err;

namespace {

Image2D make_image(int nw, int nh, double pw, double ph,
                   double (*f)(int iw, int ih)) {
    Image2D im(nw, nh, pw, ph);
    for (int ih = 0; ih < nh; ++ih)
        for (int iw = 0; iw < nw; ++iw) im.at(iw, ih) = f(iw, ih);
    return im;
}

Image2D random_image(int nw, int nh, double pw, double ph, std::uint64_t seed) {
    Image2D im(nw, nh, pw, ph);
    std::mt19937_64 rng(seed);
    testutil::fill_random(im.data, rng);
    return im;
}

SimilarityConfig ngf_cfg(double eps, NgfVariant v = NgfVariant::kSquaredCosine) {
    SimilarityConfig c;
    c.kind = SimilarityKind::kNgf;
    c.variant = v;
    c.ngf_epsilon = eps;
    return c;
}

SimilarityConfig plain_cfg(SimilarityKind k) {
    SimilarityConfig c;
    c.kind = k;
    return c;
}

void check_fd(const Image2D& a, const Image2D& b, const SimilarityConfig& cfg, double tol,
              std::uint64_t seed) {
    Image2D grad(a.nw, a.nh, a.pw, a.ph);
    similarity(a, b, cfg, &grad, 1.0);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, a.data.size() - 1);
    const double h = 1e-6;
    for (int t = 0; t < 12; ++t) {
        const std::size_t i = pick(rng);
        Image2D plus = a, minus = a;
        plus.data[i] += h;
        minus.data[i] -= h;
        const double fd = (similarity(plus, b, cfg) - similarity(minus, b, cfg)) / (2 * h);
        CHECK(scaled_err(grad.data[i], fd, 1.0) < tol);
    }
}

}  // namespace

TEST_SUITE("similarity") {
    TEST_CASE("identical images score zero for every measure") {
        const Image2D a = random_image(9, 7, 1.1, 0.9, 11);
        for (SimilarityKind k : {SimilarityKind::kSsd, SimilarityKind::kL1}) {
            Image2D grad(9, 7, 1.1, 0.9);
            const double v = similarity(a, a, plain_cfg(k), &grad);
            CHECK(v == 0.0);
        }
        for (NgfVariant var : {NgfVariant::kSquaredCosine, NgfVariant::kPlain}) {
            Image2D grad(9, 7, 1.1, 0.9);
            const double v = similarity(a, a, ngf_cfg(0.05, var), &grad);
            CHECK(v > -1e-12);  // rho can exceed 1 by an ulp
            CHECK(v < 0.05);    // only the epsilon relaxation keeps this above 0
            // perfectly aligned gradients sit at a stationary point
            for (double g : grad.data) CHECK(std::abs(g) < 1e-8);
        }
    }

    TEST_CASE("constant images are invisible to every measure") {
        Image2D a(8, 8, 1.0, 1.0, 3.7);
        Image2D b(8, 8, 1.0, 1.0, -1.2);
        CHECK(similarity(a, b, ngf_cfg(0.01)) == doctest::Approx(0.0));
        // NGF with zero gradients everywhere: rho = eps^2/eps^2 = 1
        CHECK(similarity(a, b, ngf_cfg(0.01, NgfVariant::kPlain)) == doctest::Approx(0.0));
    }

    TEST_CASE("orthogonal ramps match the closed-form NGF value") {
        // A varies only along x, B only along y; with gradients (2,0) and
        // (0,3), rho = eps^2 / (sqrt(4+eps^2) sqrt(9+eps^2)) at every pixel.
        auto fa = [](int iw, int ih) { return 2.0 * (iw * 1.25) + 0.0 * ih; };
        auto fb = [](int iw, int ih) { return 3.0 * (ih * 0.8) + 0.0 * iw; };
        const Image2D a = make_image(6, 5, 1.25, 0.8, fa);
        const Image2D b = make_image(6, 5, 1.25, 0.8, fb);
        const double sq = similarity(a, b, ngf_cfg(0.05));
        const double pl = similarity(a, b, ngf_cfg(0.05, NgfVariant::kPlain));
        CHECK(rel_err(sq, 0.99999982654550956) < 1e-12);
        CHECK(rel_err(pl, 0.99958352132090789) < 1e-12);
        // closed form as a cross-check of the oracle itself
        const double rho = 0.0025 / (std::sqrt(4.0 + 0.0025) * std::sqrt(9.0 + 0.0025));
        CHECK(rel_err(sq, 1.0 - rho * rho) < 1e-12);
    }

    TEST_CASE("generic images match the frozen oracle values") {
        auto fa = [](int iw, int ih) { return std::sin(0.9 * iw) + 0.3 * ih; };
        auto fb = [](int iw, int ih) { return std::cos(0.6 * iw) * (1.0 + 0.1 * ih); };
        const Image2D a = make_image(7, 6, 0.7, 1.1, fa);
        const Image2D b = make_image(7, 6, 0.7, 1.1, fb);
        CHECK(rel_err(similarity(a, b, ngf_cfg(0.1)), 0.44905865543528767) < 1e-12);
        CHECK(rel_err(similarity(a, b, ngf_cfg(0.1, NgfVariant::kPlain)), 0.76467480231183582) <
              1e-12);
        CHECK(rel_err(similarity(a, b, plain_cfg(SimilarityKind::kSsd)), 1.4379156357876997) <
              1e-12);
        CHECK(rel_err(similarity(a, b, plain_cfg(SimilarityKind::kL1)), 1.012186995173217) <
              1e-12);
    }

    TEST_CASE("NGF ignores additive offsets and is insensitive to positive scaling") {
        const Image2D a = random_image(10, 9, 1.0, 1.0, 21);
        Image2D b = random_image(10, 9, 1.0, 1.0, 22);
        const SimilarityConfig cfg = ngf_cfg(0.08);
        const double base = similarity(a, b, cfg);

        Image2D b_off = b;
        for (double& x : b_off.data) x += 5.0;
        CHECK(rel_err(similarity(a, b_off, cfg), base) < 1e-12);

        // scaling changes the epsilon balance only mildly
        Image2D b_scaled = b;
        for (double& x : b_scaled.data) x *= 10.0;
        CHECK(std::abs(similarity(a, b_scaled, cfg) - base) < 0.05);

        // SSD is offset sensitive, as a contrast
        CHECK(similarity(a, b_off, plain_cfg(SimilarityKind::kSsd)) >
              similarity(a, b, plain_cfg(SimilarityKind::kSsd)) + 1.0);
    }

    TEST_CASE("gradient scales linearly with upstream and vanishes for upstream zero") {
        const Image2D a = random_image(8, 7, 0.9, 1.2, 31);
        const Image2D b = random_image(8, 7, 0.9, 1.2, 32);
        const SimilarityConfig cfg = ngf_cfg(0.1);
        Image2D g1(8, 7, 0.9, 1.2), g3(8, 7, 0.9, 1.2), g0(8, 7, 0.9, 1.2);
        similarity(a, b, cfg, &g1, 1.0);
        similarity(a, b, cfg, &g3, -3.0);
        similarity(a, b, cfg, &g0, 0.0);
        for (std::size_t i = 0; i < g1.data.size(); ++i) {
            CHECK(scaled_err(g3.data[i], -3.0 * g1.data[i], 1e-6) < 1e-11);
            CHECK(g0.data[i] == 0.0);
        }
    }

    TEST_CASE("gradients match finite differences") {
        const Image2D a = random_image(9, 8, 1.3, 0.8, 41);
        const Image2D b = random_image(9, 8, 1.3, 0.8, 42);
        SUBCASE("ngf squared") { check_fd(a, b, ngf_cfg(0.1), 1e-4, 43); }
        SUBCASE("ngf plain") { check_fd(a, b, ngf_cfg(0.1, NgfVariant::kPlain), 1e-4, 44); }
        SUBCASE("ssd") { check_fd(a, b, plain_cfg(SimilarityKind::kSsd), 1e-6, 45); }
        SUBCASE("l1 away from ties") {
            // keep |a-b| bounded away from zero so the subgradient is smooth
            Image2D a2 = a;
            for (std::size_t i = 0; i < a2.data.size(); ++i)
                a2.data[i] = b.data[i] + (a2.data[i] > b.data[i] ? 1.0 : -1.0) +
                             0.3 * (a2.data[i] - b.data[i]);
            check_fd(a2, b, plain_cfg(SimilarityKind::kL1), 1e-6, 46);
        }
    }

    TEST_CASE("volume overload agrees with finite differences") {
        const Volume3D a = testutil::random_volume({7, 6, 5}, {1.0, 1.2, 0.9}, {0, 0, 0}, 51);
        const Volume3D b = testutil::random_volume({7, 6, 5}, {1.0, 1.2, 0.9}, {0, 0, 0}, 52);
        for (const SimilarityConfig& cfg :
             {ngf_cfg(0.1), ngf_cfg(0.1, NgfVariant::kPlain), plain_cfg(SimilarityKind::kSsd)}) {
            Volume3D grad({7, 6, 5}, {1.0, 1.2, 0.9}, {0, 0, 0});
            similarity(a, b, cfg, &grad, 1.0);
            std::mt19937_64 rng(53);
            std::uniform_int_distribution<std::size_t> pick(0, a.data.size() - 1);
            const double h = 1e-6;
            for (int t = 0; t < 6; ++t) {
                const std::size_t i = pick(rng);
                Volume3D plus = a, minus = a;
                plus.data[i] += h;
                minus.data[i] -= h;
                const double fd = (similarity(plus, b, cfg) - similarity(minus, b, cfg)) / (2 * h);
                CHECK(scaled_err(grad.data[i], fd, 1.0) < 1e-4);
            }
        }
        // identical volumes score zero similarity for intensity measures
        CHECK(similarity(a, a, plain_cfg(SimilarityKind::kSsd)) == 0.0);
    }

    TEST_CASE("mismatched shapes are rejected") {
        const Image2D a = random_image(6, 6, 1.0, 1.0, 61);
        const Image2D b = random_image(6, 5, 1.0, 1.0, 62);
        CHECK_THROWS_AS(similarity(a, b, plain_cfg(SimilarityKind::kSsd)),
                        std::invalid_argument);
    }

    TEST_CASE("string parsers cover the documented names") {
        CHECK(similarity_kind_from_string("ngf") == SimilarityKind::kNgf);
        CHECK(similarity_kind_from_string("ssd") == SimilarityKind::kSsd);
        CHECK(similarity_kind_from_string("l1") == SimilarityKind::kL1);
        CHECK(ngf_variant_from_string("squared") == NgfVariant::kSquaredCosine);
        CHECK(ngf_variant_from_string("plain") == NgfVariant::kPlain);
        CHECK_THROWS_AS(similarity_kind_from_string("mi"), std::invalid_argument);
        CHECK_THROWS_AS(ngf_variant_from_string(""), std::invalid_argument);
    }

    TEST_CASE("ngf requires a positive epsilon") {
        const Image2D a = random_image(6, 6, 1.0, 1.0, 71);
        CHECK_THROWS_AS(similarity(a, a, ngf_cfg(0.0)), std::invalid_argument);
    }
}

TEST_SUITE("auto epsilon") {
    TEST_CASE("percentile tracks the gradient magnitude distribution") {
        // A pure x-ramp of slope s has |grad| = s at interior pixels and at
        // the one-sided boundary columns as well.
        auto ramp = [](int iw, int ih) { return 4.0 * iw + 0.0 * ih; };
        const Image2D a = make_image(12, 10, 1.0, 1.0, ramp);
        const double rm = robust_max_gradient({a});
        CHECK(rel_err(rm, 4.0) < 1e-12);
        CHECK(rel_err(ngf_auto_epsilon(rm), 0.04) < 1e-12);
    }

    TEST_CASE("volume overload and outlier robustness") {
        Volume3D v({12, 12, 12}, {1, 1, 1}, {0, 0, 0}, 0.0);
        for (int k = 0; k < 12; ++k)
            for (int j = 0; j < 12; ++j)
                for (int i = 0; i < 12; ++i) v.at(i, j, k) = 2.0 * i;
        const double base = robust_max_gradient(v);
        CHECK(rel_err(base, 2.0) < 1e-12);
        // a single spike shifts the 99th percentile at most mildly
        Volume3D spiked = v;
        spiked.at(6, 6, 6) += 1000.0;
        const double rm = robust_max_gradient(spiked);
        CHECK(rm < 100.0);
    }

    TEST_CASE("epsilon floor keeps constant images usable") {
        CHECK(ngf_auto_epsilon(0.0) > 0.0);
        const Image2D flat(8, 8, 1.0, 1.0, 5.0);
        const double eps = ngf_auto_epsilon(robust_max_gradient({flat}));
        CHECK(eps > 0.0);
        CHECK(similarity(flat, flat, ngf_cfg(eps)) == doctest::Approx(0.0));
    }
}
