#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tomoreg/field.hpp"
#include "tomoreg/fieldops.hpp"
#include "tomoreg/vec.hpp"
#include "tomoreg/volume.hpp"

#include "helpers.hpp"

using namespace tomoreg;
using testutil::rel_err;

TEST_SUITE("vec") {
    TEST_CASE("mat3 determinant and products") {
        Mat3 a;
        a.m = {2, 0, 0, 0, 3, 0, 0, 0, 4};
        CHECK(a.det() == doctest::Approx(24.0));
        const Vec3 v = a * Vec3{1, 1, 1};
        CHECK(v.x == 2.0);
        CHECK(v.y == 3.0);
        CHECK(v.z == 4.0);
        CHECK(Mat3::identity().det() == 1.0);
    }

    TEST_CASE("rotation about z maps x to y") {
        const Mat3 r = Mat3::rotation(Vec3{0, 0, 1}, std::numbers::pi / 2);
        const Vec3 y = r * Vec3{1, 0, 0};
        CHECK(std::abs(y.x) < 1e-15);
        CHECK(y.y == doctest::Approx(1.0));
        CHECK(std::abs(y.z) < 1e-15);
        CHECK(r.det() == doctest::Approx(1.0));
    }

    TEST_CASE("frobenius distance to identity") {
        CHECK(Mat3::identity().frobenius_dist_to_identity() == 0.0);
        Mat3 a = Mat3::identity();
        a(0, 1) = 3.0;
        a(2, 2) = 1.0 + 4.0;
        CHECK(a.frobenius_dist_to_identity() == doctest::Approx(5.0));
    }
}

TEST_SUITE("trilinear") {
    TEST_CASE("lattice points are exact") {
        const Volume3D v = testutil::random_volume({4, 5, 3}, {1, 1, 1}, {0, 0, 0}, 11);
        CHECK(trilinear_sample(v, {2, 3, 1}) == v.at(2, 3, 1));
        CHECK(trilinear_sample(v, {0, 0, 0}) == v.at(0, 0, 0));
        CHECK(trilinear_sample(v, {3, 4, 2}) == v.at(3, 4, 2));
    }

    TEST_CASE("constants are reproduced in the interior") {
        Volume3D v({4, 4, 4}, {1, 1, 1}, {0, 0, 0}, 7.5);
        CHECK(trilinear_sample(v, {1.3, 2.7, 0.4}) == doctest::Approx(7.5).epsilon(1e-14));
    }

    TEST_CASE("midpoint of 2 and 6 along one axis is 4") {
        Volume3D v({2, 1, 1}, {1, 1, 1}, {0, 0, 0});
        v.at(0, 0, 0) = 2.0;
        v.at(1, 0, 0) = 6.0;
        CHECK(trilinear_sample(v, {0.5, 0.0, 0.0}) == doctest::Approx(4.0));
    }

    TEST_CASE("componentwise-linear volumes are exact at interior points") {
        Volume3D v({5, 5, 5}, {1, 1, 1}, {0, 0, 0});
        auto f = [](double x, double y, double z) { return 2.0 * x - 0.5 * y + 3.0 * z + 1.0; };
        for (int k = 0; k < 5; ++k)
            for (int j = 0; j < 5; ++j)
                for (int i = 0; i < 5; ++i) v.at(i, j, k) = f(i, j, k);
        CHECK(trilinear_sample(v, {1.25, 2.5, 3.75}) ==
              doctest::Approx(f(1.25, 2.5, 3.75)).epsilon(1e-13));
    }

    TEST_CASE("zero padding outside the support") {
        const Volume3D v = testutil::random_volume({3, 3, 3}, {1, 1, 1}, {0, 0, 0}, 3);
        CHECK(trilinear_sample(v, {-1.5, 1, 1}) == 0.0);
        CHECK(trilinear_sample(v, {1, 1, 3.0}) == 0.0);
        CHECK(trilinear_sample(v, {100, 0, 0}) == 0.0);
        const Vec3 g = trilinear_sample_grad(v, {-1.5, 1, 1});
        CHECK(g.x == 0.0);
        CHECK(g.y == 0.0);
        CHECK(g.z == 0.0);
        // Partial overlap in the one-voxel padding band still interpolates
        // the in-range corners.
        Volume3D ones({3, 3, 3}, {1, 1, 1}, {0, 0, 0}, 1.0);
        CHECK(trilinear_sample(ones, {-0.25, 1, 1}) == doctest::Approx(0.75));
    }

    TEST_CASE("spatial gradient matches finite differences") {
        const Volume3D v = testutil::random_volume({6, 6, 6}, {1, 1, 1}, {0, 0, 0}, 19);
        const double h = 1e-6;
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> pos(1.2, 3.8);
        for (int t = 0; t < 10; ++t) {
            const Vec3 q{pos(rng), pos(rng), pos(rng)};
            const Vec3 g = trilinear_sample_grad(v, q);
            const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
            const double gs[3] = {g.x, g.y, g.z};
            for (int a = 0; a < 3; ++a) {
                const double fd = (trilinear_sample(v, q + axes[a] * h) -
                                   trilinear_sample(v, q - axes[a] * h)) /
                                  (2 * h);
                CHECK(testutil::scaled_err(gs[a], fd, 1e-9) < 1e-6);
            }
        }
    }

    TEST_CASE("vjp: voxel-centre query puts full weight on one corner") {
        const Volume3D v = testutil::random_volume({4, 4, 4}, {1, 1, 1}, {0, 0, 0}, 23);
        const TrilinearVjp vjp = trilinear_sample_vjp(v, {2, 1, 3}, 2.5);
        double total = 0.0;
        double at_corner = 0.0;
        for (int c = 0; c < vjp.n_corners; ++c) {
            total += vjp.corner_grad[c];
            if (vjp.corner_index[c] == v.index(2, 1, 3)) at_corner = vjp.corner_grad[c];
        }
        CHECK(at_corner == doctest::Approx(2.5));
        CHECK(total == doctest::Approx(2.5));
    }

    TEST_CASE("scatter is the exact adjoint of sampling") {
        const Volume3D v = testutil::random_volume({5, 4, 6}, {1, 1, 1}, {0, 0, 0}, 29);
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> pos(-0.5, 4.2);
        for (int t = 0; t < 20; ++t) {
            const Vec3 q{pos(rng), pos(rng), pos(rng)};
            const double u = 1.7;
            Volume3D scat(v.dims, v.spacing, v.origin, 0.0);
            trilinear_scatter(scat, q, u);
            double lhs = 0.0;
            for (std::size_t i = 0; i < v.data.size(); ++i) lhs += scat.data[i] * v.data[i];
            const double rhs = u * trilinear_sample(v, q);
            CHECK(testutil::scaled_err(lhs, rhs, 1e-12) < 1e-12);
        }
    }
}

TEST_SUITE("field") {
    TEST_CASE("identity map stores grid coordinates exactly") {
        const DeformationMap m = identity_map({3, 4, 2}, {1.5, 1.0, 2.0}, {-1.0, 0.5, 3.0});
        for (int k = 0; k < 2; ++k)
            for (int j = 0; j < 4; ++j)
                for (int i = 0; i < 3; ++i) {
                    const Vec3 p = m.at(i, j, k);
                    CHECK(p.x == -1.0 + 1.5 * i);
                    CHECK(p.y == 0.5 + 1.0 * j);
                    CHECK(p.z == 3.0 + 2.0 * k);
                }
    }

    TEST_CASE("axpy and dot") {
        VectorField3 a({2, 2, 2}, {1, 1, 1}, {0, 0, 0}, 1.0);
        VectorField3 b({2, 2, 2}, {1, 1, 1}, {0, 0, 0}, 2.0);
        field_axpy(3.0, a, b);  // b = 3a + b = 5 everywhere
        CHECK(b.data[0] == 5.0);
        CHECK(field_dot(a, b) == doctest::Approx(5.0 * 3 * 8));
    }
}

TEST_SUITE("fieldops") {
    TEST_CASE("central derivative is exact on linear data, including boundaries") {
        Volume3D v({6, 5, 4}, {0.5, 1.0, 2.0}, {0, 0, 0});
        for (int k = 0; k < 4; ++k)
            for (int j = 0; j < 5; ++j)
                for (int i = 0; i < 6; ++i)
                    v.at(i, j, k) = 3.0 * (i * 0.5) - 2.0 * (j * 1.0) + 0.25 * (k * 2.0);
        const GridView g = GridView::of(v);
        std::vector<double> d(v.data.size());
        central_derivative(v.data.data(), d.data(), g, 0);
        for (double x : d) CHECK(x == doctest::Approx(3.0).epsilon(1e-12));
        central_derivative(v.data.data(), d.data(), g, 1);
        for (double x : d) CHECK(x == doctest::Approx(-2.0).epsilon(1e-12));
        central_derivative(v.data.data(), d.data(), g, 2);
        for (double x : d) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));
    }

    TEST_CASE("derivative adjoints satisfy the dot-product identity") {
        const std::array<int, 3> dims{5, 4, 3};
        Volume3D f = testutil::random_volume(dims, {0.7, 1.3, 0.9}, {0, 0, 0}, 41);
        Volume3D u = testutil::random_volume(dims, {0.7, 1.3, 0.9}, {0, 0, 0}, 43);
        const GridView g = GridView::of(f);
        for (int axis = 0; axis < 3; ++axis) {
            std::vector<double> df(f.data.size());
            central_derivative(f.data.data(), df.data(), g, axis);
            std::vector<double> dtu(f.data.size(), 0.0);
            central_derivative_adjoint(u.data.data(), dtu.data(), g, axis);
            double lhs = 0.0, rhs = 0.0;
            for (std::size_t i = 0; i < df.size(); ++i) {
                lhs += df[i] * u.data[i];
                rhs += f.data[i] * dtu[i];
            }
            CHECK(rel_err(lhs, rhs) < 1e-13);

            forward_derivative(f.data.data(), df.data(), g, axis);
            std::fill(dtu.begin(), dtu.end(), 0.0);
            forward_derivative_adjoint(u.data.data(), dtu.data(), g, axis);
            lhs = rhs = 0.0;
            for (std::size_t i = 0; i < df.size(); ++i) {
                lhs += df[i] * u.data[i];
                rhs += f.data[i] * dtu[i];
            }
            CHECK(rel_err(lhs, rhs) < 1e-13);
        }
    }

    TEST_CASE("gaussian taps: near-unit mass, symmetric, peaked at the centre") {
        const std::vector<double> taps = gaussian_taps(2.0, 1.0);
        CHECK(taps.size() == 17);  // radius ceil(4*2/1) = 8
        double mass = 0.0;
        for (double t : taps) mass += t;
        CHECK(std::abs(mass - 1.0) < 1e-4);
        const std::size_t c = taps.size() / 2;
        for (std::size_t i = 0; i + 1 < taps.size(); ++i)
            CHECK(taps[i] == doctest::Approx(taps[taps.size() - 1 - i]).epsilon(1e-14));
        for (std::size_t i = 0; i < c; ++i) CHECK(taps[i] < taps[i + 1]);
    }

    TEST_CASE("gaussian blur preserves constants in the interior") {
        Volume3D v({21, 21, 21}, {1, 1, 1}, {0, 0, 0}, 3.25);
        Volume3D out = v;
        gaussian_blur(v.data.data(), out.data.data(), GridView::of(v), 1.5);
        CHECK(out.at(10, 10, 10) == doctest::Approx(3.25).epsilon(1e-4));
        // zero-padded boundary attenuates
        CHECK(out.at(0, 10, 10) < 3.25);
    }
}
