#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lpsd/forward_model.hpp"
#include "lpsd/metrics.hpp"
#include "lpsd/rng.hpp"
#include "test_util.hpp"

using namespace lpsd;

TEST_CASE("ricker wavelet center, symmetry and sampled values") {
    const Wavelet w = make_ricker(40.0, 0.002, 25);
    REQUIRE(w.length() == 51);
    CHECK(w.peak_index == 25);
    CHECK(w.samples[25] == 1.0);

    for (std::int64_t k = 1; k <= 25; ++k)
        CHECK(w.samples[static_cast<std::size_t>(25 - k)] ==
              w.samples[static_cast<std::size_t>(25 + k)]);

    // Independent scalar evaluation of the closed form at t = dt.
    const double t = 0.002;
    const double a = std::numbers::pi * std::numbers::pi * 40.0 * 40.0 * t * t;
    CHECK(w.samples[26] == doctest::Approx((1.0 - 2.0 * a) * std::exp(-a))
                               .epsilon(1e-14));

    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::fabs(v));
    CHECK(peak == 1.0);
}

TEST_CASE("ricker rejects bad arguments") {
    CHECK_THROWS_AS(make_ricker(0.0, 0.002, 25), std::invalid_argument);
    CHECK_THROWS_AS(make_ricker(-40.0, 0.002, 25), std::invalid_argument);
    CHECK_THROWS_AS(make_ricker(40.0, 0.0, 25), std::invalid_argument);
    CHECK_THROWS_AS(make_ricker(40.0, 0.002, 0), std::invalid_argument);
}

TEST_CASE("impulse wavelet gives the identity operator") {
    Wavelet w;
    w.samples = {1.0};
    w.peak_index = 0;
    const ConvOperator op(w, 8);
    rng::Stream s(1);
    const Grid x = testutil::random_grid(8, 1, s);
    const Grid y = op.apply(x);
    CHECK(y.v == x.v);
    const Grid z = op.apply_adjoint(x);
    CHECK(z.v == x.v);
}

TEST_CASE("operator columns match the dense construction") {
    Wavelet w;
    w.samples = {1.0, 1.0};
    w.peak_index = 0;
    const ConvOperator op(w, 3);
    const auto dense = testutil::dense_toeplitz(w, 3);
    for (std::int64_t j = 0; j < 3; ++j) {
        Grid e(3, 1);
        e.at(j, 0) = 1.0;
        const Grid col = op.apply(e);
        for (std::int64_t i = 0; i < 3; ++i)
            CHECK(col.at(i, 0) == dense[static_cast<std::size_t>(i * 3 + j)]);
    }
}

TEST_CASE("wavelet longer than n is rejected") {
    const Wavelet w = make_ricker(40.0, 0.002, 25);
    CHECK_THROWS_AS(ConvOperator(w, 50), std::invalid_argument);
    CHECK_NOTHROW(ConvOperator(w, 51));
}

TEST_CASE("adjoint identity holds to 1e-10") {
    const Wavelet w = make_ricker(40.0, 0.002, 10);
    const ConvOperator op(w, 64);
    rng::Stream s(2);
    for (int trial = 0; trial < 10; ++trial) {
        const Grid u = testutil::random_grid(64, 1, s);
        const Grid v = testutil::random_grid(64, 1, s);
        const Grid au = op.apply(u);
        const Grid atv = op.apply_adjoint(v);
        double lhs = 0.0, rhs = 0.0, nu = 0.0, nv = 0.0;
        for (std::int64_t i = 0; i < 64; ++i) {
            lhs += au.at(i, 0) * v.at(i, 0);
            rhs += u.at(i, 0) * atv.at(i, 0);
            nu += u.at(i, 0) * u.at(i, 0);
            nv += v.at(i, 0) * v.at(i, 0);
        }
        CHECK(std::fabs(lhs - rhs) < 1e-10 * std::sqrt(nu) * std::sqrt(nv));
    }
}

TEST_CASE("apply matches the dense oracle on random inputs") {
    const Wavelet w = make_ricker(35.0, 0.002, 12);
    const ConvOperator op(w, 128);
    const auto dense = testutil::dense_toeplitz(w, 128);
    rng::Stream s(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = testutil::random_vector(128, s);
        Grid gx(128, 1);
        gx.v = x;

        const Grid y = op.apply(gx);
        const auto y_ref = testutil::dense_matvec(dense, x, 128, false);
        CHECK(testutil::max_abs_diff(y.v, y_ref) < 1e-10);

        const Grid z = op.apply_adjoint(gx);
        const auto z_ref = testutil::dense_matvec(dense, x, 128, true);
        CHECK(testutil::max_abs_diff(z.v, z_ref) < 1e-10);
    }
}

TEST_CASE("apply is linear and zero maps to zero") {
    const Wavelet w = make_ricker(40.0, 0.002, 8);
    const ConvOperator op(w, 48);
    const Grid zero(48, 1);
    CHECK(op.apply(zero).v == zero.v);

    rng::Stream s(4);
    const Grid u = testutil::random_grid(48, 1, s);
    const Grid v = testutil::random_grid(48, 1, s);
    Grid lin(48, 1);
    for (std::int64_t i = 0; i < 48; ++i)
        lin.at(i, 0) = 2.5 * u.at(i, 0) - 1.25 * v.at(i, 0);
    const Grid lhs = op.apply(lin);
    const Grid au = op.apply(u);
    const Grid av = op.apply(v);
    for (std::int64_t i = 0; i < 48; ++i) {
        const double want = 2.5 * au.at(i, 0) - 1.25 * av.at(i, 0);
        CHECK(std::fabs(lhs.at(i, 0) - want) <=
              1e-10 * std::max(1.0, std::fabs(want)));
    }
}

TEST_CASE("a single spike reproduces the shifted wavelet") {
    const Wavelet w = make_ricker(40.0, 0.002, 6);
    const ConvOperator op(w, 40);
    Grid x(40, 1);
    const std::int64_t j = 20;
    x.at(j, 0) = -2.0;
    const Grid y = op.apply(x);
    for (std::int64_t i = 0; i < 40; ++i) {
        const std::int64_t k = i - j + w.peak_index;
        const double want =
            (k >= 0 && k < w.length())
                ? -2.0 * w.samples[static_cast<std::size_t>(k)]
                : 0.0;
        CHECK(y.at(i, 0) == doctest::Approx(want).epsilon(1e-14));
    }
    CHECK(y.at(j, 0) == doctest::Approx(-2.0)); // peak lands on the spike
}

TEST_CASE("2D apply equals column-by-column 1D application") {
    const Wavelet w = make_ricker(40.0, 0.002, 8);
    const ConvOperator op(w, 32);
    rng::Stream s(5);
    const Grid x = testutil::random_grid(32, 6, s);
    const Grid y = op.apply(x);
    for (std::int64_t j = 0; j < 6; ++j) {
        Grid col(32, 1);
        for (std::int64_t i = 0; i < 32; ++i) col.at(i, 0) = x.at(i, j);
        const Grid ycol = op.apply(col);
        for (std::int64_t i = 0; i < 32; ++i)
            CHECK(y.at(i, j) == ycol.at(i, 0));
    }
}

TEST_CASE("dense materialization agrees with matrix-free paths") {
    const Wavelet w = make_ricker(40.0, 0.002, 10);
    const ConvOperator op(w, 96);
    const auto a = op.dense();
    const auto a_ref = testutil::dense_toeplitz(w, 96);
    CHECK(a == a_ref);

    const ConvOperator big(make_ricker(40.0, 0.002, 25), 2048);
    CHECK_THROWS_AS(big.dense(), std::invalid_argument);
}

TEST_CASE("corrupt hits the requested SNR exactly") {
    const Wavelet w = make_ricker(40.0, 0.002, 10);
    const ConvOperator op(w, 100);
    rng::Stream s(6);
    Grid x(100, 1);
    x.at(20, 0) = 1.0;
    x.at(55, 0) = -0.7;
    const Grid clean = op.apply(x);

    SUBCASE("noiseless returns the input bitwise") {
        const Grid out = corrupt(clean, NoiseSpec::noiseless());
        CHECK(out.v == clean.v);
    }

    SUBCASE("snr 20 measured back at 1e-9 dB") {
        const Grid out = corrupt(clean, NoiseSpec::at(20.0, 77));
        CHECK(metrics::measured_snr_db(clean, out) ==
              doctest::Approx(20.0).epsilon(1e-12));
        CHECK(std::fabs(metrics::measured_snr_db(clean, out) - 20.0) < 1e-9);
    }

    SUBCASE("same seed at 15 vs 35 dB scales noise by exactly 10x") {
        const Grid y15 = corrupt(clean, NoiseSpec::at(15.0, 123));
        const Grid y35 = corrupt(clean, NoiseSpec::at(35.0, 123));
        double e15 = 0.0, e35 = 0.0;
        for (std::int64_t i = 0; i < 100; ++i) {
            const double d15 = y15.at(i, 0) - clean.at(i, 0);
            const double d35 = y35.at(i, 0) - clean.at(i, 0);
            e15 += d15 * d15;
            e35 += d35 * d35;
        }
        CHECK(std::sqrt(e15 / e35) == doctest::Approx(10.0).epsilon(1e-12));
    }

    SUBCASE("all-zero signal with finite SNR is invalid") {
        const Grid zero(100, 1);
        CHECK_THROWS_AS(corrupt(zero, NoiseSpec::at(20.0, 1)),
                        std::invalid_argument);
        CHECK_NOTHROW(corrupt(zero, NoiseSpec::noiseless()));
    }
}

TEST_CASE("operator and oracle agree across random instances") {
    rng::Stream s(7);
    for (int trial = 0; trial < 25; ++trial) {
        const std::int64_t n = 16 + static_cast<std::int64_t>(s.below(241));
        const std::int64_t hw =
            1 + static_cast<std::int64_t>(s.below(
                    static_cast<std::uint64_t>((n - 1) / 2)));
        const Wavelet w = make_ricker(20.0 + 40.0 * s.uniform(), 0.002, hw);
        const ConvOperator op(w, n);
        const auto dense = testutil::dense_toeplitz(w, n);
        const auto x = testutil::random_vector(n, s);
        Grid gx(n, 1);
        gx.v = x;
        CHECK(testutil::max_abs_diff(op.apply(gx).v,
                                     testutil::dense_matvec(dense, x, n, false)) <
              1e-10);
        CHECK(testutil::max_abs_diff(op.apply_adjoint(gx).v,
                                     testutil::dense_matvec(dense, x, n, true)) <
              1e-10);
    }
}
