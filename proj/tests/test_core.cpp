/// Regime rule, threshold formula, rate functions, preset moments and transforms.

#include <cmath>

#include "doctest.h"
#include "mgt/core.hpp"

using namespace mgt;

TEST_CASE("regime follows the sign of delta") {
    CHECK(classify_regime({0.5, 1.0, 0.0, 1}) == Regime::Viscous);
    CHECK(classify_regime({0.5, 0.0, 0.0, 1}) == Regime::Inviscid);
    CHECK(classify_regime({0.5, -0.1, 0.0, 1}) == Regime::Chaotic);
}

TEST_CASE("epsilon0 values") {
    CHECK(epsilon0({1.0, 1.0, 0.0, 1}) == doctest::Approx(1.0 / 13.0).epsilon(1e-14));
    CHECK(epsilon0({0.5, 2.0, 0.0, 1}) == doctest::Approx(1.0 / 22.0).epsilon(1e-14));
    const double e = epsilon0({1.0, 2.0, 0.0, 1});
    CHECK(e == doctest::Approx(1.0 / 36.0));
    // (1.01)(19.01) - 27 < 0: small delta against tau = 1 has no threshold
    CHECK_THROWS_AS(epsilon0({1.0, 0.01, 0.0, 1}), Error);
    // (0.1 + 1)(0.1 + 19) - 27 < 0
    CHECK_THROWS_AS(epsilon0({1.0, 0.1, 0.0, 1}), Error);
    // capped at one when the denominator is below one
    CHECK(epsilon0({0.01, 0.5, 0.0, 1}) == 1.0);
}

TEST_CASE("rate functions") {
    CHECK(rate_eval({RateFamily::D, 1, 0.0}, 3.0) == doctest::Approx(2.0));
    CHECK(rate_eval({RateFamily::D, 3, 0.0}, 0.0) == doctest::Approx(1.0));
    CHECK(rate_eval({RateFamily::Ds, 2, 2.0}, 15.0) == doctest::Approx(0.0625));
    CHECK(rate_eval({RateFamily::D, 2, 0.0}, 0.0) == doctest::Approx(1.0));
    for (int n = 1; n <= 3; ++n) {
        for (double t : {0.0, 0.7, 12.0, 1e4}) CHECK(rate_Ds(n, 0.0, t) == rate_D(n, t));
        for (double s : {1.0, 2.0, 3.5}) {
            double prev = rate_Ds(n, s, 0.0);
            for (double t = 0.5; t < 1e5; t *= 3.0) {
                const double v = rate_Ds(n, s, t);
                CHECK(v <= prev);
                prev = v;
            }
        }
    }
    CHECK(rate_tildeDs(1, 1.0, 3.0) == doctest::Approx(std::pow(4.0, -0.25)));
    CHECK(rate_tildeDs(2, 0.0, 0.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(rate_Ds(1, 0.5, 1.0), Error);
}

TEST_CASE("preset moments") {
    DataPreset g{PresetKind::Gaussian, 1.0, 1.0, {0, 0, 0}, 0};
    auto m = moments(g, 1);
    CHECK(m.M == doctest::Approx(std::sqrt(kPi)));
    CHECK(m.P[0] == 0.0);

    DataPreset s{PresetKind::ShiftedGaussian, 2.0, 1.0, {1.0, 0, 0}, 0};
    m = moments(s, 1);
    CHECK(m.M == doctest::Approx(2.0 * std::sqrt(kPi)));
    CHECK(m.P[0] == doctest::Approx(2.0 * std::sqrt(kPi)));

    for (int n = 1; n <= 3; ++n) {
        DataPreset z{PresetKind::ZeroMean, 1.3, 0.7, {0, 0, 0}, 1};
        CHECK(moments(z, n).M == 0.0);
        CHECK(std::abs(data_hat(z, n, {0, 0, 0})) < 1e-14);
    }
    DataPreset dg{PresetKind::DerivativeGaussian, 1.0, 1.0, {0, 0, 0}, 0};
    CHECK(std::abs(data_hat(dg, 1, {0, 0, 0})) == 0.0);
}

TEST_CASE("data_hat at zero equals the mass") {
    for (int n = 1; n <= 3; ++n) {
        for (auto kind : {PresetKind::Gaussian, PresetKind::ShiftedGaussian, PresetKind::ZeroMean,
                          PresetKind::DerivativeGaussian}) {
            DataPreset d{kind, 0.8, 1.7, {0, 0, 0}, 0};
            if (kind == PresetKind::ShiftedGaussian || kind == PresetKind::DerivativeGaussian)
                d.center = {0.3, -0.2, 0.5};
            const auto m = moments(d, n);
            const cd h = data_hat(d, n, {0, 0, 0});
            CHECK(std::abs(h - m.M) <= 1e-12 * std::max(1.0, std::abs(m.M)));
        }
    }
}

namespace {
// trapezoid on a wide interval is spectrally accurate for Gaussians
cd transform_1d(const DataPreset& d, double k) {
    const double L = 12.0 * d.width + std::abs(d.center[0]);
    const int N = 4000;
    const double h = 2.0 * L / N;
    cd s = 0.0;
    for (int j = 0; j <= N; ++j) {
        const double x = -L + j * h;
        s += data_value(d, 1, {x, 0, 0}) * std::polar(1.0, -k * x);
    }
    return s * h;
}
}  // namespace

TEST_CASE("data_hat agrees with numerical quadrature of the transform") {
    for (auto kind : {PresetKind::Gaussian, PresetKind::ShiftedGaussian, PresetKind::ZeroMean,
                      PresetKind::DerivativeGaussian}) {
        DataPreset d{kind, 1.0, 1.3, {0, 0, 0}, 0};
        if (kind == PresetKind::ShiftedGaussian || kind == PresetKind::DerivativeGaussian) d.center = {0.7, 0, 0};
        for (double k : {0.0, 0.3, 1.1, 2.5, -1.7}) {
            const cd a = data_hat(d, 1, {k, 0, 0});
            const cd q = transform_1d(d, k);
            CHECK(std::abs(a - q) < 1e-12);
        }
    }
    DataPreset g{PresetKind::Gaussian, 1.0, 1.0, {0, 0, 0}, 0};
    CHECK(std::abs(data_hat(g, 1, {2.0, 0, 0}) - std::sqrt(kPi) * std::exp(-1.0)) < 1e-15);
}

TEST_CASE("non-radial presets are rejected by the radial transform in dim > 1") {
    DataPreset s{PresetKind::ShiftedGaussian, 1.0, 1.0, {0.5, 0, 0}, 0};
    CHECK_THROWS_AS(data_hat_radial(s, 2, 0.3), Error);
    CHECK_NOTHROW(data_hat_radial(s, 1, -0.3));
}
