/// Small-relaxation limit against the linearized Kuznetsov equation.

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "doctest.h"
#include "mgt/limit.hpp"

using namespace mgt;

namespace {

DataPreset gauss(int slot, double amp = 1.0, double width = 1.0) {
    return {PresetKind::Gaussian, amp, width, {0, 0, 0}, slot};
}

LimitProblem standard(int n) {
    LimitProblem p;
    p.delta = 1.0;
    p.dim = n;
    p.data = {gauss(0), gauss(1)};
    return p;
}

// phi'' + d k^2 phi' + k^2 phi = 0 by an adaptive Fehlberg 7(8) integration
std::array<double, 2> kuznetsov_ode(double delta, double k, double t, double phi0, double phi1) {
    using namespace boost::numeric::odeint;
    std::array<double, 2> y{phi0, phi1};
    auto rhs = [&](const std::array<double, 2>& u, std::array<double, 2>& du, double) {
        du[0] = u[1];
        du[1] = -delta * k * k * u[1] - k * k * u[0];
    };
    integrate_adaptive(make_controlled(1e-14, 1e-14, runge_kutta_fehlberg78<std::array<double, 2>>()), rhs, y, 0.0,
                       t, 1e-3);
    return y;
}

}  // namespace

TEST_CASE("Kuznetsov modes at t = 0 and at k = 0") {
    for (double k : {0.0, 0.3, 2.0, 7.0}) {
        CHECK(std::abs(kuznetsov_mode(1.0, k, 0.0, 0, 1.5, -0.4) - 1.5) < 1e-14);
        CHECK(std::abs(kuznetsov_mode(1.0, k, 0.0, 1, 1.5, -0.4) - (-0.4)) < 1e-14);
    }
    CHECK(std::abs(kuznetsov_mode(1.0, 0.0, 7.0, 0, 1.5, -0.4) - (1.5 - 7.0 * 0.4)) < 1e-13);
    CHECK(std::abs(kuznetsov_mode(1.0, 0.0, 7.0, 1, 1.5, -0.4) - (-0.4)) < 1e-13);

    const auto p = standard(1);
    const auto s = kuznetsov_solve_hat(p, 0.0, 0);
    for (std::size_t i = 0; i < s.v.size(); ++i) CHECK(std::abs(s.v[i] - p.slot_hat(0, s.grid->k[i])) < 1e-15);
}

TEST_CASE("Kuznetsov modes match an ODE integration") {
    const double delta = 1.3, crit = 2.0 / delta;
    double worst = 0.0;
    for (double k : {1e-3, 0.2, 0.9, crit * (1.0 - 1e-7), crit, crit * (1.0 + 1e-7), 1.6, 4.0})
        for (double t : {0.05, 0.7, 3.0, 12.0}) {
            const auto y = kuznetsov_ode(delta, k, t, 0.8, -1.1);
            const double scale = std::max({std::abs(y[0]), std::abs(y[1]), 1e-3});
            worst = std::max(worst, std::abs(kuznetsov_mode(delta, k, t, 0, 0.8, -1.1) - y[0]) / scale);
            worst = std::max(worst, std::abs(kuznetsov_mode(delta, k, t, 1, 0.8, -1.1) - y[1]) / scale);
            const cd tt = kuznetsov_mode(delta, k, t, 2, 0.8, -1.1);
            CHECK(std::abs(tt + delta * k * k * y[1] + k * k * y[0]) / scale < 1e-10);
        }
    CHECK(worst < 1e-10);
}

TEST_CASE("compatible third datum") {
    const auto p = standard(2);
    for (double tau : p.taus) CHECK(compatibility_residual(p, tau) < 1e-12);
    CHECK(std::abs(p.psi2_hat(0.0)) == 0.0);
    const double k = 0.7;
    CHECK(std::abs(p.psi2_hat(k) + k * k * (p.slot_hat(0, k) + p.delta * p.slot_hat(1, k))) < 1e-15);
}

TEST_CASE("zero data gives zero gap") {
    auto p = standard(1);
    p.data = {gauss(0, 0.0), gauss(1, 0.0)};
    CHECK(limit_gap(p, 0.1, {0.5, 1.0, 2.0}).value == 0.0);
    CHECK(limit_gap_sup(p, 0.1, {0.5, 1.0, 2.0}).value == 0.0);
}

TEST_CASE("gap halves with tau") {
    for (int n : {1, 2}) {
        const auto p = standard(n);
        const double a = limit_gap(p, 0.1).value, b = limit_gap(p, 0.05).value;
        INFO("n = " << n);
        CHECK(b / a >= 0.4);
        CHECK(b / a <= 0.6);
        const double c = limit_gap_sup(p, 0.1).value, d = limit_gap_sup(p, 0.05).value;
        CHECK(d / c >= 0.4);
        CHECK(d / c <= 0.6);
    }
}

TEST_CASE("gap peaks at finite time and decays afterwards") {
    const auto p = standard(1);
    const auto g = limit_gap(p, 0.1);
    CHECK(g.t_star > 0.01);
    CHECK(g.t_star < 100.0);
    CHECK(g.gap.back() < 0.1 * g.value);
    CHECK(g.value >= *std::max_element(g.gap.begin(), g.gap.end()));
}

TEST_CASE("sup-norm surrogate bounds the sampled difference") {
    const auto p = standard(1);
    const GridSpec g{1, 1024, 60.0};
    for (double t : {0.3, 1.0, 4.0}) {
        const auto diff = limit_difference_grid(p, 0.1, t, g);
        double mx = 0.0;
        for (const auto& v : diff.v) mx = std::max(mx, std::abs(v));
        // equality holds when the transform of the difference is nonnegative
        CHECK(mx <= limit_gap_at(p, 0.1, t, GapNorm::LinfBound) * (1.0 + 1e-9));
        CHECK(l2_norm_physical(diff) == doctest::Approx(limit_gap_at(p, 0.1, t)).epsilon(1e-6));
    }
}

TEST_CASE("tau sweep fits a linear rate") {
    auto p = standard(3);
    const auto s = limit_sweep(p);
    REQUIRE(s.rows.size() == 4);
    CHECK(s.rows.front().tau == 0.2);
    CHECK(s.rate_l2 == doctest::Approx(1.0).epsilon(0.15));
    CHECK(s.rate_linf == doctest::Approx(1.0).epsilon(0.15));
    for (double r : s.ratio_l2) {
        CHECK(r >= 0.4);
        CHECK(r <= 0.6);
    }
    std::ostringstream os;
    write_limit_sweep(os, s);
    CHECK(os.str().rfind("tau,gap_l2,t_star,gap_linf_bound,t_star_linf,rate_l2,rate_linf\n", 0) == 0);
}

TEST_CASE("limit problem validation") {
    auto p = standard(1);
    p.taus = {0.5, 1.0};
    CHECK_THROWS_AS(p.validate(), Error);
    p = standard(1);
    p.data.push_back(gauss(2));
    CHECK_THROWS_AS(p.validate(), Error);
    p = standard(2);
    p.data = {{PresetKind::ShiftedGaussian, 1.0, 1.0, {1.0, 0, 0}, 0}};
    try {
        p.validate();
        FAIL("expected NonRadialData");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonRadialData);
    }
    CHECK_THROWS_AS(limit_gap(standard(1), 0.1, {-1.0}), Error);
}
