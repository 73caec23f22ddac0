/// Radial quadrature, periodic transforms, Sobolev norms and zone cut-offs.

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mgt/fields.hpp"
#include "mgt/spectral.hpp"

using namespace mgt;

namespace {

RadialSpectralField sample(std::shared_ptr<const RadialGrid> g, const std::function<cd(double)>& fn) {
    auto f = make_field(g);
    for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] = fn(g->k[i]);
    return f;
}

}  // namespace

TEST_CASE("Gauss-Legendre rules integrate polynomials exactly") {
    for (int n : {1, 2, 3, 7, 32}) {
        std::vector<double> x, w;
        gauss_legendre(n, x, w);
        REQUIRE(x.size() == static_cast<std::size_t>(n));
        for (std::size_t i = 1; i < x.size(); ++i) CHECK(x[i] > x[i - 1]);
        for (int p = 0; p < 2 * n; ++p) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += w[i] * std::pow(x[i], p);
            const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
            CHECK(std::abs(s - exact) < 1e-13);
        }
    }
}

TEST_CASE("radial grid layout") {
    RadialGridSpec s;
    s.k_max = 10.0;
    auto g = make_radial_grid(s);
    for (std::size_t i = 1; i < g->k.size(); ++i) CHECK(g->k[i] > g->k[i - 1]);
    for (double w : g->w) CHECK(w > 0.0);
    double total = 0.0;
    for (double w : g->w) total += w;
    CHECK(total == doctest::Approx(10.0).epsilon(1e-12));

    s.t_osc = 100.0;
    auto g2 = make_radial_grid(s);
    CHECK(g2->panels > g->panels);

    s.signed_line = true;
    auto g3 = make_radial_grid(s);
    CHECK(g3->k.front() < 0.0);
    CHECK(g3->k.size() == 2 * g2->k.size());

    s.dim = 2;
    CHECK_THROWS_AS(make_radial_grid(s), Error);
}

TEST_CASE("hs_norm of Gaussians") {
    DataPreset g{PresetKind::Gaussian, 1.0, 1.0, {0, 0, 0}, 0};
    RadialGridSpec s;
    s.k_max = 50.0;
    auto grid = make_radial_grid(s);
    auto f = sample(grid, [&](double k) { return data_hat_radial(g, 1, k); });
    CHECK(hs_norm(f, 0.0) == doctest::Approx(std::pow(kPi / 2.0, 0.25)).epsilon(1e-13));
    CHECK(hs_norm(make_field(grid), 0.0) == 0.0);
    CHECK(hs_norm(cd(-3.0, 4.0) * f, 0.7) == doctest::Approx(5.0 * hs_norm(f, 0.7)).epsilon(1e-12));

    // n = 3, s = 1 against an independent adaptive radial quadrature
    s.dim = 3;
    auto g3 = make_radial_grid(s);
    auto f3 = sample(g3, [&](double k) { return data_hat_radial(g, 3, k); });
    auto integrand = [&](double k) {
        const double v = std::pow(kPi, 1.5) * std::exp(-0.25 * k * k);
        return k * k * k * k * v * v;
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    const double I = ts.integrate(integrand, 0.0, 60.0);
    const double oracle = std::sqrt(4.0 * kPi * I / std::pow(2.0 * kPi, 3));
    CHECK(std::abs(hs_norm(f3, 1.0) / oracle - 1.0) < 1e-9);

    // signed line equals the even radial evaluation for even data
    s.dim = 1;
    s.signed_line = true;
    auto gl = make_radial_grid(s);
    auto fl = sample(gl, [&](double k) { return data_hat_radial(g, 1, k); });
    CHECK(hs_norm(fl, 0.5) == doctest::Approx(hs_norm(f, 0.5)).epsilon(1e-13));
}

TEST_CASE("frequency-support monotonicity") {
    RadialGridSpec s;
    s.dim = 2;
    s.k_max = 1.0;
    auto grid = make_radial_grid(s);
    auto f = sample(grid, [](double k) { return cd(std::cos(3.0 * k), 1.0 - k); });
    double prev = hs_norm(f, 0.0);
    for (double sv : {0.5, 1.0, 2.0, 3.5}) {
        const double v = hs_norm(f, sv);
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("panel refinement converges at the design order") {
    // two-point rule: error ~ h^4 on a smooth integrand
    auto err = [](int ppd) {
        RadialGridSpec s;
        s.k_min = 0.5;
        s.k_max = 8.0;
        s.nodes_per_panel = 2;
        s.panels_per_decade = ppd;
        auto grid = make_radial_grid(s);
        double acc = 0.0;
        for (std::size_t i = 0; i < grid->k.size(); ++i) {
            const double k = grid->k[i];
            if (k < 0.5) continue;
            acc += grid->w[i] * std::exp(-0.25 * k * k);
        }
        const double exact = std::sqrt(kPi) * (std::erf(4.0) - std::erf(0.25));
        return std::abs(acc - exact);
    };
    const double e1 = err(8), e2 = err(16), e3 = err(32);
    const double o1 = std::log2(e1 / e2), o2 = std::log2(e2 / e3);
    CHECK(o1 >= 3.5);
    CHECK(o2 >= 3.5);
}

TEST_CASE("doubling K_max leaves the norm unchanged") {
    DataPreset g{PresetKind::Gaussian, 1.0, 2.0, {0, 0, 0}, 0};
    for (int n = 1; n <= 3; ++n) {
        RadialGridSpec s;
        s.dim = n;
        s.k_max = 50.0 / g.width;
        auto a = sample(make_radial_grid(s), [&](double k) { return data_hat_radial(g, n, k); });
        s.k_max *= 2.0;
        auto b = sample(make_radial_grid(s), [&](double k) { return data_hat_radial(g, n, k); });
        CHECK(std::abs(hs_norm(a, 1.0) - hs_norm(b, 1.0)) <= 1e-12 * hs_norm(b, 1.0));
    }
}

TEST_CASE("decay cutoff shrinks with time") {
    ModelParams p{0.5, 1.0, 0.0, 1};
    const double k1 = decay_cutoff(p, 0.0, 1.0, 50.0);
    const double k2 = decay_cutoff(p, 100.0, 1.0, 50.0);
    const double k3 = decay_cutoff(p, 1e4, 1.0, 50.0);
    CHECK(k1 > k2);
    CHECK(k2 > k3);
    CHECK(k3 == doctest::Approx(std::sqrt(75.0 / 1e4)).epsilon(0.1));
}

TEST_CASE("grid transforms") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (int dim = 1; dim <= 3; ++dim) {
        GridSpec s{dim, dim == 3 ? 16 : 64, 5.0};
        auto f = make_grid_field(s, Space::Physical);
        for (auto& z : f.v) z = cd(nd(rng), nd(rng));
        const auto F = to_frequency(f);
        const auto back = to_physical(F);
        double diff = 0.0, nrm = 0.0;
        for (std::size_t i = 0; i < f.v.size(); ++i) {
            diff += std::norm(back.v[i] - f.v[i]);
            nrm += std::norm(f.v[i]);
        }
        CHECK(std::sqrt(diff / nrm) < 1e-12);
        CHECK(hs_norm(F, 0.0) == doctest::Approx(l2_norm_physical(f)).epsilon(1e-10));
        CHECK_THROWS_AS(hs_norm(f, 0.0), Error);
    }

    // one Fourier mode lands in one bin
    GridSpec s{1, 32, kPi};
    auto f = make_grid_field(s, Space::Physical);
    for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] = std::polar(1.0, 3.0 * grid_x(s, i)[0]);
    const auto F = to_frequency(f);
    for (std::size_t i = 0; i < F.v.size(); ++i) {
        if (mode_index(static_cast<int>(i), s.N) == 3)
            CHECK(std::abs(F.v[i] - 2.0 * kPi) < 1e-12);
        else
            CHECK(std::abs(F.v[i]) < 1e-12);
    }
}

TEST_CASE("grid transform of a Gaussian matches data_hat") {
    for (int dim = 1; dim <= 2; ++dim) {
        DataPreset g{PresetKind::ShiftedGaussian, 1.0, 1.0, {0.4, -0.3, 0}, 0};
        GridSpec s{dim, 128, 8.0};
        auto f = make_grid_field(s, Space::Physical);
        for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] = data_value(g, dim, grid_x(s, i));
        const auto F = to_frequency(f);
        double worst = 0.0;
        for (std::size_t i = 0; i < F.v.size(); ++i) worst = std::max(worst, std::abs(F.v[i] - data_hat(g, dim, grid_xi(s, i))));
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("zone masks form a partition of unity") {
    ModelParams p{1.0, 1.0, 0.0, 1};
    const double e0 = epsilon0(p), n0 = default_n0(p);
    std::vector<double> k{0.0, e0 / 10.0, e0 / 3.0, e0, 1.0, n0, 3.0 * n0, 10.0 * n0, 1e4};
    const auto z = zone_masks(k, e0, n0);
    CHECK(z.chi_int[1] == 1.0);
    CHECK(z.chi_bdd[1] == 0.0);
    CHECK(z.chi_ext[7] == 1.0);
    CHECK(z.chi_int[3] == 0.0);
    for (std::size_t i = 0; i < k.size(); ++i) {
        CHECK(std::abs(z.chi_int[i] + z.chi_bdd[i] + z.chi_ext[i] - 1.0) < 1e-14);
        CHECK(z.chi_bdd[i] >= 0.0);
    }
    CHECK(z.chi_int[2] > 0.0);
    CHECK(z.chi_int[2] < 1.0);
    CHECK(z.chi_bdd[4] == 1.0);
}

TEST_CASE("snapshots and csv dump") {
    RadialGridSpec s;
    s.k_max = 2.0;
    s.panels_per_decade = 1;
    s.nodes_per_panel = 2;
    auto g = make_radial_grid(s);
    StateSnapshot<RadialSpectralField> st{0.0, make_field(g), make_field(g), make_field(g)};
    CHECK(consistent(st));
    st.psi_t = make_field(make_radial_grid(s));
    CHECK_FALSE(consistent(st));
    std::ostringstream os;
    write_csv(os, st.psi);
    CHECK(os.str().rfind("k,weight,re,im\n", 0) == 0);
}
