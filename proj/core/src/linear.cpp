#include "mgt/linear.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/statistics/linear_regression.hpp>
#include <cmath>

#include "mgt/spectral.hpp"

namespace mgt {

void LinearProblem::validate() const {
    params.validate();
    if (data.empty()) throw Error(ErrorKind::InvalidParams, "linear problem has no data");
    for (const auto& d : data) d.validate(params.dim);
}

bool LinearProblem::radial() const {
    return std::all_of(data.begin(), data.end(), [](const DataPreset& d) { return d.radial(); });
}

double LinearProblem::min_width() const {
    double w = std::numeric_limits<double>::infinity();
    for (const auto& d : data) w = std::min(w, d.width);
    return w;
}

cd LinearProblem::slot_hat(int slot, double k) const {
    cd s = 0.0;
    for (const auto& d : data)
        if (d.slot == slot) s += data_hat_radial(d, params.dim, k);
    return s;
}

Moments LinearProblem::slot_moments(int slot) const {
    Moments m;
    for (const auto& d : data) {
        if (d.slot != slot) continue;
        const Moments q = moments(d, params.dim);
        m.M += q.M;
        for (int i = 0; i < 3; ++i) m.P[i] += q.P[i];
    }
    return m;
}

cd LinearProblem::psi12_hat(double k) const { return slot_hat(1, k) + params.tau * slot_hat(2, k); }

cd LinearProblem::psi02_hat(double k) const {
    return slot_hat(0, k) - params.tau * params.tau * slot_hat(2, k);
}

CombinationConstants combinations(const LinearProblem& p) {
    const double t = p.params.tau, d = p.params.delta;
    const Moments m0 = p.slot_moments(0), m1 = p.slot_moments(1), m2 = p.slot_moments(2);
    CombinationConstants c;
    c.M12 = m1.M + t * m2.M;
    c.A1 = m0.M - t * t * m2.M;
    for (int i = 0; i < 3; ++i) c.B[i] = m1.P[i] + t * m2.P[i];
    c.A0 = c.M12 * d * (4.0 * t - d) / 8.0;
    c.A0_literal = c.M12 * t * (4.0 * t - d) / 8.0;
    return c;
}

std::shared_ptr<const RadialGrid> linear_grid(const LinearProblem& p, double t) {
    const double sigma = p.min_width();
    RadialGridSpec s;
    s.dim = p.params.dim;
    s.k_max = decay_cutoff(p.params, t, sigma, 50.0 / sigma);
    s.k_min = std::min(1e-6, 0.5 * s.k_max);
    s.t_osc = t;
    s.speed = phase_speed(p.params);
    s.signed_line = p.params.dim == 1 && !p.radial();
    return make_radial_grid(s);
}

namespace {

std::shared_ptr<const RadialGrid> ensure_grid(const LinearProblem& p, double t, std::shared_ptr<const RadialGrid> g) {
    return g ? g : linear_grid(p, t);
}

void check_ell(int ell, int hi) {
    if (ell < 0 || ell > hi) throw Error(ErrorKind::InvalidParams, "time derivative out of range");
}

KernelId n_kernel(int ell) {
    static const KernelId ids[4] = {KernelId::N0, KernelId::N1, KernelId::N2, KernelId::N3};
    return ids[ell];
}

}  // namespace

StateSnapshot<RadialSpectralField> solve_linear_state(const LinearProblem& p, double t,
                                                      std::shared_ptr<const RadialGrid> grid) {
    if (t < 0.0) throw Error(ErrorKind::InvalidParams, "t must be >= 0");
    grid = ensure_grid(p, t, grid);
    StateSnapshot<RadialSpectralField> st{t, make_field(grid), make_field(grid), make_field(grid)};
    for (std::size_t i = 0; i < grid->k.size(); ++i) {
        const double k = grid->k[i];
        const KernelTable K = kernel_table(p.params, std::abs(k), t);
        const cd a = p.slot_hat(0, k), b = p.slot_hat(1, k), c = p.slot_hat(2, k);
        st.psi.v[i] = K.K[0][0] * a + K.K[1][0] * b + K.K[2][0] * c;
        st.psi_t.v[i] = K.K[0][1] * a + K.K[1][1] * b + K.K[2][1] * c;
        st.psi_tt.v[i] = K.K[0][2] * a + K.K[1][2] * b + K.K[2][2] * c;
    }
    return st;
}

RadialSpectralField solve_linear_hat(const LinearProblem& p, double t, int ell, std::shared_ptr<const RadialGrid> grid) {
    check_ell(ell, 2);
    if (t < 0.0) throw Error(ErrorKind::InvalidParams, "t must be >= 0");
    grid = ensure_grid(p, t, grid);
    auto f = make_field(grid);
    for (std::size_t i = 0; i < grid->k.size(); ++i) {
        const double k = grid->k[i];
        const KernelTable K = kernel_table(p.params, std::abs(k), t);
        f.v[i] = K.K[0][ell] * p.slot_hat(0, k) + K.K[1][ell] * p.slot_hat(1, k) + K.K[2][ell] * p.slot_hat(2, k);
    }
    return f;
}

RadialSpectralField profile_hat(const LinearProblem& p, const ProfileSpec& spec, double t,
                                std::shared_ptr<const RadialGrid> grid) {
    check_ell(spec.ell, 2);
    if (spec.order != 1 && spec.order != 2) throw Error(ErrorKind::InvalidParams, "profile order must be 1 or 2");
    grid = ensure_grid(p, t, grid);
    const double d = p.params.delta;
    auto f = make_field(grid);
    for (std::size_t i = 0; i < grid->k.size(); ++i) {
        const double k = std::abs(grid->k[i]);
        const cd a = p.psi12_hat(grid->k[i]);
        cd v = sine_wave(spec.ell, k, t, d) * a;
        if (spec.order == 2) {
            v += nhat({n_kernel(spec.ell), 0, t, k}, p.params) * a;
            v += cosine_wave(spec.ell, k, t, d) * p.psi02_hat(grid->k[i]);
        }
        f.v[i] = v;
    }
    return f;
}

double residual_norm(const LinearProblem& p, const ProfileSpec& spec, double t) {
    const auto grid = linear_grid(p, t);
    return hs_norm(solve_linear_hat(p, t, spec.ell, grid) - profile_hat(p, spec, t, grid), spec.s);
}

namespace {

// symbol of psi^(order,l) without the xi.B part, and the F_l factor the B part multiplies
void approximant_parts(const LinearProblem& p, const CombinationConstants& c, int order, int ell, double t, double k,
                       double& real_part, double& f_ell, double n_coeff) {
    const double d = p.params.delta;
    f_ell = sine_wave(ell, k, t, d);
    real_part = c.M12 * f_ell;
    if (order == 2) {
        real_part += c.M12 * n_coeff * nhat({n_kernel(ell), 0, t, k}, p.params);
        real_part += c.A1 * cosine_wave(ell, k, t, d);
    }
}

}  // namespace

RadialSpectralField approximant_hat(const LinearProblem& p, int order, int ell, double t,
                                    std::shared_ptr<const RadialGrid> grid) {
    check_ell(ell, 2);
    grid = ensure_grid(p, t, grid);
    const CombinationConstants c = combinations(p);
    const bool has_b = c.B[0] != 0.0 || c.B[1] != 0.0 || c.B[2] != 0.0;
    if (order == 2 && has_b && p.params.dim > 1)
        throw Error(ErrorKind::NonRadialData, "xi.B term needs the 1-d signed frequency line");
    auto f = make_field(grid);
    for (std::size_t i = 0; i < grid->k.size(); ++i) {
        const double k = grid->k[i];
        double re = 0.0, fl = 0.0;
        approximant_parts(p, c, order, ell, t, std::abs(k), re, fl, 1.0);
        cd v = re;
        if (order == 2) v += cd(0.0, -k * c.B[0]) * fl;
        f.v[i] = v;
    }
    return f;
}

double approximant_norm(const LinearProblem& p, int order, int ell, double s, double t) {
    check_ell(ell, 2);
    const auto grid = linear_grid(p, t);
    const CombinationConstants c = combinations(p);
    const int n = p.params.dim;
    if (grid->signed_line) return hs_norm(approximant_hat(p, order, ell, t, grid), s);
    // radial grid: |M12 (F + N) + A1 C|^2 + (|B|^2 / n) k^2 F^2 after the angular average
    auto re = make_field(grid), bf = make_field(grid);
    const double b2 = c.B[0] * c.B[0] + c.B[1] * c.B[1] + c.B[2] * c.B[2];
    for (std::size_t i = 0; i < grid->k.size(); ++i) {
        const double k = grid->k[i];
        double r = 0.0, fl = 0.0;
        approximant_parts(p, c, order, ell, t, k, r, fl, 1.0);
        re.v[i] = r;
        bf.v[i] = order == 2 ? k * fl : 0.0;
    }
    return std::sqrt(hs_norm_sq(re, s) + b2 / n * hs_norm_sq(bf, s));
}

double approximation_gap(const LinearProblem& p, int order, int ell, double s, double t) {
    const auto grid = linear_grid(p, t);
    return hs_norm(solve_linear_hat(p, t, ell, grid) - approximant_hat(p, order, ell, t, grid), s);
}

std::vector<double> geometric_times(double t0, double t1, int per_decade) {
    if (!(t0 > 0.0) || !(t1 > t0) || per_decade < 1)
        throw Error(ErrorKind::InvalidParams, "geometric grid needs 0 < t0 < t1");
    const int n = static_cast<int>(std::round(std::log10(t1 / t0) * per_decade));
    std::vector<double> t;
    for (int i = 0; i <= n; ++i) t.push_back(t0 * std::pow(t1 / t0, static_cast<double>(i) / n));
    t.back() = t1;
    return t;
}

namespace {

void check_series(std::span<const double> t, std::span<const double> v) {
    if (t.size() != v.size()) throw Error(ErrorKind::DegenerateSeries, "time and value lengths differ");
    if (t.size() < 8) throw Error(ErrorKind::DegenerateSeries, "need at least 8 samples");
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!(v[i] > 0.0) || !(t[i] > 0.0)) throw Error(ErrorKind::DegenerateSeries, "samples must be positive");
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    if (*hi / *lo < 100.0 * (1.0 - 1e-9)) throw Error(ErrorKind::DegenerateSeries, "time span below two decades");
}

}  // namespace

DecayReport fit_decay(std::span<const double> t, std::span<const double> v, double expected, double tol) {
    check_series(t, v);
    DecayReport r;
    r.t.assign(t.begin(), t.end());
    r.value.assign(v.begin(), v.end());
    std::vector<double> x(t.size()), y(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        x[i] = std::log(t[i]);
        y[i] = std::log(v[i]);
    }
    const auto [c0, c1] = boost::math::statistics::simple_ordinary_least_squares(x, y);
    r.intercept = c0;
    r.slope = c1;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (c0 + c1 * x[i]);
        ss += e * e;
    }
    r.residual = std::sqrt(ss / x.size());
    r.expected = expected;
    r.tol = tol;
    r.pass = std::isnan(expected) ? true : std::abs(r.slope - expected) <= tol;
    return r;
}

DecayReport fit_log_growth(std::span<const double> t, std::span<const double> v) {
    check_series(t, v);
    std::vector<double> sq(v.size()), lt(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        sq[i] = v[i] * v[i];
        lt[i] = std::log(t[i]);
    }
    DecayReport r = fit_decay(t, sq);
    r.value.assign(v.begin(), v.end());
    const auto [a, b] = boost::math::statistics::simple_ordinary_least_squares(lt, sq);
    r.ln_a = a;
    r.ln_b = b;
    double ss = 0.0;
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const double e = (sq[i] - (a + b * lt[i])) / sq[i];
        ss += e * e;
    }
    r.ln_residual = std::sqrt(ss / sq.size());
    r.pass = r.ln_residual < r.residual;
    return r;
}

double second_order_constant(const LinearProblem& p, bool literal) {
    const CombinationConstants c = combinations(p);
    const int n = p.params.dim;
    const double d = p.params.delta;
    const double a = literal ? c.A0_literal : c.A0;
    auto I = [&](int m) { return boost::math::tgamma(0.5 * (m + 1)) / (2.0 * std::pow(d, 0.5 * (m + 1))); };
    const double b2 = c.B[0] * c.B[0] + c.B[1] * c.B[1] + c.B[2] * c.B[2];
    const double bracket = a * a * I(n + 3) + 2.0 * a * c.A1 * I(n + 1) + (c.A1 * c.A1 + b2 / n) * I(n - 1);
    return std::sqrt(0.5 * sphere_area(n) / std::pow(2.0 * kPi, n) * bracket);
}

DecayReport lower_bound_check(const LinearProblem& p, int ell, double s, std::span<const double> t_grid,
                              LowerBoundKind kind) {
    check_ell(ell, 2);
    if (t_grid.empty()) throw Error(ErrorKind::DegenerateSeries, "empty time grid");
    const CombinationConstants c = combinations(p);
    const int n = p.params.dim;
    DecayReport r;
    r.t.assign(t_grid.begin(), t_grid.end());
    r.value.resize(t_grid.size());
    std::vector<double> ratio(t_grid.size());
    if (kind == LowerBoundKind::Leading) {
        if (c.M12 == 0.0) throw Error(ErrorKind::HypothesisViolated, "M1 + tau M2 = 0");
        r.label = "leading";
        r.constant = std::abs(c.M12);
        r.constant_alt = r.constant;
    } else {
        const double b2 = c.B[0] * c.B[0] + c.B[1] * c.B[1] + c.B[2] * c.B[2];
        if (c.A0 == 0.0 && c.A1 == 0.0 && b2 == 0.0) throw Error(ErrorKind::HypothesisViolated, "A0 = A1 = B = 0");
        r.label = "profile_subtracted";
        if (ell == 0 && s == 0.0) {
            r.constant = second_order_constant(p, false);
            r.constant_alt = second_order_constant(p, true);
        } else {
            // same limit evaluated from the approximants at the last time
            const double tl = t_grid.back();
            const auto grid = linear_grid(p, tl);
            const auto diff = approximant_hat(p, 2, ell, tl, grid) - approximant_hat(p, 1, ell, tl, grid);
            r.constant = hs_norm(diff, s) / rate_Ds(n, s + ell + 1.0, tl);
            r.constant_alt = std::numeric_limits<double>::quiet_NaN();
        }
    }
    parallel_for(t_grid.size(), [&](std::size_t i) {
        const double t = t_grid[i];
        if (kind == LowerBoundKind::Leading) {
            const auto grid = linear_grid(p, t);
            r.value[i] = hs_norm(solve_linear_hat(p, t, ell, grid), s);
            ratio[i] = r.value[i] / rate_Ds(n, s + ell, t);
        } else {
            r.value[i] = approximation_gap(p, 1, ell, s, t);
            ratio[i] = r.value[i] / rate_Ds(n, s + ell + 1.0, t);
        }
    });
    r.ratio_min = *std::min_element(ratio.begin(), ratio.end());
    r.ratio_max = *std::max_element(ratio.begin(), ratio.end());
    r.threshold = 0.5 * r.constant;
    r.pass = r.ratio_min >= r.threshold && r.ratio_max <= 3.0 * r.ratio_min;
    return r;
}

DecayReport kernel_estimate_sweep(const ModelParams& params, const DataPreset& psi2, int ell, double s,
                                  std::span<const double> t_grid, KernelSweep kind) {
    check_ell(ell, kind == KernelSweep::TimeDerivative ? 2 : 3);
    LinearProblem p{params, {psi2}};
    p.data[0].slot = 2;
    p.validate();
    const int n = params.dim;
    const double tau = params.tau, d = params.delta;
    std::vector<double> v(t_grid.size());
    parallel_for(t_grid.size(), [&](std::size_t i) {
        const double t = t_grid[i];
        const auto grid = linear_grid(p, t);
        auto f = make_field(grid);
        for (std::size_t j = 0; j < grid->k.size(); ++j) {
            const double k = std::abs(grid->k[j]);
            const KernelTable K = kernel_table(params, k, t);
            const cd h = p.slot_hat(2, grid->k[j]);
            if (kind == KernelSweep::TimeDerivative) {
                f.v[j] = K.K[2][ell + 1] * h;
                continue;
            }
            double prof = tau * sine_wave(ell, k, t, d);
            if (kind != KernelSweep::ProfileFirst) prof += tau * nhat({n_kernel(ell), 0, t, k}, params);
            if (kind == KernelSweep::ProfileSecond) prof -= tau * tau * cosine_wave(ell, k, t, d);
            f.v[j] = (K.K[2][ell] - prof) * h;
        }
        v[i] = hs_norm(f, kind == KernelSweep::TimeDerivative ? s + 2.0 - ell : s);
    });
    double expected = 0.0;
    switch (kind) {
        case KernelSweep::TimeDerivative: expected = -1.0 - s / 2.0 - n / 4.0; break;
        case KernelSweep::ProfileFirst: expected = -(s + ell) / 2.0 - n / 4.0; break;
        case KernelSweep::ProfileSecond:
        case KernelSweep::ProfileSecondBare: expected = -(s + ell + 1.0) / 2.0 - n / 4.0; break;
    }
    DecayReport r = fit_decay(t_grid, v, expected, 0.05);
    r.label = "kernel_sweep";
    return r;
}

}  // namespace mgt
