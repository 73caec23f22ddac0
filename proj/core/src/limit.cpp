#include "mgt/limit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mgt/spectral.hpp"

namespace mgt {

void LimitProblem::validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw Error(ErrorKind::InvalidParams, "delta must be positive");
    if (dim < 1 || dim > 3) throw Error(ErrorKind::InvalidParams, "dimension must be 1, 2 or 3");
    if (data.empty()) throw Error(ErrorKind::InvalidParams, "limit problem needs data");
    for (const auto& d : data) {
        if (d.slot != 0 && d.slot != 1)
            throw Error(ErrorKind::InvalidParams, "limit data live in slots 0 and 1; psi2 is derived");
        d.validate(dim);
        if (dim > 1 && !d.radial()) throw Error(ErrorKind::NonRadialData, "limit runs need radial data in n > 1");
    }
    if (taus.empty()) throw Error(ErrorKind::InvalidParams, "tau sweep is empty");
    for (double t : taus)
        if (!(t > 0.0) || !(t < delta)) throw Error(ErrorKind::InvalidParams, "every tau must lie in (0, delta)");
}

cd LimitProblem::slot_hat(int slot, double k) const {
    cd s = 0.0;
    for (const auto& d : data)
        if (d.slot == slot) s += data_hat_radial(d, dim, k);
    return s;
}

cd LimitProblem::psi2_hat(double k) const { return -k * k * (slot_hat(0, k) + delta * slot_hat(1, k)); }

LinearProblem LimitProblem::mgt(double tau) const { return {{tau, delta, 0.0, dim}, data}; }

cd kuznetsov_mode(double delta, double k, double t, int ell, cd phi0, cd phi1) {
    if (ell < 0 || ell > 2) throw Error(ErrorKind::InvalidParams, "time derivative out of range");
    const double k2 = k * k, a = -0.5 * delta * k2;
    // phi = e^{at} (C phi0 + S q), q = phi1 - a phi0, C'' = -w C, S = C' / (-w) with S(0) = 0, S'(0) = 1
    const double w = k2 * (1.0 - 0.25 * delta * delta * k2);
    const cd q = phi1 - a * phi0;
    double EC, ES;
    const double z = w * t * t;
    if (std::abs(z) < 1e-4) {
        const double E = std::exp(a * t);
        EC = E * (1.0 - z / 2.0 + z * z / 24.0 - z * z * z / 720.0);
        ES = E * t * (1.0 - z / 6.0 + z * z / 120.0 - z * z * z / 5040.0);
    } else if (w > 0.0) {
        const double om = std::sqrt(w), E = std::exp(a * t);
        EC = E * std::cos(om * t);
        ES = E * std::sin(om * t) / om;
    } else {
        const double b = std::sqrt(-w), rm = a - b, rp = k2 / rm;
        const double ep = std::exp(rp * t), em = std::exp(rm * t);
        EC = 0.5 * (ep + em);
        ES = 0.5 * (ep - em) / b;
    }
    const cd phi = EC * phi0 + ES * q;
    const cd phit = a * phi - w * ES * phi0 + EC * q;
    if (ell == 0) return phi;
    if (ell == 1) return phit;
    return -k2 * (phi + delta * phit);
}

std::shared_ptr<const RadialGrid> limit_grid(const LimitProblem& p, double tau, double t) {
    return linear_grid(p.mgt(tau), t);
}

RadialSpectralField kuznetsov_solve_hat(const LimitProblem& p, double t, int ell,
                                        std::shared_ptr<const RadialGrid> grid) {
    p.validate();
    if (t < 0.0) throw Error(ErrorKind::InvalidParams, "t must be >= 0");
    if (!grid) grid = limit_grid(p, *std::min_element(p.taus.begin(), p.taus.end()), t);
    auto f = make_field(grid);
    for (std::size_t i = 0; i < grid->k.size(); ++i) {
        const double k = grid->k[i];
        f.v[i] = kuznetsov_mode(p.delta, std::abs(k), t, ell, p.slot_hat(0, k), p.slot_hat(1, k));
    }
    return f;
}

RadialSpectralField mgt_compatible_hat(const LimitProblem& p, double tau, double t, int ell,
                                       std::shared_ptr<const RadialGrid> grid) {
    p.validate();
    if (ell < 0 || ell > 2) throw Error(ErrorKind::InvalidParams, "time derivative out of range");
    if (t < 0.0) throw Error(ErrorKind::InvalidParams, "t must be >= 0");
    if (!grid) grid = limit_grid(p, tau, t);
    const ModelParams mp{tau, p.delta, 0.0, p.dim};
    auto f = make_field(grid);
    for (std::size_t i = 0; i < grid->k.size(); ++i) {
        const double k = grid->k[i];
        const KernelTable kt = kernel_table(mp, std::abs(k), t);
        f.v[i] = kt.K[0][ell] * p.slot_hat(0, k) + kt.K[1][ell] * p.slot_hat(1, k) + kt.K[2][ell] * p.psi2_hat(k);
    }
    return f;
}

double compatibility_residual(const LimitProblem& p, double tau) {
    const auto grid = limit_grid(p, tau, 0.0);
    const auto tt = mgt_compatible_hat(p, tau, 0.0, 2, grid);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < grid->k.size(); ++i) {
        const cd target = p.psi2_hat(grid->k[i]);
        err = std::max(err, std::abs(tt.v[i] - target));
        scale = std::max(scale, std::abs(target));
    }
    return scale == 0.0 ? err : err / scale;
}

std::vector<double> limit_time_grid() { return geometric_times(1e-2, 1e4, 12); }

double limit_gap_at(const LimitProblem& p, double tau, double t, GapNorm norm) {
    const auto grid = limit_grid(p, tau, t);
    const auto diff = mgt_compatible_hat(p, tau, t, 0, grid) - kuznetsov_solve_hat(p, t, 0, grid);
    if (norm == GapNorm::L2) return hs_norm(diff, 0.0);
    const RadialGrid& g = *grid;
    const double e = g.signed_line ? 0.0 : p.dim - 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < diff.v.size(); ++i) acc += g.w[i] * std::pow(std::abs(g.k[i]), e) * std::abs(diff.v[i]);
    const double area = g.signed_line ? 1.0 : sphere_area(p.dim);
    return acc * area / std::pow(2.0 * kPi, p.dim);
}

namespace {

LimitGap sup_in_time(const LimitProblem& p, double tau, std::vector<double> t_grid, GapNorm norm) {
    p.validate();
    if (!(tau > 0.0) || !(tau < p.delta)) throw Error(ErrorKind::InvalidParams, "tau must lie in (0, delta)");
    if (t_grid.empty()) t_grid = limit_time_grid();
    for (double t : t_grid)
        if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorKind::InvalidParams, "time grid needs finite t >= 0");
    std::sort(t_grid.begin(), t_grid.end());
    LimitGap r;
    r.t = t_grid;
    r.gap.resize(t_grid.size());
    parallel_for(t_grid.size(), [&](std::size_t i) { r.gap[i] = limit_gap_at(p, tau, t_grid[i], norm); });
    const std::size_t j = static_cast<std::size_t>(std::max_element(r.gap.begin(), r.gap.end()) - r.gap.begin());
    r.value = r.gap[j];
    r.t_star = t_grid[j];
    if (t_grid.size() < 3 || j == 0 || j + 1 == t_grid.size() || t_grid[j - 1] <= 0.0) return r;
    // golden-section search for the maximum in log t inside the bracketing samples
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::log(t_grid[j - 1]), b = std::log(t_grid[j + 1]);
    auto g = [&](double u) { return limit_gap_at(p, tau, std::exp(u), norm); };
    double c = b - phi * (b - a), d = a + phi * (b - a), gc = g(c), gd = g(d);
    while (b - a > 1e-5) {
        if (gc > gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    const double best = std::max(gc, gd);
    if (best > r.value) {
        r.value = best;
        r.t_star = std::exp(gc > gd ? c : d);
    }
    return r;
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = std::log(x[i]), v = std::log(y[i]);
        sx += u;
        sy += v;
        sxx += u * u;
        sxy += u * v;
    }
    const double den = n * sxx - sx * sx;
    return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

}  // namespace

LimitGap limit_gap(const LimitProblem& p, double tau, const std::vector<double>& t_grid) {
    return sup_in_time(p, tau, t_grid, GapNorm::L2);
}

LimitGap limit_gap_sup(const LimitProblem& p, double tau, const std::vector<double>& t_grid) {
    return sup_in_time(p, tau, t_grid, GapNorm::LinfBound);
}

GridField limit_difference_grid(const LimitProblem& p, double tau, double t, const GridSpec& g) {
    p.validate();
    g.validate();
    if (g.dim != p.dim) throw Error(ErrorKind::InvalidParams, "grid dimension differs from the problem");
    const ModelParams mp{tau, p.delta, 0.0, p.dim};
    auto f = make_grid_field(g, Space::Frequency);
    for (std::size_t i = 0; i < f.v.size(); ++i) {
        const Vec3 xi = grid_xi(g, i);
        const double k = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
        cd a0 = 0.0, a1 = 0.0;
        for (const auto& d : p.data) (d.slot == 0 ? a0 : a1) += data_hat(d, p.dim, xi);
        const cd a2 = -k * k * (a0 + p.delta * a1);
        const KernelTable kt = kernel_table(mp, k, t);
        f.v[i] = kt.K[0][0] * a0 + kt.K[1][0] * a1 + kt.K[2][0] * a2 - kuznetsov_mode(p.delta, k, t, 0, a0, a1);
    }
    return to_physical(f);
}

LimitSweep limit_sweep(const LimitProblem& p, const std::vector<double>& t_grid) {
    p.validate();
    std::vector<double> taus = p.taus;
    std::sort(taus.begin(), taus.end(), std::greater<>());
    LimitSweep s;
    std::vector<double> l2, linf;
    for (double tau : taus) {
        const LimitGap a = limit_gap(p, tau, t_grid), b = limit_gap_sup(p, tau, t_grid);
        s.rows.push_back({tau, a.value, a.t_star, b.value, b.t_star});
        l2.push_back(a.value);
        linf.push_back(b.value);
        s.curves_l2.push_back(a);
        s.curves_linf.push_back(b);
    }
    for (std::size_t i = 1; i < taus.size(); ++i) {
        s.ratio_l2.push_back(l2[i] / l2[i - 1]);
        s.ratio_linf.push_back(linf[i] / linf[i - 1]);
    }
    if (taus.size() >= 2) {
        s.rate_l2 = log_slope(taus, l2);
        s.rate_linf = log_slope(taus, linf);
    }
    return s;
}

void write_limit_sweep(std::ostream& os, const LimitSweep& s) {
    char buf[320];
    os << "tau,gap_l2,t_star,gap_linf_bound,t_star_linf,rate_l2,rate_linf\n";
    for (const auto& r : s.rows) {
        std::snprintf(buf, sizeof buf, "%.10g,%.12e,%.12e,%.12e,%.12e,%.6f,%.6f\n", r.tau, r.gap_l2, r.t_star,
                      r.gap_linf, r.t_star_linf, s.rate_l2, s.rate_linf);
        os << buf;
    }
}

}  // namespace mgt
