#include "mgt/fields.hpp"

#include <fftw3.h>

#include <algorithm>
#include <boost/math/special_functions/legendre.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>

#include "mgt/spectral.hpp"

namespace mgt {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    static std::mutex mu;
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    if (n < 1) throw Error(ErrorKind::InvalidParams, "Gauss-Legendre needs at least one node");
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) {
        const auto z = boost::math::legendre_p_zeros<double>(n);
        std::vector<double> xs, ws;
        for (auto r = z.rbegin(); r != z.rend(); ++r) {
            if (*r == 0.0) continue;
            const double d = boost::math::legendre_p_prime(n, *r);
            xs.push_back(-*r);
            ws.push_back(2.0 / ((1.0 - *r * *r) * d * d));
        }
        if (n % 2 == 1) {
            const double d = boost::math::legendre_p_prime(n, 0.0);
            xs.push_back(0.0);
            ws.push_back(2.0 / (d * d));
        }
        for (const double r : z) {
            if (r == 0.0) continue;
            const double d = boost::math::legendre_p_prime(n, r);
            xs.push_back(r);
            ws.push_back(2.0 / ((1.0 - r * r) * d * d));
        }
        it = cache.emplace(n, std::make_pair(std::move(xs), std::move(ws))).first;
    }
    x = it->second.first;
    w = it->second.second;
}

std::shared_ptr<const RadialGrid> make_radial_grid(const RadialGridSpec& s) {
    if (s.dim < 1 || s.dim > 3) throw Error(ErrorKind::InvalidParams, "dim must be 1, 2 or 3");
    if (!(s.k_max > s.k_min) || !(s.k_min > 0.0)) throw Error(ErrorKind::InvalidParams, "need 0 < k_min < k_max");
    if (s.signed_line && s.dim != 1) throw Error(ErrorKind::InvalidParams, "signed frequency line is 1-d only");
    if (s.panels_per_decade < 1) throw Error(ErrorKind::InvalidParams, "panels_per_decade must be positive");

    std::vector<double> edges{0.0, s.k_min};
    const double ratio = std::pow(10.0, 1.0 / s.panels_per_decade);
    double e = s.k_min;
    while (e * ratio < s.k_max * (1.0 - 1e-12)) {
        e *= ratio;
        edges.push_back(e);
    }
    edges.push_back(s.k_max);

    const double rate = std::max(0.0, s.t_osc) * std::max(1.0, s.speed);
    std::vector<double> gx, gw;
    gauss_legendre(s.nodes_per_panel, gx, gw);

    auto g = std::make_shared<RadialGrid>();
    g->dim = s.dim;
    g->signed_line = s.signed_line;
    std::vector<double> kk, ww;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double a = edges[p], b = edges[p + 1];
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) * rate / (0.5 * kPi))));
        const double h = (b - a) / pieces;
        for (int q = 0; q < pieces; ++q) {
            const double lo = a + q * h;
            for (std::size_t i = 0; i < gx.size(); ++i) {
                kk.push_back(lo + 0.5 * h * (gx[i] + 1.0));
                ww.push_back(0.5 * h * gw[i]);
            }
            ++g->panels;
        }
    }
    if (s.signed_line) {
        g->k.reserve(2 * kk.size());
        for (std::size_t i = kk.size(); i-- > 0;) {
            g->k.push_back(-kk[i]);
            g->w.push_back(ww[i]);
        }
        g->k.insert(g->k.end(), kk.begin(), kk.end());
        g->w.insert(g->w.end(), ww.begin(), ww.end());
        g->panels *= 2;
    } else {
        g->k = std::move(kk);
        g->w = std::move(ww);
    }
    return g;
}

RadialSpectralField make_field(std::shared_ptr<const RadialGrid> grid) {
    RadialSpectralField f;
    f.v.assign(grid->k.size(), cd(0.0, 0.0));
    f.grid = std::move(grid);
    return f;
}

namespace {
void same_grid(const RadialSpectralField& a, const RadialSpectralField& b) {
    if (a.grid != b.grid || a.v.size() != b.v.size())
        throw Error(ErrorKind::BackendMismatch, "fields live on different radial grids");
}
}  // namespace

RadialSpectralField operator-(const RadialSpectralField& a, const RadialSpectralField& b) {
    same_grid(a, b);
    RadialSpectralField r = a;
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] -= b.v[i];
    return r;
}

RadialSpectralField operator+(const RadialSpectralField& a, const RadialSpectralField& b) {
    same_grid(a, b);
    RadialSpectralField r = a;
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] += b.v[i];
    return r;
}

RadialSpectralField operator*(cd c, const RadialSpectralField& a) {
    RadialSpectralField r = a;
    for (auto& x : r.v) x *= c;
    return r;
}

double hs_norm_sq(const RadialSpectralField& f, double s) {
    if (!f.grid) throw Error(ErrorKind::BackendMismatch, "field has no grid");
    const RadialGrid& g = *f.grid;
    const int n = g.dim;
    const double e = 2.0 * s + (g.signed_line ? 0.0 : n - 1.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < f.v.size(); ++i) {
        const double k = std::abs(g.k[i]);
        acc += g.w[i] * std::pow(k, e) * std::norm(f.v[i]);
    }
    const double area = g.signed_line ? 1.0 : sphere_area(n);
    return acc * area / std::pow(2.0 * kPi, n);
}

double hs_norm(const RadialSpectralField& f, double s) { return std::sqrt(hs_norm_sq(f, s)); }

double phase_speed(const ModelParams& p) { return std::max(1.0, std::sqrt((p.delta + p.tau) / p.tau)); }

double decay_cutoff(const ModelParams& p, double t, double sigma, double k_max) {
    auto exponent = [&](double k) {
        const GeneralRoots g = roots_exact(p, k);
        double re = -1e300;
        for (const cd& z : g.r) re = std::max(re, z.real());
        re = std::max(re, -0.5 * p.delta * k * k);
        return 2.0 * re * t - 0.5 * sigma * sigma * k * k;
    };
    const double step = std::pow(10.0, 1.0 / 48.0);
    double k = k_max;
    while (k > 1e-6) {
        if (exponent(k) >= -75.0) return std::min(k_max, k * step);
        k /= step;
    }
    return std::min(k_max, 1e-6 * step);
}

void write_csv(std::ostream& os, const RadialSpectralField& f) {
    os << "k,weight,re,im\n";
    const auto& g = *f.grid;
    for (std::size_t i = 0; i < f.v.size(); ++i)
        os << g.k[i] << ',' << g.w[i] << ',' << f.v[i].real() << ',' << f.v[i].imag() << '\n';
}

void GridSpec::validate() const {
    if (dim < 1 || dim > 3) throw Error(ErrorKind::InvalidParams, "grid dim must be 1, 2 or 3");
    if (N < 2 || (N & (N - 1)) != 0) throw Error(ErrorKind::InvalidParams, "grid size must be a power of two");
    if (!(L > 0.0)) throw Error(ErrorKind::InvalidParams, "box half-length must be positive");
}

std::size_t GridSpec::size() const {
    std::size_t s = 1;
    for (int i = 0; i < dim; ++i) s *= static_cast<std::size_t>(N);
    return s;
}

GridField make_grid_field(const GridSpec& spec, Space space) {
    spec.validate();
    GridField f;
    f.spec = spec;
    f.space = space;
    f.v.assign(spec.size(), cd(0.0, 0.0));
    return f;
}

namespace {

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

PlanPair plans_for(const GridSpec& s) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, PlanPair> cache;
    std::lock_guard<std::mutex> lock(mu);
    const auto key = std::make_pair(s.dim, s.N);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<int> n(s.dim, s.N);
    std::vector<cd> buf(s.size());
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    PlanPair pp;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    pp.fwd = fftw_plan_dft(s.dim, n.data(), p, p, FFTW_FORWARD, flags);
    pp.bwd = fftw_plan_dft(s.dim, n.data(), p, p, FFTW_BACKWARD, flags);
    cache.emplace(key, pp);
    return pp;
}

// data[i] *= scale (-1)^{m_1 + ... + m_n}, dim 0 fastest
void scale_parity(const GridSpec& s, cd* data, double scale) {
    const std::size_t N = static_cast<std::size_t>(s.N), rows = s.size() / N;
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t q = r, sum = 0;
        for (int d = 1; d < s.dim; ++d) {
            sum += q % N;
            q /= N;
        }
        double sign = (sum & 1) ? -scale : scale;
        cd* row = data + r * N;
        for (std::size_t i = 0; i < N; ++i, sign = -sign) row[i] *= sign;
    }
}

}  // namespace

void forward_transform(const GridSpec& s, cd* data) {
    const PlanPair pp = plans_for(s);
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(pp.fwd, p, p);
    scale_parity(s, data, std::pow(s.dx(), s.dim));
}

void inverse_transform(const GridSpec& s, cd* data) {
    const PlanPair pp = plans_for(s);
    scale_parity(s, data, 1.0 / (std::pow(s.dx(), s.dim) * static_cast<double>(s.size())));
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(pp.bwd, p, p);
}

GridField to_frequency(const GridField& f) {
    if (f.space == Space::Frequency) return f;
    GridField r = f;
    forward_transform(r.spec, r.v.data());
    r.space = Space::Frequency;
    return r;
}

GridField to_physical(const GridField& f) {
    if (f.space == Space::Physical) return f;
    GridField r = f;
    inverse_transform(r.spec, r.v.data());
    r.space = Space::Physical;
    return r;
}

Vec3 grid_xi(const GridSpec& s, std::size_t i) {
    Vec3 xi{0.0, 0.0, 0.0};
    for (int d = 0; d < s.dim; ++d) {
        xi[d] = s.dk() * mode_index(static_cast<int>(i % static_cast<std::size_t>(s.N)), s.N);
        i /= static_cast<std::size_t>(s.N);
    }
    return xi;
}

Vec3 grid_x(const GridSpec& s, std::size_t i) {
    Vec3 x{0.0, 0.0, 0.0};
    for (int d = 0; d < s.dim; ++d) {
        x[d] = -s.L + s.dx() * static_cast<double>(i % static_cast<std::size_t>(s.N));
        i /= static_cast<std::size_t>(s.N);
    }
    return x;
}

double hs_norm(const GridField& f, double s) {
    if (f.space != Space::Frequency) throw Error(ErrorKind::BackendMismatch, "hs_norm needs a frequency-space field");
    const GridSpec& g = f.spec;
    double acc = 0.0;
    for (std::size_t i = 0; i < f.v.size(); ++i) {
        const Vec3 xi = grid_xi(g, i);
        const double k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        const double w = s == 0.0 ? 1.0 : (k2 == 0.0 ? 0.0 : std::pow(k2, s));
        acc += w * std::norm(f.v[i]);
    }
    return std::sqrt(acc * std::pow(g.dk() / (2.0 * kPi), g.dim));
}

double l2_norm_physical(const GridField& f) {
    if (f.space != Space::Physical) throw Error(ErrorKind::BackendMismatch, "physical norm needs a physical field");
    double acc = 0.0;
    for (const cd& z : f.v) acc += std::norm(z);
    return std::sqrt(acc * std::pow(f.spec.dx(), f.spec.dim));
}

double l1_norm_physical(const GridField& f) {
    if (f.space != Space::Physical) throw Error(ErrorKind::BackendMismatch, "physical norm needs a physical field");
    double acc = 0.0;
    for (const cd& z : f.v) acc += std::abs(z.real());
    return acc * std::pow(f.spec.dx(), f.spec.dim);
}

double default_n0(const ModelParams& p) { return 10.0 * std::max(1.0, 1.0 / (p.delta + p.tau)); }

namespace {
// C-infinity step: 0 for u <= 0, 1 for u >= 1
double smooth_step(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
    return a / (a + b);
}
}  // namespace

ZoneMasks zone_masks(std::span<const double> k, double eps0, double n0) {
    if (!(eps0 > 0.0) || !(n0 > eps0)) throw Error(ErrorKind::InvalidParams, "need 0 < eps0 < N0");
    ZoneMasks z;
    z.chi_int.resize(k.size());
    z.chi_bdd.resize(k.size());
    z.chi_ext.resize(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double a = std::abs(k[i]);
        const double ci = a == 0.0 ? 1.0 : 1.0 - smooth_step(std::log10(a / eps0) + 1.0);
        const double ce = a == 0.0 ? 0.0 : smooth_step(std::log10(a / n0));
        z.chi_int[i] = ci;
        z.chi_ext[i] = ce;
        z.chi_bdd[i] = 1.0 - ci - ce;
    }
    return z;
}

ZoneMasks zone_masks(const ModelParams& p, const RadialSpectralField& f) {
    return zone_masks(f.grid->k, epsilon0(p), default_n0(p));
}

ZoneMasks zone_masks(const ModelParams& p, const GridField& f) {
    std::vector<double> k(f.v.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        const Vec3 xi = grid_xi(f.spec, i);
        k[i] = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
    }
    return zone_masks(k, epsilon0(p), default_n0(p));
}

bool consistent(const StateSnapshot<RadialSpectralField>& s) {
    return s.psi.grid == s.psi_t.grid && s.psi.grid == s.psi_tt.grid && s.psi.v.size() == s.psi_t.v.size() &&
           s.psi.v.size() == s.psi_tt.v.size();
}

bool consistent(const StateSnapshot<GridField>& s) {
    auto eq = [](const GridSpec& a, const GridSpec& b) { return a.dim == b.dim && a.N == b.N && a.L == b.L; };
    return eq(s.psi.spec, s.psi_t.spec) && eq(s.psi.spec, s.psi_tt.spec) && s.psi.space == s.psi_t.space &&
           s.psi.space == s.psi_tt.space;
}

}  // namespace mgt
