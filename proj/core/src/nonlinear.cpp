#include "mgt/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>

#include "mgt/spectral.hpp"

namespace mgt {

const char* nonlinearity_name(Nonlinearity m) {
    switch (m) {
        case Nonlinearity::Kuznetsov: return "kuznetsov";
        case Nonlinearity::Westervelt: return "westervelt";
        case Nonlinearity::None: return "none";
    }
    return "?";
}

namespace {

constexpr cd I{0.0, 1.0};

bool near_node(double t, double h, int& m) {
    m = static_cast<int>(std::llround(t / h));
    return std::abs(m * h - t) <= 1e-9 * std::max(1.0, t);
}

/// Per-mode data of a grid: |xi|^2, gradient symbols and the exact one-step propagator.
struct ModeData {
    GridSpec g;
    std::size_t M = 0;
    std::vector<double> k2;
    std::vector<Vec3> xi;
    /// Phi(h) row-major, Phi[r][c] = d^r K_c(h).
    std::vector<std::array<double, 9>> phi;
};

std::int64_t mode_key(const GridSpec& g, std::size_t i) {
    std::int64_t q = 0;
    for (int d = 0; d < g.dim; ++d) {
        const std::int64_t m = mode_index(static_cast<int>(i % static_cast<std::size_t>(g.N)), g.N);
        q += m * m;
        i /= static_cast<std::size_t>(g.N);
    }
    return q;
}

/// Kernel tables at time t for every distinct |xi| of the grid.
std::vector<KernelTable> grid_kernels(const ModelParams& p, const GridSpec& g, double t) {
    const std::size_t M = g.size();
    std::map<std::int64_t, KernelTable> cache;
    for (std::size_t i = 0; i < M; ++i) cache.emplace(mode_key(g, i), KernelTable{});
    std::vector<std::pair<std::int64_t, KernelTable*>> todo;
    for (auto& [q, K] : cache) todo.emplace_back(q, &K);
    parallel_for(todo.size(), [&](std::size_t j) {
        const double k = g.dk() * std::sqrt(static_cast<double>(todo[j].first));
        *todo[j].second = kernel_table(p, k, t);
    });
    std::vector<KernelTable> out(M);
    for (std::size_t i = 0; i < M; ++i) out[i] = cache.at(mode_key(g, i));
    return out;
}

/// |xi|^2 and gradient symbols (the Nyquist line has no real derivative).
ModeData gradient_modes(const GridSpec& g) {
    ModeData md;
    md.g = g;
    md.M = g.size();
    md.k2.resize(md.M);
    md.xi.resize(md.M);
    for (std::size_t i = 0; i < md.M; ++i) {
        Vec3 xi = grid_xi(g, i);
        md.k2[i] = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        std::size_t r = i;
        for (int d = 0; d < g.dim; ++d) {
            if (static_cast<int>(r % static_cast<std::size_t>(g.N)) == g.N / 2) xi[d] = 0.0;
            r /= static_cast<std::size_t>(g.N);
        }
        md.xi[i] = xi;
    }
    return md;
}

ModeData make_modes(const ModelParams& p, const GridSpec& g, double h) {
    ModeData md = gradient_modes(g);
    md.phi.resize(md.M);
    const auto K = grid_kernels(p, g, h);
    for (std::size_t i = 0; i < md.M; ++i)
        for (int row = 0; row < 3; ++row)
            for (int c = 0; c < 3; ++c) md.phi[i][3 * row + c] = K[i].K[c][row];
    return md;
}

struct SourceStats {
    double f0_mass = 0.0, f0_l1 = 0.0;
};

std::vector<cd>& scratch(int slot, std::size_t n) {
    thread_local std::vector<cd> buf[4];
    buf[slot].resize(n);
    return buf[slot];
}

/// f_hat and/or physical f0 from a state laid out as [component][mode].
SourceStats eval_source(const ModelParams& p, Nonlinearity mode, const ModeData& md, const cd* y, cd* fhat,
                        cd* f0_phys = nullptr) {
    const std::size_t M = md.M;
    SourceStats st;
    if (mode == Nonlinearity::None) {
        if (fhat) std::fill(fhat, fhat + M, cd(0.0));
        if (f0_phys) std::fill(f0_phys, f0_phys + M, cd(0.0));
        return st;
    }
    const cd* y0 = y;
    const cd* y1 = y + M;
    const cd* y2 = y + 2 * M;
    const double r = p.nonlin_ratio;
    // real fields are paired as re + i im so one transform yields two of them
    cd* a = scratch(0, M).data();
    for (std::size_t i = 0; i < M; ++i) a[i] = cd(y1[i].real() - y2[i].imag(), y1[i].imag() + y2[i].real());
    inverse_transform(md.g, a);
    const int n = mode == Nonlinearity::Kuznetsov ? md.g.dim : 0;
    cd* grads[3] = {nullptr, nullptr, nullptr};
    for (int d = 0; d < n; ++d) {
        cd* b = scratch(1 + d, M).data();
        // i xi psi + i (i xi psi_t)
        for (std::size_t i = 0; i < M; ++i) {
            const double x = md.xi[i][d];
            b[i] = cd(-x * (y0[i].imag() + y1[i].real()), x * (y0[i].real() - y1[i].imag()));
        }
        inverse_transform(md.g, b);
        grads[d] = b;
    }
    const double vol = std::pow(md.g.dx(), md.g.dim);
    const double c2 = mode == Nonlinearity::Westervelt ? 1.0 + r : r;
    double mass = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const double pt = a[i].real(), ptt = a[i].imag();
        double f = 2.0 * c2 * pt * ptt, f0 = c2 * pt * pt;
        for (int d = 0; d < n; ++d) {
            const double gx = grads[d][i].real(), gxt = grads[d][i].imag();
            f += 2.0 * gx * gxt;
            f0 += gx * gx;
        }
        if (fhat) fhat[i] = f;
        if (f0_phys) f0_phys[i] = f0;
        mass += f0;
        l1 += std::abs(f0);
    }
    st.f0_mass = mass;
    st.f0_l1 = l1;
    st.f0_mass *= vol;
    st.f0_l1 *= vol;
    if (fhat) forward_transform(md.g, fhat);
    return st;
}

std::vector<cd> pack(const StateSnapshot<GridField>& s) {
    const std::size_t M = s.psi.v.size();
    std::vector<cd> y(3 * M);
    std::copy(s.psi.v.begin(), s.psi.v.end(), y.begin());
    std::copy(s.psi_t.v.begin(), s.psi_t.v.end(), y.begin() + M);
    std::copy(s.psi_tt.v.begin(), s.psi_tt.v.end(), y.begin() + 2 * M);
    return y;
}

StateSnapshot<GridField> unpack(const GridSpec& g, double t, const std::vector<cd>& y) {
    const std::size_t M = g.size();
    StateSnapshot<GridField> s{t, make_grid_field(g, Space::Frequency), make_grid_field(g, Space::Frequency),
                               make_grid_field(g, Space::Frequency)};
    std::copy(y.begin(), y.begin() + M, s.psi.v.begin());
    std::copy(y.begin() + M, y.begin() + 2 * M, s.psi_t.v.begin());
    std::copy(y.begin() + 2 * M, y.end(), s.psi_tt.v.begin());
    return s;
}

void check_frequency_state(const StateSnapshot<GridField>& s) {
    if (!consistent(s)) throw Error(ErrorKind::InvalidParams, "inconsistent state snapshot");
    if (s.psi.space != Space::Frequency || s.psi_t.space != Space::Frequency || s.psi_tt.space != Space::Frequency)
        throw Error(ErrorKind::BackendMismatch, "nonlinearity needs frequency-space states");
}

struct NormWeights {
    std::vector<double> k2, top[3];
    double scale = 1.0;
};

NormWeights norm_weights(const GridSpec& g, double s) {
    NormWeights w;
    const std::size_t M = g.size();
    w.k2.resize(M);
    for (auto& t : w.top) t.resize(M);
    for (std::size_t i = 0; i < M; ++i) {
        const Vec3 xi = grid_xi(g, i);
        const double k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        w.k2[i] = k2;
        for (int l = 0; l < 3; ++l) w.top[l][i] = k2 == 0.0 ? 0.0 : std::pow(k2, s + 2.0 - l);
    }
    w.scale = std::pow(g.dk() / (2.0 * kPi), g.dim);
    return w;
}

NormSample sample_norms(const NormWeights& w, double t, const cd* y, std::size_t M, SourceStats st) {
    double a[3]{}, h1 = 0.0, top[3]{};
    for (std::size_t i = 0; i < M; ++i) {
        for (int c = 0; c < 3; ++c) {
            const double v = std::norm(y[c * M + i]);
            a[c] += v;
            top[c] += w.top[c][i] * v;
            if (c == 0) h1 += w.k2[i] * v;
        }
    }
    NormSample n;
    n.t = t;
    n.psi = std::sqrt(a[0] * w.scale);
    n.psi_t = std::sqrt(a[1] * w.scale);
    n.psi_tt = std::sqrt(a[2] * w.scale);
    n.psi_h1 = std::sqrt(h1 * w.scale);
    for (int c = 0; c < 3; ++c) n.top[c] = std::sqrt(top[c] * w.scale);
    n.f0_mass = st.f0_mass;
    n.f0_l1 = st.f0_l1;
    return n;
}

std::vector<cd> initial_state(const NonlinearProblem& p) {
    const GridSpec& g = p.grid;
    const std::size_t M = g.size();
    std::vector<cd> y(3 * M, cd(0.0));
    for (std::size_t i = 0; i < M; ++i) {
        const Vec3 xi = grid_xi(g, i);
        for (const auto& d : p.data) y[d.slot * M + i] += p.epsilon * data_hat(d, g.dim, xi);
    }
    return y;
}

/// Snapshot bookkeeping shared by both solvers.
std::vector<char> snapshot_mask(const NonlinearProblem& p) {
    const int n = p.steps();
    std::vector<char> keep(n + 1, 0);
    keep[0] = keep[n] = 1;
    if (p.snapshot_stride > 0)
        for (int j = 0; j <= n; j += p.snapshot_stride) keep[j] = 1;
    for (double t : p.snapshot_times) {
        const int j = static_cast<int>(std::llround(t / p.h));
        if (j >= 0 && j <= n) keep[j] = 1;
    }
    return keep;
}

double rel_distance(const std::vector<cd>& a, const std::vector<cd>& b) {
    double d = 0.0, n = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += std::norm(a[i] - b[i]);
        n += std::norm(a[i]);
    }
    return n == 0.0 ? std::sqrt(d) : std::sqrt(d / n);
}

/// y_{j+1} = Phi (y_j + c e3 f_j) + c e3 f_{j+1}, c = h / (2 tau).
void march(const ModeData& md, double c, const std::vector<cd>& y0, const std::vector<std::vector<cd>>& F,
           std::vector<std::vector<cd>>& Y) {
    const std::size_t M = md.M, m = F.size() - 1;
    Y.resize(m + 1);
    Y[0] = y0;
    for (std::size_t j = 1; j <= m; ++j) Y[j].resize(3 * M);
    const std::size_t chunk = 4096, nchunks = (M + chunk - 1) / chunk;
    parallel_for(nchunks, [&](std::size_t ch) {
        const std::size_t i1 = std::min(M, (ch + 1) * chunk);
        for (std::size_t i = ch * chunk; i < i1; ++i) {
            const double* P = md.phi[i].data();
            cd v0 = y0[i], v1 = y0[M + i], v2 = y0[2 * M + i];
            for (std::size_t j = 0; j < m; ++j) {
                const cd u2 = v2 + c * F[j][i];
                const cd w0 = P[0] * v0 + P[1] * v1 + P[2] * u2;
                const cd w1 = P[3] * v0 + P[4] * v1 + P[5] * u2;
                const cd w2 = P[6] * v0 + P[7] * v1 + P[8] * u2 + c * F[j + 1][i];
                v0 = w0;
                v1 = w1;
                v2 = w2;
                Y[j + 1][i] = v0;
                Y[j + 1][M + i] = v1;
                Y[j + 1][2 * M + i] = v2;
            }
        }
    });
}

struct RestartWithSmallerEpsilon {};

Trajectory picard_once(const NonlinearProblem& p, PicardDiagnostics& diag) {
    const GridSpec& g = p.grid;
    const std::size_t M = g.size();
    const int nsteps = p.steps();
    const int slab = p.slab_steps > 0 ? std::min(p.slab_steps, nsteps) : nsteps;
    const ModeData md = make_modes(p.params, g, p.h);
    const NormWeights nw = norm_weights(g, p.s);
    const auto keep = snapshot_mask(p);
    const double c = p.h / (2.0 * p.params.tau);

    Trajectory tr;
    tr.grid = g;
    tr.h = p.h;
    tr.norms.reserve(nsteps + 1);

    std::vector<cd> y = initial_state(p);
    std::vector<cd> f_start(M);
    SourceStats st0 = eval_source(p.params, p.mode, md, y.data(), f_start.data());
    tr.norms.push_back(sample_norms(nw, 0.0, y.data(), M, st0));
    tr.snapshots.push_back(unpack(g, 0.0, y));

    std::vector<std::vector<cd>> F, Y, Ynew;
    std::vector<cd> f_prev;
    for (int j0 = 0, slab_index = 0; j0 < nsteps; j0 += slab, ++slab_index) {
        const int m = std::min(slab, nsteps - j0);
        F.resize(m + 1);
        for (auto& v : F) v.resize(M);
        std::vector<SourceStats> stats(m + 1);
        stats[0] = st0;
        F[0] = f_start;
        // initial guess: source extrapolated linearly from the previous step
        for (int j = 1; j <= m; ++j)
            for (std::size_t i = 0; i < M; ++i)
                F[j][i] = f_prev.empty() ? f_start[i] : f_start[i] + static_cast<double>(j) * (f_start[i] - f_prev[i]);
        march(md, c, y, F, Y);

        std::vector<double> dist;
        int bad = 0;
        for (int it = 0; it < p.picard_max_iter; ++it) {
            parallel_for(static_cast<std::size_t>(m), [&](std::size_t q) {
                const std::size_t j = q + 1;
                stats[j] = eval_source(p.params, p.mode, md, Y[j].data(), F[j].data());
            });
            march(md, c, y, F, Ynew);
            double d = 0.0;
            for (int j = 1; j <= m; ++j) d = std::max(d, rel_distance(Ynew[j], Y[j]));
            std::swap(Y, Ynew);
            dist.push_back(d);
            if (d < p.picard_tol) break;
            if (dist.size() >= 2) {
                const double ratio = d / dist[dist.size() - 2];
                if (p.auto_epsilon && slab_index == 0 && dist.size() == 2 && ratio > 0.25)
                    throw RestartWithSmallerEpsilon{};
                bad = ratio >= 1.0 ? bad + 1 : 0;
                if (bad >= 3)
                    throw Error(ErrorKind::NoContraction, "Picard distances grew for 3 iterations in slab " +
                                                              std::to_string(slab_index) + " (epsilon too large)");
            }
        }
        diag.iterations.push_back(static_cast<int>(dist.size()));
        diag.max_final_distance = std::max(diag.max_final_distance, dist.empty() ? 0.0 : dist.back());
        diag.distances.push_back(std::move(dist));

        for (int j = 1; j <= m; ++j) {
            const double t = (j0 + j) * p.h;
            tr.norms.push_back(sample_norms(nw, t, Y[j].data(), M, stats[j]));
            if (keep[j0 + j]) tr.snapshots.push_back(unpack(g, t, Y[j]));
        }
        y = Y[m];
        f_prev = F[m - 1];
        st0 = eval_source(p.params, p.mode, md, y.data(), f_start.data());
        tr.norms.back().f0_mass = st0.f0_mass;
        tr.norms.back().f0_l1 = st0.f0_l1;
    }
    return tr;
}

}  // namespace

void NonlinearProblem::validate() const {
    params.validate();
    grid.validate();
    if (data.empty()) throw Error(ErrorKind::InvalidParams, "nonlinear problem has no data");
    for (const auto& d : data) d.validate(params.dim);
    if (grid.dim != params.dim) throw Error(ErrorKind::InvalidParams, "grid dimension differs from params.dim");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw Error(ErrorKind::InvalidParams, "epsilon must be >= 0");
    if (!(h > 0.0) || !(T > 0.0)) throw Error(ErrorKind::InvalidParams, "need h > 0 and T > 0");
    int m = 0;
    if (!near_node(T, h, m)) throw Error(ErrorKind::InvalidParams, "T must be a multiple of h");
    if (slab_steps < 0 || snapshot_stride < 0) throw Error(ErrorKind::InvalidParams, "negative slab or stride");
    if (picard_max_iter < 1 || !(picard_tol > 0.0)) throw Error(ErrorKind::InvalidParams, "bad Picard controls");
    if (mode != Nonlinearity::None && params.nonlin_ratio < 0.0)
        throw Error(ErrorKind::InvalidParams, "nonlin_ratio must be >= 0");
    // spectral resolution: Gaussian envelope exp(-sigma^2 k^2 / 4) below 1e-10 at the Nyquist frequency
    const double k_nyq = kPi * grid.N / (2.0 * grid.L);
    for (const auto& d : data) {
        if (d.width * k_nyq < 2.0 * std::sqrt(std::log(1e10)))
            throw Error(ErrorKind::InvalidParams, "grid does not resolve data of width " + std::to_string(d.width));
        for (int i = 0; i < params.dim; ++i)
            if (std::abs(d.center[i]) + 8.0 * d.width > grid.L)
                throw Error(ErrorKind::InvalidParams, "data does not fit in the periodic box");
    }
}

int NonlinearProblem::steps() const { return static_cast<int>(std::llround(T / h)); }

LinearProblem NonlinearProblem::scaled_linear() const {
    LinearProblem lp{params, data};
    for (auto& d : lp.data) d.amplitude *= epsilon;
    return lp;
}

const StateSnapshot<GridField>& Trajectory::at(double t) const {
    for (const auto& s : snapshots)
        if (std::abs(s.t - t) <= 0.5 * h) return s;
    throw Error(ErrorKind::InvalidParams, "no snapshot stored at t = " + std::to_string(t));
}

GridField f_eval(const ModelParams& p, const StateSnapshot<GridField>& state, Nonlinearity mode) {
    check_frequency_state(state);
    const GridSpec& g = state.psi.spec;
    const ModeData md = gradient_modes(g);
    const auto y = pack(state);
    auto out = make_grid_field(g, Space::Frequency);
    eval_source(p, mode, md, y.data(), out.v.data());
    return to_physical(out);
}

GridField f0_eval(const ModelParams& p, const StateSnapshot<GridField>& state, Nonlinearity mode) {
    check_frequency_state(state);
    const GridSpec& g = state.psi.spec;
    const ModeData md = gradient_modes(g);
    const auto y = pack(state);
    auto out = make_grid_field(g, Space::Physical);
    eval_source(p, mode, md, y.data(), nullptr, out.v.data());
    return out;
}

namespace {

/// Quadrature weights on nodes a..b (inclusive) with step h.
void add_weights(std::vector<double>& w, int a, int b, double h, Quadrature q) {
    const int n = b - a;
    if (n <= 0) return;
    const bool simpson = q == Quadrature::Simpson || (q == Quadrature::Auto && n % 2 == 0);
    if (simpson) {
        if (n % 2 != 0) throw Error(ErrorKind::InvalidParams, "Simpson rule needs an even number of intervals");
        for (int j = a; j <= b; ++j) {
            const int r = j - a;
            w[j] += h / 3.0 * (r == 0 || r == n ? 1.0 : (r % 2 ? 4.0 : 2.0));
        }
    } else {
        for (int j = a; j <= b; ++j) w[j] += h * (j == a || j == b ? 0.5 : 1.0);
    }
}

}  // namespace

GridField duhamel_apply(const ModelParams& p, const SourceHistory& src, double t, int ell, DuhamelForm form,
                        Quadrature q) {
    p.validate();
    if (ell < 0 || ell > 2) throw Error(ErrorKind::InvalidParams, "time derivative out of range");
    if (!(src.h > 0.0) || t < 0.0) throw Error(ErrorKind::InvalidParams, "need h > 0 and t >= 0");
    int m = 0;
    if (!near_node(t, src.h, m)) throw Error(ErrorKind::InvalidParams, "t is not on the source time grid");
    const bool need_f = form != DuhamelForm::ByParts, need_f0 = form != DuhamelForm::Direct;
    if ((need_f && static_cast<int>(src.f.size()) <= m) || (need_f0 && static_cast<int>(src.f0.size()) <= m))
        throw Error(ErrorKind::InsufficientHistory, "source not sampled up to t = " + std::to_string(t));
    if (form == DuhamelForm::HalfSplit && m % 2 != 0)
        throw Error(ErrorKind::InvalidParams, "half-split form needs t/2 on the grid");
    auto check = [&](const std::vector<GridField>& v) {
        for (int j = 0; j <= m; ++j)
            if (v[j].space != Space::Frequency || v[j].v.size() != src.grid.size())
                throw Error(ErrorKind::BackendMismatch, "sources must be frequency fields on the history grid");
    };
    if (need_f) check(src.f);
    if (need_f0) check(src.f0);

    const GridSpec& g = src.grid;
    const std::size_t M = g.size();
    const ModeData md = make_modes(p, g, src.h);
    // weights: wa multiplies the f0 accumulator that is later hit by A, wb the plain one
    std::vector<double> wa(m + 1, 0.0), wb(m + 1, 0.0);
    std::vector<double> ba(m + 1, 0.0);  // boundary coefficients of e3 f0_j in the plain accumulator
    if (form == DuhamelForm::Direct) add_weights(wb, 0, m, src.h, q);
    if (form == DuhamelForm::ByParts) {
        add_weights(wa, 0, m, src.h, q);
        ba[0] -= 1.0;
        ba[m] += 1.0;
    }
    if (form == DuhamelForm::HalfSplit) {
        add_weights(wa, 0, m / 2, src.h, q);
        add_weights(wb, m / 2, m, src.h, q);
        ba[0] -= 1.0;
        ba[m / 2] += 1.0;
    }

    auto out = make_grid_field(g, Space::Frequency);
    const double tau = p.tau, d = p.delta;
    parallel_for(M, [&](std::size_t i) {
        const double* P = md.phi[i].data();
        cd za[3]{}, zb[3]{};
        for (int j = 0; j <= m; ++j) {
            if (j > 0) {
                cd ta[3], tb[3];
                for (int r = 0; r < 3; ++r) {
                    ta[r] = P[3 * r] * za[0] + P[3 * r + 1] * za[1] + P[3 * r + 2] * za[2];
                    tb[r] = P[3 * r] * zb[0] + P[3 * r + 1] * zb[1] + P[3 * r + 2] * zb[2];
                }
                std::copy(ta, ta + 3, za);
                std::copy(tb, tb + 3, zb);
            }
            if (wa[j] != 0.0) za[2] += wa[j] * src.f0[j].v[i];
            if (ba[j] != 0.0) zb[2] += ba[j] * src.f0[j].v[i];
            if (wb[j] != 0.0) zb[2] += wb[j] * src.f[j].v[i];
        }
        const double k2 = md.k2[i];
        const cd a[3] = {za[1], za[2], -(k2 * za[0] + (d + tau) * k2 * za[1] + za[2]) / tau};
        out.v[i] = a[ell] + zb[ell];
    });
    return to_physical(out);
}

StateSnapshot<GridField> linear_grid_state(const NonlinearProblem& p, double t) {
    if (t < 0.0) throw Error(ErrorKind::InvalidParams, "t must be >= 0");
    const GridSpec& g = p.grid;
    const std::size_t M = g.size();
    const auto K = grid_kernels(p.params, g, t);
    const auto y0 = initial_state(p);
    std::vector<cd> y(3 * M);
    for (std::size_t i = 0; i < M; ++i)
        for (int l = 0; l < 3; ++l)
            y[l * M + i] = K[i].K[0][l] * y0[i] + K[i].K[1][l] * y0[M + i] + K[i].K[2][l] * y0[2 * M + i];
    return unpack(g, t, y);
}

Trajectory picard_solve(const NonlinearProblem& p0) {
    p0.validate();
    NonlinearProblem p = p0;
    PicardDiagnostics diag;
    for (int attempt = 0;; ++attempt) {
        diag = PicardDiagnostics{};
        diag.halvings = attempt;
        diag.epsilon_used = p.epsilon;
        try {
            Trajectory tr = picard_once(p, diag);
            tr.diag = diag;
            return tr;
        } catch (const RestartWithSmallerEpsilon&) {
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoContraction || !p.auto_epsilon || attempt >= 20) throw;
        }
        p.epsilon *= 0.5;
    }
}

double rk_spectral_radius(const ModelParams& p, const GridSpec& g) {
    const double k = g.dk() * (g.N / 2) * std::sqrt(static_cast<double>(g.dim));
    const GeneralRoots r = roots_exact(p, k);
    double rho = 0.0;
    for (const cd& z : r.r) rho = std::max(rho, std::abs(z));
    return std::max(rho, 1.0 / p.tau);
}

Trajectory rk_march_oracle(const NonlinearProblem& p) {
    p.validate();
    const double rho = rk_spectral_radius(p.params, p.grid);
    if (p.h * rho > 2.7)
        throw Error(ErrorKind::StabilityLimit, "RK4 needs h * rho <= 2.7 (rho = " + std::to_string(rho) +
                                                   ", h <= " + std::to_string(2.7 / rho) + ")");
    const GridSpec& g = p.grid;
    const std::size_t M = g.size();
    const ModeData md = gradient_modes(g);
    const NormWeights nw = norm_weights(g, p.s);
    const auto keep = snapshot_mask(p);
    const double tau = p.params.tau, dt = p.params.delta + p.params.tau;

    Trajectory tr;
    tr.grid = g;
    tr.h = p.h;
    tr.diag.epsilon_used = p.epsilon;
    std::vector<cd> y = initial_state(p), k1(3 * M), k2(3 * M), k3(3 * M), k4(3 * M), tmp(3 * M), f(M);
    SourceStats st{};
    auto rhs = [&](const std::vector<cd>& u, std::vector<cd>& du, SourceStats* out) {
        const SourceStats s = eval_source(p.params, p.mode, md, u.data(), f.data());
        if (out) *out = s;
        for (std::size_t i = 0; i < M; ++i) {
            const double q = md.k2[i];
            du[i] = u[M + i];
            du[M + i] = u[2 * M + i];
            du[2 * M + i] = (-q * u[i] - dt * q * u[M + i] - u[2 * M + i] + f[i]) / tau;
        }
    };
    const int n = p.steps();
    const double h = p.h;
    for (int j = 0; j <= n; ++j) {
        rhs(y, k1, &st);
        tr.norms.push_back(sample_norms(nw, j * h, y.data(), M, st));
        if (keep[j]) tr.snapshots.push_back(unpack(g, j * h, y));
        if (j == n) break;
        for (std::size_t i = 0; i < 3 * M; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        rhs(tmp, k2, nullptr);
        for (std::size_t i = 0; i < 3 * M; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        rhs(tmp, k3, nullptr);
        for (std::size_t i = 0; i < 3 * M; ++i) tmp[i] = y[i] + h * k3[i];
        rhs(tmp, k4, nullptr);
        for (std::size_t i = 0; i < 3 * M; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return tr;
}

namespace {

double evolution_weighted(int n, double s, double t, double psi, double h1, double pt, double ptt, const double* top) {
    const double w = 1.0 + t;
    double v = 0.0;
    if (n <= 2) {
        v += psi / rate_D(n, t) + std::pow(w, n / 4.0) * h1;
        v += std::pow(w, n / 4.0) * pt + std::pow(w, 0.5 + n / 4.0) * ptt;
    } else {
        v += std::pow(w, -0.5 + n / 4.0) * psi + std::pow(w, n / 4.0) * pt + std::pow(w, 0.5 + n / 4.0) * ptt;
    }
    const double wt = std::pow(w, 0.5 + s / 2.0 + n / 4.0);
    for (int l = 0; l < 3; ++l) v += wt * top[l];
    return v;
}

}  // namespace

EvolutionNorm evolution_norm(const Trajectory& tr, double s) {
    EvolutionNorm e;
    const int n = tr.grid.dim;
    const NormWeights nw = norm_weights(tr.grid, s);
    const std::size_t M = tr.grid.size();
    double run = 0.0;
    for (const auto& snap : tr.snapshots) {
        const auto y = pack(snap);
        const NormSample ns = sample_norms(nw, snap.t, y.data(), M, {});
        const double v = evolution_weighted(n, s, snap.t, ns.psi, ns.psi_h1, ns.psi_t, ns.psi_tt, ns.top);
        run = std::max(run, v);
        e.t.push_back(snap.t);
        e.running.push_back(run);
    }
    e.value = run;
    return e;
}

Trajectory subtract_linear(const NonlinearProblem& p, const Trajectory& tr) {
    Trajectory out;
    out.grid = tr.grid;
    out.h = tr.h;
    out.diag = tr.diag;
    const NormWeights nw = norm_weights(tr.grid, p.s);
    const std::size_t M = tr.grid.size();
    for (const auto& snap : tr.snapshots) {
        const auto lin = linear_grid_state(p, snap.t);
        auto y = pack(snap);
        const auto yl = pack(lin);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] -= yl[i];
        out.norms.push_back(sample_norms(nw, snap.t, y.data(), M, {}));
        out.snapshots.push_back(unpack(tr.grid, snap.t, y));
    }
    return out;
}

namespace {

void require_every_step(const NonlinearProblem& p, const Trajectory& tr) {
    if (static_cast<int>(tr.snapshots.size()) != p.steps() + 1)
        throw Error(ErrorKind::InsufficientHistory, "check needs every time step stored (snapshot_stride = 1)");
}

}  // namespace

Trajectory apply_operator(const NonlinearProblem& p, const Trajectory& tr) {
    require_every_step(p, tr);
    const GridSpec& g = p.grid;
    const std::size_t M = g.size();
    const int m = p.steps();
    const ModeData md = make_modes(p.params, g, p.h);
    std::vector<std::vector<cd>> F(m + 1, std::vector<cd>(M)), D;
    parallel_for(static_cast<std::size_t>(m + 1), [&](std::size_t j) {
        const auto y = pack(tr.snapshots[j]);
        eval_source(p.params, p.mode, md, y.data(), F[j].data());
    });
    // trapezoid Duhamel sums at every node, started from zero data
    march(md, p.h / (2.0 * p.params.tau), std::vector<cd>(3 * M, cd(0.0)), F, D);
    Trajectory out;
    out.grid = g;
    out.h = p.h;
    const NormWeights nw = norm_weights(g, p.s);
    for (int j = 0; j <= m; ++j) {
        auto y = pack(linear_grid_state(p, j * p.h));
        for (std::size_t i = 0; i < 3 * M; ++i) y[i] += D[j][i];
        out.norms.push_back(sample_norms(nw, j * p.h, y.data(), M, {}));
        out.snapshots.push_back(unpack(g, j * p.h, y));
    }
    return out;
}

Trajectory trajectory_difference(const Trajectory& a, const Trajectory& b) {
    Trajectory out;
    out.grid = a.grid;
    out.h = a.h;
    for (const auto& sa : a.snapshots)
        for (const auto& sb : b.snapshots) {
            if (std::abs(sa.t - sb.t) > 1e-9 * std::max(1.0, sa.t)) continue;
            if (sa.psi.v.size() != sb.psi.v.size()) throw Error(ErrorKind::BackendMismatch, "grids differ");
            auto y = pack(sa);
            const auto yb = pack(sb);
            for (std::size_t i = 0; i < y.size(); ++i) y[i] -= yb[i];
            out.snapshots.push_back(unpack(a.grid, sa.t, y));
            break;
        }
    if (out.snapshots.empty()) throw Error(ErrorKind::InvalidParams, "trajectories share no snapshot times");
    return out;
}

double self_consistency_residual(const NonlinearProblem& p, const Trajectory& tr) {
    const Trajectory N = apply_operator(p, tr);
    double worst = 0.0;
    for (std::size_t j = 0; j < tr.snapshots.size(); ++j)
        worst = std::max(worst, rel_distance(pack(tr.snapshots[j]), pack(N.snapshots[j])));
    return worst;
}

double pde_residual(const NonlinearProblem& p, const Trajectory& tr) {
    require_every_step(p, tr);
    const GridSpec& g = p.grid;
    const std::size_t M = g.size();
    const int m = p.steps();
    const ModeData md = make_modes(p.params, g, p.h);
    const double tau = p.params.tau, dt = p.params.delta + p.params.tau, h = p.h;
    std::vector<double> worst(m + 1, 0.0);
    parallel_for(static_cast<std::size_t>(m > 1 ? m - 1 : 0), [&](std::size_t q) {
        const int j = static_cast<int>(q) + 1;
        const auto y = pack(tr.snapshots[j]);
        std::vector<cd> f(M);
        eval_source(p.params, p.mode, md, y.data(), f.data());
        const auto& up = tr.snapshots[j + 1].psi_tt.v;
        const auto& dn = tr.snapshots[j - 1].psi_tt.v;
        double res = 0.0, scale[5]{};
        for (std::size_t i = 0; i < M; ++i) {
            const double k2 = md.k2[i];
            const cd t3 = tau * (up[i] - dn[i]) / (2.0 * h);
            const cd a = y[2 * M + i], b = k2 * y[i], c = dt * k2 * y[M + i];
            res += std::norm(t3 + a + b + c - f[i]);
            scale[0] += std::norm(t3);
            scale[1] += std::norm(a);
            scale[2] += std::norm(b);
            scale[3] += std::norm(c);
            scale[4] += std::norm(f[i]);
        }
        double denom = 0.0;
        for (double s : scale) denom += std::sqrt(s);
        worst[j] = denom == 0.0 ? 0.0 : std::sqrt(res) / denom;
    });
    return *std::max_element(worst.begin(), worst.end());
}

double trajectory_distance(const Trajectory& a, const Trajectory& b) {
    double worst = 0.0;
    bool any = false;
    for (const auto& sa : a.snapshots)
        for (const auto& sb : b.snapshots) {
            if (std::abs(sa.t - sb.t) > 1e-9 * std::max(1.0, sa.t)) continue;
            if (sa.psi.v.size() != sb.psi.v.size()) throw Error(ErrorKind::BackendMismatch, "grids differ");
            worst = std::max(worst, rel_distance(sb.psi.v, sa.psi.v));
            any = true;
        }
    if (!any) throw Error(ErrorKind::InvalidParams, "trajectories share no snapshot times");
    return worst;
}

NonlinearMoments initial_moments(const NonlinearProblem& p) {
    p.validate();
    const GridSpec& g = p.grid;
    const auto y = initial_state(p);
    const auto f0 = f0_eval(p.params, unpack(g, 0.0, y), p.mode);
    NonlinearMoments m;
    const double vol = std::pow(g.dx(), g.dim);
    for (std::size_t i = 0; i < f0.v.size(); ++i) {
        const double v = f0.v[i].real();
        m.M00 += v * vol;
        const Vec3 x = grid_x(g, i);
        for (int d = 0; d < g.dim; ++d) m.P00[d] += x[d] * v * vol;
    }
    return m;
}

NonlinearMoments nonlinear_moments(const NonlinearProblem& p, const Trajectory& tr) {
    NonlinearMoments m = initial_moments(p);
    const auto& ns = tr.norms;
    if (ns.size() < 2) throw Error(ErrorKind::InsufficientHistory, "trajectory has no time steps");
    for (std::size_t j = 1; j < ns.size(); ++j) m.M_non += 0.5 * (ns[j].t - ns[j - 1].t) * (ns[j].f0_mass + ns[j - 1].f0_mass);
    const int n = tr.grid.dim;
    if (n >= 3) {
        const double T = ns.back().t;
        double C = 0.0;
        for (const auto& s : ns)
            if (s.t >= 0.5 * T) C = std::max(C, s.f0_l1 * std::pow(1.0 + s.t, n / 2.0));
        m.M_non_tail = C * std::pow(1.0 + T, 1.0 - n / 2.0) / (n / 2.0 - 1.0);
    }
    return m;
}

std::vector<DecayReport> nonlinear_decay_suite(const NonlinearProblem& p, const Trajectory& tr, double t0,
                                               int per_decade) {
    const int n = tr.grid.dim;
    const double T = tr.norms.back().t;
    const auto times = geometric_times(t0, T, per_decade);
    std::vector<std::size_t> idx;
    for (double t : times) {
        const std::size_t j = static_cast<std::size_t>(std::llround(t / tr.h));
        if (j < tr.norms.size() && (idx.empty() || idx.back() != j)) idx.push_back(j);
    }
    auto series = [&](auto get, std::vector<double>& t, std::vector<double>& v) {
        for (std::size_t j : idx) {
            t.push_back(tr.norms[j].t);
            v.push_back(get(tr.norms[j]));
        }
    };
    std::vector<DecayReport> out;
    auto add = [&](const char* label, auto get, double expected, double tol) {
        std::vector<double> t, v;
        series(get, t, v);
        DecayReport r = std::isnan(expected) ? fit_log_growth(t, v) : fit_decay(t, v, expected, tol);
        r.label = label;
        out.push_back(std::move(r));
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    add("psi_l2", [](const NormSample& s) { return s.psi; }, n == 2 ? nan : (n == 1 ? 0.5 : 0.5 - n / 4.0), 0.1);
    add("psi_h1", [](const NormSample& s) { return s.psi_h1; }, -n / 4.0, 0.1);
    add("psi_t_l2", [](const NormSample& s) { return s.psi_t; }, -n / 4.0, n == 2 ? 0.15 : 0.1);
    add("psi_tt_l2", [](const NormSample& s) { return s.psi_tt; }, -0.5 - n / 4.0, 0.1);
    (void)p;
    return out;
}

double nonlinear_first_order_constant(const NonlinearProblem& p, const NonlinearMoments& m, bool literal) {
    const CombinationConstants c = combinations(p.scaled_linear());
    return c.M12 - (literal ? p.params.tau : 1.0) * m.M00;
}

double nonlinear_profile_residual(const NonlinearProblem& p, const Trajectory& tr, const NonlinearMoments& m,
                                  const NonlinearProfileSpec& spec, double t) {
    const int n = p.params.dim;
    if (spec.order != 1 && spec.order != 2) throw Error(ErrorKind::InvalidParams, "profile order must be 1 or 2");
    if (spec.ell < 0 || spec.ell > 2) throw Error(ErrorKind::InvalidParams, "time derivative out of range");
    if (spec.order == 1 && n < 2 && !(spec.ell == 0 && spec.k == 0.0))
        throw Error(ErrorKind::DimensionUnsupported, "first-order nonlinear profile needs n >= 2 (1-d: l = 0, k = 0 only)");
    if (spec.order == 2 && n < 3) throw Error(ErrorKind::DimensionUnsupported, "second-order nonlinear profile needs n >= 3");
    const StateSnapshot<GridField>& snap = tr.at(t);
    t = snap.t;
    const GridField& field = spec.ell == 0 ? snap.psi : (spec.ell == 1 ? snap.psi_t : snap.psi_tt);
    const CombinationConstants c = combinations(p.scaled_linear());
    const double tau = p.params.tau, d = p.params.delta, a8 = (4.0 * tau - d) / 8.0;
    static const KernelId nid[3] = {KernelId::N0, KernelId::N1, KernelId::N2};
    const int l = spec.ell;
    auto diff = make_grid_field(p.grid, Space::Frequency);
    for (std::size_t i = 0; i < diff.v.size(); ++i) {
        const Vec3 xi = grid_xi(p.grid, i);
        const double k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2], k = std::sqrt(k2);
        const double F = sine_wave(l, k, t, d);
        cd v = c.M12 * F;
        if (spec.order == 2) {
            const double xb = xi[0] * c.B[0] + xi[1] * c.B[1] + xi[2] * c.B[2];
            v += c.M12 * nhat({nid[l], 0, t, k}, p.params) - I * xb * F + c.A1 * cosine_wave(l, k, t, d);
        }
        if (!spec.literal) {
            v -= m.M00 * F;
            if (spec.order == 2) {
                const double xp = xi[0] * m.P00[0] + xi[1] * m.P00[1] + xi[2] * m.P00[2];
                v += -m.M00 * nhat({nid[l], 0, t, k}, p.params) + I * xp * F + tau * m.M00 * cosine_wave(l, k, t, d) +
                     m.M_non * sine_wave(l + 1, k, t, d);
            }
        } else {
            const double S = sine_wave(0, k, t, d), C = cosine_wave(0, k, t, d);
            const double J[3] = {S, C, -k2 * S};
            v -= tau * m.M00 * J[l];
            if (spec.order == 2) {
                const cd xp = I * (xi[0] * m.P00[0] + xi[1] * m.P00[1] + xi[2] * m.P00[2]);
                cd phi;
                if (l == 0)
                    phi = -tau * m.M00 * t * d * a8 * (-k2) * C + tau * xp * S - tau * tau * m.M00 * C;
                else if (l == 1)
                    phi = -tau * m.M00 * d * (a8 * t * k2 + 0.5) * (-k2) * S + tau * xp * C + tau * tau * m.M00 * (-k2) * S;
                else
                    phi = -tau * m.M00 * d * (a8 * t * k2 + 1.0) * (-k2) * C - tau * xp * (-k2) * S +
                          tau * tau * m.M00 * (-k2) * C;
                const double Jn[3] = {C, -k2 * S, -k2 * C};
                v += -tau * m.M_non * Jn[l] - phi;
            }
        }
        diff.v[i] = field.v[i] - v;
    }
    return hs_norm(diff, spec.k);
}

void write_norm_history(std::ostream& os, const Trajectory& tr) {
    char buf[512];
    os << "t,psi_l2,psi_h1,psi_t_l2,psi_tt_l2,top0,top1,top2,f0_mass,f0_l1\n";
    for (const auto& s : tr.norms) {
        std::snprintf(buf, sizeof buf, "%.10g,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e\n", s.t, s.psi,
                      s.psi_h1, s.psi_t, s.psi_tt, s.top[0], s.top[1], s.top[2], s.f0_mass, s.f0_l1);
        os << buf;
    }
}

void write_picard_diagnostics(std::ostream& os, const PicardDiagnostics& d) {
    char buf[128];
    os << "slab,iteration,distance,ratio\n";
    for (std::size_t s = 0; s < d.distances.size(); ++s)
        for (std::size_t i = 0; i < d.distances[s].size(); ++i) {
            const double r = i == 0 || d.distances[s][i - 1] == 0.0 ? 0.0 : d.distances[s][i] / d.distances[s][i - 1];
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.6e,%.6e\n", s, i + 1, d.distances[s][i], r);
            os << buf;
        }
}

namespace {

constexpr char kMagic[8] = {'M', 'G', 'T', 'T', 'R', 'A', 'J', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error(ErrorKind::MissingData, "truncated checkpoint");
    return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Trajectory& tr) {
    os.write(kMagic, sizeof kMagic);
    put(os, kCheckpointVersion);
    put(os, static_cast<std::int32_t>(tr.grid.dim));
    put(os, static_cast<std::int32_t>(tr.grid.N));
    put(os, tr.grid.L);
    put(os, tr.h);
    put(os, static_cast<std::uint64_t>(tr.norms.size()));
    put(os, static_cast<std::uint64_t>(tr.snapshots.size()));
    for (const auto& s : tr.norms) put(os, s);
    for (const auto& s : tr.snapshots) {
        put(os, s.t);
        for (const GridField* f : {&s.psi, &s.psi_t, &s.psi_tt})
            os.write(reinterpret_cast<const char*>(f->v.data()), static_cast<std::streamsize>(f->v.size() * sizeof(cd)));
    }
}

Trajectory read_checkpoint(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error(ErrorKind::MissingData, "not a trajectory checkpoint");
    if (get<std::uint32_t>(is) != kCheckpointVersion) throw Error(ErrorKind::MissingData, "unsupported checkpoint version");
    Trajectory tr;
    tr.grid.dim = get<std::int32_t>(is);
    tr.grid.N = get<std::int32_t>(is);
    tr.grid.L = get<double>(is);
    tr.grid.validate();
    tr.h = get<double>(is);
    const auto nn = get<std::uint64_t>(is), ns = get<std::uint64_t>(is);
    tr.norms.resize(nn);
    for (auto& s : tr.norms) s = get<NormSample>(is);
    for (std::uint64_t j = 0; j < ns; ++j) {
        StateSnapshot<GridField> s{get<double>(is), make_grid_field(tr.grid, Space::Frequency),
                                   make_grid_field(tr.grid, Space::Frequency), make_grid_field(tr.grid, Space::Frequency)};
        for (GridField* f : {&s.psi, &s.psi_t, &s.psi_tt}) {
            is.read(reinterpret_cast<char*>(f->v.data()), static_cast<std::streamsize>(f->v.size() * sizeof(cd)));
            if (!is) throw Error(ErrorKind::MissingData, "truncated checkpoint");
        }
        tr.snapshots.push_back(std::move(s));
    }
    return tr;
}

}  // namespace mgt
