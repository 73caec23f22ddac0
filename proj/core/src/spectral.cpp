#include "mgt/spectral.hpp"

#include <algorithm>
#include <boost/numeric/odeint.hpp>

namespace mgt {

namespace {

struct Depressed {
    double p, q, D;
};

// l = y - 1/(3 tau) turns the cubic into y^3 + p y + q = 0. D = q^2/4 + p^3/27 is
// expanded in u = k^2 because its constant term cancels exactly.
Depressed depressed(const ModelParams& P, double k) {
    const double t = P.tau, d = P.delta, u = k * k;
    const double al = (d + t) / t, be = 1.0 / (3.0 * t * t);
    const double ga = (2.0 * t - d) / (3.0 * t * t), et = 2.0 / (27.0 * t * t * t);
    Depressed r;
    r.p = al * u - be;
    r.q = ga * u + et;
    r.D = u * (1.0 / (27.0 * t * t * t * t)) + u * u * (ga * ga / 4.0 - al * al * be / 9.0) +
          u * u * u * al * al * al / 27.0;
    return r;
}

cd cubic(const ModelParams& P, double k, cd l) {
    const double k2 = k * k;
    return ((P.tau * l + 1.0) * l + (P.delta + P.tau) * k2) * l + k2;
}

cd cubic_d(const ModelParams& P, double k, cd l) {
    return (3.0 * P.tau * l + 2.0) * l + (P.delta + P.tau) * k * k;
}

cd polish(const ModelParams& P, double k, cd l) {
    double scale = 0.0;
    double res = cubic_residual(P, k, l, &scale);
    // keep stepping while the residual strictly drops: the 1e-13 scale target is
    // not enough for the small real parts of the pair at tiny k
    for (int it = 0; it < 5; ++it) {
        if (res == 0.0) break;
        const cd dp = cubic_d(P, k, l);
        if (dp == 0.0) break;
        const cd cand = l - cubic(P, k, l) / dp;
        double sc2 = 0.0;
        const double r2 = cubic_residual(P, k, cand, &sc2);
        if (!(r2 < res)) break;
        l = cand;
        res = r2;
        scale = sc2;
    }
    return l;
}

}  // namespace

double cubic_residual(const ModelParams& P, double k, cd l, double* scale) {
    const double a = std::abs(l), k2 = k * k;
    if (scale) *scale = std::max(P.tau * a * a * a + a * a + (std::abs(P.delta) + P.tau) * k2 * a + k2,
                                 std::numeric_limits<double>::min());
    return std::abs(cubic(P, k, l));
}

double discriminant(const ModelParams& P, double k) {
    const double a = P.tau, b = 1.0, c = (P.delta + P.tau) * k * k, d = k * k;
    return 18.0 * a * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * a * c * c * c -
           27.0 * a * a * d * d;
}

GeneralRoots roots_exact(const ModelParams& P, double k) {
    GeneralRoots g;
    const double a3 = 1.0 / (3.0 * P.tau);
    if (k == 0.0) {
        g.r = {cd(-1.0 / P.tau, 0.0), cd(0.0, 0.0), cd(0.0, 0.0)};
        g.complex_pair = true;
        return g;
    }
    const Depressed dp = depressed(P, k);
    if (dp.D > 0.0) {
        const double sq = std::sqrt(dp.D);
        const double sgn = dp.q >= 0.0 ? 1.0 : -1.0;
        const double A = -sgn * std::cbrt(std::abs(dp.q) / 2.0 + sq);
        const double B = A != 0.0 ? -dp.p / (3.0 * A) : 0.0;
        // A + B and A - B through A^3 + B^3 = -q, A^3 - B^3 = -2 sgn(q) sqrt(D)
        const double y1 = -dp.q / (A * A - A * B + B * B);
        const double amb = -2.0 * sgn * sq / (A * A + A * B + B * B);
        const double l1 = polish(P, k, cd(y1 - a3, 0.0)).real();
        cd l2(-y1 / 2.0 - a3, std::sqrt(3.0) / 2.0 * std::abs(amb));
        l2 = polish(P, k, l2);
        if (l2.imag() < 0.0) l2 = std::conj(l2);
        g.r = {cd(l1, 0.0), l2, std::conj(l2)};
        g.complex_pair = true;
        return g;
    }
    std::array<double, 3> y{};
    if (dp.p == 0.0) {
        y = {0.0, 0.0, 0.0};
    } else {
        const double m = 2.0 * std::sqrt(-dp.p / 3.0);
        double arg = 3.0 * dp.q / (dp.p * m);
        arg = std::clamp(arg, -1.0, 1.0);
        const double th = std::acos(arg) / 3.0;
        for (int j = 0; j < 3; ++j) y[j] = m * std::cos(th - 2.0 * kPi * j / 3.0);
    }
    for (int j = 0; j < 3; ++j) y[j] = polish(P, k, cd(y[j] - a3, 0.0)).real();
    std::sort(y.begin(), y.end());
    g.r = {cd(y[0], 0.0), cd(y[1], 0.0), cd(y[2], 0.0)};
    g.complex_pair = false;
    return g;
}

RootTriple to_triple(const GeneralRoots& g, const ModelParams& P, double k) {
    RootTriple r;
    if (g.complex_pair) {
        r.lambda1 = g.r[0].real();
        r.mu_R = g.r[1].real();
        r.mu_I = g.r[1].imag();
    } else {
        // three real roots: report the pair closest to the origin as mu_R with mu_I = 0
        r.lambda1 = g.r[0].real();
        r.mu_R = 0.5 * (g.r[1].real() + g.r[2].real());
        r.mu_I = 0.0;
    }
    double e0 = 1.0;
    try {
        e0 = epsilon0(P);
    } catch (const Error&) {
        e0 = 0.0;
    }
    r.small_zone = k <= e0;
    return r;
}

RootTriple roots_series(const ModelParams& P, double k, int order) {
    if (order < 2 || order > 4) throw Error(ErrorKind::InvalidParams, "series order must be 2, 3 or 4");
    const double e0 = epsilon0(P);
    if (k > e0) throw Error(ErrorKind::OutOfZone, "k exceeds epsilon0");
    const auto s = series_roots<double>(P.tau, P.delta, k, order);
    RootTriple r;
    r.small_zone = true;
    r.lambda1 = s.lambda1;
    r.mu_R = s.mu_R;
    r.mu_I = s.mu_I;
    return r;
}

bool roots_near_degenerate(const GeneralRoots& g) {
    double big = 1.0;
    for (const cd& z : g.r) big = std::max(big, std::abs(z));
    const double thr = 1e-6 * big;
    if (g.complex_pair) return std::abs(g.r[0] - g.r[1]) < thr;
    return std::abs(g.r[0] - g.r[1]) < thr || std::abs(g.r[1] - g.r[2]) < thr ||
           std::abs(g.r[0] - g.r[2]) < thr;
}

double sin_over_k(double k, double t) {
    const double x = k * t;
    if (std::abs(x) < 1e-4) return t * (1.0 - x * x / 6.0);
    return std::sin(x) / k;
}

namespace {

// E[m] = divided difference of l^m e^{l t} over the three roots, m = 0..5.
void divided_differences(const GeneralRoots& g, double t, double E[6]) {
    if (g.complex_pair) {
        const double a = g.r[0].real();
        const cd l2 = g.r[1];
        const double mu = l2.real(), nu = l2.imag();
        const double emu = std::exp(mu * t);
        const double c = std::cos(nu * t), so = sin_over_k(nu, t);
        const double ea = std::exp(a * t);
        const cd e2 = std::exp(l2 * t);
        double R = 1.0, Iov = 0.0, am = 1.0;
        cd zm = 1.0;
        for (int m = 0; m < 6; ++m) {
            // (l2^m e^{l2 t} - l3^m e^{l3 t}) / (l2 - l3) in real form
            const double f23 = emu * (Iov * c + R * so);
            const cd f12 = (am * ea - zm * e2) / (a - l2);
            E[m] = ((f12 - f23) / (a - std::conj(l2))).real();
            const double Rn = mu * R - nu * nu * Iov;
            Iov = mu * Iov + R;
            R = Rn;
            am *= a;
            zm *= l2;
        }
        return;
    }
    const double l[3] = {g.r[0].real(), g.r[1].real(), g.r[2].real()};
    double den[3], ex[3];
    for (int j = 0; j < 3; ++j) {
        den[j] = 1.0;
        for (int i = 0; i < 3; ++i)
            if (i != j) den[j] *= (l[j] - l[i]);
        ex[j] = std::exp(l[j] * t);
    }
    double pw[3] = {1.0, 1.0, 1.0};
    for (int m = 0; m < 6; ++m) {
        double s = 0.0;
        for (int j = 0; j < 3; ++j) s += pw[j] * ex[j] / den[j];
        E[m] = s;
        for (int j = 0; j < 3; ++j) pw[j] *= l[j];
    }
}

}  // namespace

KernelTable kernel_table_ode(const ModelParams& P, double k, double t, double tol) {
    namespace ode = boost::numeric::odeint;
    using State = std::array<double, 9>;
    const double k2 = k * k, c1 = (P.delta + P.tau) * k2, it = 1.0 / P.tau;
    auto rhs = [&](const State& y, State& dy, double) {
        for (int c = 0; c < 3; ++c) {
            const double* v = &y[3 * c];
            double* dv = &dy[3 * c];
            dv[0] = v[1];
            dv[1] = v[2];
            dv[2] = -(v[2] + c1 * v[1] + k2 * v[0]) * it;
        }
    };
    State y{};
    y[0] = 1.0;
    y[4] = 1.0;
    y[8] = 1.0;
    if (t > 0.0) {
        auto stepper = ode::make_controlled<ode::runge_kutta_fehlberg78<State>>(tol, tol);
        ode::integrate_adaptive(stepper, rhs, y, 0.0, t, std::min(1e-3, t));
    }
    KernelTable K;
    K.fallback = true;
    for (int j = 0; j < 3; ++j) {
        const double* v = &y[3 * j];
        K.K[j][0] = v[0];
        K.K[j][1] = v[1];
        K.K[j][2] = v[2];
        K.K[j][3] = -(v[2] + c1 * v[1] + k2 * v[0]) * it;
    }
    return K;
}

KernelTable kernel_table(const ModelParams& P, double k, double t, const GeneralRoots& g) {
    if (roots_near_degenerate(g)) return kernel_table_ode(P, k, t);
    double E[6];
    divided_differences(g, t, E);
    const double S = -1.0 / P.tau, e2 = (P.delta + P.tau) * k * k / P.tau;
    KernelTable K;
    for (int l = 0; l < 4; ++l) {
        K.K[2][l] = E[l];
        K.K[1][l] = -S * E[l] + E[l + 1];
        K.K[0][l] = e2 * E[l] - S * E[l + 1] + E[l + 2];
    }
    return K;
}

KernelTable kernel_table(const ModelParams& P, double k, double t) {
    return kernel_table(P, k, t, roots_exact(P, k));
}

cd khat(const MultiplierQuery& q, const ModelParams& P) {
    int j = 0;
    switch (q.id) {
        case KernelId::K0: j = 0; break;
        case KernelId::K1: j = 1; break;
        case KernelId::K2: j = 2; break;
        default: throw Error(ErrorKind::InvalidParams, "khat takes K0, K1 or K2");
    }
    const int lmax = j == 2 ? 3 : 2;
    if (q.ell < 0 || q.ell > lmax) throw Error(ErrorKind::InvalidParams, "time derivative out of range");
    if (q.t < 0.0 || q.k < 0.0) throw Error(ErrorKind::InvalidParams, "khat needs t >= 0 and k >= 0");
    return cd(kernel_table(P, q.k, q.t).K[j][q.ell], 0.0);
}

double jhat(const MultiplierQuery& q, double delta) {
    const double e = std::exp(-0.5 * delta * q.k * q.k * q.t);
    switch (q.id) {
        case KernelId::J0: return sin_over_k(q.k, q.t) * e;
        case KernelId::J1: return std::cos(q.k * q.t) * e;
        default: throw Error(ErrorKind::InvalidParams, "jhat takes J0 or J1");
    }
}

double nhat(const MultiplierQuery& q, const ModelParams& P) {
    const double t = q.t, k = q.k, k2 = k * k, d = P.delta;
    const double a = (4.0 * P.tau - d) / 8.0;
    const double e = std::exp(-0.5 * d * k2 * t);
    const double J0 = sin_over_k(k, t) * e, J1 = std::cos(k * t) * e;
    switch (q.id) {
        case KernelId::N0: return t * d * a * k2 * J1;
        case KernelId::N1: return -d * (a * k2 * t + 0.5) * k2 * J0;
        case KernelId::N2: return -d * (a * k2 * t + 1.0) * k2 * J1;
        case KernelId::N3: return d * (a * k2 * t + 1.5) * k2 * k2 * J0;
        default: throw Error(ErrorKind::InvalidParams, "nhat takes N0..N3");
    }
}

double sine_wave(int ell, double k, double t, double delta) {
    const double e = std::exp(-0.5 * delta * k * k * t);
    switch (ell) {
        case 0: return sin_over_k(k, t) * e;
        case 1: return std::cos(k * t) * e;
        case 2: return -k * std::sin(k * t) * e;
        case 3: return -k * k * std::cos(k * t) * e;
    }
    throw Error(ErrorKind::InvalidParams, "derivative order out of range");
}

double cosine_wave(int ell, double k, double t, double delta) {
    const double e = std::exp(-0.5 * delta * k * k * t);
    switch (ell) {
        case 0: return std::cos(k * t) * e;
        case 1: return -k * std::sin(k * t) * e;
        case 2: return -k * k * std::cos(k * t) * e;
        case 3: return k * k * k * std::sin(k * t) * e;
    }
    throw Error(ErrorKind::InvalidParams, "derivative order out of range");
}

}  // namespace mgt
