#pragma once

/**
 * @file spectral.hpp
 * @brief Characteristic roots of tau l^3 + l^2 + (d+tau) k^2 l + k^2 = 0 and
 *        the Fourier multipliers built on them.
 */

#include <array>
#include <cmath>
#include <limits>

#include "mgt/core.hpp"

namespace mgt {

/// l1 real, l2,3 = mu_R +- i mu_I.
struct RootTriple {
    double lambda1 = 0.0;
    double mu_R = 0.0;
    double mu_I = 0.0;
    bool small_zone = false;
};

/// Three roots. When complex_pair is set, r[0] is real and r[2] = conj(r[1])
/// with Im r[1] >= 0; otherwise all three are real and sorted ascending.
struct GeneralRoots {
    std::array<cd, 3> r{};
    bool complex_pair = true;
};

enum class KernelId { K0, K1, K2, J0, J1, N0, N1, N2, N3 };

struct MultiplierQuery {
    KernelId id = KernelId::K2;
    int ell = 0;
    double t = 0.0;
    double k = 0.0;
};

/// Discriminant of the cubic in l (negative: one real root and a conjugate pair).
double discriminant(const ModelParams& p, double k);

GeneralRoots roots_exact(const ModelParams& p, double k);

RootTriple roots_series(const ModelParams& p, double k, int order);

RootTriple to_triple(const GeneralRoots& g, const ModelParams& p, double k);

/// |tau l^3 + l^2 + (d+tau)k^2 l + k^2| and the matching magnitude scale.
double cubic_residual(const ModelParams& p, double k, cd lambda, double* scale = nullptr);

/**
 * Small-zone roots in an arbitrary real type (used with extended precision
 * to resolve the series remainders). Newton on the real root, the pair from
 * l1 + 2 mu_R = -1/tau and l1 (mu_R^2 + mu_I^2) = -k^2/tau.
 */
template <class T>
struct RootTripleT {
    T lambda1, mu_R, mu_I;
};

template <class T>
RootTripleT<T> small_zone_roots(T tau, T delta, T k) {
    using std::abs;
    using std::sqrt;
    const T k2 = k * k;
    const T c1 = (delta + tau) * k2;
    T lam = T(-1) / tau + delta * k2 + tau * delta * (delta - tau) * k2 * k2;
    const T eps = std::numeric_limits<T>::epsilon();
    for (int it = 0; it < 200; ++it) {
        const T pv = ((tau * lam + T(1)) * lam + c1) * lam + k2;
        const T dp = (T(3) * tau * lam + T(2)) * lam + c1;
        const T step = pv / dp;
        lam -= step;
        if (abs(step) <= T(4) * eps * abs(lam)) break;
    }
    RootTripleT<T> r;
    r.lambda1 = lam;
    r.mu_R = (T(-1) / tau - lam) / T(2);
    const T mod2 = -k2 / (tau * lam);
    r.mu_I = sqrt(mod2 - r.mu_R * r.mu_R);
    return r;
}

/// Truncated small-frequency expansions, any real type; no zone check.
template <class T>
RootTripleT<T> series_roots(T tau, T delta, T k, int order) {
    const T k2 = k * k;
    RootTripleT<T> r{T(-1) / tau + delta * k2, -delta / T(2) * k2, k};
    if (order >= 3) r.mu_I += delta * (T(4) * tau - delta) / T(8) * k2 * k;
    if (order >= 4) {
        r.lambda1 += tau * delta * (delta - tau) * k2 * k2;
        r.mu_R -= tau * delta * (delta - tau) / T(2) * k2 * k2;
    }
    return r;
}

/// d^l/dt^l K_j(t,k) for j = 0,1,2 and l = 0..3.
struct KernelTable {
    double K[3][4]{};
    bool fallback = false;
};

KernelTable kernel_table(const ModelParams& p, double k, double t);
KernelTable kernel_table(const ModelParams& p, double k, double t, const GeneralRoots& roots);

/// Same quantities from an adaptive Fehlberg 7(8) integration of the mode ODE.
KernelTable kernel_table_ode(const ModelParams& p, double k, double t, double tol = 1e-11);

/// True when the eigen-representation would divide by a tiny root gap.
bool roots_near_degenerate(const GeneralRoots& g);

cd khat(const MultiplierQuery& q, const ModelParams& p);
double jhat(const MultiplierQuery& q, double delta);
double nhat(const MultiplierQuery& q, const ModelParams& p);

/// sin(kt)/k with the k -> 0 limit handled by series.
double sin_over_k(double k, double t);

/// e^{-d k^2 t/2} d^l/dt^l [sin(kt)]/k.
double sine_wave(int ell, double k, double t, double delta);
/// e^{-d k^2 t/2} d^l/dt^l [cos(kt)].
double cosine_wave(int ell, double k, double t, double delta);

}  // namespace mgt
