#pragma once

/**
 * @file fields.hpp
 * @brief Radial frequency quadrature and periodic-grid backends, norms, zone cut-offs.
 */

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "mgt/core.hpp"

namespace mgt {

struct RadialGridSpec {
    int dim = 1;
    double k_min = 1e-6;
    double k_max = 50.0;
    /// Largest time the field will be evaluated at; panels are split so the
    /// phase k t changes by at most pi/2 across one panel.
    double t_osc = 0.0;
    /// Phase speed multiplier used for the splitting rule (>= 1).
    double speed = 1.0;
    int panels_per_decade = 12;
    int nodes_per_panel = 32;
    /// 1-d only: nodes cover [-k_max, k_max] for non-even data.
    bool signed_line = false;
};

struct RadialGrid {
    int dim = 1;
    bool signed_line = false;
    std::vector<double> k;
    std::vector<double> w;
    std::size_t panels = 0;
};

std::shared_ptr<const RadialGrid> make_radial_grid(const RadialGridSpec& spec);

/// Gauss-Legendre rule on [-1, 1], cached per size.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

struct RadialSpectralField {
    std::shared_ptr<const RadialGrid> grid;
    std::vector<cd> v;

    std::size_t size() const { return v.size(); }
};

RadialSpectralField make_field(std::shared_ptr<const RadialGrid> grid);
RadialSpectralField operator-(const RadialSpectralField& a, const RadialSpectralField& b);
RadialSpectralField operator+(const RadialSpectralField& a, const RadialSpectralField& b);
RadialSpectralField operator*(cd c, const RadialSpectralField& a);

/// (2 pi)^{-n} int |xi|^{2s} |f_hat|^2 dxi, square-rooted.
double hs_norm(const RadialSpectralField& f, double s);

/// (2 pi)^{-n} int |xi|^{2s} |f|^2 dxi without the square root.
double hs_norm_sq(const RadialSpectralField& f, double s);

/// Largest frequency that still matters at time t: beyond it both the MGT
/// modes and the heat factor, times a width-sigma Gaussian, are below e^{-75}.
double decay_cutoff(const ModelParams& p, double t, double sigma, double k_max);

/// Phase-speed bound max(1, sup |Im l(k)| / k) used by the panel splitting rule.
double phase_speed(const ModelParams& p);

void write_csv(std::ostream& os, const RadialSpectralField& f);

enum class Space { Physical, Frequency };

struct GridSpec {
    int dim = 1;
    int N = 256;
    double L = 10.0;

    void validate() const;
    std::size_t size() const;
    double dx() const { return 2.0 * L / N; }
    double dk() const { return kPi / L; }
};

/// Signed wavenumber index of FFT slot i (0..N-1).
inline int mode_index(int i, int N) { return i < N / 2 ? i : i - N; }

/// Periodic field on [-L, L)^n, x_j = -L + j dx; frequency values follow the
/// continuous convention f_hat(k_m) ~ dx^n sum f(x_j) exp(-i k_m x_j), k_m = pi m / L.
struct GridField {
    GridSpec spec;
    Space space = Space::Physical;
    std::vector<cd> v;
};

GridField make_grid_field(const GridSpec& spec, Space space);
GridField to_frequency(const GridField& f);
GridField to_physical(const GridField& f);

/// In-place transforms on raw storage with the same conventions.
void forward_transform(const GridSpec& spec, cd* data);
void inverse_transform(const GridSpec& spec, cd* data);

/// Frequency vector of flat index i.
Vec3 grid_xi(const GridSpec& spec, std::size_t i);
Vec3 grid_x(const GridSpec& spec, std::size_t i);

double hs_norm(const GridField& f, double s);
/// Physical-space L2 norm (trapezoid on the periodic grid).
double l2_norm_physical(const GridField& f);
/// Physical-space L1 norm of the real part.
double l1_norm_physical(const GridField& f);

struct ZoneMasks {
    std::vector<double> chi_int, chi_bdd, chi_ext;
};

/// Default large-frequency threshold 10 max(1, 1/(d + t)).
double default_n0(const ModelParams& p);

/// Smooth partition of unity: chi_int switches off over [eps0/10, eps0],
/// chi_ext switches on over [N0, 10 N0].
ZoneMasks zone_masks(std::span<const double> k, double eps0, double n0);
ZoneMasks zone_masks(const ModelParams& p, const RadialSpectralField& f);
ZoneMasks zone_masks(const ModelParams& p, const GridField& f);

template <class F>
struct StateSnapshot {
    double t = 0.0;
    F psi, psi_t, psi_tt;
};

bool consistent(const StateSnapshot<RadialSpectralField>& s);
bool consistent(const StateSnapshot<GridField>& s);

}  // namespace mgt
