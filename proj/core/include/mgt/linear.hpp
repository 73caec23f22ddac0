#pragma once

/**
 * @file linear.hpp
 * @brief Exact frequency-space solver for the linear MGT Cauchy problem,
 *        diffusion-wave profiles, moment approximants and rate fitting.
 */

#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mgt/core.hpp"
#include "mgt/fields.hpp"

namespace mgt {

struct LinearProblem {
    ModelParams params;
    /// Presets are summed per slot (0: psi0, 1: psi1, 2: psi2).
    std::vector<DataPreset> data;

    void validate() const;
    bool radial() const;
    double min_width() const;
    /// Transform of slot j at a frequency magnitude (signed in 1-d).
    cd slot_hat(int slot, double k) const;
    Moments slot_moments(int slot) const;
    /// psi1 + tau psi2 and psi0 - tau^2 psi2.
    cd psi12_hat(double k) const;
    cd psi02_hat(double k) const;
};

struct CombinationConstants {
    double M12 = 0.0;        ///< M1 + tau M2
    double A1 = 0.0;         ///< M0 - tau^2 M2
    Vec3 B{0.0, 0.0, 0.0};   ///< P1 + tau P2
    double A0 = 0.0;         ///< M12 d (4 tau - d) / 8
    double A0_literal = 0.0; ///< M12 tau (4 tau - d) / 8
};

CombinationConstants combinations(const LinearProblem& p);

/// Quadrature grid adapted to time t (cut-off from the decay of the modes,
/// panels split against the oscillation at t).
std::shared_ptr<const RadialGrid> linear_grid(const LinearProblem& p, double t);

RadialSpectralField solve_linear_hat(const LinearProblem& p, double t, int ell,
                                     std::shared_ptr<const RadialGrid> grid = nullptr);

StateSnapshot<RadialSpectralField> solve_linear_state(const LinearProblem& p, double t,
                                                      std::shared_ptr<const RadialGrid> grid = nullptr);

struct ProfileSpec {
    int order = 1;  ///< 1 or 2
    int ell = 0;    ///< time derivative 0..2
    double s = 0.0; ///< Sobolev index of the measuring norm
};

/// First order: e^{-d k^2 t/2} d^l[sin(kt)]/k Psi12. Second order adds
/// N_l Psi12 + e^{-d k^2 t/2} d^l[cos(kt)] Psi02.
RadialSpectralField profile_hat(const LinearProblem& p, const ProfileSpec& spec, double t,
                                std::shared_ptr<const RadialGrid> grid = nullptr);

double residual_norm(const LinearProblem& p, const ProfileSpec& spec, double t);

/// Moment approximant psi^(order, l) in frequency space (1-d or B = 0).
RadialSpectralField approximant_hat(const LinearProblem& p, int order, int ell, double t,
                                    std::shared_ptr<const RadialGrid> grid = nullptr);

/// H^s norm of psi^(order, l); in n > 1 the xi.B part is averaged over angles.
double approximant_norm(const LinearProblem& p, int order, int ell, double s, double t);

/// H^s norm of d^l psi - psi^(order, l).
double approximation_gap(const LinearProblem& p, int order, int ell, double s, double t);

struct DecayReport {
    std::string label;
    std::vector<double> t;
    std::vector<double> value;
    double slope = 0.0;
    double intercept = 0.0;
    /// RMS of the log residuals of the power fit.
    double residual = 0.0;
    double expected = std::numeric_limits<double>::quiet_NaN();
    double tol = 0.05;
    /// Log model v^2 = a + b ln t (n = 2 growth case).
    double ln_a = 0.0, ln_b = 0.0, ln_residual = std::numeric_limits<double>::quiet_NaN();
    /// Ratio statistics for lower-bound checks.
    double ratio_min = 0.0, ratio_max = 0.0, threshold = 0.0;
    double constant = 0.0, constant_alt = 0.0;
    bool pass = false;
};

/// Geometric grid [t0, t1] with `per_decade` points per decade (both ends kept).
std::vector<double> geometric_times(double t0, double t1, int per_decade);

/// Least-squares slope of log v against log t; verdict against `expected`.
DecayReport fit_decay(std::span<const double> t, std::span<const double> v,
                      double expected = std::numeric_limits<double>::quiet_NaN(), double tol = 0.05);

/// Adds the fit of v^2 = a + b ln t with relative residuals; pass when it
/// beats the power fit of v^2.
DecayReport fit_log_growth(std::span<const double> t, std::span<const double> v);

enum class LowerBoundKind {
    Leading,           ///< ||d^l psi||_{H^s} / D_{n,s+l}
    ProfileSubtracted, ///< ||d^l psi - psi^(1,l)||_{H^s} / D_{n,s+l+1}
};

/// Ratio of the measured norm to the reference rate over t_grid; the report
/// holds min/max, the threshold (half the expected constant) and the verdict
/// (min >= threshold and max/min <= 3).
DecayReport lower_bound_check(const LinearProblem& p, int ell, double s, std::span<const double> t_grid,
                              LowerBoundKind kind);

/// Large-t limit of ||psi - psi^(1,0)||_{L2} / D_{n,1} from the moments
/// (closed form). `literal` uses tau (4 tau - d)/8 in place of d (4 tau - d)/8.
double second_order_constant(const LinearProblem& p, bool literal = false);

enum class KernelSweep {
    TimeDerivative,    ///< || |D|^{s+2-l} d^{l+1} K2 * psi2 ||, exponent -1 - s/2 - n/4
    ProfileFirst,      ///< d^l K2 * psi2 minus the first-order profile, exponent -(s+l)/2 - n/4
    ProfileSecond,     ///< minus the second-order profile, exponent -(s+l+1)/2 - n/4
    ProfileSecondBare, ///< second-order profile without the -tau^2 cosine term (diagnostic)
};

DecayReport kernel_estimate_sweep(const ModelParams& params, const DataPreset& psi2, int ell, double s,
                                  std::span<const double> t_grid, KernelSweep kind);

}  // namespace mgt
