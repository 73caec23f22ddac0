#pragma once

/**
 * @file limit.hpp
 * @brief Small-relaxation limit: MGT with compatible third datum against the
 *        linearized Kuznetsov equation phi_tt - Lap phi - d Lap phi_t = 0.
 */

#include <iosfwd>
#include <memory>
#include <vector>

#include "mgt/core.hpp"
#include "mgt/fields.hpp"
#include "mgt/linear.hpp"

namespace mgt {

struct LimitProblem {
    double delta = 1.0;
    int dim = 1;
    /// Presets in slots 0 (psi0) and 1 (psi1); psi2 = Lap psi0 + d Lap psi1 is derived.
    std::vector<DataPreset> data;
    std::vector<double> taus{0.2, 0.1, 0.05, 0.025};

    void validate() const;
    /// Transform of psi0 (slot 0) or psi1 (slot 1) at a frequency magnitude (signed in 1-d).
    cd slot_hat(int slot, double k) const;
    /// -k^2 psi0_hat - d k^2 psi1_hat.
    cd psi2_hat(double k) const;
    /// MGT problem at relaxation tau (psi2 carried separately through psi2_hat).
    LinearProblem mgt(double tau) const;
};

/// Exact per-mode solution of the linearized Kuznetsov equation with data
/// (psi0, psi1); ell in {0, 1, 2}.
cd kuznetsov_mode(double delta, double k, double t, int ell, cd phi0, cd phi1);

RadialSpectralField kuznetsov_solve_hat(const LimitProblem& p, double t, int ell,
                                        std::shared_ptr<const RadialGrid> grid = nullptr);

/// d^l psi_hat of the MGT solution with data (psi0, psi1, psi2_hat).
RadialSpectralField mgt_compatible_hat(const LimitProblem& p, double tau, double t, int ell,
                                       std::shared_ptr<const RadialGrid> grid = nullptr);

/// Quadrature grid covering both solutions at time t.
std::shared_ptr<const RadialGrid> limit_grid(const LimitProblem& p, double tau, double t);

/// max_k |psi_tt_hat(0) - psi2_hat| / max |psi2_hat| on the grid of t = 0.
double compatibility_residual(const LimitProblem& p, double tau);

enum class GapNorm {
    L2,        ///< Parseval
    LinfBound, ///< (2 pi)^{-n} int |f_hat| dxi, an upper bound for the sup norm
};

struct LimitGap {
    double value = 0.0;
    double t_star = 0.0;
    std::vector<double> t;
    std::vector<double> gap;
};

/// Default sampling of the time sup: geometric 1e-2 .. 1e4, 12 per decade.
std::vector<double> limit_time_grid();

/// ||psi(t) - phi(t)|| at one time.
double limit_gap_at(const LimitProblem& p, double tau, double t, GapNorm norm = GapNorm::L2);

/// Sup over t_grid (default grid when empty) refined by golden-section search
/// around the coarse maximum.
LimitGap limit_gap(const LimitProblem& p, double tau, const std::vector<double>& t_grid = {});
LimitGap limit_gap_sup(const LimitProblem& p, double tau, const std::vector<double>& t_grid = {});

/// psi - phi sampled on a periodic 1-d grid (physical space).
GridField limit_difference_grid(const LimitProblem& p, double tau, double t, const GridSpec& g);

struct LimitSweepRow {
    double tau = 0.0;
    double gap_l2 = 0.0, t_star = 0.0;
    double gap_linf = 0.0, t_star_linf = 0.0;
};

struct LimitSweep {
    std::vector<LimitSweepRow> rows;
    /// Slopes of log gap against log tau.
    double rate_l2 = 0.0, rate_linf = 0.0;
    /// gap(tau_{i+1}) / gap(tau_i).
    std::vector<double> ratio_l2, ratio_linf;
    /// Sampled gap curves per row, in row order.
    std::vector<LimitGap> curves_l2, curves_linf;
};

LimitSweep limit_sweep(const LimitProblem& p, const std::vector<double>& t_grid = {});

/// Columns: tau, gap_l2, t_star, gap_linf_bound, t_star_linf, rate_l2, rate_linf.
void write_limit_sweep(std::ostream& os, const LimitSweep& s);

}  // namespace mgt
