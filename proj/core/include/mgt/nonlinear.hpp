#pragma once

/**
 * @file nonlinear.hpp
 * @brief Semilinear JMGT solver on the periodic grid: Duhamel operator with
 *        the third kernel, slab-wise Picard iteration, an explicit RK4 oracle,
 *        evolution-space norms, nonlinear moments and profile residuals.
 *
 * The solver integrates tau psi_ttt + psi_tt - Lap psi - (d+tau) Lap psi_t = f(psi),
 * i.e. psi = psi^lin + (1/tau) int_0^t K2(t-s) * f(psi(s)) ds.
 */

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mgt/core.hpp"
#include "mgt/fields.hpp"
#include "mgt/linear.hpp"

namespace mgt {

enum class Nonlinearity {
    Kuznetsov,  ///< f0 = r psi_t^2 + |grad psi|^2, r = B/(2A)
    Westervelt, ///< f0 = (1 + r) psi_t^2
    None,       ///< f0 = 0 (linear runs through the same machinery)
};

const char* nonlinearity_name(Nonlinearity m);

struct NonlinearProblem {
    ModelParams params;
    /// Presets are summed per slot and scaled by epsilon.
    std::vector<DataPreset> data;
    double epsilon = 1.0;
    Nonlinearity mode = Nonlinearity::Kuznetsov;
    GridSpec grid;
    double h = 0.05;
    double T = 10.0;
    /// Steps per Picard slab; 0 runs one slab over [0, T].
    int slab_steps = 0;
    /// Keep every stride-th state (0: only t = 0 and t = T) plus the listed times.
    int snapshot_stride = 0;
    std::vector<double> snapshot_times;
    /// Sobolev index of the top-order part of the evolution norm.
    double s = 1.0;
    double picard_tol = 1e-9;
    int picard_max_iter = 25;
    /// Halve epsilon on NoContraction or when the first contraction ratio exceeds 0.25.
    bool auto_epsilon = false;

    void validate() const;
    int steps() const;
    LinearProblem scaled_linear() const;
};

/// Per-step norm bundle of a trajectory.
struct NormSample {
    double t = 0.0;
    double psi = 0.0, psi_h1 = 0.0, psi_t = 0.0, psi_tt = 0.0;
    /// || |D|^{s+2-l} d^l psi ||, l = 0, 1, 2.
    double top[3]{};
    double f0_mass = 0.0, f0_l1 = 0.0;
};

struct PicardDiagnostics {
    std::vector<int> iterations;              ///< per slab
    std::vector<std::vector<double>> distances; ///< successive distances per slab
    double epsilon_used = 0.0;
    int halvings = 0;
    double max_final_distance = 0.0;
};

struct Trajectory {
    GridSpec grid;
    double h = 0.0;
    std::vector<NormSample> norms;
    /// Frequency-space states.
    std::vector<StateSnapshot<GridField>> snapshots;
    PicardDiagnostics diag;

    /// Snapshot at t (within h/2); throws InvalidParams when absent.
    const StateSnapshot<GridField>& at(double t) const;
};

/// Physical-space nonlinearity of a frequency-space state.
GridField f_eval(const ModelParams& p, const StateSnapshot<GridField>& state, Nonlinearity mode);
GridField f0_eval(const ModelParams& p, const StateSnapshot<GridField>& state, Nonlinearity mode);

enum class DuhamelForm {
    Direct,    ///< int K2(t-s) f(s) ds
    ByParts,   ///< boundary terms plus int dK2(t-s) f0(s) ds
    HalfSplit, ///< f0 on [0, t/2], f on [t/2, t]
};

enum class Quadrature { Auto, Trapezoid, Simpson };

/// Frequency-space sources on the uniform nodes s_j = j h.
struct SourceHistory {
    GridSpec grid;
    double h = 0.0;
    std::vector<GridField> f;
    std::vector<GridField> f0;
};

/// d^l/dt^l of int_0^t K2(t-s) * f(s) ds (physical field). Auto uses Simpson
/// when the node count allows it.
GridField duhamel_apply(const ModelParams& p, const SourceHistory& src, double t, int ell,
                        DuhamelForm form = DuhamelForm::Direct, Quadrature q = Quadrature::Auto);

/// Exact linear flow of the (scaled) data on the grid, frequency space.
StateSnapshot<GridField> linear_grid_state(const NonlinearProblem& p, double t);

Trajectory picard_solve(const NonlinearProblem& p);

/// Classical RK4 in (psi, psi_t, psi_tt) with spectral spatial operators.
Trajectory rk_march_oracle(const NonlinearProblem& p);

/// Spectral radius bound of the mode matrices over the grid.
double rk_spectral_radius(const ModelParams& p, const GridSpec& g);

struct EvolutionNorm {
    double value = 0.0;
    std::vector<double> t;
    /// Running weighted sup, nondecreasing.
    std::vector<double> running;
};

/// Weighted sup over the stored snapshots (n = 1, 2 and n >= 3 variants).
EvolutionNorm evolution_norm(const Trajectory& tr, double s);

/// Snapshots of psi - psi^lin.
Trajectory subtract_linear(const NonlinearProblem& p, const Trajectory& tr);

/// N psi = psi^lin + (1/tau) int K2 * f(psi) at every stored step (needs every step stored).
Trajectory apply_operator(const NonlinearProblem& p, const Trajectory& tr);

/// Snapshot-wise a - b over common times.
Trajectory trajectory_difference(const Trajectory& a, const Trajectory& b);

/// max_j ||N psi - psi|| / ||psi|| over the stored snapshots (needs every step stored).
double self_consistency_residual(const NonlinearProblem& p, const Trajectory& tr);

/// max over interior stored steps of the relative residual of the JMGT
/// equation with tau psi_ttt from central differences of psi_tt.
double pde_residual(const NonlinearProblem& p, const Trajectory& tr);

/// Relative L2 distance between two trajectories over common snapshots.
double trajectory_distance(const Trajectory& a, const Trajectory& b);

struct NonlinearMoments {
    double M00 = 0.0;
    Vec3 P00{0.0, 0.0, 0.0};
    double M_non = 0.0;
    /// Bound on int_T^inf ||f0||_{L1} from the fitted (1+t)^{-n/2} decay; inf for n <= 2.
    double M_non_tail = std::numeric_limits<double>::infinity();
};

NonlinearMoments initial_moments(const NonlinearProblem& p);
NonlinearMoments nonlinear_moments(const NonlinearProblem& p, const Trajectory& tr);

/// Decay fits of ||psi||, ||psi||_{H1}, ||psi_t||, ||psi_tt|| over [t0, T].
std::vector<DecayReport> nonlinear_decay_suite(const NonlinearProblem& p, const Trajectory& tr, double t0,
                                               int per_decade = 10);

struct NonlinearProfileSpec {
    int order = 1;
    int ell = 0;
    double k = 0.0;
    /// Use the displayed tau-scaled nonlinear terms instead of the derived ones.
    bool literal = false;
};

/// H^k norm of d^l psi(t) minus the linear plus nonlinear approximant.
double nonlinear_profile_residual(const NonlinearProblem& p, const Trajectory& tr, const NonlinearMoments& m,
                                  const NonlinearProfileSpec& spec, double t);

/// Leading constant M1 + tau M2 - M00 (literal: - tau M00).
double nonlinear_first_order_constant(const NonlinearProblem& p, const NonlinearMoments& m, bool literal = false);

void write_norm_history(std::ostream& os, const Trajectory& tr);
void write_picard_diagnostics(std::ostream& os, const PicardDiagnostics& d);

/// Binary dump with a versioned header.
void write_checkpoint(std::ostream& os, const Trajectory& tr);
Trajectory read_checkpoint(std::istream& is);

}  // namespace mgt
