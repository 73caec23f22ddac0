#pragma once

/**
 * @file core.hpp
 * @brief Model parameters, regimes, rate functions, data presets and moments.
 *
 * Fourier convention: f_hat(xi) = integral of f(x) exp(-i x.xi) dx. Norms
 * computed from transforms carry the (2 pi)^{-n} factor explicitly.
 */

#include <algorithm>
#include <array>
#include <complex>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mgt {

using cd = std::complex<double>;
using Vec3 = std::array<double, 3>;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorKind {
    InvalidParams,
    DegenerateThreshold,
    OutOfZone,
    BackendMismatch,
    HypothesisViolated,
    DegenerateSeries,
    InsufficientHistory,
    NoContraction,
    StabilityLimit,
    DimensionUnsupported,
    NonRadialData,
    ConfigError,
    MissingData,
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Physical constants of the (J)MGT model; the sound speed is fixed to 1.
struct ModelParams {
    double tau = 1.0;
    double delta = 1.0;
    /// B/(2A); only used by nonlinear runs.
    double nonlin_ratio = 0.0;
    int dim = 1;

    void validate() const;
};

enum class Regime { Viscous, Inviscid, Chaotic };

Regime classify_regime(const ModelParams& p);
const char* regime_name(Regime r);

/// Small-frequency threshold 1/((d+t)(d+19t) - 27 t^2), capped at 1.
double epsilon0(const ModelParams& p);

enum class RateFamily { D, Ds, TildeDs };

struct RateFunction {
    RateFamily family = RateFamily::D;
    int n = 1;
    double s = 0.0;
};

double rate_eval(const RateFunction& rate, double t);

/// Shorthands for the three families.
double rate_D(int n, double t);
double rate_Ds(int n, double s, double t);
double rate_tildeDs(int n, double s, double t);

enum class PresetKind { Gaussian, ShiftedGaussian, DerivativeGaussian, ZeroMean };

const char* preset_name(PresetKind k);

/**
 * Closed-form initial data.
 *
 * Gaussian / ShiftedGaussian: A exp(-|x-x0|^2/sigma^2)
 * DerivativeGaussian: A (x_1 - x0_1)/sigma exp(-|x-x0|^2/sigma^2), zero mass
 * ZeroMean: A (exp(-|x|^2/sigma^2) - 2^{-n} exp(-|x|^2/(4 sigma^2))), zero mass, radial
 */
struct DataPreset {
    PresetKind kind = PresetKind::Gaussian;
    double amplitude = 1.0;
    double width = 1.0;
    Vec3 center{0.0, 0.0, 0.0};
    int slot = 0;

    void validate(int dim) const;
    bool radial() const;
};

struct Moments {
    double M = 0.0;
    Vec3 P{0.0, 0.0, 0.0};
};

Moments moments(const DataPreset& d, int dim);

/// Transform at a frequency vector (components beyond dim are ignored).
cd data_hat(const DataPreset& d, int dim, const Vec3& xi);

/// Transform of a radial preset at |xi| = k; in 1-d k may be signed.
cd data_hat_radial(const DataPreset& d, int dim, double k);

/// Pointwise value, used to sample presets onto grids.
double data_value(const DataPreset& d, int dim, const Vec3& x);

/// Surface measure of the unit sphere S^{n-1} (2 for n = 1).
double sphere_area(int dim);

/// Worker budget: MGT_THREADS if set, else the hardware concurrency.
int thread_budget();

/// Runs f(i) for i in [0, n) on up to thread_budget() threads. Each index
/// writes its own output slot, so results do not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(thread_budget()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errs(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += workers) f(i);
                } catch (...) {
                    errs[w] = std::current_exception();
                }
            });
    }
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace mgt
