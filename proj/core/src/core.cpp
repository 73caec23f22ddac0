#include "mgt/core.hpp"

#include <cmath>
#include <cstdlib>

namespace mgt {

const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidParams: return "InvalidParams";
        case ErrorKind::DegenerateThreshold: return "DegenerateThreshold";
        case ErrorKind::OutOfZone: return "OutOfZone";
        case ErrorKind::BackendMismatch: return "BackendMismatch";
        case ErrorKind::HypothesisViolated: return "HypothesisViolated";
        case ErrorKind::DegenerateSeries: return "DegenerateSeries";
        case ErrorKind::InsufficientHistory: return "InsufficientHistory";
        case ErrorKind::NoContraction: return "NoContraction";
        case ErrorKind::StabilityLimit: return "StabilityLimit";
        case ErrorKind::DimensionUnsupported: return "DimensionUnsupported";
        case ErrorKind::NonRadialData: return "NonRadialData";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::MissingData: return "MissingData";
    }
    return "Error";
}

void ModelParams::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorKind::InvalidParams, "tau must be positive");
    if (!std::isfinite(delta)) throw Error(ErrorKind::InvalidParams, "delta must be finite");
    if (dim < 1 || dim > 3) throw Error(ErrorKind::InvalidParams, "dim must be 1, 2 or 3");
    if (!(nonlin_ratio >= 0.0)) throw Error(ErrorKind::InvalidParams, "nonlin_ratio must be >= 0");
}

Regime classify_regime(const ModelParams& p) {
    if (p.delta > 0.0) return Regime::Viscous;
    if (p.delta < 0.0) return Regime::Chaotic;
    return Regime::Inviscid;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Viscous: return "viscous";
        case Regime::Inviscid: return "inviscid";
        case Regime::Chaotic: return "chaotic";
    }
    return "?";
}

double epsilon0(const ModelParams& p) {
    const double t = p.tau, d = p.delta;
    const double den = (d + t) * (d + 19.0 * t) - 27.0 * t * t;
    if (!(den > 0.0)) throw Error(ErrorKind::DegenerateThreshold, "(d+t)(d+19t)-27t^2 <= 0");
    return std::min(1.0, 1.0 / den);
}

double rate_D(int n, double t) {
    if (n == 1) return std::sqrt(1.0 + t);
    if (n == 2) return std::sqrt(std::log(std::exp(1.0) + t));
    return std::pow(1.0 + t, 0.5 - n / 4.0);
}

double rate_Ds(int n, double s, double t) {
    if (s == 0.0) return rate_D(n, t);
    if (s < 1.0) throw Error(ErrorKind::InvalidParams, "D_{n,s} is defined for s = 0 or s >= 1");
    return std::pow(1.0 + t, -(s - 1.0) / 2.0 - n / 4.0);
}

double rate_tildeDs(int n, double s, double t) {
    if (n == 1) return std::pow(1.0 + t, -s / 2.0 + 0.25);
    if (n == 2) return std::pow(1.0 + t, -s / 2.0 - 0.5) * std::log(std::exp(1.0) + t);
    return std::pow(1.0 + t, -s / 2.0 - n / 4.0);
}

double rate_eval(const RateFunction& r, double t) {
    if (t < 0.0) throw Error(ErrorKind::InvalidParams, "rate_eval needs t >= 0");
    switch (r.family) {
        case RateFamily::D: return rate_D(r.n, t);
        case RateFamily::Ds: return rate_Ds(r.n, r.s, t);
        case RateFamily::TildeDs: return rate_tildeDs(r.n, r.s, t);
    }
    return 0.0;
}

const char* preset_name(PresetKind k) {
    switch (k) {
        case PresetKind::Gaussian: return "gaussian";
        case PresetKind::ShiftedGaussian: return "shifted_gaussian";
        case PresetKind::DerivativeGaussian: return "derivative_gaussian";
        case PresetKind::ZeroMean: return "zero_mean";
    }
    return "?";
}

void DataPreset::validate(int dim) const {
    if (!(width > 0.0)) throw Error(ErrorKind::InvalidParams, "preset width must be positive");
    if (slot < 0 || slot > 2) throw Error(ErrorKind::InvalidParams, "preset slot must be 0, 1 or 2");
    if (!std::isfinite(amplitude)) throw Error(ErrorKind::InvalidParams, "preset amplitude must be finite");
    if (kind == PresetKind::Gaussian || kind == PresetKind::ZeroMean) {
        for (int i = 0; i < dim; ++i)
            if (center[i] != 0.0)
                throw Error(ErrorKind::InvalidParams, "centered presets take no center; use shifted_gaussian");
    }
}

bool DataPreset::radial() const {
    if (kind == PresetKind::DerivativeGaussian) return false;
    return center[0] == 0.0 && center[1] == 0.0 && center[2] == 0.0;
}

double sphere_area(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return 2.0 * kPi;
        case 3: return 4.0 * kPi;
    }
    throw Error(ErrorKind::InvalidParams, "dim must be 1, 2 or 3");
}

namespace {
double gauss_mass(double sigma, int dim) { return std::pow(sigma * std::sqrt(kPi), dim); }
}  // namespace

Moments moments(const DataPreset& d, int dim) {
    Moments m;
    const double g = d.amplitude * gauss_mass(d.width, dim);
    switch (d.kind) {
        case PresetKind::Gaussian:
        case PresetKind::ShiftedGaussian:
            m.M = g;
            for (int i = 0; i < dim; ++i) m.P[i] = d.center[i] * g;
            break;
        case PresetKind::DerivativeGaussian:
            m.M = 0.0;
            m.P[0] = 0.5 * d.width * g;
            break;
        case PresetKind::ZeroMean:
            m.M = 0.0;
            break;
    }
    return m;
}

cd data_hat(const DataPreset& d, int dim, const Vec3& xi) {
    double k2 = 0.0, phase = 0.0;
    for (int i = 0; i < dim; ++i) {
        k2 += xi[i] * xi[i];
        phase += xi[i] * d.center[i];
    }
    const double s2 = d.width * d.width;
    const double g = d.amplitude * gauss_mass(d.width, dim) * std::exp(-0.25 * s2 * k2);
    const cd shift = std::polar(1.0, -phase);
    switch (d.kind) {
        case PresetKind::Gaussian:
        case PresetKind::ShiftedGaussian:
            return g * shift;
        case PresetKind::DerivativeGaussian:
            return cd(0.0, -0.5 * d.width * xi[0]) * g * shift;
        case PresetKind::ZeroMean: {
            const double wide = d.amplitude * gauss_mass(d.width, dim) * std::exp(-s2 * k2);
            return cd(g - wide, 0.0);
        }
    }
    return 0.0;
}

cd data_hat_radial(const DataPreset& d, int dim, double k) {
    if (dim > 1 && !d.radial())
        throw Error(ErrorKind::NonRadialData, std::string(preset_name(d.kind)) + " is not radial in dim > 1");
    return data_hat(d, dim, Vec3{k, 0.0, 0.0});
}

double data_value(const DataPreset& d, int dim, const Vec3& x) {
    double r2 = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double y = x[i] - d.center[i];
        r2 += y * y;
    }
    const double s2 = d.width * d.width;
    switch (d.kind) {
        case PresetKind::Gaussian:
        case PresetKind::ShiftedGaussian:
            return d.amplitude * std::exp(-r2 / s2);
        case PresetKind::DerivativeGaussian:
            return d.amplitude * (x[0] - d.center[0]) / d.width * std::exp(-r2 / s2);
        case PresetKind::ZeroMean:
            return d.amplitude * (std::exp(-r2 / s2) - std::pow(2.0, -dim) * std::exp(-r2 / (4.0 * s2)));
    }
    return 0.0;
}

int thread_budget() {
    if (const char* e = std::getenv("MGT_THREADS")) {
        const int v = std::atoi(e);
        if (v > 0) return v;
    }
    const unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : static_cast<int>(h);
}

}  // namespace mgt
