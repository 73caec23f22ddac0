#pragma once

/**
 * @file scenario.hpp
 * @brief Scenario files: experiment kind, model, data, time window and checks.
 *
 * Scenarios are TOML documents; every key is validated before any computation
 * and unknown keys are rejected with a ConfigError naming the key and line.
 */

#include <array>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "mgt/core.hpp"
#include "mgt/fields.hpp"
#include "mgt/nonlinear.hpp"

namespace mgt::lab {

enum class ExperimentKind {
    Roots,
    Kernels,
    LinearRates,
    Profiles,
    Optimality,
    Nonlinear,
    NonlinearProfiles,
    SingularLimit,
};

const char* kind_name(ExperimentKind k);

struct TimeWindow {
    double t0 = 100.0;
    double t1 = 10000.0;
    int per_decade = 10;
};

/// One check table. Which fields are meaningful depends on the experiment
/// kind and `type`; unused fields keep their defaults.
struct CheckSpec {
    std::string type;
    /// Reported but excluded from the exit code.
    bool diagnostic = false;
    int dim = 0;  ///< 0: the model dimension
    int ell = 0;
    int order = 1;
    double s = 0.0;
    double expected = std::numeric_limits<double>::quiet_NaN();
    double tol = std::numeric_limits<double>::quiet_NaN();
    double lo = 0.4, hi = 0.6;
    /// Profile gain checks: tolerance on second-order minus first-order slope.
    double gain_tol = 0.07;
    /// root name, sweep kind, bound kind, norm name or growth model
    std::string variant;
    bool literal = false;
    double k_min = std::numeric_limits<double>::quiet_NaN();
    double k_max = std::numeric_limits<double>::quiet_NaN();
    int points = 0;
    int count = 100;
    unsigned seed = 1;
    int levels = 3;
    double fit_from = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::array<double, 2>> pairs;
    GridSpec grid{1, 1024, 60.0};
    std::vector<double> times;
};

/// One semilinear solver run with its own checks.
struct RunSpec {
    std::string label;
    NonlinearProblem problem;
    TimeWindow window;
    std::vector<CheckSpec> checks;
};

struct LimitSettings {
    std::vector<double> taus{0.2, 0.1, 0.05, 0.025};
    double t_min = 1e-2, t_max = 1e4;
    int per_decade = 12;
};

struct Scenario {
    std::string name;
    std::string description;
    ExperimentKind kind = ExperimentKind::LinearRates;
    ModelParams params;
    std::vector<DataPreset> data;
    TimeWindow window;
    std::vector<CheckSpec> checks;
    std::vector<RunSpec> runs;
    LimitSettings limit;
    /// Relative to the run output directory; empty uses the scenario name.
    std::string output_dir;
    /// Original text (hashed into the manifest) and where it came from.
    std::string source;
    std::string origin;
};

Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");
Scenario load_scenario(const std::filesystem::path& file);

/// Scenario files of a directory, sorted by file name.
std::vector<std::filesystem::path> scenario_catalog(const std::filesystem::path& dir);

}  // namespace mgt::lab
