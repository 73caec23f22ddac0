#pragma once

/**
 * @file runner.hpp
 * @brief Suite execution, CSV artifacts, run manifests and plot sources.
 */

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mgtlab/scenario.hpp"

namespace mgt::lab {

enum class Verdict { Pass, Fail, Skip };

const char* verdict_name(Verdict v);

struct CheckResult {
    std::string name;
    Verdict verdict = Verdict::Fail;
    double value = 0.0;
    double expected = 0.0;
    double tol = 0.0;
    /// Reported only; never affects the exit code.
    bool diagnostic = false;
    std::string detail;
};

/// Log-log plot of columns against the first one, with reference slopes
/// anchored at the first row of the first plotted column.
struct PlotSpec {
    std::string title;
    std::string xlabel = "t";
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, double>> guides;
};

struct TableData {
    std::string file;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    /// Pre-formatted CSV text used instead of columns/rows when set.
    std::string raw;
    std::optional<PlotSpec> plot;
};

struct SuiteOutput {
    std::vector<CheckResult> checks;
    std::vector<TableData> tables;
};

/// Executes the suite mapped to the scenario kind.
SuiteOutput run_suite(const Scenario& sc);

struct PlotArtifact {
    std::filesystem::path csv;
    PlotSpec spec;
};

struct RunManifest {
    std::string scenario;
    std::string hash;  ///< SHA-256 of the scenario text
    std::string tool_version;
    double wall_clock = 0.0;
    std::filesystem::path dir;
    std::vector<CheckResult> checks;
    std::vector<std::filesystem::path> csv_files;
    std::vector<PlotArtifact> plots;
    /// Set when the suite threw; the run then counts as failed.
    std::string error;

    bool all_pass() const;
};

/// Version of the CSV layouts written by the suites (see docs/csv.md).
inline constexpr int kCsvSchemaVersion = 1;

const char* tool_version();

std::string sha256_hex(const std::string& text);

/// Runs the scenario and writes CSV tables, checks.csv, summary.txt,
/// manifest.json and plot sources under out_root / scenario dir.
RunManifest run(const Scenario& sc, const std::filesystem::path& out_root);

/// Human-readable summary with one PASS/FAIL/SKIP line per check.
std::string summary_text(const RunManifest& m);

/// Writes one gnuplot script per artifact next to its CSV; MissingData when a
/// CSV is absent or has no data rows.
std::vector<std::filesystem::path> emit_plots(const std::vector<PlotArtifact>& artifacts);

/// Regenerates plot sources from a run directory's manifest.json.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& run_dir);

}  // namespace mgt::lab
