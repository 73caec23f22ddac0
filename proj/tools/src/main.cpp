#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mgtlab/runner.hpp"

#ifndef MGT_SCENARIO_DIR_DEFAULT
#define MGT_SCENARIO_DIR_DEFAULT "scenarios"
#endif

namespace fs = std::filesystem;
using namespace mgt;
using namespace mgt::lab;

namespace {

fs::path scenario_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* e = std::getenv("MGT_SCENARIO_DIR")) return e;
    return MGT_SCENARIO_DIR_DEFAULT;
}

void set_thread_budget(int n) { setenv("MGT_THREADS", std::to_string(std::max(1, n)).c_str(), 1); }

int list(const fs::path& dir) {
    for (const auto& f : scenario_catalog(dir)) {
        const Scenario sc = load_scenario(f);
        std::printf("%-24s %-20s %s\n", f.filename().string().c_str(), kind_name(sc.kind), sc.description.c_str());
    }
    return 0;
}

void report(const RunManifest& m) {
    int pass = 0, fail = 0, skip = 0;
    for (const auto& c : m.checks) {
        if (c.diagnostic) continue;
        (c.verdict == Verdict::Pass ? pass : (c.verdict == Verdict::Fail ? fail : skip))++;
    }
    std::printf("%s %-14s %d pass, %d fail, %d skip, %.1f s -> %s\n", m.all_pass() ? "PASS" : "FAIL", m.scenario.c_str(),
                pass, fail, skip, m.wall_clock, m.dir.string().c_str());
    if (!m.error.empty()) std::printf("     error: %s\n", m.error.c_str());
    for (const auto& c : m.checks)
        if (c.verdict == Verdict::Fail)
            std::printf("     %s%s: %s\n", c.diagnostic ? "(diagnostic) " : "", c.name.c_str(), c.detail.c_str());
}

int run_many(const std::vector<fs::path>& files, const fs::path& out, int jobs) {
    // validate everything before any computation
    std::vector<Scenario> scenarios;
    for (const auto& f : files) scenarios.push_back(load_scenario(f));
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(scenarios.size())));
    set_thread_budget(std::max(1, jobs / workers));

    std::vector<RunManifest> results(scenarios.size());
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= scenarios.size()) return;
                i = next++;
            }
            results[i] = run(scenarios[i], out);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    bool ok = true;
    for (const auto& m : results) {
        report(m);
        ok = ok && m.all_pass();
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Experiment runner for the (J)MGT decay, profile and singular-limit suites"};
    app.require_subcommand(0, 1);
    bool list_flag = false;
    std::string scen_dir;
    app.add_flag("--list", list_flag, "Print the bundled scenario catalog and exit");
    app.add_option("--scenarios", scen_dir, "Scenario directory (default: $MGT_SCENARIO_DIR or the bundled catalog)");

    auto* run_cmd = app.add_subcommand("run", "Run one scenario file or the whole catalog");
    std::string file, out = "runs";
    bool all = false;
    int jobs = 1;
    run_cmd->add_option("scenario", file, "Scenario TOML file");
    run_cmd->add_flag("--all", all, "Run every scenario of the catalog");
    run_cmd->add_option("--jobs,-j", jobs, "Thread budget; with --all, scenarios run in parallel")->check(CLI::PositiveNumber);
    run_cmd->add_option("--out,-o", out, "Output root directory");
    run_cmd->add_option("--scenarios", scen_dir, "Scenario directory for --all");

    auto* check_cmd = app.add_subcommand("validate", "Parse and validate scenario files without running them");
    std::vector<std::string> to_check;
    check_cmd->add_option("files", to_check, "Scenario TOML files")->required();

    auto* plot_cmd = app.add_subcommand("plots", "Regenerate gnuplot sources of a run directory");
    std::string run_dir;
    plot_cmd->add_option("dir", run_dir, "Run output directory holding manifest.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (list_flag) return list(scenario_dir(scen_dir));
        if (*run_cmd) {
            if (all == !file.empty()) {
                std::cerr << "run: give either a scenario file or --all\n";
                return 2;
            }
            if (all) return run_many(scenario_catalog(scenario_dir(scen_dir)), out, jobs);
            return run_many({file}, out, jobs);
        }
        if (*check_cmd) {
            for (const auto& f : to_check) {
                const Scenario sc = load_scenario(f);
                std::printf("ok %s (%s)\n", f.c_str(), kind_name(sc.kind));
            }
            return 0;
        }
        if (*plot_cmd) {
            for (const auto& p : emit_plots(fs::path(run_dir))) std::printf("%s\n", p.string().c_str());
            return 0;
        }
        std::cout << app.help();
        return 2;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
}
