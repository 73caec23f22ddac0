#include "mgtlab/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#ifndef MGT_TOOL_VERSION
#define MGT_TOOL_VERSION "0.0.0"
#endif

namespace mgt::lab {

namespace fs = std::filesystem;

namespace {

std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string table_text(const TableData& t) {
    if (!t.raw.empty()) return t.raw;
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_number(row[i]);
        out += "\n";
    }
    return out;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::InvalidParams, "cannot write " + p.string());
    out << text;
}

std::string checks_csv(const std::vector<CheckResult>& checks) {
    std::string out = "name,verdict,value,expected,tol,diagnostic,detail\n";
    for (const auto& c : checks)
        out += csv_quote(c.name) + "," + verdict_name(c.verdict) + "," + csv_number(c.value) + "," +
               csv_number(c.expected) + "," + csv_number(c.tol) + "," + (c.diagnostic ? "1" : "0") + "," +
               csv_quote(c.detail) + "\n";
    return out;
}

nlohmann::json manifest_json(const RunManifest& m) {
    nlohmann::json j;
    j["scenario"] = m.scenario;
    j["scenario_sha256"] = m.hash;
    j["tool_version"] = m.tool_version;
    j["csv_schema"] = kCsvSchemaVersion;
    j["wall_clock_seconds"] = m.wall_clock;
    j["all_pass"] = m.all_pass();
    if (!m.error.empty()) j["error"] = m.error;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : m.checks)
        j["checks"].push_back({{"name", c.name},
                               {"verdict", verdict_name(c.verdict)},
                               {"value", c.value},
                               {"expected", c.expected},
                               {"tol", c.tol},
                               {"diagnostic", c.diagnostic},
                               {"detail", c.detail}});
    j["csv"] = nlohmann::json::array();
    for (const auto& f : m.csv_files) j["csv"].push_back(f.filename().string());
    j["plots"] = nlohmann::json::array();
    for (const auto& p : m.plots) {
        nlohmann::json g = nlohmann::json::array();
        for (const auto& [label, slope] : p.spec.guides) g.push_back({{"label", label}, {"slope", slope}});
        j["plots"].push_back({{"csv", p.csv.filename().string()},
                              {"title", p.spec.title},
                              {"xlabel", p.spec.xlabel},
                              {"columns", p.spec.columns},
                              {"guides", g}});
    }
    return j;
}

}  // namespace

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Fail: return "FAIL";
        case Verdict::Skip: return "SKIP";
    }
    return "?";
}

const char* tool_version() { return MGT_TOOL_VERSION; }

bool RunManifest::all_pass() const {
    if (!error.empty()) return false;
    for (const auto& c : checks)
        if (!c.diagnostic && c.verdict == Verdict::Fail) return false;
    return true;
}

std::string sha256_hex(const std::string& text) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::InvalidParams, "SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

RunManifest run(const Scenario& sc, const fs::path& out_root) {
    RunManifest m;
    m.scenario = sc.name;
    m.hash = sha256_hex(sc.source);
    m.tool_version = tool_version();
    m.dir = out_root / (sc.output_dir.empty() ? sc.name : sc.output_dir);
    fs::create_directories(m.dir);

    const auto start = std::chrono::steady_clock::now();
    SuiteOutput out;
    try {
        out = run_suite(sc);
    } catch (const Error& e) {
        m.error = sc.origin + ": " + e.what();
    } catch (const std::exception& e) {
        m.error = sc.origin + ": " + e.what();
    }
    m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m.checks = std::move(out.checks);

    for (const auto& t : out.tables) {
        const fs::path p = m.dir / t.file;
        write_file(p, table_text(t));
        m.csv_files.push_back(p);
        if (t.plot) m.plots.push_back({p, *t.plot});
    }
    write_file(m.dir / "checks.csv", checks_csv(m.checks));
    write_file(m.dir / "summary.txt", summary_text(m));
    write_file(m.dir / "manifest.json", manifest_json(m).dump(2) + "\n");
    emit_plots(m.plots);
    return m;
}

std::string summary_text(const RunManifest& m) {
    std::ostringstream os;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.2f", m.wall_clock);
    os << "scenario " << m.scenario << "\n";
    os << "sha256   " << m.hash << "\n";
    os << "version  " << m.tool_version << "\n";
    os << "wall     " << buf << " s\n";
    if (!m.error.empty()) os << "ERROR    " << m.error << "\n";
    for (const auto& c : m.checks) {
        os << verdict_name(c.verdict) << (c.diagnostic ? " (diagnostic) " : " ") << c.name;
        if (c.verdict != Verdict::Skip) {
            std::snprintf(buf, sizeof buf, ": value %.6g", c.value);
            os << buf;
            if (c.expected != 0.0 || c.tol != 0.0) {
                std::snprintf(buf, sizeof buf, ", expected %.6g, tol %.3g", c.expected, c.tol);
                os << buf;
            }
        }
        if (!c.detail.empty()) os << " [" << c.detail << "]";
        os << "\n";
    }
    os << (m.all_pass() ? "RESULT PASS" : "RESULT FAIL") << "\n";
    return os.str();
}

}  // namespace mgt::lab
