#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mgtlab/runner.hpp"

namespace mgt::lab {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

std::string gp_quote(const std::string& s) {
    std::string out = "'";
    for (char ch : s) out += ch == '\'' ? std::string("''") : std::string(1, ch);
    return out + "'";
}

// header and first data row, or MissingData
std::pair<std::vector<std::string>, std::vector<std::string>> head(const fs::path& csv) {
    std::ifstream in(csv);
    if (!in) throw Error(ErrorKind::MissingData, "no CSV at " + csv.string());
    std::string header, row;
    if (!std::getline(in, header) || header.empty()) throw Error(ErrorKind::MissingData, "empty CSV " + csv.string());
    if (!std::getline(in, row) || row.empty()) throw Error(ErrorKind::MissingData, "CSV without data rows " + csv.string());
    return {split(header), split(row)};
}

std::string script(const PlotArtifact& a) {
    const auto [cols, first] = head(a.csv);
    auto index = [&](const std::string& name) {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return i;
        throw Error(ErrorKind::MissingData, "column '" + name + "' absent from " + a.csv.string());
    };
    const std::string stem = a.csv.stem().string();
    std::ostringstream os;
    os << "# gnuplot script; run with: gnuplot " << stem << ".gp\n";
    os << "set datafile separator ','\n";
    os << "set terminal pngcairo size 960,640\n";
    os << "set output " << gp_quote(stem + ".png") << "\n";
    os << "set title " << gp_quote(a.spec.title) << " noenhanced\n";
    os << "set xlabel " << gp_quote(a.spec.xlabel) << "\n";
    os << "set logscale xy\n";
    os << "set key left bottom noenhanced\n";
    std::vector<std::string> items;
    for (const auto& c : a.spec.columns) {
        const std::size_t i = index(c);
        items.push_back(gp_quote(a.csv.filename().string()) + " using 1:" + std::to_string(i + 1) +
                        " skip 1 with linespoints title " + gp_quote(c));
    }
    if (!a.spec.guides.empty() && !a.spec.columns.empty()) {
        // guides pass through the first row of the first plotted column
        const double x0 = std::stod(first.at(0)), y0 = std::stod(first.at(index(a.spec.columns.front())));
        char buf[128];
        std::snprintf(buf, sizeof buf, "x0 = %.12e\ny0 = %.12e\n", x0, y0);
        os << buf;
        for (const auto& [label, slope] : a.spec.guides) {
            std::snprintf(buf, sizeof buf, "y0 * (x / x0) ** (%.12g)", slope);
            items.push_back(std::string(buf) + " with lines dashtype 2 title " + gp_quote(label));
        }
    }
    os << "plot ";
    for (std::size_t i = 0; i < items.size(); ++i) os << (i ? ", \\\n     " : "") << items[i];
    os << "\n";
    return os.str();
}

}  // namespace

std::vector<fs::path> emit_plots(const std::vector<PlotArtifact>& artifacts) {
    std::vector<fs::path> out;
    for (const auto& a : artifacts) {
        const std::string text = script(a);
        fs::path p = a.csv;
        p.replace_extension(".gp");
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        f << text;
        out.push_back(p);
    }
    return out;
}

std::vector<fs::path> emit_plots(const fs::path& run_dir) {
    std::ifstream in(run_dir / "manifest.json");
    if (!in) throw Error(ErrorKind::MissingData, "no manifest.json in " + run_dir.string());
    const auto j = nlohmann::json::parse(in);
    std::vector<PlotArtifact> artifacts;
    for (const auto& p : j.at("plots")) {
        PlotArtifact a;
        a.csv = run_dir / p.at("csv").get<std::string>();
        a.spec.title = p.at("title").get<std::string>();
        a.spec.xlabel = p.at("xlabel").get<std::string>();
        a.spec.columns = p.at("columns").get<std::vector<std::string>>();
        for (const auto& g : p.at("guides")) a.spec.guides.push_back({g.at("label"), g.at("slope")});
        artifacts.push_back(std::move(a));
    }
    return emit_plots(artifacts);
}

}  // namespace mgt::lab
