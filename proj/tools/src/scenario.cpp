#include "mgtlab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace mgt::lab {

namespace {

struct KindInfo {
    ExperimentKind kind;
    const char* name;
};

constexpr KindInfo kKinds[] = {
    {ExperimentKind::Roots, "roots"},
    {ExperimentKind::Kernels, "kernels"},
    {ExperimentKind::LinearRates, "linear-rates"},
    {ExperimentKind::Profiles, "profiles"},
    {ExperimentKind::Optimality, "optimality"},
    {ExperimentKind::Nonlinear, "nonlinear"},
    {ExperimentKind::NonlinearProfiles, "nonlinear-profiles"},
    {ExperimentKind::SingularLimit, "singular-limit"},
};

using KeySet = std::set<std::string>;

// check types per kind and the keys each one accepts (besides type, diagnostic)
const std::map<ExperimentKind, std::map<std::string, KeySet>>& check_schema() {
    static const std::map<ExperimentKind, std::map<std::string, KeySet>> s = {
        {ExperimentKind::Roots,
         {{"expansion", {"root", "pairs", "k_min", "k_max", "points", "expected"}},
          {"oracle", {"pairs", "points", "k_min", "k_max", "tol"}}}},
        {ExperimentKind::Kernels,
         {{"identities", {"count", "seed", "k_min", "k_max", "tol"}},
          {"sweep", {"sweep", "dim", "ell", "s", "tol"}}}},
        {ExperimentKind::LinearRates, {{"norm", {"dim", "ell", "s", "expected", "tol", "growth"}}}},
        {ExperimentKind::Profiles,
         {{"residual", {"dim", "order", "ell", "s", "expected", "tol"}},
          {"gain", {"dim", "ell", "s", "tol", "gain_tol"}}}},
        {ExperimentKind::Optimality, {{"lower-bound", {"dim", "ell", "s", "bound"}}}},
        {ExperimentKind::Nonlinear,
         {{"decay", {"norm", "fit_from", "expected", "tol"}},
          {"cross-oracle", {"tol"}},
          {"self-consistency", {"tol"}},
          {"pde-residual", {"tol"}},
          {"epsilon-scaling", {"levels", "expected", "tol"}}}},
        {ExperimentKind::NonlinearProfiles,
         {{"profile-decreasing", {"order", "ell", "k", "literal"}},
          {"lower-bound", {"literal"}},
          {"profile-rate", {"order", "ell", "k", "literal", "expected", "tol"}}}},
        {ExperimentKind::SingularLimit,
         {{"rate", {"norm", "expected", "tol"}},
          {"halving", {"norm", "lo", "hi"}},
          {"compatibility", {"tol"}},
          {"surrogate", {"grid", "times"}},
          {"late-decay", {"tol"}}}},
    };
    return s;
}

[[noreturn]] void fail(const std::string& origin, const toml::node& n, const std::string& msg) {
    std::ostringstream os;
    os << origin << ":" << n.source().begin.line << ": " << msg;
    throw Error(ErrorKind::ConfigError, os.str());
}

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
    throw Error(ErrorKind::ConfigError, origin + ": " + msg);
}

class Reader {
public:
    Reader(const toml::table& t, std::string origin, std::string where)
        : t_(t), origin_(std::move(origin)), where_(std::move(where)) {}

    void allow(const KeySet& keys) const {
        for (auto&& [k, v] : t_) {
            const std::string key(k.str());
            if (!keys.count(key)) fail(origin_, v, "unknown key '" + qualified(key) + "'");
        }
    }

    bool has(const std::string& key) const { return t_.contains(key); }

    double num(const std::string& key, double def) const {
        const toml::node* n = t_.get(key);
        if (!n) return def;
        if (auto v = n->value<double>()) {
            if (!std::isfinite(*v)) fail(origin_, *n, "'" + qualified(key) + "' must be finite");
            return *v;
        }
        fail(origin_, *n, "'" + qualified(key) + "' must be a number");
    }

    double required_num(const std::string& key) const {
        if (!has(key)) fail(origin_, where_ + ": missing required key '" + qualified(key) + "'");
        return num(key, 0.0);
    }

    int integer(const std::string& key, int def) const {
        const toml::node* n = t_.get(key);
        if (!n) return def;
        if (auto v = n->value_exact<int64_t>()) return static_cast<int>(*v);
        fail(origin_, *n, "'" + qualified(key) + "' must be an integer");
    }

    bool boolean(const std::string& key, bool def) const {
        const toml::node* n = t_.get(key);
        if (!n) return def;
        if (auto v = n->value_exact<bool>()) return *v;
        fail(origin_, *n, "'" + qualified(key) + "' must be true or false");
    }

    std::string str(const std::string& key, const std::string& def) const {
        const toml::node* n = t_.get(key);
        if (!n) return def;
        if (auto v = n->value_exact<std::string>()) return *v;
        fail(origin_, *n, "'" + qualified(key) + "' must be a string");
    }

    std::string choice(const std::string& key, const std::string& def, const KeySet& options) const {
        const std::string v = str(key, def);
        if (!options.count(v)) {
            std::string list;
            for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
            fail(origin_, *t_.get(key), "'" + qualified(key) + "' must be one of: " + list);
        }
        return v;
    }

    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        const toml::node* n = t_.get(key);
        if (!n) return out;
        const toml::array* a = n->as_array();
        if (!a) fail(origin_, *n, "'" + qualified(key) + "' must be an array of numbers");
        for (const auto& e : *a) {
            auto v = e.value<double>();
            if (!v || !std::isfinite(*v)) fail(origin_, e, "'" + qualified(key) + "' must hold finite numbers");
            out.push_back(*v);
        }
        return out;
    }

    const toml::table* sub(const std::string& key) const {
        const toml::node* n = t_.get(key);
        if (!n) return nullptr;
        if (!n->is_table()) fail(origin_, *n, "'" + qualified(key) + "' must be a table");
        return n->as_table();
    }

    std::vector<const toml::table*> tables(const std::string& key) const {
        std::vector<const toml::table*> out;
        const toml::node* n = t_.get(key);
        if (!n) return out;
        const toml::array* a = n->as_array();
        if (!a) fail(origin_, *n, "'" + qualified(key) + "' must be an array of tables ([[" + qualified(key) + "]])");
        for (const auto& e : *a) {
            if (!e.is_table()) fail(origin_, e, "'" + qualified(key) + "' entries must be tables");
            out.push_back(e.as_table());
        }
        return out;
    }

    const toml::node& node(const std::string& key) const { return *t_.get(key); }
    const std::string& origin() const { return origin_; }
    std::string qualified(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

private:
    const toml::table& t_;
    std::string origin_;
    std::string where_;
};

void require(bool ok, const Reader& r, const std::string& key, const std::string& msg) {
    if (ok) return;
    if (r.has(key)) fail(r.origin(), r.node(key), "'" + r.qualified(key) + "' " + msg);
    fail(r.origin(), r.qualified(key) + " " + msg);
}

ModelParams read_model(const Reader& r, ModelParams base) {
    base.tau = r.num("tau", base.tau);
    base.delta = r.num("delta", base.delta);
    base.nonlin_ratio = r.num("nonlin_ratio", base.nonlin_ratio);
    base.dim = r.integer("dim", base.dim);
    return base;
}

PresetKind preset_kind(const Reader& r) {
    const std::string v =
        r.choice("preset", "gaussian", {"gaussian", "shifted_gaussian", "derivative_gaussian", "zero_mean"});
    if (v == "shifted_gaussian") return PresetKind::ShiftedGaussian;
    if (v == "derivative_gaussian") return PresetKind::DerivativeGaussian;
    if (v == "zero_mean") return PresetKind::ZeroMean;
    return PresetKind::Gaussian;
}

std::vector<DataPreset> read_data(const Reader& parent, const std::string& key, const std::string& origin) {
    std::vector<DataPreset> out;
    int idx = 0;
    for (const toml::table* t : parent.tables(key)) {
        Reader r(*t, origin, parent.qualified(key) + "[" + std::to_string(idx++) + "]");
        r.allow({"preset", "amplitude", "width", "center", "slot"});
        DataPreset d;
        d.kind = preset_kind(r);
        d.amplitude = r.num("amplitude", 1.0);
        d.width = r.num("width", 1.0);
        const auto c = r.numbers("center");
        require(c.size() <= 3, r, "center", "has at most three components");
        for (std::size_t i = 0; i < c.size(); ++i) d.center[i] = c[i];
        d.slot = r.integer("slot", 0);
        require(d.slot >= 0 && d.slot <= 2, r, "slot", "must be 0, 1 or 2");
        require(d.width > 0.0, r, "width", "must be positive");
        out.push_back(d);
    }
    return out;
}

TimeWindow read_window(const Reader& parent, TimeWindow w) {
    const toml::table* t = parent.sub("window");
    if (!t) return w;
    Reader r(*t, parent.origin(), parent.qualified("window"));
    r.allow({"t0", "t1", "per_decade"});
    w.t0 = r.num("t0", w.t0);
    w.t1 = r.num("t1", w.t1);
    w.per_decade = r.integer("per_decade", w.per_decade);
    require(w.t0 > 0.0, r, "t0", "must be positive");
    require(w.t1 > w.t0, r, "t1", "must exceed t0");
    require(w.per_decade >= 1, r, "per_decade", "must be at least 1");
    return w;
}

GridSpec read_grid(const Reader& r, GridSpec g) {
    r.allow({"N", "L"});
    g.N = r.integer("N", g.N);
    g.L = r.num("L", g.L);
    require(g.N >= 8 && (g.N & (g.N - 1)) == 0, r, "N", "must be a power of two >= 8");
    require(g.L > 0.0, r, "L", "must be positive");
    return g;
}

CheckSpec read_check(const toml::table& t, ExperimentKind kind, const std::string& origin, const std::string& where) {
    Reader r(t, origin, where);
    const auto& per_kind = check_schema().at(kind);
    KeySet types;
    for (const auto& [name, keys] : per_kind) types.insert(name);
    if (!r.has("type")) fail(origin, t, where + ": missing required key 'type'");
    CheckSpec c;
    c.type = r.choice("type", "", types);
    KeySet allowed = per_kind.at(c.type);
    allowed.insert("type");
    allowed.insert("diagnostic");
    r.allow(allowed);
    c.diagnostic = r.boolean("diagnostic", false);
    c.dim = r.integer("dim", 0);
    require(c.dim >= 0 && c.dim <= 3, r, "dim", "must be 1, 2 or 3");
    c.ell = r.integer("ell", 0);
    require(c.ell >= 0 && c.ell <= 2, r, "ell", "must be 0, 1 or 2");
    c.order = r.integer("order", 1);
    require(c.order == 1 || c.order == 2, r, "order", "must be 1 or 2");
    c.s = r.num(r.has("k") ? "k" : "s", 0.0);
    require(c.s >= 0.0, r, r.has("k") ? "k" : "s", "must be >= 0");
    c.expected = r.num("expected", c.expected);
    c.tol = r.num("tol", c.tol);
    require(std::isnan(c.tol) || c.tol > 0.0, r, "tol", "must be positive");
    c.gain_tol = r.num("gain_tol", c.gain_tol);
    c.lo = r.num("lo", c.lo);
    c.hi = r.num("hi", c.hi);
    require(c.lo < c.hi, r, "hi", "must exceed lo");
    c.literal = r.boolean("literal", false);
    c.k_min = r.num("k_min", c.k_min);
    c.k_max = r.num("k_max", c.k_max);
    require(std::isnan(c.k_min) || c.k_min > 0.0, r, "k_min", "must be positive");
    require(std::isnan(c.k_max) || std::isnan(c.k_min) || c.k_max > c.k_min, r, "k_max", "must exceed k_min");
    c.points = r.integer("points", 0);
    require(c.points >= 0, r, "points", "must be >= 0");
    c.count = r.integer("count", c.count);
    require(c.count >= 1, r, "count", "must be >= 1");
    c.seed = static_cast<unsigned>(r.integer("seed", 1));
    c.levels = r.integer("levels", c.levels);
    require(c.levels >= 2, r, "levels", "must be >= 2");
    c.fit_from = r.num("fit_from", c.fit_from);
    c.times = r.numbers("times");
    if (r.has("pairs")) {
        const toml::array* a = r.node("pairs").as_array();
        if (!a) fail(origin, r.node("pairs"), "'" + r.qualified("pairs") + "' must be an array of [tau, delta]");
        for (const auto& e : *a) {
            const toml::array* q = e.as_array();
            if (!q || q->size() != 2) fail(origin, e, "'" + r.qualified("pairs") + "' entries must be [tau, delta]");
            auto x = (*q)[0].value<double>(), y = (*q)[1].value<double>();
            if (!x || !y) fail(origin, e, "'" + r.qualified("pairs") + "' entries must be numbers");
            c.pairs.push_back({*x, *y});
        }
    }
    if (const toml::table* g = r.sub("grid")) c.grid = read_grid(Reader(*g, origin, r.qualified("grid")), c.grid);
    if (r.has("root")) c.variant = r.choice("root", "", {"lambda1", "mu_R", "mu_I"});
    if (r.has("sweep"))
        c.variant = r.choice("sweep", "", {"time-derivative", "profile-first", "profile-second", "profile-second-bare"});
    if (r.has("growth")) c.variant = r.choice("growth", "", {"log"});
    if (r.has("bound")) c.variant = r.choice("bound", "", {"leading", "profile-subtracted"});
    if (r.has("norm")) {
        if (kind == ExperimentKind::SingularLimit)
            c.variant = r.choice("norm", "", {"l2", "linf"});
        else
            c.variant = r.choice("norm", "", {"psi_l2", "psi_h1", "psi_t_l2", "psi_tt_l2"});
    }
    // required variants
    if (c.type == "expansion") {
        require(!c.variant.empty(), r, "root", "is required");
        require(!std::isnan(c.expected), r, "expected", "(minimum slope) is required");
    }
    if (c.type == "sweep") require(!c.variant.empty(), r, "sweep", "is required");
    if (c.type == "lower-bound" && kind == ExperimentKind::Optimality)
        require(!c.variant.empty(), r, "bound", "is required");
    if (c.type == "decay" || ((c.type == "rate" || c.type == "halving") && kind == ExperimentKind::SingularLimit))
        require(!c.variant.empty(), r, "norm", "is required");
    if (c.type == "norm") require(!std::isnan(c.expected) || c.variant == "log", r, "expected", "or growth is required");
    return c;
}

Nonlinearity read_mode(const Reader& r) {
    const std::string m = r.choice("mode", "kuznetsov", {"kuznetsov", "westervelt", "none"});
    if (m == "westervelt") return Nonlinearity::Westervelt;
    if (m == "none") return Nonlinearity::None;
    return Nonlinearity::Kuznetsov;
}

RunSpec read_run(const toml::table& t, const Scenario& sc, const std::string& where) {
    Reader r(t, sc.origin, where);
    r.allow({"label", "tau", "delta", "nonlin_ratio", "dim", "data", "grid", "h", "T", "epsilon", "slab_steps", "stride",
             "mode", "auto_epsilon", "picard_tol", "picard_max_iter", "window", "check"});
    RunSpec run;
    run.label = r.str("label", "");
    NonlinearProblem& p = run.problem;
    p.params = read_model(r, sc.params);
    p.data = r.has("data") ? read_data(r, "data", sc.origin) : sc.data;
    if (p.data.empty()) fail(sc.origin, t, where + ": no data presets");
    p.grid.dim = p.params.dim;
    if (!r.has("grid")) fail(sc.origin, t, where + ": missing required table 'grid'");
    p.grid = read_grid(Reader(*r.sub("grid"), sc.origin, r.qualified("grid")), p.grid);
    p.grid.dim = p.params.dim;
    p.h = r.required_num("h");
    p.T = r.required_num("T");
    p.epsilon = r.num("epsilon", 1.0);
    p.slab_steps = r.integer("slab_steps", 0);
    p.snapshot_stride = r.integer("stride", 0);
    p.mode = read_mode(r);
    p.auto_epsilon = r.boolean("auto_epsilon", false);
    p.picard_tol = r.num("picard_tol", p.picard_tol);
    p.picard_max_iter = r.integer("picard_max_iter", p.picard_max_iter);
    require(p.h > 0.0, r, "h", "must be positive");
    require(p.T > p.h, r, "T", "must exceed h");
    run.window = read_window(r, TimeWindow{p.T / 100.0, p.T, 10});
    require(run.window.t1 <= p.T * (1.0 + 1e-12), r, "window", "must end by T");
    p.snapshot_times = geometric_times(run.window.t0, run.window.t1, run.window.per_decade);
    int idx = 0;
    for (const toml::table* c : r.tables("check"))
        run.checks.push_back(read_check(*c, sc.kind, sc.origin, r.qualified("check") + "[" + std::to_string(idx++) + "]"));
    if (run.checks.empty()) fail(sc.origin, t, where + ": run has no checks");
    try {
        p.validate();
    } catch (const Error& e) {
        fail(sc.origin, t, where + ": " + e.what());
    }
    return run;
}

}  // namespace

const char* kind_name(ExperimentKind k) {
    for (const auto& e : kKinds)
        if (e.kind == k) return e.name;
    return "?";
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    toml::table doc;
    try {
        doc = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << origin << ":" << e.source().begin.line << ": " << e.description();
        throw Error(ErrorKind::ConfigError, os.str());
    }
    Reader r(doc, origin, "");
    r.allow({"name", "kind", "description", "output_dir", "model", "data", "window", "check", "run", "limit"});
    Scenario sc;
    sc.source = text;
    sc.origin = origin;
    if (!r.has("name")) fail(origin, "missing required key 'name'");
    sc.name = r.str("name", "");
    require(!sc.name.empty() && sc.name.find_first_of("/\\ ") == std::string::npos, r, "name",
            "must be a non-empty word without slashes or spaces");
    if (!r.has("kind")) fail(origin, "missing required key 'kind'");
    KeySet kinds;
    for (const auto& e : kKinds) kinds.insert(e.name);
    const std::string kind = r.choice("kind", "", kinds);
    for (const auto& e : kKinds)
        if (kind == e.name) sc.kind = e.kind;
    sc.description = r.str("description", "");
    sc.output_dir = r.str("output_dir", "");
    if (const toml::table* m = r.sub("model")) {
        Reader mr(*m, origin, "model");
        mr.allow({"tau", "delta", "nonlin_ratio", "dim"});
        sc.params = read_model(mr, sc.params);
    }
    try {
        sc.params.validate();
    } catch (const Error& e) {
        fail(origin, std::string("model: ") + e.what());
    }
    sc.data = read_data(r, "data", origin);
    sc.window = read_window(r, sc.window);

    const bool run_kind = sc.kind == ExperimentKind::Nonlinear || sc.kind == ExperimentKind::NonlinearProfiles;
    if (run_kind) {
        if (r.has("check")) fail(origin, r.node("check"), "checks of solver scenarios live under [[run.check]]");
        int idx = 0;
        for (const toml::table* t : r.tables("run")) sc.runs.push_back(read_run(*t, sc, "run[" + std::to_string(idx++) + "]"));
        if (sc.runs.empty()) fail(origin, "solver scenarios need at least one [[run]]");
    } else {
        if (r.has("run")) fail(origin, r.node("run"), "[[run]] tables are only used by nonlinear scenarios");
        int idx = 0;
        for (const toml::table* t : r.tables("check"))
            sc.checks.push_back(read_check(*t, sc.kind, origin, "check[" + std::to_string(idx++) + "]"));
        if (sc.checks.empty()) fail(origin, "scenario has no [[check]] tables");
    }
    if (const toml::table* l = r.sub("limit")) {
        if (sc.kind != ExperimentKind::SingularLimit) fail(origin, r.node("limit"), "[limit] needs kind = \"singular-limit\"");
        Reader lr(*l, origin, "limit");
        lr.allow({"taus", "t_min", "t_max", "per_decade"});
        if (lr.has("taus")) sc.limit.taus = lr.numbers("taus");
        sc.limit.t_min = lr.num("t_min", sc.limit.t_min);
        sc.limit.t_max = lr.num("t_max", sc.limit.t_max);
        sc.limit.per_decade = lr.integer("per_decade", sc.limit.per_decade);
        require(sc.limit.t_min > 0.0 && sc.limit.t_max > sc.limit.t_min, lr, "t_max", "must exceed t_min > 0");
        require(sc.limit.per_decade >= 1, lr, "per_decade", "must be at least 1");
    }
    if (sc.kind == ExperimentKind::SingularLimit)
        for (double t : sc.limit.taus)
            if (!(t > 0.0) || !(t < sc.params.delta)) fail(origin, "limit.taus must lie in (0, delta)");

    // data checks that need the whole scenario
    const bool needs_data = sc.kind != ExperimentKind::Roots && !run_kind;
    if (needs_data && sc.data.empty()) fail(origin, "scenario needs [[data]] presets");
    for (const auto& c : sc.checks) {
        const int n = c.dim > 0 ? c.dim : sc.params.dim;
        for (const auto& d : sc.data) {
            try {
                d.validate(n);
            } catch (const Error& e) {
                fail(origin, std::string("data: ") + e.what());
            }
        }
    }
    return sc;
}

Scenario load_scenario(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open scenario file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), file.string());
}

std::vector<std::filesystem::path> scenario_catalog(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::ConfigError, "no scenario directory " + dir.string());
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".toml") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace mgt::lab
