#pragma once

// Run configuration: a flat `key = value` text format with optional
// `[section]` headers, command-line overrides and a JSON manifest that
// records where every value came from.
//
//   # comment
//   [noise]
//   alpha = 1.2
//   mode  = exact_stable
//
// Keys are unique across sections, so `alpha = 1.2` may also appear before
// any header. A header other than the key's own section is an error.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spde/coefficients.hpp"
#include "spde/experiments.hpp"
#include "spde/integrator.hpp"
#include "spde/noise.hpp"

namespace spde {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}
    /// Key path ("section.name") the error refers to; empty for syntax errors.
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct ConfigKey {
    const char* section;
    const char* name;
    const char* default_value;
    const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"run", "seed", "1", "master seed; replica r uses derive_seed(seed, r)"},
        {"run", "replicas", "200", "ensemble size"},
        {"run", "threads", "0", "worker threads (0: SPDE_THREADS or hardware concurrency)"},
        {"run", "out", "out", "output root; files go to <out>/<config hash>/"},
        {"run", "allow_inadmissible", "false", "run coupled experiments outside the uniqueness regime"},
        {"run", "dump_jumps", "false", "write the jump stream of noise-test as binary"},
        {"grid", "half_width", "10", "periodic domain [-L, L]"},
        {"grid", "n_cells", "512", "number of cells (even, >= 8)"},
        {"solver", "dt", "2.5e-4", "time step"},
        {"solver", "n_steps", "2000", "number of steps"},
        {"solver", "record_every", "20", "snapshot stride in steps"},
        {"solver", "q", "none", "integrability monitor exponent, or none"},
        {"noise", "alpha", "1.5", "stability index in (1, 2)"},
        {"noise", "epsilon", "1e-3", "jump truncation level"},
        {"noise", "mode", "exact_stable", "exact_stable | jump_decomposition | thinned"},
        {"noise", "gaussian_small_jumps", "true", "Gaussian stand-in for jumps below epsilon"},
        {"coefficients", "drift", "zero", "zero | lipschitz_demo | linear:c"},
        {"coefficients", "noise", "power", "power | zero | one | lipschitz_demo"},
        {"coefficients", "beta", "auto", "Holder exponent of H; auto means 1/alpha"},
        {"initial", "kind", "point", "point | bump | gaussian"},
        {"initial", "center", "0", "location of the initial datum"},
        {"initial", "mass", "1", "total initial mass"},
        {"initial", "radius", "4", "radius of the bump datum"},
        {"initial", "t0", "0.01", "variance of the gaussian datum"},
        {"couple", "perturbation", "0.1", "Y_0 = X_0 + perturbation * bump"},
        {"couple", "bump_radius", "1", "radius of the unit-mass perturbation bump"},
        {"couple", "mollifier_m", "16", "scale m of the recorded mollified difference"},
        {"couple", "probe_half_width", "1", "mollified difference recorded on [-K, K]"},
        {"monitors", "eta", "auto", "Holder exponent of sigma_k; auto means eta_c / 2"},
        {"monitors", "k_levels", "1,2,4,8,16", "levels k of gamma_k and sigma_k"},
        {"monitors", "window", "1", "window half width K"},
        {"monitors", "depth", "4", "deepest dyadic level of the bar-integral"},
    };
    return keys;
}

inline const ConfigKey* find_config_key(const std::string& name) {
    for (const auto& k : config_keys())
        if (name == k.name || name == std::string(k.section) + "." + k.name) return &k;
    return nullptr;
}

inline std::string key_path(const ConfigKey& k) { return std::string(k.section) + "." + k.name; }

struct ConfigValue {
    std::string value;
    /// "default", "<file>:<line>", "override" or "flag --<name>".
    std::string source;
};

enum class InitialKind { point, bump, gaussian };

struct RunConfig {
    /// Raw values with provenance, keyed by "section.name".
    std::map<std::string, ConfigValue> values;

    std::uint64_t seed = 1;
    int replicas = 200;
    int threads = 0;
    std::string out = "out";
    bool allow_inadmissible = false;
    bool dump_jumps = false;
    Grid1D grid{10.0, 512};
    SolverConfig solver;
    InitialKind initial = InitialKind::point;
    double initial_center = 0.0;
    double initial_mass = 1.0;
    double initial_radius = 4.0;
    double initial_t0 = 0.01;
    double perturbation = 0.1;
    double bump_radius = 1.0;
    double mollifier_m = 16.0;
    double probe_half_width = 1.0;
    double eta = 0.0;
    std::vector<double> k_levels;
    double window = 1.0;
    int depth = 4;

    /// FNV-1a of the canonical key=value listing, excluding keys that do
    /// not affect results (out, threads).
    std::uint64_t hash() const {
        std::string canon;
        for (const auto& [k, v] : values) {
            if (k == "run.out" || k == "run.threads") continue;
            canon += k + "=" + v.value + "\n";
        }
        return fnv1a64(canon);
    }

    std::string hash_hex() const {
        std::ostringstream s;
        s << std::hex;
        s.width(16);
        s.fill('0');
        s << hash();
        return s.str();
    }

    EnsembleSpec ensemble() const {
        EnsembleSpec e;
        e.n_replicas = replicas;
        e.master_seed = seed;
        e.grid = grid;
        e.solver = solver;
        e.threads = threads;
        e.config_hash = hash();
        return e;
    }

    FieldState initial_state() const { return initial_state_on(grid); }

    FieldState initial_state_on(const Grid1D& g) const {
        switch (initial) {
            case InitialKind::point: return point_mass(g, initial_center, initial_mass);
            case InitialKind::bump: return smooth_bump(g, initial_center, initial_radius, initial_mass);
            case InitialKind::gaussian: return gaussian_bump(g, initial_center, initial_t0, initial_mass);
        }
        throw std::logic_error("unknown initial kind");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end || !std::isfinite(out)) throw ConfigError(key, "expected a number, got '" + v + "'");
    return out;
}

inline long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError(key, "expected an integer, got '" + v + "'");
    return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    if (out.empty()) throw ConfigError(key, "expected a comma-separated list");
    return out;
}

inline void set_value(RunConfig& cfg, const std::string& raw_key, const std::string& value, const std::string& source,
                      const std::string& section = "") {
    const ConfigKey* k = find_config_key(raw_key);
    if (!k) throw ConfigError(section.empty() ? raw_key : section + "." + raw_key, "unknown key (" + source + ")");
    if (!section.empty() && section != k->section)
        throw ConfigError(section + "." + raw_key, "key belongs to section [" + std::string(k->section) + "] (" + source + ")");
    cfg.values[key_path(*k)] = {value, source};
}

/// Typed fields from the raw values; every error names its key.
inline void materialize(RunConfig& c) {
    auto get = [&](const char* key) -> const std::string& { return c.values.at(key).value; };
    c.seed = to_u64("run.seed", get("run.seed"));
    c.replicas = static_cast<int>(to_int("run.replicas", get("run.replicas")));
    if (c.replicas < 1) throw ConfigError("run.replicas", "must be >= 1");
    c.threads = static_cast<int>(to_int("run.threads", get("run.threads")));
    if (c.threads < 0) throw ConfigError("run.threads", "must be >= 0");
    c.out = get("run.out");
    if (c.out.empty()) throw ConfigError("run.out", "must not be empty");
    c.allow_inadmissible = to_bool("run.allow_inadmissible", get("run.allow_inadmissible"));
    c.dump_jumps = to_bool("run.dump_jumps", get("run.dump_jumps"));

    const double L = to_double("grid.half_width", get("grid.half_width"));
    if (!(L > 0.0)) throw ConfigError("grid.half_width", "must be positive");
    const auto n = to_int("grid.n_cells", get("grid.n_cells"));
    if (n < 8 || n % 2 != 0) throw ConfigError("grid.n_cells", "must be even and >= 8");
    c.grid = Grid1D(L, static_cast<int>(n));

    NoiseModel model;
    model.alpha = to_double("noise.alpha", get("noise.alpha"));
    if (!(model.alpha > 1.0 && model.alpha < 2.0)) throw ConfigError("noise.alpha", "must lie in (1, 2)");
    model.epsilon = to_double("noise.epsilon", get("noise.epsilon"));
    if (!(model.epsilon > 0.0)) throw ConfigError("noise.epsilon", "must be positive");
    try {
        model.mode = noise_mode_from_string(get("noise.mode"));
    } catch (const std::exception& e) {
        throw ConfigError("noise.mode", e.what());
    }
    model.gaussian_small_jumps = to_bool("noise.gaussian_small_jumps", get("noise.gaussian_small_jumps"));
    model.seed = c.seed;

    c.solver.dt = to_double("solver.dt", get("solver.dt"));
    if (!(c.solver.dt > 0.0)) throw ConfigError("solver.dt", "must be positive");
    const auto steps = to_int("solver.n_steps", get("solver.n_steps"));
    if (steps < 0) throw ConfigError("solver.n_steps", "must be >= 0");
    c.solver.n_steps = static_cast<int>(steps);
    const auto stride = to_int("solver.record_every", get("solver.record_every"));
    if (stride < 1) throw ConfigError("solver.record_every", "must be >= 1");
    c.solver.record_every = static_cast<int>(stride);
    if (get("solver.q") == "none") {
        c.solver.q.reset();
    } else {
        c.solver.q = to_double("solver.q", get("solver.q"));
        if (!(*c.solver.q > 0.0)) throw ConfigError("solver.q", "must be positive");
    }
    c.solver.noise = noise_for(model, c.grid, c.solver.dt);

    double beta = 1.0 / model.alpha;
    if (get("coefficients.beta") != "auto") beta = to_double("coefficients.beta", get("coefficients.beta"));
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("coefficients.beta", "must lie in (0, 1)");
    std::string noise = get("coefficients.noise");
    if (noise == "power") noise = "power:" + std::to_string(beta);
    try {
        c.solver.coefficients = coefficients_by_name(get("coefficients.drift"), noise, beta);
    } catch (const std::exception& e) {
        const bool drift = std::string(e.what()).find("drift") != std::string::npos;
        throw ConfigError(drift ? "coefficients.drift" : "coefficients.noise", e.what());
    }
    c.solver.coefficients.holder_exponent = beta;

    const auto& kind = get("initial.kind");
    if (kind == "point")
        c.initial = InitialKind::point;
    else if (kind == "bump")
        c.initial = InitialKind::bump;
    else if (kind == "gaussian")
        c.initial = InitialKind::gaussian;
    else
        throw ConfigError("initial.kind", "expected point, bump or gaussian, got '" + kind + "'");
    c.initial_center = to_double("initial.center", get("initial.center"));
    if (std::abs(c.initial_center) > L) throw ConfigError("initial.center", "must lie in the domain");
    c.initial_mass = to_double("initial.mass", get("initial.mass"));
    if (!(c.initial_mass >= 0.0)) throw ConfigError("initial.mass", "must be nonnegative");
    c.initial_radius = to_double("initial.radius", get("initial.radius"));
    if (!(c.initial_radius > 0.0)) throw ConfigError("initial.radius", "must be positive");
    c.initial_t0 = to_double("initial.t0", get("initial.t0"));
    if (!(c.initial_t0 > 0.0)) throw ConfigError("initial.t0", "must be positive");

    c.perturbation = to_double("couple.perturbation", get("couple.perturbation"));
    if (!(c.perturbation >= 0.0)) throw ConfigError("couple.perturbation", "must be nonnegative");
    c.bump_radius = to_double("couple.bump_radius", get("couple.bump_radius"));
    if (!(c.bump_radius > 0.0)) throw ConfigError("couple.bump_radius", "must be positive");
    c.mollifier_m = to_double("couple.mollifier_m", get("couple.mollifier_m"));
    if (!(c.mollifier_m >= 1.0)) throw ConfigError("couple.mollifier_m", "must be >= 1");
    c.probe_half_width = to_double("couple.probe_half_width", get("couple.probe_half_width"));
    if (!(c.probe_half_width > 0.0 && c.probe_half_width <= L))
        throw ConfigError("couple.probe_half_width", "must lie in (0, half_width]");

    const double eta_c = 2.0 / model.alpha - 1.0;
    c.eta = get("monitors.eta") == "auto" ? 0.5 * eta_c : to_double("monitors.eta", get("monitors.eta"));
    if (!(c.eta > 0.0 && c.eta < eta_c)) throw ConfigError("monitors.eta", "must lie in (0, 2/alpha - 1)");
    c.k_levels = to_list("monitors.k_levels", get("monitors.k_levels"));
    c.window = to_double("monitors.window", get("monitors.window"));
    if (!(c.window > 0.0 && c.window <= L)) throw ConfigError("monitors.window", "must lie in (0, half_width]");
    const auto depth = to_int("monitors.depth", get("monitors.depth"));
    if (depth < 2) throw ConfigError("monitors.depth", "must be >= 2");
    c.depth = static_cast<int>(depth);

    try {
        c.solver.validate(c.grid);
    } catch (const std::exception& e) {
        throw ConfigError("solver", e.what());
    }
}

}  // namespace detail

/// A "key=value" assignment applied after the file; `source` is recorded
/// as its provenance.
struct Override {
    std::string assignment;
    std::string source = "override";

    Override(std::string a) : assignment(std::move(a)) {}
    Override(const char* a) : assignment(a) {}
    Override(std::string a, std::string src) : assignment(std::move(a)), source(std::move(src)) {}
};

/// Parses configuration text. `origin` names the source in provenance
/// records and error messages. Overrides are "key=value" strings applied
/// after the text.
inline RunConfig parse_config_text(const std::string& text, const std::vector<Override>& overrides = {},
                                   const std::string& origin = "<text>") {
    RunConfig cfg;
    for (const auto& k : config_keys()) cfg.values[key_path(k)] = {k.default_value, "default"};

    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        const auto hash = line.find('#');
        const std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']' || body.size() < 3) throw ConfigError("", "parse error at " + where + ": malformed section header");
            section = detail::trim(body.substr(1, body.size() - 2));
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("", "parse error at " + where + ": expected key = value");
        const std::string key = detail::trim(body.substr(0, eq));
        const std::string value = detail::trim(body.substr(eq + 1));
        if (key.empty()) throw ConfigError("", "parse error at " + where + ": empty key");
        detail::set_value(cfg, key, value, where, section);
    }
    for (const auto& o : overrides) {
        const auto& a = o.assignment;
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw ConfigError("", "override '" + a + "' must have the form KEY=VAL");
        detail::set_value(cfg, detail::trim(a.substr(0, eq)), detail::trim(a.substr(eq + 1)), o.source);
    }
    detail::materialize(cfg);
    return cfg;
}

inline RunConfig parse_config(const std::string& path, const std::vector<Override>& overrides = {}) {
    if (path.empty()) return parse_config_text("", overrides);
    std::ifstream f(path);
    if (!f) throw ConfigError("", "cannot open config file " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str(), overrides, path);
}

/// Manifest with every key, its value and its provenance.
inline nlohmann::json manifest_json(const RunConfig& cfg, const std::string& version, const std::string& command) {
    nlohmann::json j;
    j["version"] = version;
    j["command"] = command;
    j["config_hash"] = cfg.hash_hex();
    j["seed"] = cfg.seed;
    j["scheme"] = {{"splitting", "diffuse, react, jump, clamp"},
                   {"kernel", to_string(kernel_kind_for(cfg.solver.dt, cfg.grid))},
                   {"clamp_policy", "clamp_to_zero"},
                   {"replica_seed", "derive_seed(seed, replica)"}};
    nlohmann::json keys = nlohmann::json::object();
    for (const auto& [k, v] : cfg.values) keys[k] = {{"value", v.value}, {"source", v.source}};
    j["config"] = keys;
    return j;
}

}  // namespace spde
