// spde: simulate, couple, verify, gate and noise-test from one config.
//
//   spde simulate --config run.cfg --seed 7 --out results
//   spde gate --alpha 1.15
//   spde verify --quick
//
// Outputs go to <out>/<config hash>/<command>/.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spde/acceptance.hpp"
#include "spde/config.hpp"
#include "spde/experiments.hpp"
#include "spde/integrator.hpp"
#include "spde/io.hpp"
#include "spde/noise.hpp"
#include "spde/stats.hpp"

#ifndef SPDE_VERSION
#define SPDE_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> replicas;
    std::optional<std::string> out;
    std::optional<double> alpha;
    std::optional<int> threads;
    std::vector<std::string> overrides;
    std::vector<std::string> criteria;
    bool quick = false;
    bool allow_inadmissible = false;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "config file (flat key = value, [section] headers)");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--replicas", f.replicas, "ensemble size");
    sub->add_option("--out", f.out, "output root");
    sub->add_option("--alpha", f.alpha, "stability index");
    sub->add_option("--threads", f.threads, "worker threads");
    sub->add_option("--override", f.overrides, "KEY=VAL, repeatable")->take_all();
    sub->add_flag("--quick", f.quick, "smaller acceptance ensembles");
    sub->add_flag("--allow-inadmissible", f.allow_inadmissible, "run coupled experiments outside the admissible regime");
}

spde::RunConfig load(const Flags& f) {
    std::vector<spde::Override> ov(f.overrides.begin(), f.overrides.end());
    auto flag = [&](const std::string& key, const std::string& value, const std::string& name) {
        ov.emplace_back(key + "=" + value, "flag --" + name);
    };
    if (f.seed) flag("run.seed", std::to_string(*f.seed), "seed");
    if (f.replicas) flag("run.replicas", std::to_string(*f.replicas), "replicas");
    if (f.out) flag("run.out", *f.out, "out");
    if (f.alpha) flag("noise.alpha", spde::io::format_double(*f.alpha), "alpha");
    if (f.threads) flag("run.threads", std::to_string(*f.threads), "threads");
    if (f.allow_inadmissible) flag("run.allow_inadmissible", "true", "allow-inadmissible");
    return spde::parse_config(f.config, ov);
}

fs::path output_dir(const spde::RunConfig& cfg, const std::string& command) {
    return fs::path(cfg.out) / cfg.hash_hex() / command;
}

json check_json(const spde::CheckResult& c) {
    return {{"name", c.name},     {"statistic", c.statistic}, {"tolerance", c.tolerance},
            {"passed", c.passed}, {"asserted", c.asserted},   {"seed", c.seed},
            {"config_hash", c.config_hash}, {"detail", c.detail}};
}

spde::CheckResult check(const spde::RunConfig& cfg, std::string name, double statistic, double tolerance, bool passed,
                        std::string detail = {}, bool asserted = true) {
    spde::CheckResult c;
    c.name = std::move(name);
    c.statistic = statistic;
    c.tolerance = tolerance;
    c.passed = passed;
    c.asserted = asserted;
    c.seed = cfg.seed;
    c.config_hash = cfg.hash();
    c.detail = std::move(detail);
    return c;
}

/// Writes verdict.json and returns the exit code: 1 iff an asserted check failed.
int finish(const spde::RunConfig& cfg, const fs::path& dir, const std::string& command,
           const std::vector<spde::CheckResult>& checks, json extra = json::object()) {
    bool ok = true;
    json arr = json::array();
    for (const auto& c : checks) {
        arr.push_back(check_json(c));
        if (c.asserted && !c.passed) ok = false;
        std::cout << (c.passed ? "pass " : (c.asserted ? "FAIL " : "warn ")) << c.name << " = " << c.statistic
                  << " (tolerance " << c.tolerance << ")" << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
    }
    json v = {{"command", command}, {"config_hash", cfg.hash_hex()}, {"seed", cfg.seed}, {"passed", ok}, {"checks", arr}};
    for (auto& [k, val] : extra.items()) v[k] = val;
    spde::io::write_json(dir / "verdict.json", v);
    std::cout << "output: " << dir.string() << "\n";
    return ok ? 0 : 1;
}

void write_manifest(const spde::RunConfig& cfg, const fs::path& dir, const std::string& command, json extra = {}) {
    auto m = spde::manifest_json(cfg, SPDE_VERSION, command);
    if (extra.is_object())
        for (auto& [k, v] : extra.items()) m[k] = v;
    spde::io::write_json(dir / "manifest.json", m);
}

int cmd_simulate(const spde::RunConfig& cfg) {
    const auto dir = output_dir(cfg, "simulate");
    const auto spec = cfg.ensemble();
    spec.validate(false);
    const auto x0 = cfg.initial_state();
    write_manifest(cfg, dir, "simulate");

    struct Out {
        std::vector<std::vector<std::string>> rows;
        std::optional<spde::Trajectory> traj;
        spde::IntegrabilityMonitor monitor;
    };
    const auto outs = spde::parallel_map(spec.n_replicas, spec.workers(), [&](int r) {
        Out o;
        auto traj = spde::run(spec.replica(r), x0);
        for (std::size_t i = 0; i < traj.snapshots.size(); ++i)
            o.rows.push_back({std::to_string(r), spde::io::format_double(traj.snapshots[i].t),
                              spde::io::format_double(traj.mass[i]), spde::io::format_double(traj.sup[i]),
                              spde::io::format_double(traj.clamped_mass[i]),
                              spde::io::format_double(traj.integrability[i]),
                              spde::io::format_double(traj.residual[i])});
        o.monitor = spde::integrability_monitor(traj);
        if (r == 0) o.traj = std::move(traj);
        return o;
    });

    spde::io::write_field_csv(dir / "field.csv", outs.front().traj->snapshots);
    std::vector<std::vector<std::string>> rows;
    int bad = 0;
    for (const auto& o : outs) {
        rows.insert(rows.end(), o.rows.begin(), o.rows.end());
        if (!o.monitor.finite || !o.monitor.nondecreasing) ++bad;
    }
    spde::io::write_csv(dir / "mass.csv", {"replica", "t", "mass", "sup", "clamped_mass", "integrability", "residual"},
                        rows);

    std::vector<spde::CheckResult> checks;
    if (cfg.solver.q)
        checks.push_back(check(cfg, "integrability_monitor", bad, 0.0, bad == 0,
                               std::to_string(bad) + " replicas with a non-finite or decreasing accumulator"));
    return finish(cfg, dir, "simulate", checks);
}

int cmd_couple(const spde::RunConfig& cfg) {
    const auto dir = output_dir(cfg, "couple");
    const auto spec = cfg.ensemble();
    spec.validate(false);

    spde::ParameterSet ps;
    ps.alpha = cfg.solver.noise.alpha;
    ps.beta = cfg.solver.coefficients.holder_exponent;
    ps.q = cfg.solver.q;
    const auto gate = spde::uniqueness_gate(ps);
    std::string watermark;
    if (!gate.admissible) {
        if (!cfg.allow_inadmissible) {
            std::cerr << "error: parameters inadmissible (" << gate.reason << "); rerun with --allow-inadmissible\n";
            return 2;
        }
        watermark = spde::kOutsideRegimeWatermark;
        std::cerr << "warning: " << watermark << "\n";
    }
    write_manifest(cfg, dir, "couple", {{"watermark", watermark}});

    const auto x0 = cfg.initial_state();
    auto y0 = x0;
    const auto bump = spde::smooth_bump(spec.grid, cfg.initial_center, cfg.bump_radius, 1.0);
    for (std::size_t j = 0; j < y0.values.size(); ++j) y0.values[j] += cfg.perturbation * bump.values[j];
    std::vector<double> probes;
    for (int j = 0; j < spec.grid.size(); ++j)
        if (std::abs(spec.grid.center(j)) <= cfg.probe_half_width) probes.push_back(spec.grid.center(j));

    const std::size_t n_rec = static_cast<std::size_t>(cfg.solver.n_steps / cfg.solver.record_every);
    const bool dyadic = n_rec > 0 && n_rec % (std::size_t{1} << cfg.depth) == 0;

    struct Out {
        std::vector<std::vector<std::string>> distance;
        std::vector<std::vector<std::string>> monitors;
        std::optional<spde::CoupledTrajectory> coupled;
        bool monotone = true;
    };
    const auto outs = spde::parallel_map(spec.n_replicas, spec.workers(), [&](int r) {
        Out o;
        auto c = spde::coupled_run(spec.replica(r), x0, y0, r == 0 ? probes : std::vector<double>{}, cfg.mollifier_m);
        for (std::size_t i = 0; i < c.l1_distance.size(); ++i)
            o.distance.push_back({std::to_string(r), spde::io::format_double(c.x.snapshots[i].t),
                                  spde::io::format_double(c.l1_distance[i])});
        if (dyadic) {
            const auto m = spde::stopping_monitors(c.x, c.y, cfg.k_levels, cfg.solver.noise.alpha, cfg.eta, cfg.window,
                                                   cfg.depth);
            auto opt = [](const std::optional<double>& v) { return v ? spde::io::format_double(*v) : std::string("inf"); };
            for (std::size_t k = 0; k < m.k_levels.size(); ++k)
                o.monitors.push_back({std::to_string(r), spde::io::format_double(m.k_levels[k]), opt(m.gamma[k]),
                                      opt(m.sigma[k])});
            o.monotone = m.is_monotone();
        }
        if (r == 0) o.coupled = std::move(c);
        return o;
    });

    std::vector<std::vector<std::string>> distance, monitors;
    int non_monotone = 0;
    for (const auto& o : outs) {
        distance.insert(distance.end(), o.distance.begin(), o.distance.end());
        monitors.insert(monitors.end(), o.monitors.begin(), o.monitors.end());
        if (!o.monotone) ++non_monotone;
    }
    spde::io::write_csv(dir / "distance.csv", {"replica", "t", "l1_distance"}, distance);
    if (dyadic) spde::io::write_csv(dir / "monitors.csv", {"replica", "k", "gamma", "sigma"}, monitors);

    const auto& c0 = *outs.front().coupled;
    {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < c0.mollified.size(); ++i)
            for (std::size_t p = 0; p < c0.probes.size(); ++p)
                rows.push_back({spde::io::format_double(c0.x.snapshots[i].t), spde::io::format_double(c0.probes[p]),
                                spde::io::format_double(c0.mollified[i][p])});
        spde::io::write_csv(dir / "mollified.csv", {"t", "x", "value"}, rows);
    }
    spde::io::write_field_csv(dir / "field_x.csv", c0.x.snapshots);
    spde::io::write_field_csv(dir / "field_y.csv", c0.y.snapshots);

    std::vector<spde::CheckResult> checks;
    const auto same = spde::coupled_run(spec.replica(0), x0, x0);
    const bool equal = spde::bit_equal(same.x, same.y);
    checks.push_back(check(cfg, "identical_input_bit_equal", equal ? 0.0 : 1.0, 0.0, equal));
    if (dyadic)
        checks.push_back(check(cfg, "monitors_monotone", non_monotone, 0.0, non_monotone == 0,
                               std::to_string(non_monotone) + " replicas with non-monotone gamma_k or sigma_k"));
    else
        std::cerr << "note: " << n_rec << " recorded strides are not divisible by 2^" << cfg.depth
                  << "; stopping monitors skipped\n";
    std::vector<double> end;
    for (const auto& o : outs) end.push_back(std::stod(o.distance.back()[2]));
    checks.push_back(check(cfg, "mean_end_distance", spde::stats::mean(end), 0.0, true, "", false));
    return finish(cfg, dir, "couple", checks, {{"watermark", watermark}});
}

int cmd_verify(const spde::RunConfig& cfg, const Flags& f) {
    const auto dir = output_dir(cfg, f.quick ? "verify-quick" : "verify");
    spde::acceptance::Options o;
    o.quick = f.quick;
    if (cfg.values.at("run.seed").source != "default") o.seed = cfg.seed;
    o.threads = cfg.threads;
    o.config_hash = cfg.hash();
    write_manifest(cfg, dir, "verify", {{"acceptance_seed", o.seed}, {"quick", o.quick}});

    spde::acceptance::CsvTables tables;
    const auto results = spde::acceptance::run_all(o, tables, f.criteria, [](const spde::acceptance::Criterion& c) {
        std::cout << c.summary() << std::endl;
        for (const auto& ch : c.checks)
            if (!ch.passed) std::cout << "    " << ch.name << ": " << ch.detail << (ch.asserted ? "" : " (monitored)") << "\n";
    });
    for (const auto& [name, t] : tables) spde::io::write_csv(dir / name, t.header, t.rows);

    bool ok = true;
    json crit = json::array();
    for (const auto& c : results) {
        json checks = json::array();
        for (const auto& ch : c.checks) checks.push_back(check_json(ch));
        crit.push_back({{"id", c.id}, {"title", c.title}, {"passed", c.passed()}, {"seconds", c.seconds}, {"checks", checks}});
        ok = ok && c.passed();
    }
    spde::io::write_json(dir / "verdict.json", {{"command", "verify"},
                                                {"config_hash", cfg.hash_hex()},
                                                {"seed", o.seed},
                                                {"quick", o.quick},
                                                {"passed", ok},
                                                {"criteria", crit}});
    std::cout << (ok ? "all criteria passed" : "some criteria failed") << "\noutput: " << dir.string() << "\n";
    return ok ? 0 : 1;
}

int cmd_gate(const spde::RunConfig& cfg) {
    spde::ParameterSet ps;
    ps.alpha = cfg.solver.noise.alpha;
    ps.beta = cfg.solver.coefficients.holder_exponent;
    ps.q = cfg.solver.q;
    const auto v = spde::uniqueness_gate(ps);
    if (v.admissible)
        std::cout << "admissible delta=" << spde::io::format_double(*v.delta) << " interval=("
                  << spde::io::format_double(v.delta_lo) << ", " << spde::io::format_double(v.delta_hi) << ")\n";
    else
        std::cout << "inadmissible: " << v.reason << "\n";
    std::cout << "alpha=" << ps.alpha << " beta=" << ps.beta << " p=" << ps.p() << "\n";
    if (v.forms_disagree) std::cout << "warning: closed-form and interval tests disagree\n";

    const auto dir = output_dir(cfg, "gate");
    write_manifest(cfg, dir, "gate");
    json j = {{"command", "gate"},     {"config_hash", cfg.hash_hex()}, {"alpha", ps.alpha},
              {"beta", ps.beta},       {"p", ps.p()},                   {"admissible", v.admissible},
              {"reason", v.reason},    {"delta_lo", v.delta_lo},        {"delta_hi", v.delta_hi},
              {"forms_disagree", v.forms_disagree}};
    j["delta"] = v.delta ? json(*v.delta) : json(nullptr);
    spde::io::write_json(dir / "verdict.json", j);
    return v.admissible ? 0 : 1;
}

int cmd_noise_test(const spde::RunConfig& cfg) {
    const auto dir = output_dir(cfg, "noise-test");
    write_manifest(cfg, dir, "noise-test");
    auto model = cfg.solver.noise;
    model.seed = cfg.seed;
    const double T = std::max(cfg.solver.n_steps, 1) * cfg.solver.dt;
    const auto stream = spde::sample_large_jumps(model, 0.0, T);
    if (cfg.dump_jumps) spde::write_jump_stream((dir / "jumps.bin").string(), stream);

    const double rate = spde::large_jump_rate(model, T, model.domain_length());
    const double n = static_cast<double>(stream.events.size());
    const double z = (n - rate) / std::sqrt(rate);
    std::vector<spde::CheckResult> checks;
    checks.push_back(check(cfg, "count_z", std::abs(z), 3.0, std::abs(z) <= 3.0,
                           "count=" + std::to_string(stream.events.size()) + ", expected=" + spde::io::format_double(rate)));
    if (stream.events.size() >= 2) {
        std::vector<double> sizes;
        for (const auto& e : stream.events) sizes.push_back(e.z);
        const double a = model.alpha, eps = model.epsilon;
        const double d = spde::stats::ks_statistic(sizes, [&](double x) { return x <= eps ? 0.0 : 1.0 - std::pow(x / eps, -a); });
        const double ks = std::sqrt(n) * d;
        checks.push_back(check(cfg, "size_ks", ks, spde::stats::kKsCritical1pct, ks <= spde::stats::kKsCritical1pct));
    }
    spde::io::write_csv(dir / "noise_test.csv", {"quantity", "value"},
                        {{"window", spde::io::format_double(T)},
                         {"region", spde::io::format_double(model.domain_length())},
                         {"epsilon", spde::io::format_double(model.epsilon)},
                         {"expected_count", spde::io::format_double(rate)},
                         {"count", std::to_string(stream.events.size())},
                         {"compensation", spde::io::format_double(spde::small_jump_compensation(model))},
                         {"small_jump_variance", spde::io::format_double(spde::small_jump_variance(model))}});
    return finish(cfg, dir, "noise-test", checks);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stable-driven SPDE simulator and acceptance harness"};
    app.set_version_flag("--version", SPDE_VERSION);
    app.require_subcommand(1);
    Flags f;
    auto* simulate = app.add_subcommand("simulate", "run an ensemble and export snapshots");
    auto* couple = app.add_subcommand("couple", "coupled runs from perturbed initial data");
    auto* verify = app.add_subcommand("verify", "run the acceptance suite");
    auto* gate = app.add_subcommand("gate", "uniqueness gate verdict and delta witness");
    auto* noise = app.add_subcommand("noise-test", "sample the jump stream and test its law");
    for (auto* s : {simulate, couple, verify, gate, noise}) add_common(s, f);
    verify->add_option("--criteria", f.criteria, "subset of A1..A11");

    CLI11_PARSE(app, argc, argv);
    try {
        const auto cfg = load(f);
        if (simulate->parsed()) return cmd_simulate(cfg);
        if (couple->parsed()) return cmd_couple(cfg);
        if (verify->parsed()) return cmd_verify(cfg, f);
        if (gate->parsed()) return cmd_gate(cfg);
        if (noise->parsed()) return cmd_noise_test(cfg);
    } catch (const spde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const spde::io::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
