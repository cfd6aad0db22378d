// Batch front end: reads a JSON scenario, runs one command, writes JSON to
// stdout and CSV/JSON files to --out. Errors go to stderr as
// {"error": {"type", "message", "field"}} with a nonzero exit code.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "rfr/io.hpp"
#include "rfr/rfr.hpp"

using namespace rfr;
using io::json;

namespace {

constexpr int kUsageExit = 2;
constexpr int kCheckFailedExit = 3;

constexpr double kBondTolerance = 1e-6;
constexpr double kMaxStandardErrors = 3.0;

struct Options {
    std::string config;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::size_t paths = 0;
    bool has_paths = false;
    std::string out;
    bool cross_check = false;
    bool example = false;
    std::string method = "analytic";
};

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

void write_file(const std::string& dir, const std::string& name, const std::string& text) {
    std::filesystem::create_directories(dir);
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string(), "--out");
    out << text;
}

io::ScenarioConfig load(const Options& o) {
    if (o.config.empty()) throw ConfigError("--config is required", "--config");
    auto c = io::load_config(o.config);
    if (o.has_seed) c.simulation.seed = o.seed;
    if (o.has_paths) {
        if (o.paths == 0) throw ConfigError("--paths must be at least 1", "--paths");
        c.simulation.n_paths = o.paths;
    }
    return c;
}

std::uint64_t require_seed(const io::ScenarioConfig& c) {
    if (!c.simulation.seed) throw ConfigError("simulation requires a seed (simulation.seed or --seed)", "simulation.seed");
    return *c.simulation.seed;
}

const HullWhiteParams& single_factor(const io::ScenarioConfig& c, const char* what) {
    if (c.factors.size() != 1) throw UnsupportedError(std::string(what) + " is implemented for a single factor");
    return c.factors.front();
}

std::vector<double> initial_states(const std::vector<HullWhiteParams>& factors) {
    std::vector<double> x;
    for (const auto& f : factors) x.push_back(f.rho0);
    return x;
}

void check_within_horizon(const io::ScenarioConfig& c, double t, const std::string& field) {
    if (t > c.schedule.horizon()) throw ConfigError(field + " lies beyond schedule.horizon", field);
}

// Configured grid, or a uniform grid; either way it must carry `dates`.
std::vector<double> simulation_grid(const io::ScenarioConfig& c, const std::vector<double>& dates) {
    for (double d : dates) check_within_horizon(c, d, "simulation.grid");
    if (!c.simulation.grid.empty()) {
        for (double d : dates) {
            if (std::find(c.simulation.grid.begin(), c.simulation.grid.end(), d) == c.simulation.grid.end()) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "simulation.grid must contain the date %.17g", d);
                throw ConfigError(buf, "simulation.grid");
            }
        }
        return c.simulation.grid;
    }
    auto grid = uniform_grid(c.schedule.horizon(), c.simulation.steps, c.schedule);
    grid.insert(grid.end(), dates.begin(), dates.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

PathSet run_simulation(const io::ScenarioConfig& c, const std::vector<double>& dates, bool increments = false) {
    const std::uint64_t seed = require_seed(c);
    SimulationOptions opt;
    opt.scheme = c.simulation.scheme;
    opt.workers = c.simulation.workers;
    opt.keep_increments = increments;
    return simulate(c.factors, c.schedule, simulation_grid(c, dates), c.simulation.n_paths, seed, opt);
}

std::string paths_csv(const PathSet& paths) {
    std::ostringstream os;
    write_paths_csv(os, paths);
    return os.str();
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const Options& o) {
    json summary;
    PathSet paths;
    std::vector<HullWhiteParams> factors;
    Schedule schedule;
    if (o.example) {
        if (!o.config.empty()) throw ConfigError("--example-4-4 does not take --config", "--config");
        if (!o.has_seed) throw ConfigError("--example-4-4 requires --seed", "--seed");
        if (o.has_paths && o.paths == 0) throw ConfigError("--paths must be at least 1", "--paths");
        const std::size_t n = o.has_paths ? o.paths : 1;
        const std::size_t steps = 4000;
        const auto s = example_4_4();
        factors = s.factors;
        schedule = s.schedule;
        paths = example_4_4_paths(o.seed, n, steps);
        json half = json::array();
        for (auto [k, date] : {std::pair<std::size_t, double>{1, 50.0}, {1, 100.0}, {0, 150.0}}) {
            half.push_back({{"date", date},
                            {"factor", k == 0 ? "slow" : "fast"},
                            {"half_life", jump_half_life(s.factors[k], date)},
                            {"expected", std::numbers::ln2 / -s.factors[k].beta}});
        }
        summary["scenario"] = "example-4-4";
        summary["steps"] = steps;
        summary["half_lives"] = half;
        summary["seed"] = o.seed;
    } else {
        const auto c = load(o);
        factors = c.factors;
        schedule = c.schedule;
        paths = run_simulation(c, {});
        summary["scenario"] = o.config;
        summary["scheme"] = to_string(c.simulation.scheme);
        summary["seed"] = *c.simulation.seed;
    }
    const double H = schedule.horizon();
    const auto est = mc_price(paths, [](const PathView&) { return 1.0; }, H, Discount::numeraire);
    summary["quantity"] = "discount factor to the horizon";
    summary["horizon"] = H;
    summary["value"] = est.value;
    summary["std_error"] = est.std_error;
    summary["analytic"] = bond_price(0.0, H, initial_states(factors), factors, schedule);
    summary["n_paths"] = paths.n_paths();
    summary["n_nodes"] = paths.n_nodes();
    const std::string dir = o.out.empty() ? "." : o.out;
    write_file(dir, "paths.csv", paths_csv(paths));
    write_file(dir, "summary.json", summary.dump(2) + "\n");
    print(summary);
    return 0;
}

// ---------------------------------------------------------------------------
// price

std::string chosen_instrument(const io::ScenarioConfig& c) {
    if (c.instrument) {
        const std::string& name = *c.instrument;
        if ((name == "bond" && !c.bond_T) || (name == "caplet" && !c.caplet) || (name == "futures" && !c.futures)) {
            throw ConfigError("instrument \"" + name + "\" has no section " + name, name);
        }
        return name;
    }
    std::vector<std::string> present;
    if (c.bond_T) present.push_back("bond");
    if (c.caplet) present.push_back("caplet");
    if (c.futures) present.push_back("futures");
    if (present.empty()) throw ConfigError("price needs a bond, caplet or futures section", "instrument");
    if (present.size() > 1) throw ConfigError("several instruments configured; set \"instrument\"", "instrument");
    return present.front();
}

struct Price {
    double value = 0.0;
    std::optional<double> std_error;
};

Price exact(double v) { return {v, std::nullopt}; }

Price price_bond(const io::ScenarioConfig& c, const std::string& method) {
    const double T = *c.bond_T;
    check_within_horizon(c, T, "bond.T");
    const auto x = initial_states(c.factors);
    if (method == "analytic") return exact(bond_price(0.0, T, x, c.factors, c.schedule));
    if (method == "riccati") {
        if (T == 0.0) return exact(1.0);
        const auto spec = build_gaussian_hw_spec(c.factors, c.schedule);
        const std::vector<Complex> u(c.factors.size(), 0.0);
        return exact(transform(spec, 0.0, T, u, -1.0, x, 0.0, c.riccati_step).real());
    }
    const auto paths = run_simulation(c, {T});
    const auto est = mc_price(paths, [](const PathView&) { return 1.0; }, T, Discount::numeraire);
    return {est.value, est.std_error};
}

Price price_caplet(const io::ScenarioConfig& c, const std::string& method) {
    const CapletSpec spec = *c.caplet;
    check_within_horizon(c, spec.T, "caplet.T");
    if (method == "analytic") {
        const auto& p = single_factor(c, "analytic caplet pricing");
        return exact(caplet_price(p.rho0, 0.0, spec, p, c.schedule));
    }
    if (method == "riccati") throw UnsupportedError("caplet pricing via the Riccati engine is not available");
    const auto paths = run_simulation(c, {spec.S, spec.T});
    const double len = spec.T - spec.S;
    const auto est = mc_price(
        paths,
        [&](const PathView& v) {
            std::vector<double> x(c.factors.size());
            for (std::size_t k = 0; k < x.size(); ++k) x[k] = v.factor_rho(spec.S, k);
            const double f = (1.0 / bond_price(spec.S, spec.T, x, c.factors, c.schedule) - 1.0) / len;
            return len * std::max(f - spec.K, 0.0);
        },
        spec.T, Discount::numeraire);
    return {est.value, est.std_error};
}

Price price_futures(const io::ScenarioConfig& c, const std::string& method) {
    const FuturesSpec f = *c.futures;
    check_within_horizon(c, f.T, "futures.T");
    const auto& p = single_factor(c, "futures pricing");
    if (method == "riccati") throw UnsupportedError("futures pricing via the Riccati engine is not available");
    if (method == "analytic") return exact(futures_rate(0.0, f.S, f.T, p.rho0, p, c.schedule, f.h));
    if (!c.schedule.atoms_in(0.0, f.T).empty()) {
        throw UnsupportedError("futures rate is only defined without roll-over atoms in (0, T]");
    }
    const auto paths = run_simulation(c, {f.S, f.T}, true);
    const MinimalMeasureWeight w{f.h, f.S, f.T, f.T};
    const auto est = weighted_expectation(
        paths, [&](const PathView& v) { return (v.R(f.T) - v.R(f.S)) / (f.T - f.S); }, w, c.factors);
    return {est.value.value, est.value.std_error};
}

Price price_with(const io::ScenarioConfig& c, const std::string& instrument, const std::string& method) {
    if (instrument == "bond") return price_bond(c, method);
    if (instrument == "caplet") return price_caplet(c, method);
    return price_futures(c, method);
}

json record(const std::string& instrument, const std::string& method, const Price& p) {
    json j{{"instrument", instrument}, {"method", method}, {"value", p.value}};
    if (p.std_error) j["std_error"] = *p.std_error;
    return j;
}

int cmd_price(const Options& o) {
    const auto c = load(o);
    const std::string instrument = chosen_instrument(c);
    if (!o.cross_check) {
        const json out = record(instrument, o.method, price_with(c, instrument, o.method));
        if (!o.out.empty()) write_file(o.out, "price.json", out.dump(2) + "\n");
        print(out);
        return 0;
    }

    struct Row {
        std::string method;
        Price price;
    };
    std::vector<Row> rows;
    json results = json::array();
    for (const std::string m : {"analytic", "riccati", "mc"}) {
        try {
            rows.push_back({m, price_with(c, instrument, m)});
            results.push_back(record(instrument, m, rows.back().price));
        } catch (const UnsupportedError& e) {
            results.push_back({{"method", m}, {"unsupported", e.what()}});
        }
    }
    json pairs = json::array();
    bool pass = rows.size() >= 2;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            const Price& a = rows[i].price;
            const Price& b = rows[j].price;
            const double diff = std::abs(a.value - b.value);
            const double rel = diff / std::max(std::abs(a.value), std::abs(b.value));
            json pair{{"methods", {rows[i].method, rows[j].method}}, {"relative_deviation", rel}};
            bool ok = false;
            const double se = std::hypot(a.std_error.value_or(0.0), b.std_error.value_or(0.0));
            if (se > 0.0) {
                pair["standard_errors"] = diff / se;
                pair["tolerance"] = kMaxStandardErrors;
                ok = diff <= kMaxStandardErrors * se;
            } else {
                pair["tolerance"] = kBondTolerance;
                ok = rel <= kBondTolerance || diff == 0.0;
            }
            pair["pass"] = ok;
            pass = pass && ok;
            max_rel = std::max(max_rel, rel);
            pairs.push_back(pair);
        }
    }
    const json out{{"instrument", instrument},
                   {"results", results},
                   {"pairs", pairs},
                   {"max_relative_deviation", max_rel},
                   {"pass", pass}};
    if (!o.out.empty()) write_file(o.out, "cross_check.json", out.dump(2) + "\n");
    print(out);
    return pass ? 0 : kCheckFailedExit;
}

// ---------------------------------------------------------------------------
// hedge

std::vector<double> rebalance_grid(double S, std::size_t steps, const Schedule& schedule) {
    std::vector<double> t;
    for (std::size_t i = 0; i <= steps; ++i) {
        t.push_back(i == steps ? S : S * static_cast<double>(i) / static_cast<double>(steps));
    }
    for (double d : schedule.jumps_in(0.0, S)) t.push_back(d);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

std::string hedge_csv(const HedgeReport& r) {
    std::ostringstream os;
    // a jump date gives two rows with the same time, pre-jump first
    os << "time,zeta,V_mean,cost_var\n";
    char buf[128];
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.times[k], r.zeta_mean[k], r.V_mean[k],
                      r.cost_var[k]);
        os << buf;
    }
    return os.str();
}

int cmd_hedge(const Options& o) {
    const auto c = load(o);
    if (!c.caplet) throw ConfigError("hedge needs a caplet section", "caplet");
    if (!c.futures) throw ConfigError("hedge needs a futures section", "futures");
    const auto& p = single_factor(c, "hedging");
    const CapletSpec caplet = *c.caplet;
    const FuturesSpec futures = *c.futures;
    check_within_horizon(c, futures.T, "futures.T");

    std::vector<std::size_t> studies = c.hedge.convergence_steps;
    std::vector<double> dates{caplet.S, caplet.T, futures.T};
    for (std::size_t n : studies) {
        const auto g = rebalance_grid(caplet.S, n, c.schedule);
        dates.insert(dates.end(), g.begin(), g.end());
    }
    const auto main_grid = rebalance_grid(caplet.S, c.hedge.rebalance_steps, c.schedule);
    dates.insert(dates.end(), main_grid.begin(), main_grid.end());
    std::sort(dates.begin(), dates.end());
    dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
    const auto paths = run_simulation(c, dates);

    auto hedge = [&](const std::vector<double>& rebalance) {
        HedgeOptions opt;
        opt.rebalance = rebalance;
        opt.hermite_nodes = c.hedge.hermite_nodes;
        opt.workers = c.simulation.workers;
        return run_hedge(paths, caplet, futures, p, c.schedule, opt);
    };
    const auto report = hedge(main_grid);
    json diag = io::to_json(report);
    diag["seed"] = *c.simulation.seed;
    diag["rebalance_steps"] = c.hedge.rebalance_steps;
    double max_z = 0.0;
    for (const auto& j : report.jumps) {
        for (const auto& e : {j.mean_dL, j.cov_dL_dM}) {
            max_z = std::max(max_z, e.std_error > 0.0 ? std::abs(e.value) / e.std_error : 0.0);
        }
    }
    diag["max_orthogonality_z"] = max_z;
    if (!studies.empty()) {
        std::sort(studies.begin(), studies.end());
        json conv = json::array();
        double last = INFINITY;
        bool decreasing = true;
        for (std::size_t n : studies) {
            const double v = hedge(rebalance_grid(caplet.S, n, c.schedule)).terminal_cost_variance;
            conv.push_back({{"rebalance_steps", n}, {"terminal_cost_variance", v}});
            decreasing = decreasing && v < last;
            last = v;
        }
        diag["convergence"] = conv;
        diag["cost_variance_decreasing"] = decreasing;
    }
    const std::string dir = o.out.empty() ? "." : o.out;
    write_file(dir, "hedge.csv", hedge_csv(report));
    write_file(dir, "hedge_diagnostics.json", diag.dump(2) + "\n");
    print(diag);
    return 0;
}

// ---------------------------------------------------------------------------
// calibrate

int cmd_calibrate(const Options& o) {
    const auto c = load(o);
    if (!c.curve) throw ConfigError("calibrate needs a curve section", "curve");
    HullWhiteParams p = single_factor(c, "calibration");
    try {
        p.alpha = fit_drift_to_curve(*c.curve, p, c.schedule);
    } catch (const DomainError& e) {
        throw ConfigError(e.what(), "curve");
    }
    json pillars = json::array();
    double worst = 0.0;
    for (const auto& [T, df] : c.curve->pillars) {
        const double model = bond_price(0.0, T, p.rho0, p, c.schedule);
        worst = std::max(worst, std::abs(model - df));
        pillars.push_back({{"T", T}, {"discount_factor", df}, {"model", model}, {"error", model - df}});
    }
    const json out{{"params", io::to_json(p)}, {"pillars", pillars}, {"max_pillar_error", worst}};
    if (!o.out.empty()) write_file(o.out, "calibrated.json", out.dump(2) + "\n");
    print(out);
    return 0;
}

// ---------------------------------------------------------------------------
// riccati-verify

int cmd_riccati_verify(const Options& o) {
    const auto c = load(o);
    std::vector<double> maturities = c.maturities;
    const double H = c.schedule.horizon();
    if (maturities.empty()) {
        for (int k = 1; k <= 10; ++k) maturities.push_back(H * k / 10.0);
    }
    const auto spec = build_gaussian_hw_spec(c.factors, c.schedule);
    const auto x = initial_states(c.factors);
    const std::vector<Complex> zero(c.factors.size(), 0.0);
    json bonds = json::array();
    double worst = 0.0;
    for (double T : maturities) {
        check_within_horizon(c, T, "maturities");
        const double analytic = bond_price(0.0, T, x, c.factors, c.schedule);
        const double riccati = T == 0.0 ? 1.0 : transform(spec, 0.0, T, zero, -1.0, x, 0.0, c.riccati_step).real();
        const double rel = std::abs(riccati / analytic - 1.0);
        worst = std::max(worst, rel);
        bonds.push_back({{"T", T}, {"analytic", analytic}, {"riccati", riccati}, {"relative_deviation", rel}});
    }
    // joint transform of (rho_H, R_H) against the Gaussian law
    const auto law = joint_gaussian_law(0.0, H, x, 0.0, c.factors, c.schedule);
    json transforms = json::array();
    double worst_cf = 0.0;
    for (auto [a, b] : {std::pair{40.0, 0.0}, {0.0, 20.0}, {-30.0, 15.0}}) {
        const std::vector<Complex> u(c.factors.size(), Complex(0.0, a));
        const Complex got = transform(spec, 0.0, H, u, Complex(0.0, b), x, 0.0, c.riccati_step);
        const double quad = a * a * law.cov[0][0] + 2.0 * a * b * law.cov[0][1] + b * b * law.cov[1][1];
        const Complex want = std::exp(Complex(0.0, a * law.mean[0] + b * law.mean[1]) - 0.5 * quad);
        const double dev = std::abs(got - want);
        worst_cf = std::max(worst_cf, dev);
        transforms.push_back({{"a", a}, {"b", b}, {"abs_deviation", dev}});
    }
    const bool pass = worst <= kBondTolerance && worst_cf <= kBondTolerance;
    const json out{{"step", c.riccati_step},
                   {"bonds", bonds},
                   {"max_relative_deviation", worst},
                   {"char_fn", transforms},
                   {"max_char_fn_deviation", worst_cf},
                   {"tolerance", kBondTolerance},
                   {"pass", pass}};
    if (!o.out.empty()) write_file(o.out, "riccati_verify.json", out.dump(2) + "\n");
    print(out);
    return pass ? 0 : kCheckFailedExit;
}

int fail(const std::string& type, const std::string& message, const std::string& field, int code = 1,
         json extra = json::object()) {
    json e{{"type", type}, {"message", message}, {"field", field}};
    e.update(extra);
    std::cerr << json{{"error", e}}.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Overnight-rate term-structure tools: simulation, pricing, hedging and calibration.\n"
        "Times are reals in year fractions unless a scenario says otherwise; any consistent\n"
        "unit works (the built-in spike scenario uses abstract units up to 200)."};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--config", o.config, "scenario JSON file");
        cmd->add_option("--seed", o.seed, "simulation seed, overrides simulation.seed")
            ->each([&](const std::string&) { o.has_seed = true; });
        cmd->add_option("--paths", o.paths, "number of paths, overrides simulation.n_paths")
            ->each([&](const std::string&) { o.has_paths = true; });
        cmd->add_option("--out", o.out, "output directory");
    };
    auto* sim = app.add_subcommand("simulate", "simulate paths, write paths.csv and summary.json");
    common(sim);
    sim->add_flag("--example-4-4", o.example, "built-in two-factor spike scenario");
    auto* price = app.add_subcommand("price", "price the configured bond, caplet or futures");
    common(price);
    price->add_option("--method", o.method, "analytic, riccati or mc")
        ->check(CLI::IsMember({"analytic", "riccati", "mc"}));
    price->add_flag("--cross-check", o.cross_check, "run every method and compare");
    auto* hedge = app.add_subcommand("hedge", "futures hedge of the caplet, write hedge.csv and diagnostics");
    common(hedge);
    auto* calibrate = app.add_subcommand("calibrate", "fit the drift to the configured discount curve");
    common(calibrate);
    auto* verify = app.add_subcommand("riccati-verify", "compare the Riccati engine with closed forms");
    common(verify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail("UsageError", e.what(), "", kUsageExit);
    }

    try {
        if (*sim) return cmd_simulate(o);
        if (*price) return cmd_price(o);
        if (*hedge) return cmd_hedge(o);
        if (*calibrate) return cmd_calibrate(o);
        return cmd_riccati_verify(o);
    } catch (const ConfigError& e) {
        return fail("ConfigError", e.what(), e.field());
    } catch (const CalibrationError& e) {
        return fail("CalibrationError", e.what(), "curve.pillars[" + std::to_string(e.pillar()) + "]");
    } catch (const NumericalError& e) {
        return fail("NumericalError", e.what(), "", 1, {{"achieved", e.achieved()}});
    } catch (const UnsupportedError& e) {
        return fail("UnsupportedError", e.what(), "");
    } catch (const DomainError& e) {
        return fail("DomainError", e.what(), "");
    } catch (const DataError& e) {
        return fail("DataError", e.what(), "");
    } catch (const std::exception& e) {
        return fail("Error", e.what(), "");
    }
}
