#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfr/errors.hpp"
#include "rfr/hedging.hpp"
#include "rfr/hull_white.hpp"
#include "rfr/monte_carlo.hpp"
#include "rfr/pricing.hpp"
#include "rfr/schedule.hpp"
#include "rfr/time_function.hpp"

namespace rfr::io {

using json = nlohmann::json;

inline constexpr int kConfigVersion = 1;

namespace detail {

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + " must be an object", path);
}

inline void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    require_object(j, path);
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw ConfigError("unknown field " + path + "." + key, path + "." + key);
    }
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path + " must be a number", path);
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path + " must be finite", path);
    return v;
}

inline double number_field(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError("missing field " + path + "." + key, path + "." + key);
    return number(j.at(key), path + "." + key);
}

inline std::uint64_t unsigned_field(const json& j, const char* key, const std::string& path) {
    const std::string p = path + "." + key;
    if (!j.contains(key)) throw ConfigError("missing field " + p, p);
    const json& v = j.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
        throw ConfigError(p + " must be a nonnegative integer", p);
    }
    return v.get<std::uint64_t>();
}

inline std::vector<double> number_array(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path + " must be an array of numbers", path);
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

// Runs fn, turning library validation errors into configuration errors
// attributed to `path`.
template <class Fn>
auto at_path(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const DomainError& e) {
        throw ConfigError(path + ": " + e.what(), path);
    }
}

}  // namespace detail

/// A number is a constant; an object {"breakpoints": [...], "values": [...]}
/// is piecewise constant.
inline TimeFunction parse_time_function(const json& j, const std::string& path) {
    if (j.is_number()) return TimeFunction::constant(detail::number(j, path));
    detail::reject_unknown(j, path, {"breakpoints", "values"});
    if (!j.contains("breakpoints") || !j.contains("values")) {
        throw ConfigError(path + " needs breakpoints and values", path);
    }
    auto b = detail::number_array(j.at("breakpoints"), path + ".breakpoints");
    auto v = detail::number_array(j.at("values"), path + ".values");
    return detail::at_path(path, [&] { return TimeFunction::piecewise(std::move(b), std::move(v)); });
}

inline json to_json(const TimeFunction& f) {
    if (!f.is_piecewise()) throw UnsupportedError("only piecewise-constant functions serialize to JSON");
    return {{"breakpoints", f.breakpoints()}, {"values", f.values()}};
}

inline Schedule parse_schedule(const json& j, const std::string& path = "schedule") {
    detail::reject_unknown(j, path, {"roll_over", "expected_jumps", "horizon"});
    std::vector<double> roll = j.contains("roll_over") ? detail::number_array(j.at("roll_over"), path + ".roll_over")
                                                       : std::vector<double>{};
    std::vector<double> jumps = j.contains("expected_jumps")
                                    ? detail::number_array(j.at("expected_jumps"), path + ".expected_jumps")
                                    : std::vector<double>{};
    const double horizon = detail::number_field(j, "horizon", path);
    return detail::at_path(path, [&] { return Schedule(std::move(roll), std::move(jumps), horizon); });
}

inline json to_json(const Schedule& s) {
    return {{"roll_over", s.roll_over()}, {"expected_jumps", s.expected_jumps()}, {"horizon", s.horizon()}};
}

inline HullWhiteParams parse_params(const json& j, const std::string& path) {
    detail::reject_unknown(j, path, {"rho0", "beta", "sigma", "alpha", "jumps"});
    HullWhiteParams p;
    p.rho0 = detail::number_field(j, "rho0", path);
    p.beta = detail::number_field(j, "beta", path);
    p.sigma = detail::number_field(j, "sigma", path);
    if (j.contains("alpha")) p.alpha = parse_time_function(j.at("alpha"), path + ".alpha");
    if (j.contains("jumps")) {
        const json& arr = j.at("jumps");
        if (!arr.is_array()) throw ConfigError(path + ".jumps must be an array", path + ".jumps");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string jp = path + ".jumps[" + std::to_string(i) + "]";
            detail::reject_unknown(arr[i], jp, {"date", "mean", "std"});
            p.jumps.push_back({detail::number_field(arr[i], "date", jp), detail::number_field(arr[i], "mean", jp),
                               detail::number_field(arr[i], "std", jp)});
        }
    }
    return p;
}

inline json to_json(const HullWhiteParams& p) {
    json jumps = json::array();
    for (const auto& j : p.jumps) jumps.push_back({{"date", j.date}, {"mean", j.mean}, {"std", j.std}});
    return {{"rho0", p.rho0}, {"beta", p.beta}, {"sigma", p.sigma}, {"alpha", to_json(p.alpha)}, {"jumps", jumps}};
}

/// `params` may be one factor (object) or several (array).
inline std::vector<HullWhiteParams> parse_factors(const json& j, const std::string& path = "params") {
    std::vector<HullWhiteParams> out;
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_params(j[i], path + "[" + std::to_string(i) + "]"));
    } else {
        out.push_back(parse_params(j, path));
    }
    if (out.empty()) throw ConfigError(path + " needs at least one factor", path);
    return out;
}

inline DiscountCurve parse_curve(const json& j, const std::string& path = "curve") {
    detail::reject_unknown(j, path, {"pillars"});
    if (!j.contains("pillars") || !j.at("pillars").is_array()) {
        throw ConfigError(path + ".pillars must be an array of [maturity, discount factor]", path + ".pillars");
    }
    DiscountCurve curve;
    const json& arr = j.at("pillars");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string pp = path + ".pillars[" + std::to_string(i) + "]";
        if (!arr[i].is_array() || arr[i].size() != 2) throw ConfigError(pp + " must be [maturity, discount factor]", pp);
        curve.pillars.emplace_back(detail::number(arr[i][0], pp + "[0]"), detail::number(arr[i][1], pp + "[1]"));
    }
    detail::at_path(path, [&] {
        curve.validate();
        return 0;
    });
    return curve;
}

inline CapletSpec parse_caplet(const json& j, const std::string& path = "caplet") {
    detail::reject_unknown(j, path, {"S", "T", "K"});
    CapletSpec c{detail::number_field(j, "S", path), detail::number_field(j, "T", path),
                 detail::number_field(j, "K", path)};
    detail::at_path(path, [&] {
        c.validate();
        return 0;
    });
    return c;
}

inline FuturesSpec parse_futures(const json& j, const std::string& path = "futures") {
    detail::reject_unknown(j, path, {"S", "T", "h"});
    FuturesSpec f;
    f.S = detail::number_field(j, "S", path);
    f.T = detail::number_field(j, "T", path);
    if (j.contains("h")) f.h = parse_time_function(j.at("h"), path + ".h");
    if (!(f.S >= 0.0 && f.S < f.T)) throw ConfigError(path + " requires 0 <= S < T", path);
    return f;
}

struct SimulationSettings {
    std::size_t n_paths = 10000;
    std::optional<std::uint64_t> seed;
    std::size_t steps = 100;
    std::vector<double> grid;
    Scheme scheme = Scheme::exact;
    unsigned workers = 0;
};

inline SimulationSettings parse_simulation(const json& j, const std::string& path = "simulation") {
    detail::reject_unknown(j, path, {"n_paths", "seed", "steps", "grid", "scheme", "workers"});
    SimulationSettings s;
    if (j.contains("n_paths")) s.n_paths = detail::unsigned_field(j, "n_paths", path);
    if (j.contains("seed")) s.seed = detail::unsigned_field(j, "seed", path);
    if (j.contains("steps")) s.steps = detail::unsigned_field(j, "steps", path);
    if (j.contains("grid")) s.grid = detail::number_array(j.at("grid"), path + ".grid");
    if (j.contains("workers")) s.workers = static_cast<unsigned>(detail::unsigned_field(j, "workers", path));
    if (j.contains("scheme")) {
        const json& v = j.at("scheme");
        if (v == "exact") {
            s.scheme = Scheme::exact;
        } else if (v == "euler") {
            s.scheme = Scheme::euler;
        } else {
            throw ConfigError(path + ".scheme must be \"exact\" or \"euler\"", path + ".scheme");
        }
    }
    if (s.n_paths == 0) throw ConfigError(path + ".n_paths must be at least 1", path + ".n_paths");
    if (s.steps == 0) throw ConfigError(path + ".steps must be at least 1", path + ".steps");
    return s;
}

struct HedgeSettings {
    std::size_t rebalance_steps = 50;
    int hermite_nodes = 64;
    /// Extra step counts for a cost-variance convergence study.
    std::vector<std::size_t> convergence_steps;
};

inline HedgeSettings parse_hedge(const json& j, const std::string& path = "hedge") {
    detail::reject_unknown(j, path, {"rebalance_steps", "hermite_nodes", "convergence_steps"});
    HedgeSettings h;
    if (j.contains("rebalance_steps")) h.rebalance_steps = detail::unsigned_field(j, "rebalance_steps", path);
    if (j.contains("hermite_nodes")) h.hermite_nodes = static_cast<int>(detail::unsigned_field(j, "hermite_nodes", path));
    if (j.contains("convergence_steps")) {
        for (double v : detail::number_array(j.at("convergence_steps"), path + ".convergence_steps")) {
            if (!(v >= 1.0) || v != std::floor(v)) {
                throw ConfigError(path + ".convergence_steps must hold positive integers", path + ".convergence_steps");
            }
            h.convergence_steps.push_back(static_cast<std::size_t>(v));
        }
    }
    if (h.rebalance_steps == 0) throw ConfigError(path + ".rebalance_steps must be at least 1", path + ".rebalance_steps");
    if (h.hermite_nodes < 1) throw ConfigError(path + ".hermite_nodes must be at least 1", path + ".hermite_nodes");
    return h;
}

/// Whole scenario document. Only `version`, `schedule` and `params` are
/// mandatory; commands check for the sections they need.
struct ScenarioConfig {
    int version = kConfigVersion;
    Schedule schedule;
    std::vector<HullWhiteParams> factors;
    std::optional<DiscountCurve> curve;
    std::optional<double> bond_T;
    std::optional<CapletSpec> caplet;
    std::optional<FuturesSpec> futures;
    std::optional<std::string> instrument;
    SimulationSettings simulation;
    bool has_simulation = false;
    HedgeSettings hedge;
    double riccati_step = 1e-3;
    std::vector<double> maturities;
};

inline ScenarioConfig parse_config(const json& j) {
    detail::reject_unknown(j, "config",
                           {"version", "schedule", "params", "curve", "bond", "caplet", "futures", "instrument",
                            "simulation", "hedge", "riccati", "maturities"});
    ScenarioConfig c;
    if (!j.contains("version")) throw ConfigError("missing field config.version", "version");
    if (!j.at("version").is_number_integer() || j.at("version").get<int>() != kConfigVersion) {
        throw ConfigError("unsupported config version (expected " + std::to_string(kConfigVersion) + ")", "version");
    }
    if (!j.contains("schedule")) throw ConfigError("missing field config.schedule", "schedule");
    if (!j.contains("params")) throw ConfigError("missing field config.params", "params");
    c.schedule = parse_schedule(j.at("schedule"));
    c.factors = parse_factors(j.at("params"));
    detail::at_path("params", [&] {
        validate(std::span<const HullWhiteParams>(c.factors), c.schedule);
        return 0;
    });
    if (j.contains("curve")) c.curve = parse_curve(j.at("curve"));
    if (j.contains("bond")) {
        detail::reject_unknown(j.at("bond"), "bond", {"T"});
        c.bond_T = detail::number_field(j.at("bond"), "T", "bond");
        if (*c.bond_T < 0.0) throw ConfigError("bond.T must be nonnegative", "bond.T");
    }
    if (j.contains("caplet")) c.caplet = parse_caplet(j.at("caplet"));
    if (j.contains("futures")) c.futures = parse_futures(j.at("futures"));
    if (j.contains("instrument")) {
        const json& v = j.at("instrument");
        if (v != "bond" && v != "caplet" && v != "futures") {
            throw ConfigError("instrument must be \"bond\", \"caplet\" or \"futures\"", "instrument");
        }
        c.instrument = v.get<std::string>();
    }
    if (j.contains("simulation")) {
        c.simulation = parse_simulation(j.at("simulation"));
        c.has_simulation = true;
    }
    if (j.contains("hedge")) c.hedge = parse_hedge(j.at("hedge"));
    if (j.contains("riccati")) {
        detail::reject_unknown(j.at("riccati"), "riccati", {"step"});
        if (j.at("riccati").contains("step")) c.riccati_step = detail::number_field(j.at("riccati"), "step", "riccati");
        if (!(c.riccati_step > 0.0)) throw ConfigError("riccati.step must be positive", "riccati.step");
    }
    if (j.contains("maturities")) c.maturities = detail::number_array(j.at("maturities"), "maturities");
    for (double T : c.maturities) {
        if (T < 0.0) throw ConfigError("maturities must be nonnegative", "maturities");
    }
    return c;
}

inline ScenarioConfig load_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file, "--config");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what(), "--config");
    }
    return parse_config(j);
}

inline json to_json(const Estimate& e) { return {{"value", e.value}, {"std_error", e.std_error}, {"n", e.n}}; }

inline json to_json(const HedgeReport& r) {
    json jumps = json::array();
    for (const auto& d : r.jumps) {
        jumps.push_back({{"s_i", d.date},
                         {"E_dL", d.mean_dL.value},
                         {"E_dL_se", d.mean_dL.std_error},
                         {"cov_dL_dM", d.cov_dL_dM.value},
                         {"se", d.cov_dL_dM.std_error},
                         {"n", d.n},
                         {"mean_zeta", d.mean_zeta},
                         {"slope", d.slope},
                         {"r_squared", d.r_squared}});
    }
    return {{"n_paths", r.n_paths},
            {"initial_value", r.initial_value},
            {"continuous_cost_variance", r.continuous_cost_variance},
            {"jump_cost_variance", r.jump_cost_variance},
            {"terminal_cost_variance", r.terminal_cost_variance},
            {"max_terminal_error", r.max_terminal_error},
            {"jumps", jumps}};
}

}  // namespace rfr::io
