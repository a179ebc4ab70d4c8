#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "it2mpc/fuzzy.hpp"
#include "it2mpc/sim.hpp"
#include "it2mpc/synth.hpp"

namespace it2mpc::config {

using nlohmann::json;

/// Thrown on malformed or inconsistent configuration input; the message
/// names the offending file/field.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Case { uncontrolled, nodelay, statedelay, bothdelay };

inline Case parse_case(const std::string& s) {
    if (s == "uncontrolled")
        return Case::uncontrolled;
    if (s == "nodelay")
        return Case::nodelay;
    if (s == "statedelay")
        return Case::statedelay;
    if (s == "bothdelay")
        return Case::bothdelay;
    throw ConfigError("case must be one of uncontrolled|nodelay|statedelay|bothdelay, got '" + s +
                      "'");
}

inline std::string case_name(Case c) {
    switch (c) {
        case Case::uncontrolled: return "uncontrolled";
        case Case::nodelay: return "nodelay";
        case Case::statedelay: return "statedelay";
        default: return "bothdelay";
    }
}

struct BenchConfig {
    fuzzy::It2Plant plant;
    fuzzy::It2ControllerShape controller;
    synth::SynthConfig synth;
    int steps = 100;
    Vec x0;
    double ts = 1.0;
    Case kase = Case::nodelay;
    std::uint64_t seed = 1;
    int resynthesize_every = 1;
    bool share_delay_draws = false;
    std::string output_dir = "out";
    std::string plant_path, controller_path;
};

namespace detail {

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    try {
        return json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("parse error in '" + path + "': " + e.what());
    }
}

inline Matrix parse_matrix(const json& j, int rows, int cols, const std::string& field) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows)
        throw ConfigError(field + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " numeric array");
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw ConfigError(field + ": row " + std::to_string(i) + " must have " +
                              std::to_string(cols) + " entries");
        for (int c = 0; c < cols; ++c)
            m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    if (!m.is_finite())
        throw ConfigError(field + ": non-finite entry");
    return m;
}

inline Vec parse_vec(const json& j, int len, const std::string& field) {
    if (!j.is_array() || static_cast<int>(j.size()) != len)
        throw ConfigError(field + ": expected " + std::to_string(len) + " numbers");
    Vec v(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i)
        v[static_cast<std::size_t>(i)] = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

inline const json& require(const json& j, const std::string& key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end())
        throw ConfigError(ctx + ": missing field '" + key + "'");
    return *it;
}

struct MembershipSpec {
    std::vector<fuzzy::It2MembershipFn> fns;
    int premise_index = 0;
};

inline MembershipSpec parse_memberships(const json& j, const json& weighting, int rule_count,
                                        int state_dim, const std::string& ctx) {
    const std::string family = require(j, "family", ctx).get<std::string>();
    if (family != "gaussian_interval")
        throw ConfigError(ctx + ": unknown membership family '" + family + "'");
    Vec centers(static_cast<std::size_t>(rule_count));
    const json& cj = require(j, "centers", ctx);
    if (static_cast<int>(cj.size()) != rule_count)
        throw ConfigError(ctx + ": need one center per rule");
    for (int l = 0; l < rule_count; ++l)
        centers[static_cast<std::size_t>(l)] = cj[static_cast<std::size_t>(l)].get<double>();
    const double su = require(j, "sigma_upper", ctx).get<double>();
    const double sl = require(j, "sigma_lower", ctx).get<double>();
    const double scale = require(j, "lower_scale", ctx).get<double>();

    const std::string wfamily = require(weighting, "family", ctx + ".weighting").get<std::string>();
    if (wfamily != "sin_squared")
        throw ConfigError(ctx + ": unknown weighting family '" + wfamily + "'");
    const int widx = require(weighting, "state_index", ctx + ".weighting").get<int>();
    if (widx < 0 || widx >= state_dim)
        throw ConfigError(ctx + ".weighting: state_index out of range");

    MembershipSpec spec;
    spec.premise_index = widx;
    for (int l = 0; l < rule_count; ++l) {
        try {
            spec.fns.push_back(
                fuzzy::gaussian_it2(centers[static_cast<std::size_t>(l)], su, sl, scale, widx));
        } catch (const StructuralError& e) {
            throw ConfigError(ctx + ": " + e.what());
        }
    }
    return spec;
}

}  // namespace detail

/// Loads a plant description: per-rule matrices as nested numeric arrays,
/// membership family + parameters, premise-variable index.
inline fuzzy::It2Plant load_plant(const std::string& path) {
    const json j = detail::load_json(path);
    fuzzy::It2Plant plant;
    plant.state_dim = detail::require(j, "state_dim", path).get<int>();
    plant.input_dim = detail::require(j, "input_dim", path).get<int>();
    if (plant.state_dim < 1 || plant.input_dim < 1)
        throw ConfigError(path + ": dimensions must be positive");
    const int premise_index = detail::require(j, "premise_state_index", path).get<int>();
    if (premise_index < 0 || premise_index >= plant.state_dim)
        throw ConfigError(path + ": premise_state_index out of range");
    plant.premise = [premise_index](const Vec& x) {
        return x[static_cast<std::size_t>(premise_index)];
    };

    const json& rules = detail::require(j, "rules", path);
    if (!rules.is_array() || rules.empty())
        throw ConfigError(path + ": at least one rule required");
    int idx = 0;
    for (const auto& rj : rules) {
        ++idx;
        const std::string ctx = path + ": rule " + std::to_string(idx);
        fuzzy::FuzzyRule r;
        r.A = detail::parse_matrix(detail::require(rj, "A", ctx), plant.state_dim, plant.state_dim,
                                   ctx + ".A");
        r.Ad = detail::parse_matrix(detail::require(rj, "Ad", ctx), plant.state_dim, plant.state_dim,
                                    ctx + ".Ad");
        r.B = detail::parse_matrix(detail::require(rj, "B", ctx), plant.state_dim, plant.input_dim,
                                   ctx + ".B");
        r.Bd = detail::parse_matrix(detail::require(rj, "Bd", ctx), plant.state_dim, plant.input_dim,
                                    ctx + ".Bd");
        plant.rules.push_back(std::move(r));
    }

    auto spec = detail::parse_memberships(detail::require(j, "membership", path),
                                          detail::require(j, "weighting", path),
                                          static_cast<int>(plant.rules.size()), plant.state_dim,
                                          path + ".membership");
    plant.memberships = std::move(spec.fns);
    try {
        plant.validate();
    } catch (const StructuralError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return plant;
}

/// Loads a controller shape; the file may simply defer to the plant's
/// memberships with {"membership": "plant"}.
inline fuzzy::It2ControllerShape load_controller(const std::string& path,
                                                 const fuzzy::It2Plant& plant) {
    const json j = detail::load_json(path);
    fuzzy::It2ControllerShape ctrl;
    const json& mj = detail::require(j, "membership", path);
    if (mj.is_string() && mj.get<std::string>() == "plant") {
        ctrl.memberships = plant.memberships;
        ctrl.premise = plant.premise;
        return ctrl;
    }
    auto spec = detail::parse_memberships(mj, detail::require(j, "weighting", path),
                                          plant.rule_count(), plant.state_dim, path + ".membership");
    ctrl.memberships = std::move(spec.fns);
    ctrl.premise = plant.premise;
    return ctrl;
}

/// Loads and fully validates a benchmark configuration; plant and controller
/// paths resolve relative to the config file's directory.
inline BenchConfig load_config(const std::string& path) {
    namespace fs = std::filesystem;
    const json j = detail::load_json(path);
    const fs::path base = fs::path(path).parent_path();

    BenchConfig cfg;
    cfg.plant_path = (base / detail::require(j, "plant", path).get<std::string>()).string();
    cfg.controller_path =
        (base / detail::require(j, "controller", path).get<std::string>()).string();
    cfg.plant = load_plant(cfg.plant_path);
    cfg.controller = load_controller(cfg.controller_path, cfg.plant);

    const json& sj = detail::require(j, "synth", path);
    const int n = cfg.plant.state_dim;
    const int w = cfg.plant.input_dim;
    Matrix q = detail::parse_matrix(detail::require(sj, "Q", path + ".synth"), n, n,
                                    path + ".synth.Q");
    Matrix r = detail::parse_matrix(detail::require(sj, "R", path + ".synth"), w, w,
                                    path + ".synth.R");
    try {
        cfg.synth = synth::SynthConfig::make(
            SymMatrix::from_matrix(q, 1e-12), SymMatrix::from_matrix(r, 1e-12),
            detail::require(sj, "rho", path + ".synth").get<double>(),
            detail::require(sj, "rho_d", path + ".synth").get<double>(),
            detail::require(sj, "state_delay_bound", path + ".synth").get<int>(),
            detail::require(sj, "input_delay_bound", path + ".synth").get<int>(),
            detail::parse_vec(detail::require(sj, "u_max", path + ".synth"), w,
                              path + ".synth.u_max"));
    } catch (const StructuralError& e) {
        throw ConfigError(path + ".synth: " + e.what());
    }

    const json& mj = detail::require(j, "sim", path);
    cfg.steps = detail::require(mj, "steps", path + ".sim").get<int>();
    cfg.x0 = detail::parse_vec(detail::require(mj, "x0", path + ".sim"), n, path + ".sim.x0");
    cfg.ts = detail::require(mj, "ts", path + ".sim").get<double>();
    cfg.kase = parse_case(detail::require(mj, "case", path + ".sim").get<std::string>());
    cfg.seed = detail::require(mj, "seed", path + ".sim").get<std::uint64_t>();
    if (mj.contains("resynthesize_every"))
        cfg.resynthesize_every = mj["resynthesize_every"].get<int>();
    if (mj.contains("share_delay_draws"))
        cfg.share_delay_draws = mj["share_delay_draws"].get<bool>();
    if (cfg.steps < 1)
        throw ConfigError(path + ".sim.steps: must be >= 1");
    if (!(cfg.ts > 0.0))
        throw ConfigError(path + ".sim.ts: must be positive");
    if (cfg.resynthesize_every < 1)
        throw ConfigError(path + ".sim.resynthesize_every: must be >= 1");

    if (j.contains("output_dir"))
        cfg.output_dir = j["output_dir"].get<std::string>();
    return cfg;
}

/// Delay processes for a benchmark case. The two channels draw independently
/// (seed-derived streams) unless share_delay_draws is set.
inline std::pair<sim::DelayProcess, sim::DelayProcess> case_delays(const BenchConfig& cfg) {
    const int h = cfg.synth.state_delay_bound;
    const int jb = cfg.synth.input_delay_bound;
    const std::uint64_t sx = 2 * cfg.seed;
    const std::uint64_t su = 2 * cfg.seed + 1;
    switch (cfg.kase) {
        case Case::nodelay:
            return {sim::DelayProcess::none(), sim::DelayProcess::none()};
        case Case::statedelay:
            return {sim::DelayProcess::uniform(h, sx), sim::DelayProcess::none()};
        case Case::bothdelay:
            return {sim::DelayProcess::uniform(h, sx), sim::DelayProcess::uniform(jb, su)};
        default:  // uncontrolled: u = 0 makes the input channel irrelevant
            return {sim::DelayProcess::uniform(h, sx), sim::DelayProcess::uniform(jb, su)};
    }
}

inline sim::SimConfig make_sim_config(const BenchConfig& cfg) {
    sim::SimConfig s;
    s.steps = cfg.steps;
    s.x0 = cfg.x0;
    s.ts = cfg.ts;
    auto [dx, du] = case_delays(cfg);
    s.state_delay = dx;
    s.input_delay = du;
    s.resynthesize_every = cfg.resynthesize_every;
    s.share_delay_draws = cfg.share_delay_draws;
    return s;
}

}  // namespace it2mpc::config
