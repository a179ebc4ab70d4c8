#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "it2mpc/synth.hpp"

namespace it2mpc::sim {

/// Thrown when the very first synthesis step has no solution; the online
/// scheme cannot start without step-0 feasibility.
struct InitialInfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Realization of the unknown-but-bounded delay. Kind none reads current
/// values (the delay terms collapse onto the undelayed channel);
/// worst_case_sweep is a marker expanded into constant-delay runs.
struct DelayProcess {
    enum class Kind { none, constant, uniform_random, worst_case_sweep };
    Kind kind = Kind::none;
    int bound = 1;
    int constant_value = 1;
    std::uint64_t seed = 0;

    static DelayProcess none() { return {}; }

    static DelayProcess constant(int value, int bound) {
        if (value < 1 || value > bound)
            throw StructuralError("DelayProcess: constant delay must lie in [1, bound]");
        DelayProcess d;
        d.kind = Kind::constant;
        d.bound = bound;
        d.constant_value = value;
        return d;
    }

    static DelayProcess uniform(int bound, std::uint64_t seed) {
        if (bound < 1)
            throw StructuralError("DelayProcess: bound must be >= 1");
        DelayProcess d;
        d.kind = Kind::uniform_random;
        d.bound = bound;
        d.seed = seed;
        return d;
    }

    static DelayProcess worst_case(int bound) {
        if (bound < 1)
            throw StructuralError("DelayProcess: bound must be >= 1");
        DelayProcess d;
        d.kind = Kind::worst_case_sweep;
        d.bound = bound;
        return d;
    }
};

struct SimConfig {
    int steps = 1;
    Vec x0;
    double ts = 1.0;  // reporting only
    DelayProcess state_delay, input_delay;
    int resynthesize_every = 1;
    bool share_delay_draws = false;

    void validate() const {
        if (steps < 1)
            throw StructuralError("SimConfig: steps must be >= 1");
        if (!(ts > 0.0))
            throw StructuralError("SimConfig: sample time must be positive");
        if (x0.empty() || !all_finite(x0))
            throw StructuralError("SimConfig: invalid initial state");
        if (resynthesize_every < 1)
            throw StructuralError("SimConfig: resynthesize_every must be >= 1");
    }
};

/// Per-step record of one closed-loop run. Delay entries are 0 when the
/// corresponding channel uses the none convention.
struct Trajectory {
    int state_dim = 0, input_dim = 0;
    double ts = 1.0;
    std::vector<Vec> x, u;
    std::vector<int> dx, du;
    Vec zeta;
    Vec lyapunov;  // V_k(x(k)) under that step's solution
    std::vector<std::uint8_t> feasible;
    Vec final_state;

    int size() const { return static_cast<int>(x.size()); }
};

struct SynthLogRow {
    int step = 0;
    double zeta = 0.0;
    bool feasible = false;
    int iterations = 0;
    double worst_margin = 0.0;
};

struct RunResult {
    Trajectory traj;
    std::vector<synth::SynthesisSolution> solutions;  // one per step (reused on failures)
    std::vector<SynthLogRow> synth_log;               // one row per synthesis attempt
    int infeasible_steps = 0;
};

namespace detail {

class DelayDraw {
public:
    explicit DelayDraw(const DelayProcess& p) : proc_(p), rng_(p.seed) {
        if (p.kind == DelayProcess::Kind::worst_case_sweep)
            throw StructuralError("DelayDraw: expand worst_case_sweep into constant runs first");
    }

    int next() {
        switch (proc_.kind) {
            case DelayProcess::Kind::none: return 0;
            case DelayProcess::Kind::constant: return proc_.constant_value;
            default:
                return 1 + static_cast<int>(rng_() % static_cast<std::uint64_t>(proc_.bound));
        }
    }

    const DelayProcess& process() const { return proc_; }

private:
    DelayProcess proc_;
    std::mt19937_64 rng_;
};

}  // namespace detail

/// Plant update x+ = A_mu x + B_mu u + Ad_mu x_d + Bd_mu u_d with all blends
/// evaluated at the current state's weights. dx/du of 0 select the current
/// state/input (the none convention); otherwise they are lookback distances.
inline Vec step_dynamics(const fuzzy::It2Plant& plant, const synth::HistoryWindow& hist,
                         const Vec& u, int dx, int du) {
    const Vec& x = hist.current_state();
    const Vec& xd = dx == 0 ? x : hist.state_lookback(dx);
    const Vec& ud = du == 0 ? u : hist.input_lookback(du);
    Vec w = fuzzy::firing_strengths(plant, x);
    fuzzy::BlendedMatrices b = fuzzy::blend(plant, w);
    Vec next = b.A.apply(x);
    const Vec bu = b.B.apply(u);
    const Vec adxd = b.Ad.apply(xd);
    const Vec bdud = b.Bd.apply(ud);
    for (std::size_t i = 0; i < next.size(); ++i)
        next[i] += bu[i] + adxd[i] + bdud[i];
    return next;
}

/// One closed-loop step: the input comes from the solution's fuzzy gains at
/// the current state.
inline Vec step(const fuzzy::It2Plant& plant, const synth::SynthesisSolution& sol,
                const fuzzy::It2ControllerShape& ctrl, const synth::HistoryWindow& hist, int dx,
                int du) {
    Vec u = synth::control_input(sol, ctrl, hist.current_state());
    return step_dynamics(plant, hist, u, dx, du);
}

/// Expands a worst_case_sweep delay kind into one config per constant delay.
inline std::vector<SimConfig> expand_worst_case(const SimConfig& cfg) {
    std::vector<SimConfig> out;
    const bool sx = cfg.state_delay.kind == DelayProcess::Kind::worst_case_sweep;
    const bool su = cfg.input_delay.kind == DelayProcess::Kind::worst_case_sweep;
    if (!sx && !su) {
        out.push_back(cfg);
        return out;
    }
    const int nx = sx ? cfg.state_delay.bound : 1;
    const int nu = su ? cfg.input_delay.bound : 1;
    for (int a = 1; a <= nx; ++a) {
        for (int b = 1; b <= nu; ++b) {
            SimConfig c = cfg;
            if (sx)
                c.state_delay = DelayProcess::constant(a, cfg.state_delay.bound);
            if (su)
                c.input_delay = DelayProcess::constant(b, cfg.input_delay.bound);
            out.push_back(std::move(c));
        }
    }
    return out;
}

/// Online closed loop: per step (subject to resynthesize_every) solve the
/// step problem, apply the fuzzy feedback, draw delays, advance. Later-step
/// synthesis failures reuse the previous gains and are logged; a step-0
/// failure aborts the run.
inline RunResult run(const fuzzy::It2Plant& plant, const fuzzy::It2ControllerShape& ctrl,
                     const synth::SynthConfig& synth_cfg, const SimConfig& sim_cfg) {
    sim_cfg.validate();
    const int h = synth_cfg.state_delay_bound;
    const int j = synth_cfg.input_delay_bound;
    if (sim_cfg.state_delay.kind != DelayProcess::Kind::none && sim_cfg.state_delay.bound > h)
        throw StructuralError("run: state delay bound exceeds the synthesis bound");
    if (sim_cfg.input_delay.kind != DelayProcess::Kind::none && sim_cfg.input_delay.bound > j)
        throw StructuralError("run: input delay bound exceeds the synthesis bound");

    synth::HistoryWindow hist =
        synth::HistoryWindow::from_initial(sim_cfg.x0, h, j, plant.input_dim);
    detail::DelayDraw draw_x(sim_cfg.state_delay);
    detail::DelayDraw draw_u(sim_cfg.input_delay);

    RunResult out;
    out.traj.state_dim = plant.state_dim;
    out.traj.input_dim = plant.input_dim;
    out.traj.ts = sim_cfg.ts;

    synth::SynthesisSolution current;
    bool have_solution = false;

    for (int k = 0; k < sim_cfg.steps; ++k) {
        bool step_feasible = true;
        if (!have_solution || k % sim_cfg.resynthesize_every == 0) {
            synth::StepResult res = synth::solve_step(plant, ctrl, synth_cfg, hist,
                                                      have_solution ? &current : nullptr);
            SynthLogRow row;
            row.step = k;
            row.iterations = res.iterations;
            row.feasible = res.status == synth::StepStatus::feasible;
            if (row.feasible) {
                current = res.solution;
                have_solution = true;
                row.zeta = res.solution.zeta;
                row.worst_margin = res.certificate.worst_violation;
            } else {
                if (k == 0)
                    throw InitialInfeasibleError("synthesis has no solution at step 0: " + res.note);
                ++out.infeasible_steps;
                step_feasible = false;
                row.zeta = current.zeta;
                row.worst_margin = 0.0;
            }
            out.synth_log.push_back(row);
        }

        const Vec& x = hist.current_state();
        Vec u = synth::control_input(current, ctrl, x);
        const int dx = draw_x.next();
        int du = draw_u.next();
        if (sim_cfg.share_delay_draws && sim_cfg.input_delay.kind == DelayProcess::Kind::uniform_random &&
            sim_cfg.state_delay.kind == DelayProcess::Kind::uniform_random)
            du = std::min(dx, j);
        Vec x_next = step_dynamics(plant, hist, u, dx, du);

        out.traj.x.push_back(x);
        out.traj.u.push_back(u);
        out.traj.dx.push_back(dx);
        out.traj.du.push_back(du);
        out.traj.zeta.push_back(current.zeta);
        out.traj.lyapunov.push_back(synth::terminal_set_value(current, plant, x));
        out.traj.feasible.push_back(step_feasible ? 1 : 0);
        out.solutions.push_back(current);

        hist.advance(x_next, u);
    }
    out.traj.final_state = hist.current_state();
    return out;
}

/// Open-loop run (u = 0) under the same delay conventions. Divergence is the
/// expected outcome for unstable plants; the run stops early once the state
/// norm exceeds 1e6.
inline Trajectory uncontrolled_run(const fuzzy::It2Plant& plant, const SimConfig& sim_cfg,
                                   int state_bound, int input_bound) {
    sim_cfg.validate();
    synth::HistoryWindow hist =
        synth::HistoryWindow::from_initial(sim_cfg.x0, state_bound, input_bound, plant.input_dim);
    detail::DelayDraw draw_x(sim_cfg.state_delay);
    detail::DelayDraw draw_u(sim_cfg.input_delay);

    Trajectory traj;
    traj.state_dim = plant.state_dim;
    traj.input_dim = plant.input_dim;
    traj.ts = sim_cfg.ts;
    const Vec zero_u(static_cast<std::size_t>(plant.input_dim), 0.0);

    for (int k = 0; k < sim_cfg.steps; ++k) {
        const Vec x = hist.current_state();
        if (norm2(x) > 1e6)
            break;
        const int dx = draw_x.next();
        const int du = draw_u.next();
        Vec x_next = step_dynamics(plant, hist, zero_u, dx, du);
        traj.x.push_back(x);
        traj.u.push_back(zero_u);
        traj.dx.push_back(dx);
        traj.du.push_back(du);
        traj.zeta.push_back(0.0);
        traj.lyapunov.push_back(0.0);
        traj.feasible.push_back(1);
        hist.advance(x_next, zero_u);
    }
    traj.final_state = hist.current_state();
    return traj;
}

// ---------------------------------------------------------------------------
// CSV serialization
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace detail

inline std::string trajectory_csv_header(int state_dim, int input_dim) {
    std::string h = "k,t";
    for (int i = 1; i <= state_dim; ++i)
        h += ",x_" + std::to_string(i);
    for (int i = 1; i <= input_dim; ++i)
        h += ",u_" + std::to_string(i);
    h += ",d_x,d_u,zeta,feasible";
    return h;
}

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw StructuralError("cannot open '" + path + "' for writing");
    out << trajectory_csv_header(traj.state_dim, traj.input_dim) << "\n";
    for (int k = 0; k < traj.size(); ++k) {
        out << k << "," << detail::format_double(k * traj.ts);
        for (double v : traj.x[static_cast<std::size_t>(k)])
            out << "," << detail::format_double(v);
        for (double v : traj.u[static_cast<std::size_t>(k)])
            out << "," << detail::format_double(v);
        out << "," << traj.dx[static_cast<std::size_t>(k)] << ","
            << traj.du[static_cast<std::size_t>(k)] << ","
            << detail::format_double(traj.zeta[static_cast<std::size_t>(k)]) << ","
            << static_cast<int>(traj.feasible[static_cast<std::size_t>(k)]) << "\n";
    }
}

inline std::string synth_log_csv_header() { return "k,zeta,feasible,iterations,worst_margin"; }

inline void write_synth_log_csv(const std::vector<SynthLogRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw StructuralError("cannot open '" + path + "' for writing");
    out << synth_log_csv_header() << "\n";
    for (const auto& r : rows)
        out << r.step << "," << detail::format_double(r.zeta) << "," << (r.feasible ? 1 : 0) << ","
            << r.iterations << "," << detail::format_double(r.worst_margin) << "\n";
}

}  // namespace it2mpc::sim
