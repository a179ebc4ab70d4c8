#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "it2mpc/config.hpp"
#include "it2mpc/verify.hpp"

namespace it2mpc::bench {

namespace fs = std::filesystem;

inline constexpr const char* kOutputDirEnv = "IT2MPC_OUT";

/// First step from which ||x(k)|| stays below the threshold through the end
/// of the run (at least `window` steps of evidence required); -1 when the
/// run never settles.
inline int sustained_convergence_step(const sim::Trajectory& traj, double threshold = 0.01,
                                      int window = 10) {
    const int n = traj.size();
    int start = -1;
    for (int k = 0; k < n; ++k) {
        if (norm2(traj.x[static_cast<std::size_t>(k)]) < threshold) {
            if (start < 0)
                start = k;
        } else {
            start = -1;
        }
    }
    if (start < 0 || n - start < window)
        return -1;
    return start;
}

inline double peak_input(const sim::Trajectory& traj) {
    double peak = 0.0;
    for (const auto& u : traj.u)
        for (double v : u)
            peak = std::max(peak, std::abs(v));
    return peak;
}

namespace detail {

inline std::string resolve_output_dir(const config::BenchConfig& cfg, const std::string& override_dir) {
    if (!override_dir.empty())
        return override_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env)
        return env;
    return cfg.output_dir;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw StructuralError("cannot open '" + path + "' for writing");
    out << text;
}

// Boundary samples of the per-rule unit ellipses x^T Y_l^-1 x = 1 (planar
// plants only), consumed by the generated plot script.
inline void write_terminal_set_csv(const synth::SynthesisSolution& sol, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw StructuralError("cannot open '" + path + "' for writing");
    out << "rule,x_1,x_2\n";
    if (sol.Y.empty() || sol.Y[0].dim() != 2)
        return;
    const int samples = 128;
    for (std::size_t l = 0; l < sol.Y.size(); ++l) {
        auto eig = eigh(sol.Y[l]);
        for (int s = 0; s <= samples; ++s) {
            const double ang = 2.0 * 3.14159265358979323846 * s / samples;
            // x = U diag(sqrt(eig)) [cos, sin]^T lies on x^T Y^-1 x = 1.
            const double c0 = std::sqrt(std::max(eig.values[0], 0.0)) * std::cos(ang);
            const double c1 = std::sqrt(std::max(eig.values[1], 0.0)) * std::sin(ang);
            const double x1 = eig.vectors(0, 0) * c0 + eig.vectors(0, 1) * c1;
            const double x2 = eig.vectors(1, 0) * c0 + eig.vectors(1, 1) * c1;
            out << (l + 1) << "," << sim::detail::format_double(x1) << ","
                << sim::detail::format_double(x2) << "\n";
        }
    }
}

inline std::string plot_script(const config::BenchConfig& cfg, bool controlled) {
    std::ostringstream os;
    os << "#!/usr/bin/env python3\n"
          "\"\"\"Renders the run's trajectory CSVs: states/inputs vs time and the\n"
          "phase plane with the step-0 terminal-set ellipses.\"\"\"\n"
          "import csv\n"
          "import os\n"
          "\n"
          "import matplotlib\n"
          "matplotlib.use(\"Agg\")\n"
          "import matplotlib.pyplot as plt\n"
          "\n"
          "here = os.path.dirname(os.path.abspath(__file__))\n"
          "\n"
          "def read_csv(name):\n"
          "    with open(os.path.join(here, name)) as fh:\n"
          "        rows = list(csv.DictReader(fh))\n"
          "    return rows\n"
          "\n"
          "rows = read_csv(\"trajectory.csv\")\n"
          "t = [float(r[\"t\"]) for r in rows]\n";
    os << "n_states = " << cfg.plant.state_dim << "\n";
    os << "n_inputs = " << cfg.plant.input_dim << "\n";
    os << "fig, axes = plt.subplots(2, 1, figsize=(8, 7), sharex=True)\n"
          "for i in range(1, n_states + 1):\n"
          "    axes[0].plot(t, [float(r[\"x_%d\" % i]) for r in rows], label=\"x%d\" % i)\n"
          "axes[0].set_ylabel(\"states\")\n"
          "axes[0].legend()\n"
          "axes[0].grid(True)\n"
          "for i in range(1, n_inputs + 1):\n"
          "    axes[1].plot(t, [float(r[\"u_%d\" % i]) for r in rows], label=\"u%d\" % i)\n"
          "axes[1].set_xlabel(\"time [s]\")\n"
          "axes[1].set_ylabel(\"inputs\")\n"
          "axes[1].legend()\n"
          "axes[1].grid(True)\n"
          "fig.savefig(os.path.join(here, \"states_inputs.png\"), dpi=130)\n"
          "\n"
          "if n_states == 2:\n"
          "    fig2, ax = plt.subplots(figsize=(6.5, 6))\n"
          "    ax.plot([float(r[\"x_1\"]) for r in rows], [float(r[\"x_2\"]) for r in rows],\n"
          "            \"-o\", markersize=2.5, label=\"trajectory\")\n";
    if (controlled) {
        os << "    ell = read_csv(\"terminal_set.csv\")\n"
              "    rules = sorted({r[\"rule\"] for r in ell})\n"
              "    for rule in rules:\n"
              "        pts = [r for r in ell if r[\"rule\"] == rule]\n"
              "        ax.plot([float(r[\"x_1\"]) for r in pts], [float(r[\"x_2\"]) for r in pts],\n"
              "                \"--\", linewidth=1.0, label=\"terminal set, rule %s\" % rule)\n";
    }
    os << "    ax.set_xlabel(\"x1\")\n"
          "    ax.set_ylabel(\"x2\")\n"
          "    ax.legend()\n"
          "    ax.grid(True)\n"
          "    fig2.savefig(os.path.join(here, \"phase_plane.png\"), dpi=130)\n"
          "print(\"wrote states_inputs.png\" + (\" and phase_plane.png\" if n_states == 2 else \"\"))\n";
    return os.str();
}

}  // namespace detail

struct CaseResult {
    int exit_code = 3;
    sim::RunResult run;
    sim::Trajectory uncontrolled;
    std::vector<verify::CertReport> certs;
    std::string out_dir;
};

/// Runs one benchmark case: simulate, certify, and write the artifacts
/// (trajectory CSV, synthesis log, certification report, plot script).
/// Exit code 0 on full success, 1 on certification failure, 2 when the
/// initial synthesis is infeasible.
inline CaseResult run_case(const config::BenchConfig& cfg, const std::string& override_dir = "",
                           bool dump_lmi = false) {
    CaseResult result;
    const std::string dir = detail::resolve_output_dir(cfg, override_dir);
    fs::create_directories(dir);
    result.out_dir = dir;
    sim::SimConfig scfg = config::make_sim_config(cfg);

    if (cfg.kase == config::Case::uncontrolled) {
        result.uncontrolled = sim::uncontrolled_run(cfg.plant, scfg, cfg.synth.state_delay_bound,
                                                    cfg.synth.input_delay_bound);
        sim::write_trajectory_csv(result.uncontrolled, dir + "/trajectory.csv");
        detail::write_text(dir + "/plot.py", detail::plot_script(cfg, false));
        const int conv = sustained_convergence_step(result.uncontrolled);
        detail::write_text(dir + "/cert_report.txt",
                           "uncontrolled baseline: no certificates apply\n"
                           "convergence_step=" + std::to_string(conv) + "\n");
        result.exit_code = 0;
        return result;
    }

    if (dump_lmi) {
        synth::HistoryWindow hist = synth::HistoryWindow::from_initial(
            cfg.x0, cfg.synth.state_delay_bound, cfg.synth.input_delay_bound, cfg.plant.input_dim);
        detail::write_text(dir + "/step0_lmi.txt",
                           lmi::dump(synth::build_theorem1_lmis(cfg.plant, cfg.controller,
                                                                cfg.synth, hist)));
    }

    try {
        result.run = sim::run(cfg.plant, cfg.controller, cfg.synth, scfg);
    } catch (const sim::InitialInfeasibleError& e) {
        detail::write_text(dir + "/cert_report.txt", std::string("FAIL step0: ") + e.what() + "\n");
        result.exit_code = 2;
        return result;
    }

    sim::write_trajectory_csv(result.run.traj, dir + "/trajectory.csv");
    sim::write_synth_log_csv(result.run.synth_log, dir + "/synth_log.csv");
    detail::write_terminal_set_csv(result.run.solutions.front(), dir + "/terminal_set.csv");
    detail::write_text(dir + "/plot.py", detail::plot_script(cfg, true));

    result.certs.push_back(verify::check_lrf_trajectory(result.run, cfg.plant, cfg.synth));
    result.certs.push_back(
        verify::check_eigen_sandwich(result.run.solutions, cfg.plant, 50, cfg.seed + 101));
    result.certs.push_back(verify::check_rpi_sampling(cfg.plant, cfg.controller,
                                                      result.run.solutions.front(), 500, true,
                                                      cfg.synth.state_delay_bound, cfg.seed + 202));
    for (int t = 0; t < cfg.plant.rule_count(); ++t)
        result.certs.push_back(
            verify::replay_derivation(result.run.solutions.front(), cfg.plant, cfg.synth, t)
                .summary);

    std::ostringstream report;
    bool all_pass = true;
    for (const auto& c : result.certs) {
        report << verify::format(c) << "\n";
        all_pass = all_pass && c.pass;
    }
    report << "infeasible_steps=" << result.run.infeasible_steps << "\n";
    report << "convergence_step=" << sustained_convergence_step(result.run.traj) << "\n";
    report << "peak_input=" << sim::detail::format_double(peak_input(result.run.traj)) << "\n";
    detail::write_text(dir + "/cert_report.txt", report.str());

    result.exit_code = (all_pass && result.run.infeasible_steps == 0) ? 0 : 1;
    return result;
}

struct SweepRow {
    std::uint64_t seed = 0;
    int convergence_step = -1;
    double peak_input = 0.0;
    int infeasible_steps = 0;
    bool certs_pass = false;
};

struct SweepSummary {
    std::vector<SweepRow> rows;
    int conv_min = -1, conv_median = -1, conv_max = -1;
    double peak_min = 0.0, peak_median = 0.0, peak_max = 0.0;
};

/// Runs one seed of a sweep: simulate and run the per-trajectory checks.
inline SweepRow sweep_one(config::BenchConfig cfg, std::uint64_t seed) {
    cfg.seed = seed;
    sim::SimConfig scfg = config::make_sim_config(cfg);
    SweepRow row;
    row.seed = seed;
    sim::RunResult rr = sim::run(cfg.plant, cfg.controller, cfg.synth, scfg);
    row.convergence_step = sustained_convergence_step(rr.traj);
    row.peak_input = peak_input(rr.traj);
    row.infeasible_steps = rr.infeasible_steps;
    row.certs_pass = verify::check_lrf_trajectory(rr, cfg.plant, cfg.synth).pass;
    return row;
}

/// Seed sweep over a controlled case; rows come back in seed order. Runs are
/// independent and execute concurrently.
inline SweepSummary sweep(const config::BenchConfig& cfg, const std::vector<std::uint64_t>& seeds,
                          const std::string& override_dir = "") {
    if (seeds.empty())
        throw StructuralError("sweep: need at least one seed");
    if (cfg.kase == config::Case::uncontrolled)
        throw StructuralError("sweep: only controlled cases make sense");

    SweepSummary summary;
    std::vector<std::future<SweepRow>> futures;
    futures.reserve(seeds.size());
    for (std::uint64_t s : seeds)
        futures.push_back(std::async(std::launch::async, sweep_one, cfg, s));
    for (auto& f : futures)
        summary.rows.push_back(f.get());

    auto conv = summary.rows;
    std::sort(conv.begin(), conv.end(),
              [](const SweepRow& a, const SweepRow& b) { return a.convergence_step < b.convergence_step; });
    summary.conv_min = conv.front().convergence_step;
    summary.conv_median = conv[conv.size() / 2].convergence_step;
    summary.conv_max = conv.back().convergence_step;
    std::sort(conv.begin(), conv.end(),
              [](const SweepRow& a, const SweepRow& b) { return a.peak_input < b.peak_input; });
    summary.peak_min = conv.front().peak_input;
    summary.peak_median = conv[conv.size() / 2].peak_input;
    summary.peak_max = conv.back().peak_input;

    const std::string dir = detail::resolve_output_dir(cfg, override_dir);
    fs::create_directories(dir);
    std::ofstream out(dir + "/sweep.csv", std::ios::binary);
    out << "seed,convergence_step,peak_input,infeasible_steps,certs_pass\n";
    for (const auto& r : summary.rows)
        out << r.seed << "," << r.convergence_step << ","
            << sim::detail::format_double(r.peak_input) << "," << r.infeasible_steps << ","
            << (r.certs_pass ? 1 : 0) << "\n";
    out << "summary," << summary.conv_min << "/" << summary.conv_median << "/" << summary.conv_max
        << "," << sim::detail::format_double(summary.peak_min) << "/"
        << sim::detail::format_double(summary.peak_median) << "/"
        << sim::detail::format_double(summary.peak_max) << ",,\n";
    return summary;
}

}  // namespace it2mpc::bench
