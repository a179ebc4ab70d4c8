// Command-line front end: runs benchmark cases and seed sweeps from a
// declarative configuration, writing CSV trajectories, synthesis logs,
// certification reports and plot scripts.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "it2mpc/bench.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& case_override,
                std::uint64_t seed, bool seed_set, int steps, const std::string& out_dir,
                int resynth, bool dump_lmi) {
    it2mpc::config::BenchConfig cfg = it2mpc::config::load_config(config_path);
    if (!case_override.empty())
        cfg.kase = it2mpc::config::parse_case(case_override);
    if (seed_set)
        cfg.seed = seed;
    if (steps > 0)
        cfg.steps = steps;
    if (resynth > 0)
        cfg.resynthesize_every = resynth;

    it2mpc::bench::CaseResult res = it2mpc::bench::run_case(cfg, out_dir, dump_lmi);
    std::printf("case=%s artifacts in %s\n", it2mpc::config::case_name(cfg.kase).c_str(),
                res.out_dir.c_str());
    for (const auto& c : res.certs)
        std::printf("%s\n", it2mpc::verify::format(c).c_str());
    if (cfg.kase != it2mpc::config::Case::uncontrolled && res.exit_code != 2) {
        std::printf("convergence_step=%d peak_input=%.6g infeasible_steps=%d\n",
                    it2mpc::bench::sustained_convergence_step(res.run.traj),
                    it2mpc::bench::peak_input(res.run.traj), res.run.infeasible_steps);
    }
    if (res.exit_code == 2)
        std::fprintf(stderr, "synthesis infeasible at step 0\n");
    return res.exit_code;
}

int sweep_command(const std::string& config_path, const std::string& case_override,
                  const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
    it2mpc::config::BenchConfig cfg = it2mpc::config::load_config(config_path);
    if (!case_override.empty())
        cfg.kase = it2mpc::config::parse_case(case_override);

    it2mpc::bench::SweepSummary summary = it2mpc::bench::sweep(cfg, seeds, out_dir);
    std::printf("seed  conv_step  peak_input  infeasible  certs\n");
    bool all_ok = true;
    for (const auto& r : summary.rows) {
        std::printf("%4llu  %9d  %10.4f  %10d  %s\n", static_cast<unsigned long long>(r.seed),
                    r.convergence_step, r.peak_input, r.infeasible_steps,
                    r.certs_pass ? "pass" : "FAIL");
        all_ok = all_ok && r.certs_pass && r.infeasible_steps == 0 && r.convergence_step >= 0;
    }
    std::printf("conv min/median/max = %d/%d/%d  peak min/median/max = %.4f/%.4f/%.4f\n",
                summary.conv_min, summary.conv_median, summary.conv_max, summary.peak_min,
                summary.peak_median, summary.peak_max);
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Razumikhin LMI-MPC for interval type-2 T-S fuzzy systems with delays"};
    app.require_subcommand(1);

    std::string config_path, case_override, out_dir, seeds_arg;
    std::uint64_t seed = 0;
    int steps = 0, resynth = 0;
    bool dump_lmi = false;

    CLI::App* run = app.add_subcommand("run", "run one benchmark case");
    run->add_option("--config", config_path, "configuration file")->required();
    run->add_option("--case", case_override, "override the configured case");
    CLI::Option* seed_opt = run->add_option("--seed", seed, "override the delay seed");
    run->add_option("--steps", steps, "override the step count");
    run->add_option("--out", out_dir, "output directory (also IT2MPC_OUT)");
    run->add_option("--resynth-every", resynth, "solve the step problem every N steps");
    run->add_flag("--dump-lmi", dump_lmi, "write the step-0 problem structure to step0_lmi.txt");

    CLI::App* sweep = app.add_subcommand("sweep", "run a controlled case across seeds");
    sweep->add_option("--config", config_path, "configuration file")->required();
    sweep->add_option("--case", case_override, "override the configured case");
    sweep->add_option("--seeds", seeds_arg, "comma-separated seed list")->required();
    sweep->add_option("--out", out_dir, "output directory (also IT2MPC_OUT)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("run"))
            return run_command(config_path, case_override, seed, seed_opt->count() > 0, steps,
                               out_dir, resynth, dump_lmi);
        std::vector<std::uint64_t> seeds;
        std::size_t pos = 0;
        while (pos < seeds_arg.size()) {
            std::size_t next = seeds_arg.find(',', pos);
            if (next == std::string::npos)
                next = seeds_arg.size();
            seeds.push_back(std::stoull(seeds_arg.substr(pos, next - pos)));
            pos = next + 1;
        }
        return sweep_command(config_path, case_override, seeds, out_dir);
    } catch (const it2mpc::config::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
