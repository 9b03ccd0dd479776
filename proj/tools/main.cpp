#include <CLI11.hpp>

#include "rnff/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"random averaged-operator iterations, residual decompositions, and "
                 "randomized Kaczmarz experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    long trials = 0;
    bool trials_set = false;
    int threads = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory (default: current)");
        sub->add_option("--seed", seed, "override the config master_seed")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--trials", trials, "override the config n_trials")
            ->each([&](const std::string&) { trials_set = true; });
        sub->add_option("--threads", threads, "worker threads (0 = OpenMP default)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "run trajectories, write per-step CSV");
    add_common(sim, true);

    CLI::App* ana = app.add_subcommand("analyze", "estimate constants, write JSON report");
    add_common(ana, true);

    CLI::App* ver =
        app.add_subcommand("verify", "check mean-square / frame-energy / truncation bounds");
    add_common(ver, true);

    CLI::App* kz = app.add_subcommand("kaczmarz", "randomized Kaczmarz solve on a system file");
    std::string matrix_path;
    std::string sampling = "uniform";
    int kz_steps = 100;
    bool start_at_solution = false;
    kz->add_option("--matrix", matrix_path, "system file (\"d m\" header)")->required();
    kz->add_option("--sampling", sampling, "uniform | rownorm-squared")
        ->check(CLI::IsMember({"uniform", "rownorm-squared"}));
    kz->add_option("--steps", kz_steps, "number of iterations");
    kz->add_option("--seed", seed, "rng seed");
    kz->add_option("--out", out_dir, "output directory (default: current)");
    kz->add_flag("--start-at-solution", start_at_solution,
                 "start from x_true instead of the zero vector");

    CLI11_PARSE(app, argc, argv);

    rnff::CommandOptions opts;
    if (seed_set) opts.seed = seed;
    if (trials_set) opts.trials = trials;
    opts.out_dir = out_dir;
    opts.threads = threads;

    if (sim->parsed()) return rnff::cmd_simulate(config_path, opts);
    if (ana->parsed()) return rnff::cmd_analyze(config_path, opts);
    if (ver->parsed()) return rnff::cmd_verify(config_path, opts);

    rnff::KaczmarzOptions kopts;
    kopts.matrix_path = matrix_path;
    kopts.sampling = sampling == "uniform" ? rnff::RowSampling::Uniform
                                           : rnff::RowSampling::SquaredNorm;
    kopts.n_steps = kz_steps;
    kopts.seed = seed;
    kopts.start_at_solution = start_at_solution;
    kopts.out_dir = out_dir;
    return rnff::cmd_kaczmarz(kopts);
}
