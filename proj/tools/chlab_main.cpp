// chlab — experiment driver for the Cahn-Hilliard / Stefan laboratory.
//
// Subcommands: potential, run-ch, run-stefan, sweep, audit, prepare.
// Exit codes: 0 = pass, 1 = audit/summary fail, 2 = configuration error.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "chlab/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    bool force = false;
    std::int64_t seed = -1;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "experiment config (ini)")->required();
    sub->add_option("--out", args.out_dir, "output directory (overrides [output] dir)");
    sub->add_flag("--force", args.force, "allow writing into a nonempty output directory");
    sub->add_option("--seed", args.seed, "rng seed (overrides [output] seed)");
}

chlab::ExperimentConfig load(const CommonArgs& args) {
    auto cfg = chlab::load_experiment_config(args.config_path);
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chlab: Cahn-Hilliard to Stefan gradient-flow laboratory"};
    app.require_subcommand(1);

    CommonArgs args;
    auto* c_potential = app.add_subcommand("potential", "tabulate W, W**, and the unstable sets");
    auto* c_run_ch = app.add_subcommand("run-ch", "run the Cahn-Hilliard flow (first eps of eps_list)");
    auto* c_run_st = app.add_subcommand("run-stefan", "run the Stefan limit flow");
    auto* c_sweep = app.add_subcommand("sweep", "eps -> 0 convergence study");
    auto* c_audit = app.add_subcommand("audit", "Young-measure and oscillation audits on prepared data");
    auto* c_prepare = app.add_subcommand("prepare", "construct well-prepared initial data");
    for (auto* sub : {c_potential, c_run_ch, c_run_st, c_sweep, c_audit, c_prepare})
        add_common(sub, args);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load(args);
        if (c_potential->parsed()) return chlab::cmd_potential(cfg, args.out_dir, args.force);
        if (c_run_ch->parsed()) return chlab::cmd_run(cfg, args.out_dir, args.force, false);
        if (c_run_st->parsed()) return chlab::cmd_run(cfg, args.out_dir, args.force, true);
        if (c_sweep->parsed()) return chlab::cmd_sweep(cfg, args.out_dir, args.force);
        if (c_audit->parsed()) return chlab::cmd_audit(cfg, args.out_dir, args.force);
        if (c_prepare->parsed()) return chlab::cmd_prepare(cfg, args.out_dir, args.force);
    } catch (const chlab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
