// Experiment CLI: generate synthetic feature files, run the alternate
// cleaner/classifier optimization, score checkpoints, and run graph
// ablations. Configuration resolves as defaults -> --config file -> flags.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nck/io.hpp"

namespace {

struct CliFlags {
    std::string config;
    std::string out;
    std::string data;
    std::string checkpoint;
    std::string ablate_spec;
    std::string branch;
    std::string graph;
    std::uint64_t seed = 0;
    std::size_t steps = 0;
    double confidence_fraction = 0.0;
    double ema_alpha = 0.0;
    bool symmetrize = false;
    bool hard_targets = false;
};

void add_common_options(CLI::App* cmd, CliFlags& f) {
    cmd->add_option("--config", f.config, "JSON config file (partial configs keep defaults)");
    cmd->add_option("--seed", f.seed, "run seed; dependent training seeds are re-derived");
    cmd->add_option("--out", f.out, "output directory for the run");
    cmd->add_option("--steps", f.steps, "number of alternate-optimization steps");
    cmd->add_option("--confidence-fraction", f.confidence_fraction,
                    "high-confidence fraction in (0,1]");
    cmd->add_option("--ema-alpha", f.ema_alpha, "label-memory EMA factor in [0,1)");
    cmd->add_option("--ablate", f.ablate_spec,
                    "ablation spec: <both|feature|temporal>[+constant:<v>] or constant:<v>");
    cmd->add_flag("--symmetrize-similarity", f.symmetrize,
                  "symmetrize the feature-similarity graph before renormalization");
    cmd->add_flag("--hard-targets", f.hard_targets,
                  "threshold cleaned labels at 0.5 before classifier retraining");
    cmd->add_option("--data", f.data,
                    "feature-file root containing train/ and eval/ (*.gcnf); "
                    "synthetic data is generated when omitted");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph-based label-noise cleaning experiments"};
    app.require_subcommand(1);
    app.footer("Environment: NCK_THREADS caps worker threads for per-video cleaner training.");

    CliFlags flags;
    CLI::App* generate = app.add_subcommand("generate", "write synthetic feature files");
    CLI::App* run = app.add_subcommand("run", "alternate cleaner/classifier optimization");
    CLI::App* eval = app.add_subcommand("eval", "score a classifier checkpoint on the eval set");
    CLI::App* ablate = app.add_subcommand("ablate", "run with a graph/branch ablation");
    for (CLI::App* cmd : {generate, run, eval, ablate}) add_common_options(cmd, flags);
    eval->add_option("--checkpoint", flags.checkpoint, "classifier checkpoint (.gcnc) to score");
    ablate->add_option("--branch", flags.branch, "graph branches to keep: both|feature|temporal");
    ablate->add_option("--graph", flags.graph, "adjacency source: native|constant:<v>");

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* active = app.get_subcommands().front();
        nck::RunConfig cfg;
        if (active->count("--config") > 0) cfg = nck::load_run_config(flags.config, std::move(cfg));
        cfg.command = active->get_name();

        if (active->count("--seed") > 0) nck::apply_seed(cfg, flags.seed);
        if (active->count("--out") > 0) cfg.out_dir = flags.out;
        if (active->count("--data") > 0) cfg.data_dir = flags.data;
        if (active->count("--steps") > 0) cfg.alternation.n_steps = flags.steps;
        if (active->count("--confidence-fraction") > 0)
            cfg.alternation.confidence_fraction = flags.confidence_fraction;
        if (active->count("--ema-alpha") > 0) cfg.alternation.ema_alpha = flags.ema_alpha;
        if (active->count("--ablate") > 0)
            cfg.alternation.ablation = nck::parse_ablation_spec(flags.ablate_spec);
        if (active->count("--symmetrize-similarity") > 0)
            cfg.alternation.symmetrize_similarity = true;
        if (active->count("--hard-targets") > 0) cfg.alternation.hard_targets = true;
        if (active == eval && active->count("--checkpoint") > 0) cfg.checkpoint = flags.checkpoint;
        if (active == ablate) {
            if (active->count("--branch") > 0)
                cfg.alternation.ablation.branches = nck::detail::branches_from(flags.branch);
            if (active->count("--graph") > 0)
                nck::apply_graph_spec(cfg.alternation.ablation, flags.graph);
        }

        return nck::run_experiment(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
