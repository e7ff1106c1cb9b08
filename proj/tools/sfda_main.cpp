#include <CLI11.hpp>
#include <iostream>

#include "sfda/cli/config.hpp"
#include "sfda/cli/report.hpp"
#include "sfda/cli/stages.hpp"

using namespace sfda;

int main(int argc, char** argv) {
    CLI::App app{"Source-free domain-adaptive segmentation pipeline on a procedural benchmark"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    int64_t seed_override = -1;
    bool resume = false;
    app.add_option("--config", config_path, "Experiment config (JSON)");
    app.add_option("--seed", seed_override, "Override the config seed");
    app.add_option("--output-dir", output_dir, "Override the config output directory");
    app.add_flag("--resume", resume, "Skip stages whose outputs already exist");

    // Adaptation flags (honored by `adapt`, `adapt-online` and `all`).
    int rounds = -1;
    double retain_fraction = -1.0, lambda_ent = -1.0;
    int use_cpae = -1, infer_with_cpae = -1;

    std::vector<std::string> stage_names = {"generate", "select-ags", "vendor-train",
                                            "cpae-train", "adapt", "adapt-online", "evaluate",
                                            "report", "all"};
    std::map<std::string, CLI::App*> subs;
    for (const auto& name : stage_names)
        subs[name] = app.add_subcommand(name, "Run the '" + name + "' stage");
    for (const char* name : {"adapt", "adapt-online", "all"}) {
        CLI::App* sc = subs[name];
        sc->add_option("--rounds", rounds, "Self-training rounds");
        sc->add_option("--retain-fraction", retain_fraction,
                       "Per-class retained confidence fraction");
        sc->add_option("--lambda-ent", lambda_ent, "Entropy regularizer weight");
        sc->add_flag("--use-cpae,!--no-cpae", use_cpae,
                     "Refine pseudo-labels with the denoising autoencoder");
        sc->add_flag("--infer-with-cpae,!--no-infer-with-cpae", infer_with_cpae,
                     "Also report refined inference in evaluation");
    }
    std::string report_dir;
    subs["report"]->add_option("--run-dir", report_dir,
                               "Run directory (or root of several runs); defaults to the "
                               "config's output_dir");

    CLI11_PARSE(app, argc, argv);

    try {
        const std::string chosen = app.get_subcommands().at(0)->get_name();

        if (chosen == "report" && !report_dir.empty()) {
            cli::write_reports(report_dir);
            return 0;
        }

        if (config_path.empty()) throw ConfigError("--config is required");
        cli::ExperimentConfig cfg = cli::ExperimentConfig::load(config_path);
        if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (rounds > 0) cfg.adaptation.rounds = rounds;
        if (retain_fraction > 0) cfg.adaptation.retain_fraction = retain_fraction;
        if (lambda_ent >= 0) cfg.adaptation.lambda_ent = lambda_ent;
        if (use_cpae >= 0) cfg.adaptation.use_cpae = use_cpae > 0;
        if (infer_with_cpae >= 0) cfg.adaptation.infer_with_cpae = infer_with_cpae > 0;
        cfg.validate();

        std::vector<cli::Stage> stages;
        if (chosen == "all") stages = cli::all_stages(cfg);
        else stages = {cli::stage_from_name(chosen)};
        return cli::run(cfg, stages, resume);
    } catch (const DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
