#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sfda/cli/report.hpp"
#include "sfda/cli/stages.hpp"
#include "sfda/core/io.hpp"

using namespace sfda;
using namespace sfda::cli;
namespace fs = std::filesystem;

namespace {

// Micro config: everything tiny so a full pipeline runs in seconds.
ExperimentConfig micro_config(const fs::path& out_dir, uint64_t seed = 3) {
    ExperimentConfig c;
    c.seed = seed;
    c.output_dir = out_dir.string();
    c.routing = soman::Routing::LOpp;
    c.data.spec.num_classes = 6;
    c.data.spec.height = 32;
    c.data.spec.width = 48;
    c.data.source_train = 14;
    c.data.source_val = 6;
    c.data.target_train = 8;
    c.data.target_test = 6;
    c.data.target_gamma = 0.4;
    c.candidates.tau = 0.02;  // micro training: keep several candidates viable
    c.candidates.k_cap = 3;
    c.training.baseline.iters = 30;
    c.training.baseline.batch_size = 2;
    c.training.vendor.iters = 40;
    c.training.vendor.batch_size = 2;
    c.training.cpae.iters = 25;
    c.training.cpae.batch_size = 2;
    c.adaptation.rounds = 2;
    c.adaptation.steps_per_round = 10;
    c.adaptation.batch_size = 2;
    c.adaptation.use_cpae = true;
    c.eval.scales = {1.0};
    c.eval.class_groups = {{"BG", {0, 1, 2, 3}}, {"OBJ", {4, 5}}};
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config json round trip, strict fields, and field-named errors") {
    ExperimentConfig c = micro_config("/tmp/x");
    json j = c.to_json();
    ExperimentConfig back = ExperimentConfig::from_json(j);
    CHECK(back.to_json() == j);

    json bad = j;
    bad["surprise"] = 1;
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(bad), doctest::Contains("surprise"),
                         ConfigError);
    json bad2 = j;
    bad2["adaptation"]["retain_fraction"] = 1.5;
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(bad2),
                         doctest::Contains("retain_fraction"), ConfigError);
    json bad3 = j;
    bad3["data"]["bogus_knob"] = 7;
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(bad3), doctest::Contains("bogus_knob"),
                         ConfigError);

    // cPAE refinement only makes sense with LO++ vendor models.
    json bad4 = j;
    bad4["routing"] = "ERM";
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad4), ConfigError);
}

TEST_CASE("config hash ignores output location but tracks content") {
    ExperimentConfig a = micro_config("/tmp/a");
    ExperimentConfig b = micro_config("/tmp/b");
    b.threads = 1;
    CHECK(a.config_hash() == b.config_hash());
    ExperimentConfig c = micro_config("/tmp/a", 4);
    CHECK(a.config_hash() != c.config_hash());
}

TEST_CASE("full micro pipeline: stages, manifest, resume, reports, reproducibility") {
    const fs::path root = fs::temp_directory_path() / "sfda_cli_run";
    fs::remove_all(root);
    ExperimentConfig cfg = micro_config(root / "run1");
    run(cfg, all_stages(cfg), false);

    RunPaths paths{root / "run1"};
    CHECK(fs::exists(paths.checkpoint("baseline")));
    CHECK(fs::exists(paths.checkpoint("vendor")));
    CHECK(fs::exists(paths.checkpoint("cpae")));
    CHECK(fs::exists(paths.checkpoint("adapted")));
    CHECK(fs::exists(paths.report("metrics.json")));
    CHECK(fs::exists(paths.report("selection.json")));
    CHECK_FALSE(fs::exists(paths.lock()));  // released
    verify_manifest(root / "run1");

    // The adapted checkpoint records its lineage stages.
    soman::SomanModel adapted = soman::load_model(paths.checkpoint("adapted"));
    bool has_vendor = false, has_adapt = false;
    for (const auto& line : adapted.lineage) {
        has_vendor |= line.rfind("vendor:", 0) == 0;
        has_adapt |= line.rfind("adapt:", 0) == 0;
    }
    CHECK(has_vendor);
    CHECK(has_adapt);

    // Resume: a second invocation skips everything and changes nothing.
    const auto mtime = fs::last_write_time(paths.checkpoint("vendor"));
    run(cfg, all_stages(cfg), true);
    CHECK(fs::last_write_time(paths.checkpoint("vendor")) == mtime);

    // Reproducibility: a fresh run with the same config/seed produces a
    // byte-identical metrics report (modulo the config hash they share).
    ExperimentConfig cfg2 = micro_config(root / "run2");
    run(cfg2, all_stages(cfg2), false);
    CHECK(slurp(paths.report("metrics.json")) ==
          slurp(RunPaths{root / "run2"}.report("metrics.json")));

    // Report emission.
    run(cfg, {Stage::Report}, false);
    CHECK(fs::exists(paths.report("plots") / "risk_gaps.svg"));
    CHECK(fs::exists(paths.report("plots") / "adapt_rounds.svg"));
    CHECK(fs::exists(paths.report("head_mious.csv")));

    fs::remove_all(root);
}

TEST_CASE("missing stage inputs raise dependency errors that name the artifact") {
    const fs::path root = fs::temp_directory_path() / "sfda_cli_dep";
    fs::remove_all(root);
    ExperimentConfig cfg = micro_config(root);
    CHECK_THROWS_WITH_AS(run(cfg, {Stage::Adapt}, false), doctest::Contains("vendor"),
                         DependencyError);
    fs::remove_all(root);
}

TEST_CASE("the source-free contract: adaptation succeeds with source data deleted") {
    const fs::path root = fs::temp_directory_path() / "sfda_cli_srcfree";
    fs::remove_all(root);
    ExperimentConfig cfg = micro_config(root, 5);
    // Prepare everything up to the vendor artifacts.
    run(cfg, {Stage::Generate, Stage::SelectAgs, Stage::VendorTrain, Stage::CpaeTrain}, false);

    // Client side: the source datasets are gone.
    fs::remove_all(root / "data" / "source_train");
    fs::remove_all(root / "data" / "source_val");
    run(cfg, {Stage::Adapt}, false);
    CHECK(fs::exists(RunPaths{root}.checkpoint("adapted")));
    fs::remove_all(root);
}

TEST_CASE("concurrent runs on one directory are refused via the lock file") {
    const fs::path root = fs::temp_directory_path() / "sfda_cli_lock";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / ".lock") << "held\n";
    ExperimentConfig cfg = micro_config(root);
    CHECK_THROWS_AS(run(cfg, {Stage::Generate}, false), ConfigError);
    fs::remove_all(root);
}

TEST_CASE("a run directory refuses configs with a different hash") {
    const fs::path root = fs::temp_directory_path() / "sfda_cli_mix";
    fs::remove_all(root);
    ExperimentConfig cfg = micro_config(root, 6);
    run(cfg, {Stage::Generate}, false);
    ExperimentConfig other = micro_config(root, 7);
    CHECK_THROWS_AS(run(other, {Stage::SelectAgs}, false), ConfigError);
    fs::remove_all(root);
}

}  // TEST_SUITE
