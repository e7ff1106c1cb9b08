#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sfda/cli/config.hpp"

namespace sfda::cli {

enum class Stage {
    Generate,
    SelectAgs,
    VendorTrain,
    CpaeTrain,
    Adapt,
    Evaluate,
    AdaptOnline,
    Report,
};

std::string stage_name(Stage s);
Stage stage_from_name(const std::string& name);

// `all` = generate .. evaluate (cpae-train only under LO++ routing).
std::vector<Stage> all_stages(const ExperimentConfig& cfg);

struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path lock() const { return root / ".lock"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }
    std::filesystem::path config() const { return root / "config.json"; }
    std::filesystem::path data(const std::string& name) const { return root / "data" / name; }
    std::filesystem::path checkpoint(const std::string& name) const {
        return root / "checkpoints" / (name + ".ckpt");
    }
    std::filesystem::path report(const std::string& name) const {
        return root / "reports" / name;
    }
};

// Executes the requested stages in order. Completed stages (matching config
// hash, outputs present) are skipped when `resume` is set. One run owns its
// output directory via a lock file.
int run(const ExperimentConfig& cfg, const std::vector<Stage>& stages, bool resume);

// Manifest invariant check: every referenced checkpoint exists and carries
// the manifest's config hash.
void verify_manifest(const std::filesystem::path& run_dir);

}  // namespace sfda::cli
