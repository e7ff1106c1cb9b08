#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sfda/adapt/adapt.hpp"
#include "sfda/augment/ag.hpp"
#include "sfda/cpae/train.hpp"
#include "sfda/eval/metrics.hpp"
#include "sfda/soman/train.hpp"
#include "sfda/synthdata/domain_spec.hpp"

namespace sfda::cli {

struct DataConfig {
    synth::DomainSpec spec = synth::toyscapes_base();
    int source_train = 500;
    int source_val = 100;
    int target_train = 300;
    int target_test = 100;
    double target_gamma = 0.4;
    std::vector<double> target_injected;  // empty -> drawn from target_shift_seed
    int64_t target_shift_seed = 11;
};

struct CandidateConfig {
    std::vector<aug::AugmentationGroup> ags = aug::standard_candidates();
    double tau = 0.25;
    int k_cap = 5;
};

struct StageTrainConfig {
    soman::TrainConfig baseline;
    soman::TrainConfig vendor;
    cpae::CpaeTrainConfig cpae;

    StageTrainConfig() {
        baseline.iters = 700;
        baseline.lr = 0.06;
        baseline.log_every = 100;
        vendor.iters = 900;
        vendor.lr = 0.05;
        vendor.log_every = 100;
        cpae.iters = 600;
        cpae.lr = 0.05;
    }
};

struct AdaptationConfig {
    int rounds = 3;
    double retain_fraction = 0.34;
    double lambda_ent = 0.005;
    bool use_cpae = true;
    bool infer_with_cpae = false;
    long steps_per_round = 150;
    int batch_size = 4;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double poly_power = 0.9;
};

struct EvalConfig {
    std::vector<double> scales = {0.75, 1.0, 1.25};
    eval::ClassGroups class_groups = eval::toyscapes_groups();
};

// Online re-adaptation target (optional config section).
struct OnlineConfig {
    double gamma = 0.4;
    std::vector<double> injected;
    int64_t shift_seed = 23;
    int target_train = 300;
    int target_test = 100;
};

struct ExperimentConfig {
    uint64_t seed = 1;
    std::string output_dir = "runs/default";
    DataConfig data;
    CandidateConfig candidates;
    soman::Routing routing = soman::Routing::LOpp;
    std::string style_ref_dir;  // empty -> bundled assets next to the binary
    StageTrainConfig training;
    AdaptationConfig adaptation;
    EvalConfig eval;
    std::optional<OnlineConfig> online;
    int threads = 0;  // 0 -> library default

    void validate() const;
    nlohmann::json to_json() const;  // canonical: every field materialized
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);

    std::string config_hash() const;  // sha256 of the canonical JSON
};

}  // namespace sfda::cli
