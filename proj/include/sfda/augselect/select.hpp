#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sfda/augment/ag.hpp"
#include "sfda/soman/train.hpp"

namespace sfda::augsel {

// Risk-gap screening of augmentation candidates against a single-source
// baseline: a candidate is admitted when the empirical-risk gap (mIoU drop)
// it induces on the frozen baseline exceeds tau.
struct CandidateResult {
    int ag_id = 0;
    std::string name;
    double baseline_miou = 0.0;  // clean validation mIoU
    double augmented_miou = 0.0;
    double risk_gap = 0.0;       // baseline_miou - augmented_miou
    bool selected = false;
};

struct SelectionReport {
    std::vector<CandidateResult> candidates;
    double tau = 0.25;
    std::vector<int> diversity_order;  // ag ids, descending risk gap

    nlohmann::json to_json() const;
    static SelectionReport from_json(const nlohmann::json& j);
    std::string to_table() const;

    // Top-k selected ids in diversity order (k <= selected count).
    std::vector<int> top_selected(int k_cap) const;
};

// Standard single-source model: backbone plus one head, class-weighted CE on
// unaugmented source data.
soman::SomanModel train_baseline(const synth::Dataset& source_train,
                                 const soman::ArchConfig& arch,
                                 const soman::TrainConfig& cfg);

// mIoU(clean val) - mIoU(candidate-transformed val), candidate applied
// per-sample under seeds derived from `seed`.
double risk_gap(soman::SomanModel& baseline, const aug::AugmentationGroup& ag,
                const synth::Dataset& source_val, const aug::AugContext& ctx, uint64_t seed);

SelectionReport select_augmentations(soman::SomanModel& baseline,
                                     const std::vector<aug::AugmentationGroup>& candidates,
                                     const synth::Dataset& source_val,
                                     const aug::AugContext& ctx, double tau, uint64_t seed);

}  // namespace sfda::augsel
