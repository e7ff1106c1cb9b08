#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "sfda/cpae/model.hpp"
#include "sfda/soman/model.hpp"
#include "sfda/synthdata/dataset.hpp"

namespace sfda::adapt {

// Per-class confidence cutoffs; index floor((1 - retain_fraction) * N) of the
// ascending per-class confidence sort. Empty classes get an unreachable
// sentinel so nothing is retained.
struct ThresholdVector {
    std::vector<double> t;
    double retain_fraction = 0.34;

    nlohmann::json to_json() const;
};

ThresholdVector compute_class_thresholds(const std::vector<std::vector<float>>& confidences,
                                         double retain_fraction);

// Pseudo-labeled target subset plus the provenance that produced it.
struct PseudoLabelDataset {
    std::vector<SegMap> labels;  // parallel to the target dataset, UNKNOWN allowed
    int head = 0;
    bool used_cpae = false;
    int round_index = 0;
    ThresholdVector thresholds;
    std::vector<long> predicted_per_class;
    std::vector<long> retained_per_class;

    double realized_fraction(int c) const {
        return predicted_per_class[c] > 0
                   ? static_cast<double>(retained_per_class[c]) / predicted_per_class[c]
                   : 0.0;
    }
    nlohmann::json provenance_json() const;
};

// Mean (over images) of the mean per-pixel self-entropy of one head.
double average_self_entropy(soman::SomanModel& model, int head, const synth::Dataset& target);

// argmin of average_self_entropy over {global, 1..K}; ties prefer the global
// head, then the lowest index.
int select_optimal_head(soman::SomanModel& model, const synth::Dataset& target);

// Two-pass extraction over the whole target set; pass 1 collects per-pixel
// (argmax, confidence), thresholds are global, pass 2 writes UNKNOWN wherever
// confidence < t[class]. When `q` is given every prediction is refined first.
PseudoLabelDataset extract_pseudo_labels(soman::SomanModel& model, int head, cpae::CpaeModel* q,
                                         const synth::Dataset& target, double retain_fraction,
                                         int round_index = 0);

struct SelfTrainConfig {
    long steps = 150;
    int batch_size = 4;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double poly_power = 0.9;
    double lambda_ent = 0.005;
    uint64_t seed = 1;
};

struct RoundReport {
    int round = 0;
    int head = 0;
    double avg_self_entropy = 0.0;
    double mean_retained_fraction = 0.0;
    std::vector<double> realized_fractions;
    double pseudo_miou = std::numeric_limits<double>::quiet_NaN();  // vs GT when known
    double mean_ce = 0.0;
    double mean_ent_term = 0.0;

    nlohmann::json to_json() const;
};

// One round of partial-backbone self-training on pseudo-labels: only the last
// backbone block trains; heads and earlier blocks stay bit-identical.
void self_train_round(soman::SomanModel& model, int head, const synth::Dataset& target,
                      const PseudoLabelDataset& plabels, const SelfTrainConfig& cfg,
                      RoundReport& report);

struct AdaptConfig {
    int rounds = 3;
    double retain_fraction = 0.34;
    bool use_cpae = true;
    SelfTrainConfig train;
};

struct AdaptReport {
    int optimal_head = 0;
    std::vector<RoundReport> rounds;

    nlohmann::json to_json() const;
};

// Full client-side adaptation. The optimal head is chosen on the incoming
// model in round 1 and kept fixed. The target dataset's labels, when present,
// are used only to report pseudo-label quality.
AdaptReport adapt(soman::SomanModel& model, cpae::CpaeModel* q, const synth::Dataset& target_train,
                  const AdaptConfig& cfg, const std::string& lineage_tag = "target");

// Re-runs the procedure on a new target from an already-adapted checkpoint;
// head selection is redone for the new target and lineage is extended.
AdaptReport adapt_online(soman::SomanModel& model, cpae::CpaeModel* q,
                         const synth::Dataset& new_target_train, const AdaptConfig& cfg,
                         const std::string& lineage_tag = "target-online");

// Pseudo-label persistence: same raster layout as ordinary datasets plus a
// provenance file.
void save_pseudo_labels(const std::filesystem::path& dir, const synth::Dataset& target,
                        const PseudoLabelDataset& plabels);

}  // namespace sfda::adapt
