#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sfda/core/image.hpp"
#include "sfda/soman/model.hpp"
#include "sfda/synthdata/dataset.hpp"

namespace sfda::eval {

// Pooled intersection/union counts. Ground-truth UNKNOWN pixels are excluded
// entirely; a predicted UNKNOWN counts against the ground-truth class.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes);

    void add(const SegMap& pred, const SegMap& gt);
    void merge(const ConfusionMatrix& other);

    int num_classes() const { return c_; }
    long counted_pixels() const { return counted_; }
    long long intersection(int c) const { return inter_[c]; }
    long long pred_count(int c) const { return pred_[c]; }
    long long gt_count(int c) const { return gt_[c]; }

private:
    int c_;
    long counted_ = 0;
    std::vector<long long> inter_, pred_, gt_;
};

struct MetricsReport {
    std::vector<double> per_class_iou;  // NaN when the class union is empty
    double miou = 0.0;                  // mean over classes present in GT
    std::map<std::string, double> group_mious;
    double avg_entropy = std::numeric_limits<double>::quiet_NaN();
    double pixel_accuracy = 0.0;
    long counted_pixels = 0;

    double empirical_risk() const { return 1.0 - miou; }

    nlohmann::json to_json() const;
    std::string to_csv() const;  // numbers rendered identically to the JSON
};

std::vector<double> per_class_iou(const SegMap& pred, const SegMap& gt, int num_classes);

MetricsReport aggregate(const ConfusionMatrix& cm);

using ClassGroups = std::map<std::string, std::vector<int>>;

std::map<std::string, double> group_miou(const MetricsReport& report, const ClassGroups& groups);

// Default ToyScapes grouping.
ClassGroups toyscapes_groups();

// Per-pixel self-entropy (natural log, 0*log 0 = 0).
std::vector<float> entropy_map(const ProbMap& prob);

// Forward at several scales, resize the probability maps back, average and
// renormalize.
ProbMap multiscale_infer(soman::SomanModel& model, int head, const Image& image,
                         const std::vector<double>& scales);

// Dataset-level evaluation of one head (optionally multi-scale), pooling a
// confusion matrix and averaging prediction entropy.
MetricsReport evaluate_model(soman::SomanModel& model, int head, const synth::Dataset& data,
                             const ClassGroups& groups = {},
                             const std::vector<double>& scales = {1.0});

// Metrics of stored predictions vs stored ground truth.
MetricsReport evaluate_predictions(const std::vector<SegMap>& preds,
                                   const std::vector<SegMap>& gts, int num_classes,
                                   const ClassGroups& groups = {});

}  // namespace sfda::eval
