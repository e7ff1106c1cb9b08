#pragma once

#include <functional>
#include <map>
#include <vector>

#include "sfda/augment/ag.hpp"
#include "sfda/nn/optim.hpp"
#include "sfda/soman/model.hpp"
#include "sfda/synthdata/dataset.hpp"

namespace sfda::soman {

struct TrainConfig {
    long iters = 900;
    int batch_size = 4;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double poly_power = 0.9;
    uint64_t seed = 1;
    long log_every = 50;
};

// One optimizer step's routing record: which augmentation was drawn and the
// loss computed at each head that was trained.
struct StepRecord {
    long step = 0;
    int drawn_index = 0;          // 1..K for a drawn head slot, 0 when none
    int drawn_ag_id = 0;          // bound AG id, 0 when the batch was raw
    std::map<int, double> head_losses;
    double lr = 0.0;
};

// Inverse-sqrt-frequency class weights, normalized to mean 1 over classes
// present in the dataset; absent classes get weight 0.
std::vector<float> class_weights_from(const synth::Dataset& ds, int num_classes);

// Vendor-side trainer. Each head slot owns its optimizer instance; the
// backbone is updated once per step from the summed routed loss, so a head
// that is excluded from a step is untouched (parameters and momentum alike).
class VendorTrainer {
public:
    VendorTrainer(SomanModel& model, const aug::AugContext& aug_ctx,
                  std::vector<aug::AugmentationGroup> aug_pool, TrainConfig cfg);

    // Runs one routed step on the given sample indices of `data`.
    StepRecord step(const synth::Dataset& data, const std::vector<int>& batch_indices,
                    uint64_t step_seed);

    long steps_done() const { return steps_; }
    const TrainConfig& config() const { return cfg_; }

private:
    SomanModel& model_;
    aug::AugContext aug_ctx_;
    std::vector<aug::AugmentationGroup> pool_;
    TrainConfig cfg_;
    nn::SgdMomentum<float> opt_backbone_;
    std::vector<nn::SgdMomentum<float>> opt_heads_;
    long steps_ = 0;
};

using ProgressFn = std::function<void(long step, const StepRecord&)>;

// Full vendor loop: shuffled mini-batches, polynomial LR decay, per-step
// routing per the model's configuration. Returns the step records.
std::vector<StepRecord> vendor_train(SomanModel& model, const synth::Dataset& source_train,
                                     const aug::AugContext& aug_ctx,
                                     const std::vector<aug::AugmentationGroup>& aug_pool,
                                     const TrainConfig& cfg, const ProgressFn& progress = {});

}  // namespace sfda::soman
