#pragma once

#include "sfda/augment/ag.hpp"
#include "sfda/cpae/model.hpp"
#include "sfda/soman/train.hpp"

namespace sfda::cpae {

struct NoisyPair {
    ProbMap noisy;
    soman::FeatureMap features;
    SegMap clean;
    int drawn_head = 0;
};

// Simulates a noisy seg-map for one labeled sample: draw an AG uniformly,
// transform the image, read the prediction of the head that is sensitive to
// that AG (the one trained without it), and take the conditioning features
// from the same forward pass.
NoisyPair make_noisy_pair(soman::SomanModel& soman, const std::vector<aug::AugmentationGroup>& ags,
                          const aug::AugContext& ctx, const synth::LabeledSample& sample,
                          uint64_t rng_seed);

struct CpaeTrainConfig {
    long iters = 600;
    int batch_size = 4;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double poly_power = 0.9;
    uint64_t seed = 1;
};

struct CpaeTrainStats {
    std::vector<double> losses;  // one CE value per step
};

// Denoising training against the frozen segmentation model: per step, draw an
// AG, generate noisy maps and features for the batch, minimize per-pixel CE
// between the refined output and the clean labels. The segmentation model's
// parameters are never updated.
CpaeTrainStats cpae_train(CpaeModel& q, soman::SomanModel& soman,
                          const std::vector<aug::AugmentationGroup>& ags,
                          const aug::AugContext& ctx, const synth::Dataset& source_train,
                          const CpaeTrainConfig& cfg);

}  // namespace sfda::cpae
