#pragma once

#include <filesystem>
#include <optional>

#include "sfda/core/checkpoint.hpp"
#include "sfda/core/image.hpp"
#include "sfda/soman/model.hpp"

namespace sfda::cpae {

// Denoising autoencoder over soft seg-maps, conditioned on domain-generic
// backbone features: stride-2 encoder, four parallel dilated fusion branches
// (dilations 2/4/8/16) summed into a tanh bottleneck, transpose-conv decoder.
class CpaeModel {
public:
    CpaeModel() = default;
    CpaeModel(int num_classes, int feature_channels, int feature_downsample,
              uint64_t init_seed);

    int num_classes() const { return num_classes_; }
    int feature_channels() const { return feat_c_; }
    int feature_downsample() const { return feat_ds_; }

    std::vector<nn::ParamRef<float>> params();

    // Batched probability-map refinement: noisy soft maps at input resolution
    // plus conditioning features at backbone resolution -> logits at input
    // resolution.
    nn::Tensor4<float> forward_logits(const nn::Tensor4<float>& noisy,
                                      const nn::Tensor4<float>& feats);

    // Backward from dlogits; accumulates parameter gradients. Gradients are
    // not propagated into the conditioning features (the segmentation model
    // stays out of the autoencoder's backpropagation).
    void backward(const nn::Tensor4<float>& dlogits);

private:
    int num_classes_ = 0;
    int feat_c_ = 0;
    int feat_ds_ = 4;

    // encoder
    nn::Conv2d<float> e1_, e2_, e3_, e4_;
    nn::LeakyReLU<float> a1_{0.1f}, a2_{0.1f}, a3_{0.1f}, a4_{0.1f};
    // fusion
    std::vector<nn::Conv2d<float>> dilated_;
    nn::Conv2d<float> bottleneck_;
    nn::Tanh<float> tanh_;
    // decoder
    nn::Conv2d<float> d1_, d2_, d3_, d5_, d7_;
    nn::ConvTranspose2d<float> d4_, d6_;
    nn::ReLU<float> r1_;
    nn::LeakyReLU<float> r2_{0.1f}, r3_{0.1f}, r4_{0.1f}, r5_{0.1f}, r6_{0.1f};
    nn::BilinearResize<float> up_;

    // cached shapes for backward
    int concat_feat_c_ = 0;
    nn::Tensor4<float> concat_cache_;
    bool up_used_ = false;

    friend void save_cpae(const std::filesystem::path&, CpaeModel&, const std::string&);
};

// Instrumentation hook: total number of forward passes through any CpaeModel.
long forward_call_count();

// Single-map convenience wrapper (softmax applied).
ProbMap cpae_forward(CpaeModel& q, const ProbMap& noisy, const soman::FeatureMap& feats);

// Exactly one forward application; the pipeline never iterates refinement.
ProbMap refine(CpaeModel& q, const ProbMap& prob, const soman::FeatureMap& feats);

void save_cpae(const std::filesystem::path& path, CpaeModel& model,
               const std::string& config_hash);
CpaeModel load_cpae(const std::filesystem::path& path,
                    std::optional<std::string> expect_hash = std::nullopt);

// Refuses to pair a checkpointed autoencoder with a model whose feature
// geometry differs from the one recorded at save time.
void check_feature_compat(const CpaeModel& q, const soman::SomanModel& model);

}  // namespace sfda::cpae
