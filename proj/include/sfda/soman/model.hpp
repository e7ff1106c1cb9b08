#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sfda/core/checkpoint.hpp"
#include "sfda/core/image.hpp"
#include "sfda/soman/net.hpp"

namespace sfda::soman {

enum class Routing { ERM, DEpp, LOpp };

std::string routing_to_string(Routing r);
Routing routing_from_string(const std::string& s);

inline constexpr int kHeadGlobal = 0;

using FeatureMap = nn::Tensor4<float>;

// Multi-head segmentation model: shared backbone, global head, K leave-one-
// out heads, plus the metadata that binds heads to augmentation groups.
struct SomanModel {
    SegNet<float> net;
    Routing routing = Routing::ERM;
    std::vector<int> ag_ids;            // length K; ag_ids[i-1] pairs with head i
    std::vector<float> class_weights;   // length C
    std::vector<std::string> lineage;   // provenance of training stages

    int k() const { return net.num_loo_heads(); }
    int num_classes() const { return net.arch().num_classes; }
    int unknown_id() const { return num_classes(); }

    void validate() const;
};

SomanModel make_model(const ArchConfig& arch, Routing routing, std::vector<int> ag_ids,
                      uint64_t init_seed);

// Single-head baseline (K = 0, ERM routing).
SomanModel make_baseline(const ArchConfig& arch, uint64_t init_seed);

// New model whose backbone and every head start from the baseline's weights.
SomanModel make_from_baseline(const SomanModel& baseline, Routing routing,
                              std::vector<int> ag_ids);

// Softmax prediction of one head at input resolution.
ProbMap forward(SomanModel& model, const Image& image, int head);

// Activation after the first block of the global head (domain-generic
// features at backbone resolution).
FeatureMap forward_features(SomanModel& model, const Image& image);

// Batched variants used by the dataset-level loops.
nn::Tensor4<float> forward_logits_batch(SomanModel& model, const nn::Tensor4<float>& images,
                                        int head);
nn::Tensor4<float> forward_features_batch(SomanModel& model, const nn::Tensor4<float>& images);

nn::Tensor4<float> pack_images(const std::vector<const Image*>& images);
ProbMap probmap_from_tensor(const nn::Tensor4<float>& t, int sample);

// Checkpoint container (shared with the autoencoder; model_kind tells them
// apart). config_hash binds the file to the producing run.
void save_model(const std::filesystem::path& path, SomanModel& model,
                const std::string& config_hash);
SomanModel load_model(const std::filesystem::path& path,
                      std::optional<std::string> expect_hash = std::nullopt);

}  // namespace sfda::soman
