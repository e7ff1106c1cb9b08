#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sfda/core/errors.hpp"
#include "sfda/nn/layers.hpp"
#include "sfda/nn/loss.hpp"

namespace sfda::soman {

// Backbone block plan: out channels + stride of the first conv; every block
// has two 3x3 convs. Heads are one 3x3 conv block plus a 1x1 classifier.
struct ArchConfig {
    int in_channels = 3;
    std::vector<std::pair<int, int>> blocks = {{32, 1}, {64, 2}, {96, 2}, {96, 1}};
    int head_channels = 96;
    int num_classes = 8;

    int downsample() const {
        int d = 1;
        for (auto& [ch, s] : blocks) d *= s;
        return d;
    }
    int feature_channels() const { return head_channels; }

    nlohmann::json to_json() const {
        nlohmann::json jb = nlohmann::json::array();
        for (auto& [ch, s] : blocks) jb.push_back({ch, s});
        return {{"in_channels", in_channels},
                {"blocks", jb},
                {"head_channels", head_channels},
                {"num_classes", num_classes}};
    }
    static ArchConfig from_json(const nlohmann::json& j) {
        ArchConfig a;
        a.in_channels = j.at("in_channels").get<int>();
        a.blocks.clear();
        for (const auto& b : j.at("blocks"))
            a.blocks.emplace_back(b.at(0).get<int>(), b.at(1).get<int>());
        a.head_channels = j.at("head_channels").get<int>();
        a.num_classes = j.at("num_classes").get<int>();
        return a;
    }

    // A tiny two-block double-precision variant for finite-difference tests.
    static ArchConfig tiny(int num_classes) {
        ArchConfig a;
        a.blocks = {{6, 1}, {8, 2}};
        a.head_channels = 8;
        a.num_classes = num_classes;
        return a;
    }
};

template <typename T>
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(int in_c, int out_c, int stride) {
        convs_.emplace_back(in_c, out_c, 3, stride, 1);
        convs_.emplace_back(out_c, out_c, 3, 1, 1);
        relus_.resize(2);
    }

    void init(Pcg32& rng) {
        for (auto& c : convs_) c.init_he(rng);
    }

    void collect(std::vector<nn::ParamRef<T>>& out, const std::string& prefix) {
        for (size_t i = 0; i < convs_.size(); ++i)
            convs_[i].collect(out, prefix + ".conv" + std::to_string(i));
    }

    nn::Tensor4<T> forward(const nn::Tensor4<T>& x) {
        nn::Tensor4<T> h = x;
        for (size_t i = 0; i < convs_.size(); ++i)
            h = relus_[i].forward(convs_[i].forward(h));
        return h;
    }

    nn::Tensor4<T> backward(const nn::Tensor4<T>& gy) {
        nn::Tensor4<T> g = gy;
        for (size_t i = convs_.size(); i-- > 0;)
            g = convs_[i].backward(relus_[i].backward(g));
        return g;
    }

private:
    std::vector<nn::Conv2d<T>> convs_;
    std::vector<nn::ReLU<T>> relus_;
};

// Output head: one conv block (single 3x3 conv + ReLU) and a 1x1 classifier.
// Logits are bilinearly upsampled to the requested resolution by the caller.
template <typename T>
class Head {
public:
    Head() = default;
    Head(int in_c, int mid_c, int num_classes)
        : block_(in_c, mid_c, 3, 1, 1), classifier_(mid_c, num_classes, 1, 1, 0) {}

    void init(Pcg32& rng) {
        block_.init_he(rng);
        classifier_.init_he(rng);
    }

    void collect(std::vector<nn::ParamRef<T>>& out, const std::string& prefix) {
        block_.collect(out, prefix + ".block");
        classifier_.collect(out, prefix + ".classifier");
    }

    // Feature hook: activation after the head's conv block.
    nn::Tensor4<T> forward_block(const nn::Tensor4<T>& feats) {
        return relu_.forward(block_.forward(feats));
    }

    nn::Tensor4<T> forward_logits(const nn::Tensor4<T>& feats, int out_h, int out_w) {
        nn::Tensor4<T> z = classifier_.forward(forward_block(feats));
        up_.set_output(out_h, out_w);
        return up_.forward(z);
    }

    nn::Tensor4<T> backward_logits(const nn::Tensor4<T>& gy) {
        nn::Tensor4<T> g = up_.backward(gy);
        g = classifier_.backward(g);
        return block_.backward(relu_.backward(g));
    }

private:
    nn::Conv2d<T> block_;
    nn::ReLU<T> relu_;
    nn::Conv2d<T> classifier_;
    nn::BilinearResize<T> up_;
};

// Shared backbone F, global head (index 0) and K leave-one-out heads (1..K).
template <typename T>
class SegNet {
public:
    SegNet() = default;
    SegNet(const ArchConfig& arch, int num_loo_heads) : arch_(arch) {
        int in_c = arch.in_channels;
        for (auto& [out_c, stride] : arch.blocks) {
            blocks_.emplace_back(in_c, out_c, stride);
            in_c = out_c;
        }
        for (int i = 0; i <= num_loo_heads; ++i)
            heads_.emplace_back(in_c, arch.head_channels, arch.num_classes);
    }

    const ArchConfig& arch() const { return arch_; }
    int num_heads() const { return static_cast<int>(heads_.size()); }
    int num_loo_heads() const { return num_heads() - 1; }

    void init(uint64_t seed) {
        Pcg32 rng(mix64(seed, 0x5e6d), 0x1517);
        for (auto& b : blocks_) b.init(rng);
        for (auto& h : heads_) h.init(rng);
    }

    std::vector<nn::ParamRef<T>> backbone_params() {
        std::vector<nn::ParamRef<T>> out;
        for (size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i].collect(out, "backbone.block" + std::to_string(i));
        return out;
    }

    std::vector<nn::ParamRef<T>> block_params(int block_index) {
        std::vector<nn::ParamRef<T>> out;
        blocks_.at(block_index).collect(out, "backbone.block" + std::to_string(block_index));
        return out;
    }

    std::vector<nn::ParamRef<T>> head_params(int head) {
        std::vector<nn::ParamRef<T>> out;
        heads_.at(head).collect(out, head_name(head));
        return out;
    }

    std::vector<nn::ParamRef<T>> all_params() {
        std::vector<nn::ParamRef<T>> out = backbone_params();
        for (int h = 0; h < num_heads(); ++h) {
            auto hp = head_params(h);
            out.insert(out.end(), hp.begin(), hp.end());
        }
        return out;
    }

    std::string head_name(int head) const {
        return head == 0 ? std::string("head.global") : "head.loo" + std::to_string(head);
    }

    int num_blocks() const { return static_cast<int>(blocks_.size()); }

    // ---- forward/backward plumbing (training caches live in the layers) ----

    nn::Tensor4<T> backbone_forward(const nn::Tensor4<T>& x) {
        nn::Tensor4<T> h = x;
        for (auto& b : blocks_) h = b.forward(h);
        return h;
    }

    // Backward through the backbone; `down_to` stops after that block index
    // (use 0 for a full pass). Gradients accumulate into the conv buffers.
    void backbone_backward(const nn::Tensor4<T>& gfeats, int down_to = 0) {
        nn::Tensor4<T> g = gfeats;
        for (int i = num_blocks(); i-- > down_to;) {
            g = blocks_[i].backward(g);
            if (i == down_to) break;
        }
    }

    Head<T>& head(int idx) { return heads_.at(idx); }

    nn::Tensor4<T> head_logits(int head, const nn::Tensor4<T>& feats, int out_h, int out_w) {
        return heads_.at(head).forward_logits(feats, out_h, out_w);
    }

private:
    ArchConfig arch_;
    std::vector<ConvBlock<T>> blocks_;
    std::vector<Head<T>> heads_;
};

// Sum of the routed class-weighted CE terms for one step draw: global head
// plus, under leave-one-out routing, every non-global head except the drawn
// one. Pure evaluation; used directly by the finite-difference oracle.
template <typename T>
double composite_loss(SegNet<T>& net, const nn::Tensor4<T>& images,
                      const std::vector<uint8_t>& labels, const std::vector<T>& class_weights,
                      const std::vector<int>& routed_heads, int ignore_id) {
    nn::Tensor4<T> feats = net.backbone_forward(images);
    double total = 0.0;
    for (int hd : routed_heads) {
        nn::Tensor4<T> logits = net.head_logits(hd, feats, images.h, images.w);
        auto ce = nn::softmax_cross_entropy(logits, labels, class_weights, ignore_id,
                                            /*want_grad=*/false);
        total += ce.loss;
    }
    return total;
}

// Same routing, with gradient accumulation into every touched parameter and
// the backbone. Returns per-head losses in routed order.
template <typename T>
std::vector<double> composite_loss_backward(SegNet<T>& net, const nn::Tensor4<T>& images,
                                            const std::vector<uint8_t>& labels,
                                            const std::vector<T>& class_weights,
                                            const std::vector<int>& routed_heads,
                                            int ignore_id) {
    nn::Tensor4<T> feats = net.backbone_forward(images);
    nn::Tensor4<T> gfeats(feats.n, feats.c, feats.h, feats.w);
    std::vector<double> losses;
    for (int hd : routed_heads) {
        nn::Tensor4<T> logits = net.head_logits(hd, feats, images.h, images.w);
        auto ce = nn::softmax_cross_entropy(logits, labels, class_weights, ignore_id);
        losses.push_back(ce.loss);
        nn::Tensor4<T> g = net.head(hd).backward_logits(ce.dlogits);
        for (size_t i = 0; i < gfeats.v.size(); ++i) gfeats.v[i] += g.v[i];
    }
    net.backbone_backward(gfeats);
    return losses;
}

}  // namespace sfda::soman
