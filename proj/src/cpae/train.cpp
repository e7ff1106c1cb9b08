#include "sfda/cpae/train.hpp"

#include <numeric>

#include "sfda/augment/ops.hpp"
#include "sfda/nn/loss.hpp"
#include "sfda/nn/optim.hpp"

namespace sfda::cpae {

NoisyPair make_noisy_pair(soman::SomanModel& soman, const std::vector<aug::AugmentationGroup>& ags,
                          const aug::AugContext& ctx, const synth::LabeledSample& sample,
                          uint64_t rng_seed) {
    if (soman.routing != soman::Routing::LOpp)
        throw ConfigError("make_noisy_pair: requires a leave-one-out trained model");
    if (ags.size() != soman.ag_ids.size())
        throw ConfigError("make_noisy_pair: augmentation list must match the bound heads");
    Pcg32 rng(mix64(rng_seed, 0x9a1e), 0xf00d);
    const int k = soman.k();
    const int head = 1 + static_cast<int>(rng.uniform_int(static_cast<uint32_t>(k)));
    auto [img, seg] = aug::apply_ag(ctx, ags[head - 1], sample.image, sample.labels,
                                    static_cast<int64_t>(rng.next()));
    nn::Tensor4<float> x = soman::pack_images({&img});
    nn::Tensor4<float> feats_bb = soman.net.backbone_forward(x);
    nn::Tensor4<float> logits = soman.net.head_logits(head, feats_bb, x.h, x.w);
    nn::softmax_channels(logits);
    NoisyPair out;
    out.noisy = soman::probmap_from_tensor(logits, 0);
    out.features = soman.net.head(soman::kHeadGlobal).forward_block(feats_bb);
    out.clean = std::move(seg);  // equals the ground truth for non-geometric AGs
    out.drawn_head = head;
    return out;
}

CpaeTrainStats cpae_train(CpaeModel& q, soman::SomanModel& soman,
                          const std::vector<aug::AugmentationGroup>& ags,
                          const aug::AugContext& ctx, const synth::Dataset& source_train,
                          const CpaeTrainConfig& cfg) {
    if (soman.routing != soman::Routing::LOpp)
        throw ConfigError("cpae_train: requires a leave-one-out trained model");
    if (source_train.samples.empty()) throw ConfigError("cpae_train: empty dataset");
    check_feature_compat(q, soman);

    nn::SgdConfig oc{cfg.lr, cfg.momentum, cfg.weight_decay};
    nn::SgdMomentum<float> opt(q.params(), oc);
    nn::PolySchedule sched{cfg.lr, cfg.poly_power, cfg.iters};

    const int n = source_train.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Pcg32 shuffle_rng(mix64(cfg.seed, 0xcafe11), 0x20ae);
    size_t cursor = static_cast<size_t>(n);

    const int k = soman.k();
    const std::vector<float> unit_weights(soman.num_classes(), 1.f);
    CpaeTrainStats stats;
    stats.losses.reserve(cfg.iters);

    for (long it = 0; it < cfg.iters; ++it) {
        const uint64_t step_seed = derive_seed(cfg.seed, 0x9000 + it);
        Pcg32 rng(mix64(step_seed, 0x9a1e), 0xf00d);
        const int head = 1 + static_cast<int>(rng.uniform_int(static_cast<uint32_t>(k)));

        std::vector<Image> aug_images;
        std::vector<uint8_t> labels;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= static_cast<size_t>(n)) {
                for (size_t i = static_cast<size_t>(n); i > 1; --i)
                    std::swap(order[i - 1],
                              order[shuffle_rng.uniform_int(static_cast<uint32_t>(i))]);
                cursor = 0;
            }
            const auto& sample = source_train.samples[order[cursor++]];
            auto [img, seg] = aug::apply_ag(ctx, ags[head - 1], sample.image, sample.labels,
                                            static_cast<int64_t>(derive_seed(step_seed, b)));
            aug_images.push_back(std::move(img));
            labels.insert(labels.end(), seg.labels.begin(), seg.labels.end());
        }
        std::vector<const Image*> ptrs;
        for (const auto& img : aug_images) ptrs.push_back(&img);
        nn::Tensor4<float> x = soman::pack_images(ptrs);

        // Frozen segmentation model supplies noisy maps and features.
        nn::Tensor4<float> feats_bb = soman.net.backbone_forward(x);
        nn::Tensor4<float> noisy = soman.net.head_logits(head, feats_bb, x.h, x.w);
        nn::softmax_channels(noisy);
        nn::Tensor4<float> feats = soman.net.head(soman::kHeadGlobal).forward_block(feats_bb);

        nn::Tensor4<float> logits = q.forward_logits(noisy, feats);
        for (auto& p : q.params()) std::fill(p.grad->begin(), p.grad->end(), 0.f);
        auto ce = nn::softmax_cross_entropy(logits, labels, unit_weights, soman.unknown_id());
        q.backward(ce.dlogits);
        opt.step(sched.lr_at(it));
        stats.losses.push_back(ce.loss);
    }
    return stats;
}

}  // namespace sfda::cpae
