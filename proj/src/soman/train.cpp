#include "sfda/soman/train.hpp"

#include <cmath>
#include <numeric>

#include "sfda/augment/ops.hpp"
#include "sfda/core/rng.hpp"

namespace sfda::soman {

std::vector<float> class_weights_from(const synth::Dataset& ds, int num_classes) {
    std::vector<double> freq(num_classes, 0.0);
    double total = 0.0;
    for (const auto& s : ds.samples) {
        for (uint8_t v : s.labels.labels) {
            if (v < num_classes) {
                freq[v] += 1.0;
                total += 1.0;
            }
        }
    }
    std::vector<float> w(num_classes, 0.f);
    if (total <= 0.0) return w;
    double sum_present = 0.0;
    int n_present = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (freq[c] > 0.0) {
            const double v = 1.0 / std::sqrt(freq[c] / total);
            w[c] = static_cast<float>(v);
            sum_present += v;
            ++n_present;
        }
    }
    if (n_present == 0) return w;
    const float norm = static_cast<float>(sum_present / n_present);
    for (auto& v : w) v /= norm;
    return w;
}

VendorTrainer::VendorTrainer(SomanModel& model, const aug::AugContext& aug_ctx,
                             std::vector<aug::AugmentationGroup> aug_pool, TrainConfig cfg)
    : model_(model), aug_ctx_(aug_ctx), pool_(std::move(aug_pool)), cfg_(cfg) {
    model_.validate();
    if (model_.routing != Routing::ERM) {
        if (pool_.size() != model_.ag_ids.size())
            throw ConfigError("VendorTrainer: augmentation pool must match the bound heads");
        for (size_t i = 0; i < pool_.size(); ++i)
            if (pool_[i].id != model_.ag_ids[i])
                throw ConfigError("VendorTrainer: pool order must follow model.ag_ids");
    }
    nn::SgdConfig oc{cfg_.lr, cfg_.momentum, cfg_.weight_decay};
    opt_backbone_ = nn::SgdMomentum<float>(model_.net.backbone_params(), oc);
    for (int h = 0; h < model_.net.num_heads(); ++h)
        opt_heads_.emplace_back(model_.net.head_params(h), oc);
}

StepRecord VendorTrainer::step(const synth::Dataset& data, const std::vector<int>& batch_indices,
                               uint64_t step_seed) {
    if (batch_indices.empty()) throw ConfigError("vendor_train_step: empty batch");
    const int K = model_.k();
    Pcg32 rng(mix64(step_seed, 0xb7c4), 0x7a19);

    StepRecord rec;
    rec.step = steps_;

    // Routed head set and the augmentation draw.
    std::vector<int> routed;
    int drawn = 0;
    if (model_.routing == Routing::LOpp) {
        drawn = 1 + static_cast<int>(rng.uniform_int(static_cast<uint32_t>(K)));
        routed.push_back(kHeadGlobal);
        for (int i = 1; i <= K; ++i)
            if (i != drawn) routed.push_back(i);
    } else if (model_.routing == Routing::DEpp) {
        drawn = 1 + static_cast<int>(rng.uniform_int(static_cast<uint32_t>(K)));
        routed = {kHeadGlobal, drawn};
    } else {
        routed = {kHeadGlobal};
        if (!pool_.empty())
            drawn = 1 + static_cast<int>(rng.uniform_int(static_cast<uint32_t>(pool_.size())));
    }

    // Build the (optionally augmented) batch.
    std::vector<Image> aug_images;
    std::vector<const Image*> ptrs;
    std::vector<uint8_t> labels;
    const int h = data.samples[batch_indices[0]].image.h;
    const int w = data.samples[batch_indices[0]].image.w;
    labels.reserve(batch_indices.size() * static_cast<size_t>(h) * w);
    for (size_t bi = 0; bi < batch_indices.size(); ++bi) {
        const auto& sample = data.samples[batch_indices[bi]];
        if (drawn > 0) {
            const auto& ag = pool_[drawn - 1];
            auto [img, seg] = aug::apply_ag(aug_ctx_, ag, sample.image, sample.labels,
                                            static_cast<int64_t>(derive_seed(step_seed, bi)));
            aug_images.push_back(std::move(img));
            labels.insert(labels.end(), seg.labels.begin(), seg.labels.end());
        } else {
            labels.insert(labels.end(), sample.labels.labels.begin(),
                          sample.labels.labels.end());
        }
    }
    if (drawn > 0) {
        for (const auto& img : aug_images) ptrs.push_back(&img);
        rec.drawn_ag_id = pool_[drawn - 1].id;
    } else {
        for (int idx : batch_indices) ptrs.push_back(&data.samples[idx].image);
    }
    rec.drawn_index = drawn;
    nn::Tensor4<float> images = pack_images(ptrs);

    // Losses, gradients, one optimizer step per routed head plus the backbone.
    for (auto& p : model_.net.all_params()) std::fill(p.grad->begin(), p.grad->end(), 0.f);
    std::vector<double> losses = composite_loss_backward(
        model_.net, images, labels, model_.class_weights, routed, model_.unknown_id());
    for (size_t i = 0; i < routed.size(); ++i) rec.head_losses[routed[i]] = losses[i];

    nn::PolySchedule sched{cfg_.lr, cfg_.poly_power, cfg_.iters};
    rec.lr = sched.lr_at(steps_);
    opt_backbone_.step(rec.lr);
    for (int hd : routed) opt_heads_[hd].step(rec.lr);

    ++steps_;
    return rec;
}

std::vector<StepRecord> vendor_train(SomanModel& model, const synth::Dataset& source_train,
                                     const aug::AugContext& aug_ctx,
                                     const std::vector<aug::AugmentationGroup>& aug_pool,
                                     const TrainConfig& cfg, const ProgressFn& progress) {
    if (cfg.iters <= 0) throw ConfigError("vendor_train: iters must be positive");
    if (source_train.samples.empty()) throw ConfigError("vendor_train: empty dataset");
    VendorTrainer trainer(model, aug_ctx, aug_pool, cfg);

    const int n = source_train.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Pcg32 shuffle_rng(mix64(cfg.seed, 0x5bff1e), 0x0bdead);
    size_t cursor = static_cast<size_t>(n);  // trigger shuffle on first use

    std::vector<StepRecord> records;
    records.reserve(cfg.iters);
    std::vector<int> batch(cfg.batch_size);
    for (long it = 0; it < cfg.iters; ++it) {
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= static_cast<size_t>(n)) {
                for (size_t i = static_cast<size_t>(n); i > 1; --i)
                    std::swap(order[i - 1], order[shuffle_rng.uniform_int(static_cast<uint32_t>(i))]);
                cursor = 0;
            }
            batch[b] = order[cursor++];
        }
        StepRecord rec = trainer.step(source_train, batch, derive_seed(cfg.seed, it));
        if (progress && (it % cfg.log_every == 0 || it + 1 == cfg.iters)) progress(it, rec);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace sfda::soman
