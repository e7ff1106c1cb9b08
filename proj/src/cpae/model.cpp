#include "sfda/cpae/model.hpp"

#include <atomic>

#include "sfda/nn/loss.hpp"

namespace sfda::cpae {

namespace {
std::atomic<long> g_forward_calls{0};
}

long forward_call_count() { return g_forward_calls.load(); }

CpaeModel::CpaeModel(int num_classes, int feature_channels, int feature_downsample,
                     uint64_t init_seed)
    : num_classes_(num_classes), feat_c_(feature_channels), feat_ds_(feature_downsample) {
    if (feature_downsample != 4)
        throw ConfigError("CpaeModel: encoder is built for a 4x feature downsample");
    // Encoder over the C-channel soft seg-map, down to feature resolution.
    e1_ = nn::Conv2d<float>(num_classes, 8, 7, 1, 3);
    e2_ = nn::Conv2d<float>(8, 16, 3, 2, 1);
    e3_ = nn::Conv2d<float>(16, 16, 7, 1, 3);
    e4_ = nn::Conv2d<float>(16, 32, 3, 2, 1);
    concat_feat_c_ = 32 + feature_channels;
    for (int d : {2, 4, 8, 16})
        dilated_.emplace_back(concat_feat_c_, 64, 3, 1, d, d);
    bottleneck_ = nn::Conv2d<float>(64, 64, 1, 1, 0);
    d1_ = nn::Conv2d<float>(64, 64, 3, 1, 1);
    d2_ = nn::Conv2d<float>(64, 64, 3, 1, 1);
    d3_ = nn::Conv2d<float>(64, 32, 7, 1, 3);
    d4_ = nn::ConvTranspose2d<float>(32, 32, 3, 2, 1, 1);
    d5_ = nn::Conv2d<float>(32, 16, 7, 1, 3);
    d6_ = nn::ConvTranspose2d<float>(16, 8, 3, 2, 1, 1);
    d7_ = nn::Conv2d<float>(8, num_classes, 7, 1, 3);

    Pcg32 rng(mix64(init_seed, 0xc9ae), 0xae55);
    e1_.init_he(rng); e2_.init_he(rng); e3_.init_he(rng); e4_.init_he(rng);
    for (auto& d : dilated_) d.init_he(rng);
    bottleneck_.init_he(rng);
    d1_.init_he(rng); d2_.init_he(rng); d3_.init_he(rng);
    d4_.init_he(rng); d5_.init_he(rng); d6_.init_he(rng); d7_.init_he(rng);
}

std::vector<nn::ParamRef<float>> CpaeModel::params() {
    std::vector<nn::ParamRef<float>> out;
    e1_.collect(out, "enc.c1");
    e2_.collect(out, "enc.c2");
    e3_.collect(out, "enc.c3");
    e4_.collect(out, "enc.c4");
    for (size_t i = 0; i < dilated_.size(); ++i)
        dilated_[i].collect(out, "fuse.dil" + std::to_string(i));
    bottleneck_.collect(out, "fuse.bottleneck");
    d1_.collect(out, "dec.c1");
    d2_.collect(out, "dec.c2");
    d3_.collect(out, "dec.c3");
    d4_.collect(out, "dec.t1");
    d5_.collect(out, "dec.c4");
    d6_.collect(out, "dec.t2");
    d7_.collect(out, "dec.c5");
    return out;
}

nn::Tensor4<float> CpaeModel::forward_logits(const nn::Tensor4<float>& noisy,
                                             const nn::Tensor4<float>& feats) {
    if (noisy.c != num_classes_)
        throw ShapeError("cpae_forward: seg-map channel count mismatch");
    if (feats.c != feat_c_)
        throw ShapeError("cpae_forward: feature channel count mismatch");
    g_forward_calls.fetch_add(1, std::memory_order_relaxed);

    nn::Tensor4<float> h = a1_.forward(e1_.forward(noisy));
    h = a2_.forward(e2_.forward(h));
    h = a3_.forward(e3_.forward(h));
    h = a4_.forward(e4_.forward(h));
    if (h.h != feats.h || h.w != feats.w)
        throw ShapeError("cpae_forward: feature spatial shape mismatch");

    // Channel concat of encoded seg-map and conditioning features.
    nn::Tensor4<float> cat(h.n, concat_feat_c_, h.h, h.w);
    const size_t plane = cat.plane();
    for (int i = 0; i < h.n; ++i) {
        std::copy(h.sample(i), h.sample(i) + h.sample_stride(), cat.sample(i));
        std::copy(feats.sample(i), feats.sample(i) + feats.sample_stride(),
                  cat.sample(i) + static_cast<size_t>(h.c) * plane);
    }
    concat_cache_ = cat;

    nn::Tensor4<float> fused;
    for (size_t b = 0; b < dilated_.size(); ++b) {
        nn::Tensor4<float> y = dilated_[b].forward(cat);
        if (b == 0) fused = std::move(y);
        else
            for (size_t j = 0; j < fused.v.size(); ++j) fused.v[j] += y.v[j];
    }
    nn::Tensor4<float> z = tanh_.forward(bottleneck_.forward(fused));

    z = r1_.forward(d1_.forward(z));
    z = r2_.forward(d2_.forward(z));
    z = r3_.forward(d3_.forward(z));
    z = r4_.forward(d4_.forward(z));
    z = r5_.forward(d5_.forward(z));
    z = r6_.forward(d6_.forward(z));
    z = d7_.forward(z);
    up_used_ = (z.h != noisy.h || z.w != noisy.w);
    if (up_used_) {
        up_.set_output(noisy.h, noisy.w);
        z = up_.forward(z);
    }
    return z;
}

void CpaeModel::backward(const nn::Tensor4<float>& dlogits) {
    nn::Tensor4<float> g = dlogits;
    if (up_used_) g = up_.backward(g);
    g = d7_.backward(g);
    g = d6_.backward(r6_.backward(g));
    g = d5_.backward(r5_.backward(g));
    g = d4_.backward(r4_.backward(g));
    g = d3_.backward(r3_.backward(g));
    g = d2_.backward(r2_.backward(g));
    g = d1_.backward(r1_.backward(g));
    g = bottleneck_.backward(tanh_.backward(g));

    nn::Tensor4<float> gcat(concat_cache_.n, concat_cache_.c, concat_cache_.h, concat_cache_.w);
    for (auto& d : dilated_) {
        nn::Tensor4<float> gb = d.backward(g);
        for (size_t j = 0; j < gcat.v.size(); ++j) gcat.v[j] += gb.v[j];
    }
    // Split the concat gradient; the feature half is dropped (conditioning
    // features are frozen inputs).
    nn::Tensor4<float> gh(gcat.n, 32, gcat.h, gcat.w);
    const size_t plane = gcat.plane();
    for (int i = 0; i < gcat.n; ++i)
        std::copy(gcat.sample(i), gcat.sample(i) + static_cast<size_t>(32) * plane,
                  gh.sample(i));
    gh = e4_.backward(a4_.backward(gh));
    gh = e3_.backward(a3_.backward(gh));
    gh = e2_.backward(a2_.backward(gh));
    e1_.backward(a1_.backward(gh));
}

ProbMap cpae_forward(CpaeModel& q, const ProbMap& noisy, const soman::FeatureMap& feats) {
    nn::Tensor4<float> nt(1, noisy.c, noisy.h, noisy.w);
    std::copy(noisy.probs.begin(), noisy.probs.end(), nt.v.begin());
    nn::Tensor4<float> logits = q.forward_logits(nt, feats);
    nn::softmax_channels(logits);
    return soman::probmap_from_tensor(logits, 0);
}

ProbMap refine(CpaeModel& q, const ProbMap& prob, const soman::FeatureMap& feats) {
    return cpae_forward(q, prob, feats);
}

void save_cpae(const std::filesystem::path& path, CpaeModel& model,
               const std::string& config_hash) {
    Checkpoint ckpt;
    ckpt.meta = {{"format_version", 1},
                 {"model_kind", "cpae"},
                 {"num_classes", model.num_classes()},
                 {"feature_channels", model.feature_channels()},
                 {"feature_downsample", model.feature_downsample()},
                 {"config_hash", config_hash}};
    for (auto& p : model.params()) ckpt.tensors.emplace_back(p.name, *p.value);
    save_checkpoint(path, ckpt);
}

CpaeModel load_cpae(const std::filesystem::path& path, std::optional<std::string> expect_hash) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.meta.value("model_kind", "") != "cpae")
        throw ConfigError("not an autoencoder checkpoint: " + path.string());
    if (expect_hash && ckpt.meta.value("config_hash", "") != *expect_hash)
        throw ConfigError("checkpoint config hash mismatch: " + path.string());
    CpaeModel m(ckpt.meta.at("num_classes").get<int>(),
                ckpt.meta.at("feature_channels").get<int>(),
                ckpt.meta.at("feature_downsample").get<int>(), 0);
    for (auto& p : m.params()) {
        const std::vector<float>* src = ckpt.find(p.name);
        if (!src) throw ConfigError("checkpoint missing tensor " + p.name);
        if (src->size() != p.value->size())
            throw ConfigError("checkpoint tensor size mismatch for " + p.name);
        *p.value = *src;
    }
    return m;
}

void check_feature_compat(const CpaeModel& q, const soman::SomanModel& model) {
    const auto& arch = model.net.arch();
    if (q.num_classes() != arch.num_classes ||
        q.feature_channels() != arch.feature_channels() ||
        q.feature_downsample() != arch.downsample())
        throw ConfigError(
            "autoencoder feature metadata does not match the paired segmentation model");
}

}  // namespace sfda::cpae
