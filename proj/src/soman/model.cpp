#include "sfda/soman/model.hpp"

#include <algorithm>
#include <set>

namespace sfda::soman {

std::string routing_to_string(Routing r) {
    switch (r) {
        case Routing::ERM: return "ERM";
        case Routing::DEpp: return "DE++";
        case Routing::LOpp: return "LO++";
    }
    throw ConfigError("bad routing enum");
}

Routing routing_from_string(const std::string& s) {
    if (s == "ERM") return Routing::ERM;
    if (s == "DE++" || s == "DEpp") return Routing::DEpp;
    if (s == "LO++" || s == "LOpp") return Routing::LOpp;
    throw ConfigError("unknown routing: " + s);
}

void SomanModel::validate() const {
    if (static_cast<int>(ag_ids.size()) != k())
        throw ConfigError("SomanModel: ag_ids must bind every leave-one-out head");
    std::set<int> uniq(ag_ids.begin(), ag_ids.end());
    if (uniq.size() != ag_ids.size())
        throw ConfigError("SomanModel: ag_ids must be distinct");
    if (k() == 0 && routing != Routing::ERM)
        throw ConfigError("SomanModel: single-head models must use ERM routing");
    if (!class_weights.empty() &&
        static_cast<int>(class_weights.size()) != num_classes())
        throw ConfigError("SomanModel: class_weights must have one entry per class");
}

SomanModel make_model(const ArchConfig& arch, Routing routing, std::vector<int> ag_ids,
                      uint64_t init_seed) {
    SomanModel m;
    m.net = SegNet<float>(arch, static_cast<int>(ag_ids.size()));
    m.net.init(init_seed);
    m.routing = routing;
    m.ag_ids = std::move(ag_ids);
    m.class_weights.assign(arch.num_classes, 1.f);
    m.validate();
    return m;
}

SomanModel make_baseline(const ArchConfig& arch, uint64_t init_seed) {
    return make_model(arch, Routing::ERM, {}, init_seed);
}

SomanModel make_from_baseline(const SomanModel& baseline, Routing routing,
                              std::vector<int> ag_ids) {
    SomanModel m;
    m.net = SegNet<float>(baseline.net.arch(), static_cast<int>(ag_ids.size()));
    m.routing = routing;
    m.ag_ids = std::move(ag_ids);
    m.class_weights = baseline.class_weights;
    m.lineage = baseline.lineage;

    // Copy backbone; replicate the baseline head into the global and every
    // leave-one-out head.
    SomanModel& base = const_cast<SomanModel&>(baseline);
    auto src_bb = base.net.backbone_params();
    auto dst_bb = m.net.backbone_params();
    for (size_t i = 0; i < src_bb.size(); ++i) *dst_bb[i].value = *src_bb[i].value;
    auto src_head = base.net.head_params(kHeadGlobal);
    for (int h = 0; h < m.net.num_heads(); ++h) {
        auto dst_head = m.net.head_params(h);
        for (size_t i = 0; i < src_head.size(); ++i) *dst_head[i].value = *src_head[i].value;
    }
    m.validate();
    return m;
}

nn::Tensor4<float> pack_images(const std::vector<const Image*>& images) {
    if (images.empty()) throw ConfigError("pack_images: empty batch");
    const int h = images[0]->h, w = images[0]->w;
    nn::Tensor4<float> t(static_cast<int>(images.size()), 3, h, w);
    for (size_t i = 0; i < images.size(); ++i) {
        if (images[i]->h != h || images[i]->w != w)
            throw ShapeError("pack_images: mixed resolutions in batch");
        std::copy(images[i]->data.begin(), images[i]->data.end(), t.sample(static_cast<int>(i)));
    }
    return t;
}

ProbMap probmap_from_tensor(const nn::Tensor4<float>& t, int sample) {
    ProbMap p(t.c, t.h, t.w);
    const float* s = t.sample(sample);
    std::copy(s, s + t.sample_stride(), p.probs.begin());
    return p;
}

nn::Tensor4<float> forward_logits_batch(SomanModel& model, const nn::Tensor4<float>& images,
                                        int head) {
    if (head < 0 || head >= model.net.num_heads())
        throw ConfigError("forward: unknown head id " + std::to_string(head));
    nn::Tensor4<float> feats = model.net.backbone_forward(images);
    return model.net.head_logits(head, feats, images.h, images.w);
}

nn::Tensor4<float> forward_features_batch(SomanModel& model, const nn::Tensor4<float>& images) {
    nn::Tensor4<float> feats = model.net.backbone_forward(images);
    return model.net.head(kHeadGlobal).forward_block(feats);
}

ProbMap forward(SomanModel& model, const Image& image, int head) {
    nn::Tensor4<float> logits = forward_logits_batch(model, pack_images({&image}), head);
    nn::softmax_channels(logits);
    return probmap_from_tensor(logits, 0);
}

FeatureMap forward_features(SomanModel& model, const Image& image) {
    return forward_features_batch(model, pack_images({&image}));
}

void save_model(const std::filesystem::path& path, SomanModel& model,
                const std::string& config_hash) {
    Checkpoint ckpt;
    ckpt.meta = {{"format_version", 1},
                 {"model_kind", "soman"},
                 {"arch", model.net.arch().to_json()},
                 {"k", model.k()},
                 {"routing", routing_to_string(model.routing)},
                 {"ag_ids", model.ag_ids},
                 {"class_weights", model.class_weights},
                 {"lineage", model.lineage},
                 {"config_hash", config_hash}};
    for (auto& p : model.net.all_params()) ckpt.tensors.emplace_back(p.name, *p.value);
    save_checkpoint(path, ckpt);
}

SomanModel load_model(const std::filesystem::path& path, std::optional<std::string> expect_hash) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.meta.value("model_kind", "") != "soman")
        throw ConfigError("not a segmentation model checkpoint: " + path.string());
    if (expect_hash && ckpt.meta.value("config_hash", "") != *expect_hash)
        throw ConfigError("checkpoint config hash mismatch: " + path.string());
    SomanModel m;
    const ArchConfig arch = ArchConfig::from_json(ckpt.meta.at("arch"));
    m.net = SegNet<float>(arch, ckpt.meta.at("k").get<int>());
    m.routing = routing_from_string(ckpt.meta.at("routing").get<std::string>());
    m.ag_ids = ckpt.meta.at("ag_ids").get<std::vector<int>>();
    m.class_weights = ckpt.meta.at("class_weights").get<std::vector<float>>();
    m.lineage = ckpt.meta.at("lineage").get<std::vector<std::string>>();
    for (auto& p : m.net.all_params()) {
        const std::vector<float>* src = ckpt.find(p.name);
        if (!src) throw ConfigError("checkpoint missing tensor " + p.name);
        if (src->size() != p.value->size())
            throw ConfigError("checkpoint tensor size mismatch for " + p.name);
        *p.value = *src;
    }
    m.validate();
    return m;
}

}  // namespace sfda::soman
