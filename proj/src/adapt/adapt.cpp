#include "sfda/adapt/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sfda/core/io.hpp"
#include "sfda/eval/metrics.hpp"
#include "sfda/nn/loss.hpp"
#include "sfda/nn/optim.hpp"

namespace sfda::adapt {

namespace {
constexpr double kSentinelEps = 1e-6;
constexpr int kBatch = 8;  // inference batch for dataset passes
}  // namespace

ThresholdVector compute_class_thresholds(const std::vector<std::vector<float>>& confidences,
                                         double retain_fraction) {
    if (retain_fraction <= 0.0 || retain_fraction > 1.0)
        throw ConfigError("compute_class_thresholds: retain_fraction must be in (0, 1]");
    ThresholdVector tv;
    tv.retain_fraction = retain_fraction;
    tv.t.reserve(confidences.size());
    for (const auto& list : confidences) {
        if (list.empty()) {
            tv.t.push_back(1.0 + kSentinelEps);
            continue;
        }
        std::vector<float> sorted(list);
        std::sort(sorted.begin(), sorted.end());
        const size_t n = sorted.size();
        size_t idx = static_cast<size_t>(std::floor((1.0 - retain_fraction) * n));
        if (idx >= n) idx = n - 1;
        tv.t.push_back(sorted[idx]);
    }
    return tv;
}

nlohmann::json ThresholdVector::to_json() const {
    return {{"t", t}, {"retain_fraction", retain_fraction}};
}

double average_self_entropy(soman::SomanModel& model, int head, const synth::Dataset& target) {
    if (target.samples.empty()) throw ConfigError("average_self_entropy: empty dataset");
    if (head < 0 || head >= model.net.num_heads())
        throw ConfigError("average_self_entropy: unknown head id");
    double total = 0.0;
    for (int start = 0; start < target.size(); start += kBatch) {
        const int end = std::min(target.size(), start + kBatch);
        std::vector<const Image*> ptrs;
        for (int i = start; i < end; ++i) ptrs.push_back(&target.samples[i].image);
        nn::Tensor4<float> logits =
            soman::forward_logits_batch(model, soman::pack_images(ptrs), head);
        nn::softmax_channels(logits);
        for (int i = 0; i < end - start; ++i) {
            ProbMap p = soman::probmap_from_tensor(logits, i);
            const auto ent = eval::entropy_map(p);
            double s = 0.0;
            for (float e : ent) s += e;
            total += s / ent.size();
        }
    }
    return total / target.size();
}

int select_optimal_head(soman::SomanModel& model, const synth::Dataset& target) {
    int best = soman::kHeadGlobal;
    double best_ent = average_self_entropy(model, soman::kHeadGlobal, target);
    for (int h = 1; h <= model.k(); ++h) {
        const double ent = average_self_entropy(model, h, target);
        if (ent < best_ent) {  // strict: ties keep the earlier (global-first) head
            best_ent = ent;
            best = h;
        }
    }
    return best;
}

PseudoLabelDataset extract_pseudo_labels(soman::SomanModel& model, int head, cpae::CpaeModel* q,
                                         const synth::Dataset& target, double retain_fraction,
                                         int round_index) {
    if (target.samples.empty()) throw ConfigError("extract_pseudo_labels: empty target set");
    if (q) cpae::check_feature_compat(*q, model);
    const int C = model.num_classes();
    const int n = target.size();

    // Pass 1: per-pixel argmax and confidence for the whole set.
    std::vector<SegMap> argmax(n);
    std::vector<std::vector<float>> conf(n);
    std::vector<std::vector<float>> per_class(C);
    for (int start = 0; start < n; start += kBatch) {
        const int end = std::min(n, start + kBatch);
        std::vector<const Image*> ptrs;
        for (int i = start; i < end; ++i) ptrs.push_back(&target.samples[i].image);
        nn::Tensor4<float> x = soman::pack_images(ptrs);
        nn::Tensor4<float> feats_bb = model.net.backbone_forward(x);
        nn::Tensor4<float> probs = model.net.head_logits(head, feats_bb, x.h, x.w);
        nn::softmax_channels(probs);
        if (q) {
            nn::Tensor4<float> feats =
                model.net.head(soman::kHeadGlobal).forward_block(feats_bb);
            probs = q->forward_logits(probs, feats);
            nn::softmax_channels(probs);
        }
        const size_t plane = probs.plane();
        for (int i = start; i < end; ++i) {
            const float* s = probs.sample(i - start);
            SegMap am(x.h, x.w);
            std::vector<float> cf(plane);
            for (size_t p = 0; p < plane; ++p) {
                int bc = 0;
                float bv = s[p];
                for (int k = 1; k < C; ++k) {
                    const float v = s[k * plane + p];
                    if (v > bv) { bv = v; bc = k; }
                }
                am.labels[p] = static_cast<uint8_t>(bc);
                cf[p] = bv;
            }
            argmax[i] = std::move(am);
            conf[i] = std::move(cf);
        }
    }
    for (int i = 0; i < n; ++i)
        for (size_t p = 0; p < conf[i].size(); ++p)
            per_class[argmax[i].labels[p]].push_back(conf[i][p]);

    PseudoLabelDataset out;
    out.head = head;
    out.used_cpae = q != nullptr;
    out.round_index = round_index;
    out.thresholds = compute_class_thresholds(per_class, retain_fraction);
    out.predicted_per_class.assign(C, 0);
    out.retained_per_class.assign(C, 0);
    for (int c = 0; c < C; ++c)
        out.predicted_per_class[c] = static_cast<long>(per_class[c].size());

    // Pass 2: write pseudo maps, low-confidence pixels become UNKNOWN.
    const uint8_t unknown = static_cast<uint8_t>(model.unknown_id());
    out.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        SegMap ps = argmax[i];
        for (size_t p = 0; p < ps.labels.size(); ++p) {
            const int c = ps.labels[p];
            if (static_cast<double>(conf[i][p]) < out.thresholds.t[c]) {
                ps.labels[p] = unknown;
            } else {
                ++out.retained_per_class[c];
            }
        }
        out.labels[i] = std::move(ps);
    }
    return out;
}

nlohmann::json PseudoLabelDataset::provenance_json() const {
    std::vector<double> fractions;
    for (size_t c = 0; c < predicted_per_class.size(); ++c)
        fractions.push_back(realized_fraction(static_cast<int>(c)));
    return {{"head", head},
            {"used_cpae", used_cpae},
            {"round_index", round_index},
            {"thresholds", thresholds.to_json()},
            {"predicted_per_class", predicted_per_class},
            {"retained_per_class", retained_per_class},
            {"realized_fractions", fractions}};
}

void self_train_round(soman::SomanModel& model, int head, const synth::Dataset& target,
                      const PseudoLabelDataset& plabels, const SelfTrainConfig& cfg,
                      RoundReport& report) {
    if (plabels.labels.empty()) throw ConfigError("self_train_round: empty pseudo-label set");
    if (plabels.labels.size() != static_cast<size_t>(target.size()))
        throw ShapeError("self_train_round: pseudo labels do not match the target set");

    const int last_block = model.net.num_blocks() - 1;
    nn::SgdConfig oc{cfg.lr, cfg.momentum, cfg.weight_decay};
    auto trainable = model.net.block_params(last_block);
    nn::SgdMomentum<float> opt(trainable, oc);
    nn::PolySchedule sched{cfg.lr, cfg.poly_power, cfg.steps};

    const int n = target.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Pcg32 shuffle_rng(mix64(cfg.seed, 0xada9), 0x5e1f);
    size_t cursor = static_cast<size_t>(n);

    double ce_sum = 0.0, ent_sum = 0.0;
    for (long it = 0; it < cfg.steps; ++it) {
        std::vector<const Image*> ptrs;
        std::vector<uint8_t> labels;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= static_cast<size_t>(n)) {
                for (size_t i = static_cast<size_t>(n); i > 1; --i)
                    std::swap(order[i - 1],
                              order[shuffle_rng.uniform_int(static_cast<uint32_t>(i))]);
                cursor = 0;
            }
            const int idx = order[cursor++];
            ptrs.push_back(&target.samples[idx].image);
            labels.insert(labels.end(), plabels.labels[idx].labels.begin(),
                          plabels.labels[idx].labels.end());
        }
        nn::Tensor4<float> x = soman::pack_images(ptrs);
        nn::Tensor4<float> feats = model.net.backbone_forward(x);
        nn::Tensor4<float> logits = model.net.head_logits(head, feats, x.h, x.w);

        auto ce = nn::softmax_cross_entropy(logits, labels, model.class_weights,
                                            model.unknown_id());
        auto ent = nn::mean_softmax_entropy(logits);
        ce_sum += ce.loss;
        ent_sum += ent.value;

        nn::Tensor4<float> dlogits = ce.dlogits;
        const float lam = static_cast<float>(cfg.lambda_ent);
        for (size_t j = 0; j < dlogits.v.size(); ++j) dlogits.v[j] += lam * ent.dlogits.v[j];

        for (auto& p : model.net.all_params()) std::fill(p.grad->begin(), p.grad->end(), 0.f);
        nn::Tensor4<float> gfeats = model.net.head(head).backward_logits(dlogits);
        model.net.backbone_backward(gfeats, last_block);
        opt.step(sched.lr_at(it));
    }
    report.mean_ce = ce_sum / cfg.steps;
    report.mean_ent_term = ent_sum / cfg.steps;
}

nlohmann::json RoundReport::to_json() const {
    nlohmann::json j{{"round", round},
                     {"head", head},
                     {"avg_self_entropy", avg_self_entropy},
                     {"mean_retained_fraction", mean_retained_fraction},
                     {"realized_fractions", realized_fractions},
                     {"mean_ce", mean_ce},
                     {"mean_entropy_term", mean_ent_term}};
    if (std::isnan(pseudo_miou)) j["pseudo_miou"] = nullptr;
    else j["pseudo_miou"] = pseudo_miou;
    return j;
}

nlohmann::json AdaptReport::to_json() const {
    nlohmann::json rounds_json = nlohmann::json::array();
    for (const auto& r : rounds) rounds_json.push_back(r.to_json());
    return {{"optimal_head", optimal_head}, {"rounds", rounds_json}};
}

AdaptReport adapt(soman::SomanModel& model, cpae::CpaeModel* q, const synth::Dataset& target_train,
                  const AdaptConfig& cfg, const std::string& lineage_tag) {
    if (cfg.rounds < 1) throw ConfigError("adapt: rounds must be >= 1");
    if (target_train.samples.empty()) throw ConfigError("adapt: empty target dataset");
    cpae::CpaeModel* refine_q = cfg.use_cpae ? q : nullptr;
    if (cfg.use_cpae && !q)
        throw ConfigError("adapt: use_cpae requested but no autoencoder supplied");

    AdaptReport report;
    report.optimal_head = select_optimal_head(model, target_train);

    for (int r = 0; r < cfg.rounds; ++r) {
        RoundReport rr;
        rr.round = r + 1;
        rr.head = report.optimal_head;
        rr.avg_self_entropy = average_self_entropy(model, report.optimal_head, target_train);

        SelfTrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.train.seed, static_cast<uint64_t>(r));
        PseudoLabelDataset plabels = extract_pseudo_labels(model, report.optimal_head, refine_q,
                                                           target_train, cfg.retain_fraction, r + 1);
        double frac_sum = 0.0;
        int frac_n = 0;
        for (int c = 0; c < model.num_classes(); ++c) {
            rr.realized_fractions.push_back(plabels.realized_fraction(c));
            if (plabels.predicted_per_class[c] > 0) {
                frac_sum += plabels.realized_fraction(c);
                ++frac_n;
            }
        }
        rr.mean_retained_fraction = frac_n > 0 ? frac_sum / frac_n : 0.0;
        if (target_train.labeled) {
            std::vector<SegMap> gts;
            for (const auto& s : target_train.samples) gts.push_back(s.labels);
            rr.pseudo_miou = eval::evaluate_predictions(plabels.labels, gts,
                                                        model.num_classes()).miou;
        }
        self_train_round(model, report.optimal_head, target_train, plabels, tc, rr);
        report.rounds.push_back(std::move(rr));
    }
    model.lineage.push_back("adapt:" + lineage_tag + " head=" +
                            std::to_string(report.optimal_head) +
                            " rounds=" + std::to_string(cfg.rounds));
    return report;
}

AdaptReport adapt_online(soman::SomanModel& model, cpae::CpaeModel* q,
                         const synth::Dataset& new_target_train, const AdaptConfig& cfg,
                         const std::string& lineage_tag) {
    return adapt(model, q, new_target_train, cfg, lineage_tag);
}

void save_pseudo_labels(const std::filesystem::path& dir, const synth::Dataset& target,
                        const PseudoLabelDataset& plabels) {
    synth::Dataset ds;
    ds.spec = target.spec;
    ds.seed = target.seed;
    ds.labeled = true;
    for (size_t i = 0; i < plabels.labels.size(); ++i)
        ds.samples.push_back({target.samples[i].image, plabels.labels[i]});
    synth::save_dataset(dir, ds);
    save_json_file(dir / "provenance.json", plabels.provenance_json());
}

}  // namespace sfda::adapt
