#include "sfda/augselect/select.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "sfda/augment/ops.hpp"
#include "sfda/eval/metrics.hpp"

namespace sfda::augsel {

soman::SomanModel train_baseline(const synth::Dataset& source_train,
                                 const soman::ArchConfig& arch,
                                 const soman::TrainConfig& cfg) {
    if (source_train.samples.empty())
        throw ConfigError("train_baseline: empty source dataset");
    soman::SomanModel model = soman::make_baseline(arch, cfg.seed);
    model.class_weights = soman::class_weights_from(source_train, arch.num_classes);
    if (cfg.iters > 0) {
        aug::AugContext ctx;  // no augmentations on the baseline path
        ctx.num_classes = arch.num_classes;
        soman::vendor_train(model, source_train, ctx, {}, cfg);
    }
    model.lineage.push_back("baseline");
    return model;
}

namespace {

double eval_miou(soman::SomanModel& model, const synth::Dataset& data) {
    return eval::evaluate_model(model, soman::kHeadGlobal, data).miou;
}

}  // namespace

double risk_gap(soman::SomanModel& baseline, const aug::AugmentationGroup& ag,
                const synth::Dataset& source_val, const aug::AugContext& ctx, uint64_t seed) {
    if (source_val.samples.empty()) throw ConfigError("risk_gap: empty validation set");
    const double clean = eval_miou(baseline, source_val);

    synth::Dataset transformed;
    transformed.spec = source_val.spec;
    transformed.labeled = true;
    transformed.samples.reserve(source_val.samples.size());
    bool identical = true;
    for (size_t i = 0; i < source_val.samples.size(); ++i) {
        const auto& s = source_val.samples[i];
        auto [img, seg] = aug::apply_ag(ctx, ag, s.image, s.labels,
                                        static_cast<int64_t>(derive_seed(seed, i)));
        identical = identical && img.data == s.image.data && seg.labels == s.labels.labels;
        transformed.samples.push_back({std::move(img), std::move(seg)});
    }
    // A transform that did not move a single pixel has a gap of exactly 0.
    if (identical) return 0.0;
    const double augmented = eval_miou(baseline, transformed);
    return clean - augmented;
}

SelectionReport select_augmentations(soman::SomanModel& baseline,
                                     const std::vector<aug::AugmentationGroup>& candidates,
                                     const synth::Dataset& source_val,
                                     const aug::AugContext& ctx, double tau, uint64_t seed) {
    if (candidates.empty()) throw ConfigError("select_augmentations: no candidates");
    SelectionReport report;
    report.tau = tau;
    const double clean = eval_miou(baseline, source_val);
    for (const auto& ag : candidates) {
        CandidateResult r;
        r.ag_id = ag.id;
        r.name = ag.name;
        r.baseline_miou = clean;
        r.risk_gap = risk_gap(baseline, ag, source_val, ctx, derive_seed(seed, ag.id));
        r.augmented_miou = clean - r.risk_gap;
        r.selected = r.risk_gap > tau;
        report.candidates.push_back(std::move(r));
    }
    std::vector<const CandidateResult*> order;
    for (const auto& c : report.candidates) order.push_back(&c);
    std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
        if (a->risk_gap != b->risk_gap) return a->risk_gap > b->risk_gap;
        return a->ag_id < b->ag_id;
    });
    for (const auto* c : order) report.diversity_order.push_back(c->ag_id);
    return report;
}

std::vector<int> SelectionReport::top_selected(int k_cap) const {
    std::vector<int> out;
    for (int id : diversity_order) {
        const auto it = std::find_if(candidates.begin(), candidates.end(),
                                     [&](const CandidateResult& c) { return c.ag_id == id; });
        if (it != candidates.end() && it->selected && static_cast<int>(out.size()) < k_cap)
            out.push_back(id);
    }
    return out;
}

nlohmann::json SelectionReport::to_json() const {
    nlohmann::json jc = nlohmann::json::array();
    for (const auto& c : candidates) {
        jc.push_back({{"ag_id", c.ag_id},
                      {"name", c.name},
                      {"baseline_miou", c.baseline_miou},
                      {"augmented_miou", c.augmented_miou},
                      {"risk_gap", c.risk_gap},
                      {"selected", c.selected}});
    }
    return {{"candidates", jc}, {"tau", tau}, {"diversity_order", diversity_order}};
}

SelectionReport SelectionReport::from_json(const nlohmann::json& j) {
    SelectionReport r;
    r.tau = j.at("tau").get<double>();
    r.diversity_order = j.at("diversity_order").get<std::vector<int>>();
    for (const auto& c : j.at("candidates")) {
        CandidateResult cr;
        cr.ag_id = c.at("ag_id").get<int>();
        cr.name = c.at("name").get<std::string>();
        cr.baseline_miou = c.at("baseline_miou").get<double>();
        cr.augmented_miou = c.at("augmented_miou").get<double>();
        cr.risk_gap = c.at("risk_gap").get<double>();
        cr.selected = c.at("selected").get<bool>();
        r.candidates.push_back(std::move(cr));
    }
    return r;
}

std::string SelectionReport::to_table() const {
    std::ostringstream out;
    out << std::left << std::setw(4) << "id" << std::setw(18) << "name" << std::right
        << std::setw(12) << "clean mIoU" << std::setw(12) << "aug mIoU" << std::setw(10)
        << "gap" << "  selected\n";
    for (const auto& c : candidates) {
        out << std::left << std::setw(4) << c.ag_id << std::setw(18) << c.name << std::right
            << std::fixed << std::setprecision(4) << std::setw(12) << c.baseline_miou
            << std::setw(12) << c.augmented_miou << std::setw(10) << c.risk_gap << "  "
            << (c.selected ? "yes" : "no") << "\n";
    }
    out << "tau = " << std::setprecision(4) << tau << "\norder:";
    for (int id : diversity_order) out << " " << id;
    out << "\n";
    return out.str();
}

}  // namespace sfda::augsel
