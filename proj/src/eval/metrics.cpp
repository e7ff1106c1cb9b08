#include "sfda/eval/metrics.hpp"

#include <cmath>
#include <sstream>

#include "sfda/nn/layers.hpp"
#include "sfda/nn/loss.hpp"

namespace sfda::eval {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : c_(num_classes), inter_(num_classes, 0), pred_(num_classes, 0), gt_(num_classes, 0) {}

void ConfusionMatrix::add(const SegMap& pred, const SegMap& gt) {
    require_same_shape(pred, gt, "ConfusionMatrix::add");
    for (size_t i = 0; i < gt.labels.size(); ++i) {
        const uint8_t g = gt.labels[i];
        if (g >= c_) continue;  // UNKNOWN ground truth is not counted
        ++counted_;
        ++gt_[g];
        const uint8_t p = pred.labels[i];
        if (p < c_) {
            ++pred_[p];
            if (p == g) ++inter_[g];
        }
        // Predicted UNKNOWN adds no pred count: it can never intersect, so it
        // is wrong for whatever class the pixel truly has.
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.c_ != c_) throw ShapeError("ConfusionMatrix::merge: class count differs");
    counted_ += other.counted_;
    for (int c = 0; c < c_; ++c) {
        inter_[c] += other.inter_[c];
        pred_[c] += other.pred_[c];
        gt_[c] += other.gt_[c];
    }
}

std::vector<double> per_class_iou(const SegMap& pred, const SegMap& gt, int num_classes) {
    ConfusionMatrix cm(num_classes);
    cm.add(pred, gt);
    return aggregate(cm).per_class_iou;
}

MetricsReport aggregate(const ConfusionMatrix& cm) {
    MetricsReport r;
    const int C = cm.num_classes();
    r.per_class_iou.assign(C, std::numeric_limits<double>::quiet_NaN());
    double miou_sum = 0.0;
    int miou_n = 0;
    long long correct = 0;
    for (int c = 0; c < C; ++c) {
        const long long uni = cm.pred_count(c) + cm.gt_count(c) - cm.intersection(c);
        if (uni > 0)
            r.per_class_iou[c] = static_cast<double>(cm.intersection(c)) / uni;
        if (cm.gt_count(c) > 0) {
            miou_sum += r.per_class_iou[c];
            ++miou_n;
        }
        correct += cm.intersection(c);
    }
    r.miou = miou_n > 0 ? miou_sum / miou_n : 0.0;
    r.counted_pixels = cm.counted_pixels();
    r.pixel_accuracy =
        r.counted_pixels > 0 ? static_cast<double>(correct) / r.counted_pixels : 0.0;
    return r;
}

std::map<std::string, double> group_miou(const MetricsReport& report, const ClassGroups& groups) {
    std::map<std::string, double> out;
    const int C = static_cast<int>(report.per_class_iou.size());
    for (const auto& [name, members] : groups) {
        double sum = 0.0;
        int n = 0;
        for (int c : members) {
            if (c < 0 || c >= C)
                throw ConfigError("group_miou: group '" + name + "' references class " +
                                  std::to_string(c) + " outside [0," + std::to_string(C) + ")");
            if (!std::isnan(report.per_class_iou[c])) {
                sum += report.per_class_iou[c];
                ++n;
            }
        }
        out[name] = n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

ClassGroups toyscapes_groups() {
    return {{"BG", {0, 1, 2, 3}}, {"RIG", {4, 5}}, {"OBJ", {6, 7}}};
}

std::vector<float> entropy_map(const ProbMap& prob) {
    std::vector<float> out(static_cast<size_t>(prob.h) * prob.w, 0.f);
    const size_t plane = out.size();
    for (size_t p = 0; p < plane; ++p) {
        double ent = 0.0;
        for (int k = 0; k < prob.c; ++k) {
            const double v = prob.probs[k * plane + p];
            if (v > 0.0) ent -= v * std::log(v);
        }
        out[p] = static_cast<float>(ent);
    }
    return out;
}

ProbMap multiscale_infer(soman::SomanModel& model, int head, const Image& image,
                         const std::vector<double>& scales) {
    if (scales.empty()) throw ConfigError("multiscale_infer: scales must be non-empty");
    ProbMap acc(model.num_classes(), image.h, image.w);
    for (double s : scales) {
        if (s == 1.0) {
            ProbMap p = soman::forward(model, image, head);
            for (size_t i = 0; i < acc.probs.size(); ++i) acc.probs[i] += p.probs[i];
            continue;
        }
        const int sh = std::max(8, static_cast<int>(std::lround(image.h * s)));
        const int sw = std::max(8, static_cast<int>(std::lround(image.w * s)));
        Image scaled(sh, sw);
        nn::resize_bilinear_plane(image.data.data(), 3, image.h, image.w, scaled.data.data(),
                                  sh, sw);
        ProbMap p = soman::forward(model, scaled, head);
        std::vector<float> back(acc.probs.size());
        nn::resize_bilinear_plane(p.probs.data(), p.c, p.h, p.w, back.data(), image.h, image.w);
        for (size_t i = 0; i < acc.probs.size(); ++i) acc.probs[i] += back[i];
    }
    // Average and renormalize per pixel.
    const size_t plane = static_cast<size_t>(acc.h) * acc.w;
    for (size_t p = 0; p < plane; ++p) {
        double sum = 0.0;
        for (int k = 0; k < acc.c; ++k) sum += acc.probs[k * plane + p];
        const float inv = sum > 0.0 ? static_cast<float>(1.0 / sum) : 0.f;
        for (int k = 0; k < acc.c; ++k) acc.probs[k * plane + p] *= inv;
    }
    return acc;
}

MetricsReport evaluate_model(soman::SomanModel& model, int head, const synth::Dataset& data,
                             const ClassGroups& groups, const std::vector<double>& scales) {
    if (data.samples.empty()) throw ConfigError("evaluate_model: empty dataset");
    if (!data.labeled) throw ConfigError("evaluate_model: dataset has no labels");
    ConfusionMatrix cm(model.num_classes());
    double ent_sum = 0.0;
    const bool single_scale = scales.size() == 1 && scales[0] == 1.0;
    if (single_scale) {
        // Batched fast path.
        const int B = 8;
        for (int start = 0; start < data.size(); start += B) {
            const int end = std::min(data.size(), start + B);
            std::vector<const Image*> ptrs;
            for (int i = start; i < end; ++i) ptrs.push_back(&data.samples[i].image);
            nn::Tensor4<float> logits =
                soman::forward_logits_batch(model, soman::pack_images(ptrs), head);
            nn::softmax_channels(logits);
            for (int i = start; i < end; ++i) {
                ProbMap p = soman::probmap_from_tensor(logits, i - start);
                auto ent = entropy_map(p);
                double s = 0.0;
                for (float e : ent) s += e;
                ent_sum += s / ent.size();
                cm.add(p.argmax(), data.samples[i].labels);
            }
        }
    } else {
        for (const auto& sample : data.samples) {
            ProbMap p = multiscale_infer(model, head, sample.image, scales);
            auto ent = entropy_map(p);
            double s = 0.0;
            for (float e : ent) s += e;
            ent_sum += s / ent.size();
            cm.add(p.argmax(), sample.labels);
        }
    }
    MetricsReport r = aggregate(cm);
    r.avg_entropy = ent_sum / data.size();
    if (!groups.empty()) r.group_mious = group_miou(r, groups);
    return r;
}

MetricsReport evaluate_predictions(const std::vector<SegMap>& preds,
                                   const std::vector<SegMap>& gts, int num_classes,
                                   const ClassGroups& groups) {
    if (preds.size() != gts.size())
        throw ShapeError("evaluate_predictions: prediction/GT count mismatch");
    ConfusionMatrix cm(num_classes);
    for (size_t i = 0; i < preds.size(); ++i) cm.add(preds[i], gts[i]);
    MetricsReport r = aggregate(cm);
    if (!groups.empty()) r.group_mious = group_miou(r, groups);
    return r;
}

namespace {
// Render a double exactly as nlohmann::json would, so CSV and JSON agree.
std::string json_number(double v) { return nlohmann::json(v).dump(); }
}  // namespace

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json per_class = nlohmann::json::array();
    for (double v : per_class_iou) {
        if (std::isnan(v)) per_class.push_back(nullptr);
        else per_class.push_back(v);
    }
    nlohmann::json j{{"per_class_iou", per_class},
                     {"miou", miou},
                     {"empirical_risk", empirical_risk()},
                     {"pixel_accuracy", pixel_accuracy},
                     {"counted_pixels", counted_pixels},
                     {"group_mious", group_mious}};
    if (std::isnan(avg_entropy)) j["avg_entropy"] = nullptr;
    else j["avg_entropy"] = avg_entropy;
    return j;
}

std::string MetricsReport::to_csv() const {
    std::ostringstream out;
    out << "key,value\n";
    for (size_t c = 0; c < per_class_iou.size(); ++c) {
        out << "class_iou_" << c << ",";
        if (std::isnan(per_class_iou[c])) out << "null";
        else out << json_number(per_class_iou[c]);
        out << "\n";
    }
    out << "miou," << json_number(miou) << "\n";
    out << "empirical_risk," << json_number(empirical_risk()) << "\n";
    out << "pixel_accuracy," << json_number(pixel_accuracy) << "\n";
    out << "counted_pixels," << counted_pixels << "\n";
    if (std::isnan(avg_entropy)) out << "avg_entropy,null\n";
    else out << "avg_entropy," << json_number(avg_entropy) << "\n";
    for (const auto& [name, v] : group_mious) {
        out << "group_" << name << ",";
        if (std::isnan(v)) out << "null";
        else out << json_number(v);
        out << "\n";
    }
    return out.str();
}

}  // namespace sfda::eval
