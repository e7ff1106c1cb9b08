#include <doctest.h>

#include <cmath>

#include "sfda/eval/metrics.hpp"

using namespace sfda;
using namespace sfda::eval;

namespace {

SegMap seg_of(int h, int w, std::initializer_list<int> vals) {
    SegMap m(h, w);
    size_t i = 0;
    for (int v : vals) m.labels[i++] = static_cast<uint8_t>(v);
    return m;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("per-class IoU on enumerable fixtures") {
    // 2x2: gt rows [0,0;1,1], pred all zero -> IoU0 = 2/4, IoU1 = 0/2.
    SegMap gt = seg_of(2, 2, {0, 0, 1, 1});
    SegMap pred = seg_of(2, 2, {0, 0, 0, 0});
    auto iou = per_class_iou(pred, gt, 2);
    CHECK(iou[0] == doctest::Approx(0.5));
    CHECK(iou[1] == doctest::Approx(0.0));

    // Perfect prediction.
    auto perfect = per_class_iou(gt, gt, 2);
    CHECK(perfect[0] == doctest::Approx(1.0));
    CHECK(perfect[1] == doctest::Approx(1.0));

    // All-UNKNOWN ground truth: nothing is counted.
    SegMap ugt = seg_of(2, 2, {2, 2, 2, 2});
    ConfusionMatrix cm(2);
    cm.add(pred, ugt);
    auto rep = aggregate(cm);
    CHECK(rep.counted_pixels == 0);
    CHECK(std::isnan(rep.per_class_iou[0]));
    CHECK(std::isnan(rep.per_class_iou[1]));

    // Predicted UNKNOWN counts as wrong for the true class.
    SegMap pu = seg_of(2, 2, {2, 0, 1, 1});
    auto iou_pu = per_class_iou(pu, gt, 2);
    CHECK(iou_pu[0] == doctest::Approx(1.0 / 2.0));  // inter 1, union 2
    CHECK(iou_pu[1] == doctest::Approx(1.0));

    // Swapping pred/gt leaves the IoU unchanged.
    auto a = per_class_iou(pred, gt, 2);
    auto b = per_class_iou(gt, pred, 2);
    CHECK(a[0] == doctest::Approx(b[0]));
    CHECK(a[1] == doctest::Approx(b[1]));
}

TEST_CASE("mIoU counts only classes present in the ground truth") {
    // Class 2 appears only in the prediction: its IoU is 0 but it must not
    // drag the mean down.
    SegMap gt = seg_of(1, 4, {0, 0, 1, 1});
    SegMap pred = seg_of(1, 4, {0, 2, 1, 1});
    ConfusionMatrix cm(3);
    cm.add(pred, gt);
    auto rep = aggregate(cm);
    CHECK(rep.per_class_iou[0] == doctest::Approx(0.5));
    CHECK(rep.per_class_iou[1] == doctest::Approx(1.0));
    CHECK(rep.per_class_iou[2] == doctest::Approx(0.0));
    CHECK(rep.miou == doctest::Approx((0.5 + 1.0) / 2));
    CHECK(rep.empirical_risk() == doctest::Approx(1.0 - rep.miou));
}

TEST_CASE("aggregate pools counts rather than averaging per-image IoUs") {
    // Image A: gt {0,0}, pred {0,1}. Image B: gt {1,1}, pred {1,1}.
    SegMap gta = seg_of(1, 2, {0, 0}), preda = seg_of(1, 2, {0, 1});
    SegMap gtb = seg_of(1, 2, {1, 1}), predb = seg_of(1, 2, {1, 1});
    ConfusionMatrix pooled(2);
    pooled.add(preda, gta);
    pooled.add(predb, gtb);
    auto rep = aggregate(pooled);
    // Pooled: class0 inter 1 / union 2; class1 inter 2 / union 3.
    CHECK(rep.per_class_iou[0] == doctest::Approx(0.5));
    CHECK(rep.per_class_iou[1] == doctest::Approx(2.0 / 3.0));

    // Per-image averaging gives a different class-1 value (0.5 vs 1 mean).
    auto ia = per_class_iou(preda, gta, 2);
    auto ib = per_class_iou(predb, gtb, 2);
    const double averaged = (ia[1] + ib[1]) / 2;  // (0 + 1) / 2
    CHECK(averaged != doctest::Approx(rep.per_class_iou[1]));

    // A duplicated sample leaves pooled metrics unchanged.
    ConfusionMatrix dup(2);
    dup.add(preda, gta);
    dup.add(preda, gta);
    ConfusionMatrix single(2);
    single.add(preda, gta);
    CHECK(aggregate(dup).per_class_iou[0] ==
          doctest::Approx(aggregate(single).per_class_iou[0]));
    CHECK(aggregate(dup).miou == doctest::Approx(aggregate(single).miou));
}

TEST_CASE("merge is addition of counts") {
    SegMap gt = seg_of(1, 4, {0, 0, 1, 1});
    SegMap pred = seg_of(1, 4, {0, 1, 1, 0});
    ConfusionMatrix a(2), b(2), whole(2);
    a.add(pred, gt);
    b.add(gt, gt);
    whole.add(pred, gt);
    whole.add(gt, gt);
    a.merge(b);
    CHECK(aggregate(a).miou == doctest::Approx(aggregate(whole).miou));
}

TEST_CASE("group mIoU skips absent members and validates ids") {
    SegMap gt = seg_of(1, 4, {0, 0, 1, 1});
    SegMap pred = seg_of(1, 4, {0, 0, 1, 0});
    ConfusionMatrix cm(4);
    cm.add(pred, gt);
    auto rep = aggregate(cm);
    auto groups = group_miou(rep, {{"a", {0}}, {"ab", {0, 1}}, {"with_absent", {1, 3}}});
    CHECK(groups["a"] == doctest::Approx(rep.per_class_iou[0]));
    CHECK(groups["ab"] ==
          doctest::Approx((rep.per_class_iou[0] + rep.per_class_iou[1]) / 2));
    CHECK(groups["with_absent"] == doctest::Approx(rep.per_class_iou[1]));
    CHECK_THROWS_AS(group_miou(rep, {{"bad", {7}}}), ConfigError);
}

TEST_CASE("entropy map hits closed-form values") {
    ProbMap p(8, 1, 2);
    // Pixel 0: one-hot; pixel 1: uniform.
    p.at(3, 0, 0) = 1.f;
    for (int k = 0; k < 8; ++k) p.at(k, 0, 1) = 1.f / 8;
    auto ent = entropy_map(p);
    CHECK(ent[0] == doctest::Approx(0.0));
    CHECK(ent[1] == doctest::Approx(std::log(8.0)).epsilon(1e-6));

    ProbMap half(4, 1, 1);
    half.at(0, 0, 0) = 0.5f;
    half.at(1, 0, 0) = 0.5f;
    CHECK(entropy_map(half)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("csv mirrors the json numbers exactly") {
    MetricsReport rep;
    rep.per_class_iou = {0.125, std::numeric_limits<double>::quiet_NaN()};
    rep.miou = 1.0 / 3.0;
    rep.pixel_accuracy = 0.7;
    rep.counted_pixels = 42;
    rep.avg_entropy = 0.9;
    rep.group_mious = {{"BG", 0.5}};
    const std::string csv = rep.to_csv();
    const nlohmann::json j = rep.to_json();
    CHECK(csv.find("miou," + j.at("miou").dump()) != std::string::npos);
    CHECK(csv.find("class_iou_0," + j.at("per_class_iou").at(0).dump()) != std::string::npos);
    CHECK(csv.find("class_iou_1,null") != std::string::npos);
    CHECK(csv.find("group_BG," + j.at("group_mious").at("BG").dump()) != std::string::npos);
}

}  // TEST_SUITE
