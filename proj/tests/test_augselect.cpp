#include <doctest.h>

#include <algorithm>

#include "sfda/augselect/select.hpp"
#include "sfda/eval/metrics.hpp"

using namespace sfda;
using namespace sfda::augsel;

namespace {

soman::ArchConfig small_arch(int num_classes) {
    soman::ArchConfig a;
    a.blocks = {{6, 1}, {10, 2}};
    a.head_channels = 10;
    a.num_classes = num_classes;
    return a;
}

synth::Dataset small_dataset(int n, uint64_t seed) {
    synth::DomainSpec spec = synth::toyscapes_base();
    spec.num_classes = 6;
    spec.height = 32;
    spec.width = 48;
    return synth::generate_dataset_struct(spec, n, static_cast<int64_t>(seed));
}

aug::RefBundle tiny_bundle() {
    aug::RefBundle b;
    for (uint64_t i = 0; i < 4; ++i) {
        Image img(32, 48);
        Pcg32 rng(400 + i);
        for (auto& v : img.data) v = static_cast<float>(rng.uniform());
        b.styles.push_back(std::move(img));
    }
    return b;
}

}  // namespace

TEST_SUITE("augselect") {

TEST_CASE("baseline training is seeded and rejects empty data") {
    soman::TrainConfig cfg;
    cfg.iters = 0;
    cfg.seed = 5;
    synth::Dataset ds = small_dataset(4, 1);
    soman::SomanModel a = train_baseline(ds, small_arch(6), cfg);
    soman::SomanModel b = train_baseline(ds, small_arch(6), cfg);
    // Zero iterations: the model equals its (seeded) initialization.
    CHECK(nn::snapshot_params(a.net.all_params()) == nn::snapshot_params(b.net.all_params()));
    CHECK(a.k() == 0);
    CHECK(a.routing == soman::Routing::ERM);
    CHECK_THROWS_AS(train_baseline(synth::Dataset{}, small_arch(6), cfg), ConfigError);

    cfg.iters = 3;
    cfg.batch_size = 2;
    soman::SomanModel c = train_baseline(ds, small_arch(6), cfg);
    soman::SomanModel d = train_baseline(ds, small_arch(6), cfg);
    CHECK(nn::snapshot_params(c.net.all_params()) == nn::snapshot_params(d.net.all_params()));
    CHECK(nn::snapshot_params(c.net.all_params()) != nn::snapshot_params(a.net.all_params()));
}

TEST_CASE("identity transform has a risk gap of exactly zero") {
    synth::Dataset ds = small_dataset(5, 2);
    soman::TrainConfig cfg;
    cfg.iters = 0;
    soman::SomanModel baseline = train_baseline(ds, small_arch(6), cfg);
    aug::AugContext ctx;
    ctx.num_classes = 6;
    const double gap = risk_gap(baseline, aug::identity_candidate(42), ds, ctx, 9);
    CHECK(gap == 0.0);
}

TEST_CASE("selection report structure, threshold rule, and tie-broken order") {
    synth::Dataset train = small_dataset(16, 3);
    synth::Dataset val = small_dataset(6, 4);
    soman::TrainConfig cfg;
    cfg.iters = 40;
    cfg.batch_size = 2;
    cfg.lr = 0.05;
    cfg.seed = 7;
    soman::SomanModel baseline = train_baseline(train, small_arch(6), cfg);
    aug::AugContext ctx;
    ctx.num_classes = 6;
    aug::RefBundle bundle = tiny_bundle();
    ctx.bundle = &bundle;

    std::vector<aug::AugmentationGroup> cands = aug::standard_candidates();
    cands.push_back(aug::identity_candidate(10));
    SelectionReport rep = select_augmentations(baseline, cands, val, ctx, 0.25, 11);

    REQUIRE(rep.candidates.size() == cands.size());
    // diversity_order is a permutation of the candidate ids sorted by gap.
    std::vector<int> ids;
    for (const auto& c : cands) ids.push_back(c.id);
    std::vector<int> sorted_order = rep.diversity_order;
    std::sort(sorted_order.begin(), sorted_order.end());
    std::sort(ids.begin(), ids.end());
    CHECK(sorted_order == ids);
    for (size_t i = 1; i < rep.diversity_order.size(); ++i) {
        auto gap_of = [&](int id) {
            for (const auto& c : rep.candidates)
                if (c.ag_id == id) return c.risk_gap;
            return -1.0;
        };
        const double g_prev = gap_of(rep.diversity_order[i - 1]);
        const double g_cur = gap_of(rep.diversity_order[i]);
        CHECK(g_prev >= g_cur);
        if (g_prev == g_cur)
            CHECK(rep.diversity_order[i - 1] < rep.diversity_order[i]);
    }
    // selected <=> gap > tau, and the identity candidate is never selected.
    for (const auto& c : rep.candidates) {
        CHECK(c.selected == (c.risk_gap > rep.tau));
        CHECK(c.baseline_miou - c.risk_gap == doctest::Approx(c.augmented_miou));
        if (c.ag_id == 10) CHECK_FALSE(c.selected);
    }

    // Raising tau never adds a selected candidate (monotone rule).
    SelectionReport stricter = select_augmentations(baseline, cands, val, ctx, 0.4, 11);
    for (size_t i = 0; i < rep.candidates.size(); ++i)
        if (stricter.candidates[i].selected) CHECK(rep.candidates[i].selected);

    // JSON round trip.
    SelectionReport back = SelectionReport::from_json(rep.to_json());
    CHECK(back.tau == rep.tau);
    CHECK(back.diversity_order == rep.diversity_order);
    REQUIRE(back.candidates.size() == rep.candidates.size());
    for (size_t i = 0; i < rep.candidates.size(); ++i)
        CHECK(back.candidates[i].risk_gap == rep.candidates[i].risk_gap);

    // top_selected honors the cap and the order.
    auto top2 = rep.top_selected(2);
    CHECK(top2.size() <= 2);
}

TEST_CASE("random stylization hurts the baseline more than weak blur") {
    synth::Dataset train = small_dataset(20, 5);
    synth::Dataset val = small_dataset(8, 6);
    soman::TrainConfig cfg;
    cfg.iters = 80;
    cfg.batch_size = 2;
    cfg.lr = 0.06;
    cfg.seed = 13;
    soman::SomanModel baseline = train_baseline(train, small_arch(6), cfg);
    aug::AugContext ctx;
    ctx.num_classes = 6;
    auto cands = aug::standard_candidates();
    const auto& random_style = cands[1];
    const auto& weak_blur = cands[5];
    REQUIRE(random_style.kind == aug::AugKind::RANDOM_STYLE);
    REQUIRE(weak_blur.kind == aug::AugKind::WEAK_BLUR);
    const double gap_style = risk_gap(baseline, random_style, val, ctx, 21);
    const double gap_blur = risk_gap(baseline, weak_blur, val, ctx, 21);
    CHECK(gap_style > gap_blur);
}

TEST_CASE("a model trained on the base domain degrades more at gamma 0 than gamma 1") {
    // Small injected offset: gamma=1 keeps the base appearance nearby, while
    // gamma=0 suppresses it entirely.
    std::vector<double> q = {0.05, 0.01, 0.08, 0.15, 0.8, 0.02, 0.01, 0.1};
    std::vector<double> miou_g0, miou_g1;
    for (uint64_t seed : {1u, 2u, 3u}) {
        synth::Dataset train = small_dataset(18, 100 + seed);
        soman::TrainConfig cfg;
        cfg.iters = 70;
        cfg.batch_size = 2;
        cfg.lr = 0.06;
        cfg.seed = seed;
        soman::SomanModel baseline = train_baseline(train, small_arch(6), cfg);

        synth::DomainSpec base = train.spec;
        synth::Dataset shift0 = synth::generate_dataset_struct(
            synth::make_shifted_domain(base, 0.0, q, 1), 6, 900 + seed);
        synth::Dataset shift1 = synth::generate_dataset_struct(
            synth::make_shifted_domain(base, 1.0, q, 1), 6, 900 + seed);
        miou_g0.push_back(
            eval::evaluate_model(baseline, soman::kHeadGlobal, shift0).miou);
        miou_g1.push_back(
            eval::evaluate_model(baseline, soman::kHeadGlobal, shift1).miou);
    }
    std::sort(miou_g0.begin(), miou_g0.end());
    std::sort(miou_g1.begin(), miou_g1.end());
    CHECK(miou_g0[1] < miou_g1[1]);  // 3-seed median comparison
}

}  // TEST_SUITE
