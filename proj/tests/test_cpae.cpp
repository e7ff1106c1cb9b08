#include <doctest.h>

#include <filesystem>

#include "sfda/cpae/train.hpp"
#include "sfda/soman/train.hpp"

using namespace sfda;
using namespace sfda::soman;
namespace fs = std::filesystem;

namespace {

ArchConfig ds4_arch(int num_classes) {
    ArchConfig a;
    a.blocks = {{8, 1}, {12, 2}, {16, 2}};  // downsample 4, as the autoencoder expects
    a.head_channels = 16;
    a.num_classes = num_classes;
    return a;
}

synth::Dataset tiny_dataset(int n, int num_classes, uint64_t seed) {
    synth::DomainSpec spec = synth::toyscapes_base();
    spec.num_classes = num_classes;
    spec.height = 32;
    spec.width = 48;
    return synth::generate_dataset_struct(spec, n, static_cast<int64_t>(seed));
}

std::vector<aug::AugmentationGroup> tiny_pool() {
    auto all = aug::standard_candidates();
    std::vector<aug::AugmentationGroup> out;
    for (const auto& ag : all)
        if (ag.kind == aug::AugKind::RANDOM_STYLE || ag.kind == aug::AugKind::WEAK_NOISE)
            out.push_back(ag);
    return out;
}

SomanModel tiny_lopp(int num_classes, uint64_t seed) {
    std::vector<int> ids;
    for (auto& ag : tiny_pool()) ids.push_back(ag.id);
    SomanModel m = make_model(ds4_arch(num_classes), Routing::LOpp, ids, seed);
    return m;
}

}  // namespace

TEST_SUITE("cpae") {

TEST_CASE("forward yields a normalized prob map at input resolution") {
    const int C = 5;
    SomanModel m = tiny_lopp(C, 3);
    cpae::CpaeModel q(C, 16, 4, 7);
    synth::Dataset ds = tiny_dataset(1, C, 1);
    ProbMap noisy = forward(m, ds.samples[0].image, 1);
    FeatureMap feats = forward_features(m, ds.samples[0].image);
    ProbMap out = cpae::cpae_forward(q, noisy, feats);
    CHECK(out.c == C);
    CHECK(out.h == noisy.h);
    CHECK(out.w == noisy.w);
    for (int y = 0; y < out.h; y += 9) {
        for (int x = 0; x < out.w; x += 13) {
            double s = 0;
            for (int k = 0; k < C; ++k) s += out.at(k, y, x);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
        }
    }
    ProbMap out2 = cpae::cpae_forward(q, noisy, feats);
    CHECK(out.probs == out2.probs);  // deterministic given parameters
}

TEST_CASE("shape mismatches are refused") {
    const int C = 5;
    cpae::CpaeModel q(C, 16, 4, 7);
    ProbMap noisy(C, 32, 48);
    nn::Tensor4<float> bad_feats(1, 12, 8, 12);  // wrong channel count
    nn::Tensor4<float> nt(1, C, 32, 48);
    CHECK_THROWS_AS(q.forward_logits(nt, bad_feats), ShapeError);
    nn::Tensor4<float> bad_spatial(1, 16, 9, 12);
    CHECK_THROWS_AS(q.forward_logits(nt, bad_spatial), ShapeError);

    SomanModel m = tiny_lopp(C, 3);
    cpae::CpaeModel wrong(C, 24, 4, 7);
    CHECK_THROWS_AS(cpae::check_feature_compat(wrong, m), ConfigError);
}

TEST_CASE("make_noisy_pair needs LO++ routing and is deterministic") {
    const int C = 5;
    synth::Dataset ds = tiny_dataset(2, C, 2);
    aug::AugContext ctx;
    ctx.num_classes = C;
    SomanModel erm = make_model(ds4_arch(C), Routing::ERM, {}, 5);
    CHECK_THROWS_AS(cpae::make_noisy_pair(erm, {}, ctx, ds.samples[0], 1), ConfigError);

    SomanModel m = tiny_lopp(C, 5);
    auto pool = tiny_pool();
    cpae::NoisyPair a = cpae::make_noisy_pair(m, pool, ctx, ds.samples[0], 11);
    cpae::NoisyPair b = cpae::make_noisy_pair(m, pool, ctx, ds.samples[0], 11);
    CHECK(a.noisy.probs == b.noisy.probs);
    CHECK(a.features.v == b.features.v);
    CHECK(a.drawn_head == b.drawn_head);
    CHECK(a.drawn_head >= 1);
    CHECK(a.drawn_head <= m.k());
    for (uint8_t v : a.clean.labels) CHECK(v < C);  // ground truth, no UNKNOWN
}

TEST_CASE("training leaves the segmentation model bit-identical and reduces the loss") {
    const int C = 5;
    synth::Dataset ds = tiny_dataset(10, C, 3);
    aug::AugContext ctx;
    ctx.num_classes = C;
    SomanModel m = tiny_lopp(C, 9);
    m.class_weights = class_weights_from(ds, C);
    // Light vendor training so the noisy maps carry signal.
    TrainConfig tc;
    tc.iters = 30;
    tc.batch_size = 2;
    tc.lr = 0.05;
    tc.seed = 4;
    vendor_train(m, ds, ctx, tiny_pool(), tc);

    auto snapshot = nn::snapshot_params(m.net.all_params());
    cpae::CpaeModel q(C, 16, 4, 13);
    cpae::CpaeTrainConfig cc;
    cc.iters = 60;
    cc.batch_size = 2;
    cc.lr = 0.04;
    cc.seed = 6;
    cpae::CpaeTrainStats stats = cpae::cpae_train(q, m, tiny_pool(), ctx, ds, cc);
    CHECK(nn::params_equal(m.net.all_params(), snapshot));  // frozen, bit-exact

    REQUIRE(stats.losses.size() == 60);
    const size_t win = 6;
    double first = 0, last = 0;
    for (size_t i = 0; i < win; ++i) {
        first += stats.losses[i];
        last += stats.losses[stats.losses.size() - 1 - i];
    }
    CHECK(last < first);
}

TEST_CASE("refine applies the forward pass exactly once") {
    const int C = 5;
    SomanModel m = tiny_lopp(C, 15);
    cpae::CpaeModel q(C, 16, 4, 17);
    synth::Dataset ds = tiny_dataset(1, C, 4);
    ProbMap p = forward(m, ds.samples[0].image, kHeadGlobal);
    FeatureMap f = forward_features(m, ds.samples[0].image);
    const long before = cpae::forward_call_count();
    ProbMap refined = cpae::refine(q, p, f);
    CHECK(cpae::forward_call_count() == before + 1);
    CHECK(refined.c == p.c);
    CHECK(refined.h == p.h);
    CHECK(refined.w == p.w);
}

TEST_CASE("checkpoint round trip and model-kind separation") {
    const fs::path dir = fs::temp_directory_path() / "sfda_cpae_ckpt";
    fs::create_directories(dir);
    const int C = 5;
    cpae::CpaeModel q(C, 16, 4, 19);
    cpae::save_cpae(dir / "q.ckpt", q, "h1");
    cpae::CpaeModel back = cpae::load_cpae(dir / "q.ckpt");
    CHECK(back.num_classes() == C);
    CHECK(back.feature_channels() == 16);
    auto pa = q.params();
    auto pb = back.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].value == *pb[i].value);

    // A segmentation checkpoint is not a valid autoencoder checkpoint.
    SomanModel m = tiny_lopp(C, 21);
    save_model(dir / "m.ckpt", m, "h1");
    CHECK_THROWS_AS(cpae::load_cpae(dir / "m.ckpt"), ConfigError);
    CHECK_THROWS_AS(soman::load_model(dir / "q.ckpt"), ConfigError);
    fs::remove_all(dir);
}

}  // TEST_SUITE
