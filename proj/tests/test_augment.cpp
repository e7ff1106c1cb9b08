#include <doctest.h>

#include <cmath>
#include <complex>
#include <set>

#include "sfda/augment/ops.hpp"
#include "sfda/core/fft.hpp"
#include "sfda/core/rng.hpp"
#include "sfda/synthdata/generator.hpp"

using namespace sfda;
using namespace sfda::aug;

namespace {

Image random_image(int h, int w, uint64_t seed) {
    Image img(h, w);
    Pcg32 rng(seed);
    // 8-bit grid values, like anything decoded from disk.
    for (auto& v : img.data) v = static_cast<float>(rng.uniform_int(256u)) / 255.f;
    return img;
}

// Independent reference DFT for the spectral assertions (direct O(N^2) sum).
ComplexGrid naive_dft(const Image& img, int channel) {
    const int h = img.h, w = img.w;
    ComplexGrid out(static_cast<size_t>(h) * w);
    const double two_pi = 2.0 * 3.14159265358979323846;
    for (int fy = 0; fy < h; ++fy)
        for (int fx = 0; fx < w; ++fx) {
            std::complex<double> acc{0, 0};
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double ang = -two_pi * (double(fy * y) / h + double(fx * x) / w);
                    acc += static_cast<double>(img.at(channel, y, x)) *
                           std::complex<double>(std::cos(ang), std::sin(ang));
                }
            out[static_cast<size_t>(fy) * w + fx] = acc;
        }
    return out;
}

synth::LabeledSample toy_sample(uint64_t seed) {
    synth::DomainSpec spec = synth::toyscapes_base();
    spec.height = 32;
    spec.width = 48;
    return synth::generate_sample(spec, static_cast<int64_t>(seed));
}

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("fda beta=0 returns the content untouched") {
    Image content = random_image(16, 24, 1);
    Image ref = random_image(16, 24, 2);
    Image out = fda_transfer(content, ref, 0.0);
    CHECK(out.data == content.data);
}

TEST_CASE("fda preserves the content phase everywhere (pre-clip)") {
    Image content = random_image(16, 20, 3);
    Image ref = random_image(16, 20, 4);
    Image out = fda_transfer_raw(content, ref, 0.2);
    for (int c = 0; c < 3; ++c) {
        ComplexGrid sc = naive_dft(content, c);
        ComplexGrid so = naive_dft(out, c);
        for (size_t i = 0; i < sc.size(); ++i) {
            if (std::abs(sc[i]) < 1e-8 || std::abs(so[i]) < 1e-8) continue;
            std::complex<double> pc = sc[i] / std::abs(sc[i]);
            std::complex<double> po = so[i] / std::abs(so[i]);
            CHECK(std::abs(pc - po) < 1e-6);
        }
    }
}

TEST_CASE("fda swaps reference amplitude on the symmetric band core") {
    // 20x20, beta=0.3 -> band side 6 centered at (10,10) in shifted coords.
    // The output is real, so amplitudes are checkable only on frequency pairs
    // (f, -f) that the band treats consistently; the even-sided band has a
    // one-cell asymmetric rim where real output averages the two sides.
    const int h = 20, w = 20;
    Image content = random_image(h, w, 5);
    Image ref = random_image(h, w, 6);
    const double beta = 0.3;
    const int side = static_cast<int>(std::floor(beta * std::min(h, w)));
    REQUIRE(side == 6);
    Image out = fda_transfer_raw(content, ref, beta);

    auto in_band = [&](int fy, int fx) {
        const int sy = (fy + h / 2) % h, sx = (fx + w / 2) % w;
        return sy >= h / 2 - side / 2 && sy < h / 2 - side / 2 + side &&
               sx >= w / 2 - side / 2 && sx < w / 2 - side / 2 + side;
    };
    auto mirrored = [&](int f, int n) { return (n - f) % n; };

    for (int c = 0; c < 3; ++c) {
        ComplexGrid sc = naive_dft(content, c);
        ComplexGrid sr = naive_dft(ref, c);
        ComplexGrid so = naive_dft(out, c);
        int band_core = 0, outside = 0;
        for (int fy = 0; fy < h; ++fy) {
            for (int fx = 0; fx < w; ++fx) {
                const size_t i = static_cast<size_t>(fy) * w + fx;
                const bool self = in_band(fy, fx);
                const bool mirror = in_band(mirrored(fy, h), mirrored(fx, w));
                if (self && mirror) {
                    CHECK(std::abs(so[i]) ==
                          doctest::Approx(std::abs(sr[i])).epsilon(1e-6));
                    ++band_core;
                } else if (!self && !mirror) {
                    CHECK(std::abs(so[i]) ==
                          doctest::Approx(std::abs(sc[i])).epsilon(1e-6));
                    ++outside;
                }
            }
        }
        CHECK(band_core >= 25);  // the 5x5 symmetric core of the 6x6 band
        CHECK(outside >= h * w - 50);
    }
}

TEST_CASE("fda rejects mismatched shapes") {
    CHECK_THROWS_AS(fda_transfer(random_image(16, 16, 1), random_image(16, 24, 2), 0.1),
                    ShapeError);
}

TEST_CASE("stat style alpha=0 is the exact identity") {
    Image content = random_image(12, 14, 7);
    Image ref = random_image(9, 33, 8);  // different shape is legal here
    CHECK(stat_style_transfer(content, ref, 0.0).data == content.data);
}

TEST_CASE("stat style alpha=1 matches reference moments within 1e-5") {
    Image content = random_image(24, 30, 9);
    // Keep the stylized result inside [0,1] so no clipping interferes.
    for (auto& v : content.data) v = 0.45f + 0.1f * v;
    Image ref = random_image(16, 16, 10);
    for (auto& v : ref.data) v = 0.5f + 0.08f * v;
    Image out = stat_style_transfer_raw(content, ref, 1.0);
    const size_t plane = static_cast<size_t>(out.h) * out.w;
    const size_t rplane = static_cast<size_t>(ref.h) * ref.w;
    for (int c = 0; c < 3; ++c) {
        double m = 0, s = 0, mr = 0, sr = 0;
        for (size_t i = 0; i < plane; ++i) m += out.data[c * plane + i];
        m /= plane;
        for (size_t i = 0; i < plane; ++i) {
            double d = out.data[c * plane + i] - m;
            s += d * d;
        }
        s = std::sqrt(s / plane);
        for (size_t i = 0; i < rplane; ++i) mr += ref.data[c * rplane + i];
        mr /= rplane;
        for (size_t i = 0; i < rplane; ++i) {
            double d = ref.data[c * rplane + i] - mr;
            sr += d * d;
        }
        sr = std::sqrt(sr / rplane);
        CHECK(std::abs(m - mr) < 1e-5);
        CHECK(std::abs(s - sr) < 1e-5);
    }
}

TEST_CASE("stat style alpha=0.3 lands between the content and reference moments") {
    Image content = random_image(24, 30, 11);
    for (auto& v : content.data) v = 0.40f + 0.12f * v;
    Image ref = random_image(20, 20, 12);
    for (auto& v : ref.data) v = 0.55f + 0.06f * v;
    Image out = stat_style_transfer_raw(content, ref, 0.3);
    const size_t plane = static_cast<size_t>(out.h) * out.w;
    for (int c = 0; c < 3; ++c) {
        auto mean_of = [plane](const Image& im, int ch) {
            double m = 0;
            const size_t pl = static_cast<size_t>(im.h) * im.w;
            for (size_t i = 0; i < pl; ++i) m += im.data[ch * pl + i];
            return m / pl;
        };
        (void)plane;
        const double mc = mean_of(content, c), mr = mean_of(ref, c), mo = mean_of(out, c);
        CHECK(mo >= std::min(mc, mr) - 1e-9);
        CHECK(mo <= std::max(mc, mr) + 1e-9);
    }
}

TEST_CASE("random color stylize is seeded and seed-sensitive") {
    Image content = random_image(20, 26, 13);
    Image a = random_color_stylize(content, 42);
    Image b = random_color_stylize(content, 42);
    CHECK(a.data == b.data);
    Image c = random_color_stylize(content, 43);
    double mad = 0;
    for (size_t i = 0; i < a.data.size(); ++i) mad += std::abs(a.data[i] - c.data[i]);
    CHECK(mad / a.data.size() > 0.0);
}

TEST_CASE("weather blend deviation grows with severity") {
    Image content = random_image(32, 40, 14);
    for (auto kind : {WeatherKind::SNOW, WeatherKind::FROST}) {
        Image s1 = weather_overlay(content, kind, 1, 5);
        Image s3 = weather_overlay(content, kind, 3, 5);
        double d1 = 0, d3 = 0;
        for (size_t i = 0; i < content.data.size(); ++i) {
            d1 += std::abs(s1.data[i] - content.data[i]);
            d3 += std::abs(s3.data[i] - content.data[i]);
        }
        CHECK(d3 >= d1);
        CHECK(weather_overlay(content, kind, 2, 7).data ==
              weather_overlay(content, kind, 2, 7).data);
    }
    CHECK_THROWS_AS(weather_overlay(content, WeatherKind::SNOW, 0, 1), ConfigError);
    CHECK_THROWS_AS(weather_overlay(content, WeatherKind::SNOW, 6, 1), ConfigError);
}

TEST_CASE("weather AG sampling never exceeds severity 3") {
    // The WEATHER candidate draws severity uniformly in {1..3}; rerunning the
    // dispatch many times must never produce a stronger overlay than the
    // explicit severity-3 call with the same underlying mask.
    AugContext ctx;
    ctx.num_classes = 8;
    AugmentationGroup ag;
    ag.id = 4;
    ag.kind = AugKind::WEATHER;
    ag.params["max_severity"] = 3;
    synth::LabeledSample s = toy_sample(3);
    for (int64_t seed = 0; seed < 40; ++seed) {
        auto [img, seg] = apply_ag(ctx, ag, s.image, s.labels, seed);
        CHECK(seg.labels == s.labels.labels);
        for (float v : img.data) {
            CHECK(v >= 0.f);
            CHECK(v <= 1.f);
        }
    }
}

TEST_CASE("cartoonize quantizes to at most levels values per channel") {
    Image content = random_image(24, 32, 15);
    const int levels = 5;
    Image out = cartoonize(content, levels, 2, false);
    std::set<float> values(out.data.begin(), out.data.end());
    CHECK(values.size() <= 3 * levels);
    CHECK_THROWS_AS(cartoonize(content, 1), ConfigError);
}

TEST_CASE("cartoonize with 256 levels, no smoothing, no edges is identity") {
    Image content = random_image(16, 20, 16);  // 8-bit grid input
    Image out = cartoonize(content, 256, 0, false);
    CHECK(out.data == content.data);
}

TEST_CASE("cartoonize is nearly idempotent") {
    double total_mad = 0;
    int count = 0;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        synth::LabeledSample s = toy_sample(seed);
        Image once = cartoonize(s.image, 8);
        Image twice = cartoonize(once, 8);
        double mad = 0;
        for (size_t i = 0; i < once.data.size(); ++i)
            mad += std::abs(once.data[i] - twice.data[i]);
        total_mad += mad / once.data.size();
        ++count;
    }
    CHECK(total_mad / count < 0.05);
}

TEST_CASE("rotation at angle zero is the identity on both rasters") {
    synth::LabeledSample s = toy_sample(4);
    auto [img, seg] = rotate_pair(s.image, s.labels, 0.0, 8);
    CHECK(img.data == s.image.data);
    CHECK(seg.labels == s.labels.labels);
}

TEST_CASE("rotation fills out-of-frame labels with UNKNOWN and maps both rasters together") {
    synth::LabeledSample s = toy_sample(5);
    auto [img, seg] = rotate_pair(s.image, s.labels, 14.0, 8);
    (void)img;
    bool has_unknown = false;
    for (uint8_t v : seg.labels) has_unknown |= (v == 8);
    CHECK(has_unknown);
    // Determinism through the dispatcher.
    AugContext ctx;
    ctx.num_classes = 8;
    AugmentationGroup rot;
    rot.id = 7;
    rot.kind = AugKind::WEAK_ROTATE;
    rot.geometric = true;
    auto [i1, s1] = apply_ag(ctx, rot, s.image, s.labels, 99);
    auto [i2, s2] = apply_ag(ctx, rot, s.image, s.labels, 99);
    CHECK(i1.data == i2.data);
    CHECK(s1.labels == s2.labels);
}

TEST_CASE("non-geometric dispatch returns the seg-map bit-identical") {
    AugContext ctx;
    ctx.num_classes = 8;
    RefBundle bundle;
    for (uint64_t i = 0; i < 3; ++i) bundle.styles.push_back(random_image(16, 24, 100 + i));
    ctx.bundle = &bundle;
    synth::LabeledSample s = toy_sample(6);
    for (const auto& ag : standard_candidates()) {
        if (ag.geometric) continue;
        auto [img, seg] = apply_ag(ctx, ag, s.image, s.labels, 7);
        CHECK(seg.labels == s.labels.labels);
        for (float v : img.data) {
            CHECK(v >= 0.f);
            CHECK(v <= 1.f);
        }
        auto [img2, seg2] = apply_ag(ctx, ag, s.image, s.labels, 7);
        CHECK(img.data == img2.data);
    }
}

TEST_CASE("identity candidate passes through the dispatcher untouched") {
    AugContext ctx;
    ctx.num_classes = 8;
    synth::LabeledSample s = toy_sample(7);
    auto [img, seg] = apply_ag(ctx, identity_candidate(99), s.image, s.labels, 3);
    CHECK(img.data == s.image.data);
    CHECK(seg.labels == s.labels.labels);
}

TEST_CASE("ag json round trip") {
    for (const auto& ag : standard_candidates()) {
        AugmentationGroup back = AugmentationGroup::from_json(ag.to_json());
        CHECK(back.id == ag.id);
        CHECK(back.name == ag.name);
        CHECK(back.kind == ag.kind);
        CHECK(back.params == ag.params);
        CHECK(back.geometric == ag.geometric);
    }
}

}  // TEST_SUITE
