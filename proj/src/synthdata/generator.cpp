#include "sfda/synthdata/generator.hpp"

#include <algorithm>
#include <cmath>

#include "sfda/core/errors.hpp"
#include "sfda/core/rng.hpp"

namespace sfda::synth {

namespace {

constexpr uint64_t kStreamLayout = 0x5c31a7;
constexpr uint64_t kStreamNoise = 0x90d1ce;
constexpr uint64_t kStreamShift = 0x7e11ed;

double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

struct Rgb {
    double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    double hh = h * 6.0;
    int i = static_cast<int>(hh) % 6;
    double f = hh - std::floor(hh);
    double p = v * (1.0 - s);
    double q = v * (1.0 - s * f);
    double t = v * (1.0 - s * (1.0 - f));
    switch (i) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

// Appearance factors after clamping to renderable ranges. The spec vector
// itself is unconstrained; rendering interprets it defensively.
struct Appearance {
    double hue_base, hue_spread, sat_scale, gain;
    double tex_freq, tex_amp, noise_std, tex_phase;
};

Appearance resolve_appearance(const DomainSpec& spec) {
    const auto& p = spec.domain_params;
    Appearance a;
    a.hue_base = p[0];
    a.hue_spread = clampd(p[1], -0.5, 0.5);
    a.sat_scale = clampd(p[2], 0.0, 1.6);
    a.gain = clampd(p[3], 0.08, 2.0);
    a.tex_freq = clampd(p[4], 0.0, 40.0);
    a.tex_amp = clampd(p[5], 0.0, 0.5);
    a.noise_std = clampd(p[6], 0.0, 0.35);
    a.tex_phase = p[7];
    return a;
}

struct ClassStyle {
    double sat0, val0;
};

ClassStyle class_style(int cls) {
    switch (cls) {
        case kClassSky: return {0.45, 0.92};
        case kClassRoad: return {0.40, 0.38};
        case kClassSidewalk: return {0.50, 0.62};
        case kClassMidground: return {0.70, 0.52};
        case 4: return {0.90, 0.75};
        case 5: return {0.90, 0.68};
        default: return {0.85, 0.66};
    }
}

void paint_rect(SegMap& m, int cx, int cy, int hw, int hh, uint8_t cls) {
    int x0 = std::max(0, cx - hw), x1 = std::min(m.w - 1, cx + hw);
    int y0 = std::max(0, cy - hh), y1 = std::min(m.h - 1, cy + hh);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m.at(y, x) = cls;
}

void paint_ellipse(SegMap& m, int cx, int cy, int hw, int hh, uint8_t cls) {
    int x0 = std::max(0, cx - hw), x1 = std::min(m.w - 1, cx + hw);
    int y0 = std::max(0, cy - hh), y1 = std::min(m.h - 1, cy + hh);
    double rx = std::max(1, hw), ry = std::max(1, hh);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double dx = (x - cx) / rx, dy = (y - cy) / ry;
            if (dx * dx + dy * dy <= 1.0) m.at(y, x) = cls;
        }
    }
}

void paint_triangle(SegMap& m, int cx, int cy, int hw, int hh, uint8_t cls) {
    // Upright isoceles triangle: apex at (cx, cy-hh), base at cy+hh.
    int y0 = std::max(0, cy - hh), y1 = std::min(m.h - 1, cy + hh);
    for (int y = y0; y <= y1; ++y) {
        double t = (2.0 * hh == 0) ? 1.0 : static_cast<double>(y - (cy - hh)) / (2.0 * hh);
        int half = std::max(0, static_cast<int>(std::lround(t * hw)));
        int x0 = std::max(0, cx - half), x1 = std::min(m.w - 1, cx + half);
        for (int x = x0; x <= x1; ++x) m.at(y, x) = cls;
    }
}

}  // namespace

void DomainSpec::validate() const {
    if (num_classes < 2) throw ConfigError("DomainSpec: num_classes must be >= 2");
    if (num_classes > 200) throw ConfigError("DomainSpec: num_classes must be <= 200");
    if (height < 32 || width < 32)
        throw ConfigError("DomainSpec: resolution must be at least 32x32");
    if (domain_params.size() != static_cast<size_t>(kNumParams))
        throw ConfigError("DomainSpec: domain_params must have exactly 8 entries");
    for (double v : domain_params)
        if (!std::isfinite(v)) throw ConfigError("DomainSpec: non-finite domain parameter");
    if (!std::isfinite(gamma)) throw ConfigError("DomainSpec: non-finite gamma");
}

nlohmann::json DomainSpec::to_json() const {
    return nlohmann::json{{"class_layout_seed", class_layout_seed},
                          {"domain_params", domain_params},
                          {"gamma", gamma},
                          {"num_classes", num_classes},
                          {"resolution", {height, width}}};
}

DomainSpec DomainSpec::from_json(const nlohmann::json& j) {
    DomainSpec s;
    s.class_layout_seed = j.at("class_layout_seed").get<int64_t>();
    s.domain_params = j.at("domain_params").get<std::vector<double>>();
    s.gamma = j.at("gamma").get<double>();
    s.num_classes = j.at("num_classes").get<int>();
    auto res = j.at("resolution");
    s.height = res.at(0).get<int>();
    s.width = res.at(1).get<int>();
    s.validate();
    return s;
}

DomainSpec toyscapes_base() {
    DomainSpec s;
    s.class_layout_seed = 1109;
    s.domain_params = {0.58, 0.12, 0.62, 1.0, 4.0, 0.10, 0.03, 0.2};
    s.gamma = 1.0;
    s.num_classes = 8;
    s.height = 64;
    s.width = 128;
    return s;
}

LabeledSample generate_sample(const DomainSpec& spec, int64_t sample_seed) {
    spec.validate();
    const int H = spec.height, W = spec.width, C = spec.num_classes;

    // Geometry stream: depends on the layout seed and the sample seed only.
    Pcg32 layout(mix64(static_cast<uint64_t>(spec.class_layout_seed),
                       static_cast<uint64_t>(sample_seed)),
                 kStreamLayout);

    SegMap seg(H, W);
    const int sky_rows = static_cast<int>(std::lround(H * layout.uniform(0.25, 0.40)));
    const int road_rows = static_cast<int>(std::lround(H * layout.uniform(0.30, 0.45)));
    const int road_top = H - road_rows;
    const uint8_t mid_cls = static_cast<uint8_t>(C >= 4 ? kClassMidground : std::min(C - 1, 2));
    const uint8_t side_cls = static_cast<uint8_t>(C >= 3 ? kClassSidewalk : C - 1);
    const uint8_t road_cls = static_cast<uint8_t>(C >= 2 ? kClassRoad : 0);

    for (int y = 0; y < H; ++y) {
        uint8_t cls;
        if (y < sky_rows) cls = kClassSky;
        else if (y >= road_top) cls = road_cls;
        else cls = mid_cls;
        for (int x = 0; x < W; ++x) seg.at(y, x) = cls;
    }
    // Sidewalk strips flank the road band on both sides.
    const int side_w = static_cast<int>(std::lround(W * layout.uniform(0.06, 0.14)));
    for (int y = road_top; y < H; ++y) {
        for (int x = 0; x < side_w; ++x) seg.at(y, x) = side_cls;
        for (int x = W - side_w; x < W; ++x) seg.at(y, x) = side_cls;
    }

    // Object instances over the midground/road area, classes 4..C-1 assigned
    // distinct-first so class coverage stays high.
    if (C >= 5) {
        int n_obj = (layout.uniform() < 0.05) ? 2 : layout.uniform_int(3, 8);
        std::vector<uint8_t> obj_classes;
        for (int c = 4; c < C; ++c) obj_classes.push_back(static_cast<uint8_t>(c));
        for (size_t i = obj_classes.size(); i > 1; --i)
            std::swap(obj_classes[i - 1], obj_classes[layout.uniform_int(static_cast<uint32_t>(i))]);
        for (int j = 0; j < n_obj; ++j) {
            const uint8_t cls = obj_classes[j % obj_classes.size()];
            const bool thin = (cls == 4 || cls == 5);
            const int cx = layout.uniform_int(static_cast<uint32_t>(W));
            const int ground = road_top + layout.uniform_int(0, std::max(1, road_rows / 3));
            int hw, hh;
            if (thin) {
                hw = std::max(1, static_cast<int>(std::lround(W * layout.uniform(0.008, 0.018))));
                hh = std::max(2, static_cast<int>(std::lround(H * layout.uniform(0.10, 0.20))));
            } else {
                hw = std::max(2, static_cast<int>(std::lround(W * layout.uniform(0.04, 0.10))));
                hh = std::max(2, static_cast<int>(std::lround(H * layout.uniform(0.05, 0.11))));
            }
            const int cy = ground - hh;
            const int shape = thin ? (layout.uniform() < 0.7 ? 0 : 2) : layout.uniform_int(3u);
            switch (shape) {
                case 0: paint_rect(seg, cx, cy, hw, hh, cls); break;
                case 1: paint_ellipse(seg, cx, cy, hw, hh, cls); break;
                default: paint_triangle(seg, cx, cy, hw, hh, cls); break;
            }
        }
    }

    // Appearance: colors and texture from domain_params, additive noise from
    // a sample-seeded stream whose draws do not depend on the parameters.
    const Appearance ap = resolve_appearance(spec);
    Image img(H, W);
    const double two_pi = 6.283185307179586476925286766559;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int cls = seg.at(y, x);
            const ClassStyle st = class_style(cls);
            const double hue = ap.hue_base + ap.hue_spread * cls;
            const Rgb base = hsv_to_rgb(hue, clampd(ap.sat_scale * st.sat0, 0.0, 1.0),
                                        clampd(st.val0, 0.0, 1.0));
            const double phase = two_pi * (ap.tex_phase + 0.137 * cls);
            const double tex = ap.tex_amp *
                std::sin(two_pi * ap.tex_freq * (static_cast<double>(x) / W +
                                                 0.73 * static_cast<double>(y) / H) + phase);
            img.at(0, y, x) = static_cast<float>((base.r + tex) * ap.gain);
            img.at(1, y, x) = static_cast<float>((base.g + tex) * ap.gain);
            img.at(2, y, x) = static_cast<float>((base.b + tex) * ap.gain);
        }
    }
    Pcg32 noise(mix64(static_cast<uint64_t>(sample_seed)), kStreamNoise);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                img.at(c, y, x) += static_cast<float>(noise.normal() * ap.noise_std);
    img.clip01();

    return {std::move(img), std::move(seg)};
}

std::vector<LabeledSample> generate_dataset(const DomainSpec& spec, int n, int64_t seed) {
    if (n < 1) throw ConfigError("generate_dataset: n must be >= 1");
    spec.validate();
    std::vector<LabeledSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i)
        out.push_back(generate_sample(spec, static_cast<int64_t>(
            derive_seed(static_cast<uint64_t>(seed), static_cast<uint64_t>(i)))));
    return out;
}

DomainSpec make_shifted_domain(const DomainSpec& base, double gamma,
                               std::vector<double> injected, int64_t shift_seed) {
    base.validate();
    if (injected.empty()) {
        Pcg32 rng(mix64(static_cast<uint64_t>(shift_seed)), kStreamShift);
        injected = {rng.uniform(0.0, 1.0),  rng.uniform(0.08, 0.16),
                    rng.uniform(0.3, 0.9),  rng.uniform(0.5, 1.3),
                    rng.uniform(2.0, 8.0),  rng.uniform(0.04, 0.18),
                    rng.uniform(0.0, 0.08), rng.uniform(0.0, 1.0)};
    }
    if (injected.size() != static_cast<size_t>(DomainSpec::kNumParams))
        throw ConfigError("make_shifted_domain: injected params must have 8 entries");
    DomainSpec out = base;
    out.gamma = gamma;
    for (int i = 0; i < DomainSpec::kNumParams; ++i)
        out.domain_params[i] = injected[i] + gamma * base.domain_params[i];
    out.validate();
    return out;
}

}  // namespace sfda::synth
