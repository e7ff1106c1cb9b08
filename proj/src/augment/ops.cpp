#include "sfda/augment/ops.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "sfda/core/errors.hpp"
#include "sfda/core/fft.hpp"
#include "sfda/core/rng.hpp"
#include "sfda/nn/layers.hpp"

namespace sfda::aug {

namespace {

constexpr uint64_t kStreamStyle = 0xa56e11;
constexpr uint64_t kStreamWeather = 0x3badf0;
constexpr uint64_t kStreamNoiseRef = 0x11c0de;
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kSigmaEps = 1e-6;

float clamp01(float v) { return v < 0.f ? 0.f : (v > 1.f ? 1.f : v); }

std::vector<float> luminance(const Image& img) {
    std::vector<float> lum(static_cast<size_t>(img.h) * img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            lum[static_cast<size_t>(y) * img.w + x] =
                0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
    return lum;
}

// Mean filter with edge-clamped window, separable two-pass.
void box_mean_plane(const float* src, int h, int w, int r, float* dst) {
    std::vector<float> tmp(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const float* row = src + static_cast<size_t>(y) * w;
        float* out = tmp.data() + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            float s = 0.f;
            int n = 0;
            for (int k = -r; k <= r; ++k) {
                int xx = x + k;
                if (xx < 0 || xx >= w) continue;
                s += row[xx];
                ++n;
            }
            out[x] = s / n;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float s = 0.f;
            int n = 0;
            for (int k = -r; k <= r; ++k) {
                int yy = y + k;
                if (yy < 0 || yy >= h) continue;
                s += tmp[static_cast<size_t>(yy) * w + x];
                ++n;
            }
            dst[static_cast<size_t>(y) * w + x] = s / n;
        }
    }
}

// Guided filter with the image's own luminance as guide; the edge-preserving
// smoother behind the cartoon transform.
void guided_smooth(Image& img, int radius, float eps) {
    const int h = img.h, w = img.w;
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<float> guide = luminance(img);
    std::vector<float> mean_g(plane), mean_gg(plane), gg(plane);
    for (size_t i = 0; i < plane; ++i) gg[i] = guide[i] * guide[i];
    box_mean_plane(guide.data(), h, w, radius, mean_g.data());
    box_mean_plane(gg.data(), h, w, radius, mean_gg.data());
    std::vector<float> var_g(plane);
    for (size_t i = 0; i < plane; ++i) var_g[i] = mean_gg[i] - mean_g[i] * mean_g[i];

    std::vector<float> mean_p(plane), gp(plane), mean_gp(plane), a(plane), b(plane);
    std::vector<float> mean_a(plane), mean_b(plane);
    for (int c = 0; c < 3; ++c) {
        float* p = img.data.data() + c * plane;
        box_mean_plane(p, h, w, radius, mean_p.data());
        for (size_t i = 0; i < plane; ++i) gp[i] = guide[i] * p[i];
        box_mean_plane(gp.data(), h, w, radius, mean_gp.data());
        for (size_t i = 0; i < plane; ++i) {
            float cov = mean_gp[i] - mean_g[i] * mean_p[i];
            a[i] = cov / (var_g[i] + eps);
            b[i] = mean_p[i] - a[i] * mean_g[i];
        }
        box_mean_plane(a.data(), h, w, radius, mean_a.data());
        box_mean_plane(b.data(), h, w, radius, mean_b.data());
        for (size_t i = 0; i < plane; ++i) p[i] = mean_a[i] * guide[i] + mean_b[i];
    }
}

// Sobel gradient magnitude of the luminance plane.
std::vector<float> sobel_magnitude(const Image& img) {
    const int h = img.h, w = img.w;
    std::vector<float> lum = luminance(img);
    std::vector<float> mag(lum.size(), 0.f);
    auto at = [&](int y, int x) {
        y = std::clamp(y, 0, h - 1);
        x = std::clamp(x, 0, w - 1);
        return lum[static_cast<size_t>(y) * w + x];
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                       (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
            float gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                       (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
            mag[static_cast<size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return mag;
}

struct Moments {
    double mean[3];
    double stddev[3];
};

Moments channel_moments(const Image& img) {
    Moments m{};
    const size_t plane = static_cast<size_t>(img.h) * img.w;
    for (int c = 0; c < 3; ++c) {
        const float* p = img.data.data() + c * plane;
        double s = 0.0, ss = 0.0;
        for (size_t i = 0; i < plane; ++i) {
            s += p[i];
            ss += static_cast<double>(p[i]) * p[i];
        }
        const double mean = s / plane;
        const double var = std::max(0.0, ss / plane - mean * mean);
        m.mean[c] = mean;
        m.stddev[c] = std::sqrt(var);
    }
    return m;
}

// Fixed weather texture for one seed; severity only scales the blend, so the
// deviation from the content is monotone in severity by construction.
std::vector<float> weather_mask(int h, int w, WeatherKind kind, int64_t seed) {
    std::vector<float> mask(static_cast<size_t>(h) * w, 0.f);
    Pcg32 rng(mix64(static_cast<uint64_t>(seed)), kStreamWeather);
    if (kind == WeatherKind::SNOW) {
        // Streaks plus round flakes along a common wind direction.
        const double wind = rng.uniform(-0.5, 0.5);
        const int n = std::max(40, h * w / 70);
        for (int i = 0; i < n; ++i) {
            double x = rng.uniform(0.0, w);
            double y = rng.uniform(0.0, h);
            const int len = rng.uniform_int(3, 8);
            const double inten = rng.uniform(0.6, 1.0);
            const double dx = wind + rng.uniform(-0.15, 0.15);
            for (int k = 0; k < len; ++k) {
                int xi = static_cast<int>(x), yi = static_cast<int>(y);
                if (xi >= 0 && xi < w && yi >= 0 && yi < h) {
                    float& mv = mask[static_cast<size_t>(yi) * w + xi];
                    mv = std::max(mv, static_cast<float>(inten));
                }
                x += dx;
                y += 1.0;
            }
        }
    } else {
        // Crystalline lattice: product of two oblique waves, thresholded,
        // plus sparse seeded specks.
        const double f1 = rng.uniform(6.0, 14.0), f2 = rng.uniform(8.0, 18.0);
        const double a1 = rng.uniform(0.0, kTwoPi), a2 = rng.uniform(0.0, kTwoPi);
        const double r1 = rng.uniform(0.4, 1.0), r2 = rng.uniform(0.4, 1.0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double u = static_cast<double>(x) / w, v = static_cast<double>(y) / h;
                double s = std::sin(kTwoPi * f1 * (u + r1 * v) + a1) *
                           std::sin(kTwoPi * f2 * (u * r2 - v) + a2);
                double m = std::abs(s);
                mask[static_cast<size_t>(y) * w + x] =
                    m > 0.72 ? static_cast<float>((m - 0.72) / 0.28) : 0.f;
            }
        }
        const int specks = std::max(20, h * w / 160);
        for (int i = 0; i < specks; ++i) {
            int x = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(w)));
            int y = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(h)));
            mask[static_cast<size_t>(y) * w + x] = 1.f;
        }
    }
    return mask;
}

}  // namespace

Image fda_transfer_raw(const Image& content, const Image& reference, double beta) {
    require_same_shape(content, reference, "fda_transfer");
    if (beta < 0.0 || beta > 0.5)
        throw ConfigError("fda_transfer: beta must lie in [0, 0.5]");
    const int h = content.h, w = content.w;
    const int side = static_cast<int>(std::floor(beta * std::min(h, w)));
    if (side == 0) return content;

    // Band membership in fftshift coordinates: a centered `side` x `side`
    // square with DC at (h/2, w/2).
    const int cy = h / 2, cx = w / 2;
    const int y_lo = cy - side / 2, x_lo = cx - side / 2;
    auto in_band = [&](int fy, int fx) {
        const int sy = (fy + cy) % h, sx = (fx + cx) % w;
        return sy >= y_lo && sy < y_lo + side && sx >= x_lo && sx < x_lo + side;
    };

    Image out(h, w);
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<double> buf(plane);
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < plane; ++i) buf[i] = content.data[c * plane + i];
        ComplexGrid spec_c = fft2d(buf, h, w);
        for (size_t i = 0; i < plane; ++i) buf[i] = reference.data[c * plane + i];
        ComplexGrid spec_r = fft2d(buf, h, w);
        for (int fy = 0; fy < h; ++fy) {
            for (int fx = 0; fx < w; ++fx) {
                if (!in_band(fy, fx)) continue;
                const size_t i = static_cast<size_t>(fy) * w + fx;
                const double amp_r = std::abs(spec_r[i]);
                const double amp_c = std::abs(spec_c[i]);
                // Rescale to the reference amplitude, keeping the content phase.
                if (amp_c > 1e-300) {
                    spec_c[i] *= amp_r / amp_c;
                } else {
                    spec_c[i] = {amp_r, 0.0};
                }
            }
        }
        auto inv = ifft2d(spec_c, h, w);
        for (size_t i = 0; i < plane; ++i)
            out.data[c * plane + i] = static_cast<float>(inv[i].real());
    }
    return out;
}

Image fda_transfer(const Image& content, const Image& reference, double beta) {
    Image out = fda_transfer_raw(content, reference, beta);
    out.clip01();
    return out;
}

Image stat_style_transfer_raw(const Image& content, const Image& reference, double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw ConfigError("stat_style_transfer: alpha must lie in [0, 1]");
    if (alpha == 0.0) return content;
    const Moments mc = channel_moments(content);
    const Moments mr = channel_moments(reference);
    Image out = content;
    const size_t plane = static_cast<size_t>(content.h) * content.w;
    for (int c = 0; c < 3; ++c) {
        const double scale = mr.stddev[c] / std::max(mc.stddev[c], kSigmaEps);
        float* p = out.data.data() + c * plane;
        for (size_t i = 0; i < plane; ++i) {
            const double stylized = (p[i] - mc.mean[c]) * scale + mr.mean[c];
            p[i] = static_cast<float>((1.0 - alpha) * p[i] + alpha * stylized);
        }
    }
    return out;
}

Image stat_style_transfer(const Image& content, const Image& reference, double alpha) {
    Image out = stat_style_transfer_raw(content, reference, alpha);
    if (alpha > 0.0) out.clip01();
    return out;
}

Image random_color_stylize(const Image& content, int64_t style_seed) {
    Pcg32 rng(mix64(static_cast<uint64_t>(style_seed)), kStreamStyle);
    // Color mixing matrix: rows sum to 1, entries in [-0.3, 1.3].
    double m[3][3];
    for (int r = 0; r < 3; ++r) {
        while (true) {
            const double a = rng.uniform(-0.3, 1.3);
            const double b = rng.uniform(-0.3, 1.3);
            const double c = 1.0 - a - b;
            if (c >= -0.3 && c <= 1.3) {
                m[r][0] = a;
                m[r][1] = b;
                m[r][2] = c;
                break;
            }
        }
    }
    double gamma[3];
    for (int c = 0; c < 3; ++c) gamma[c] = rng.uniform(0.6, 1.6);

    // Low-frequency multiplicative field: bilinear over a 4x4 seeded grid.
    constexpr int G = 4;
    float grid[G][G];
    for (int gy = 0; gy < G; ++gy)
        for (int gx = 0; gx < G; ++gx) grid[gy][gx] = static_cast<float>(rng.uniform(0.8, 1.2));
    const int h = content.h, w = content.w;
    auto field_at = [&](int y, int x) {
        const double fy = static_cast<double>(y) / std::max(1, h - 1) * (G - 1);
        const double fx = static_cast<double>(x) / std::max(1, w - 1) * (G - 1);
        const int y0 = std::min(static_cast<int>(fy), G - 2);
        const int x0 = std::min(static_cast<int>(fx), G - 2);
        const double ty = fy - y0, tx = fx - x0;
        const double top = grid[y0][x0] + (grid[y0][x0 + 1] - grid[y0][x0]) * tx;
        const double bot = grid[y0 + 1][x0] + (grid[y0 + 1][x0 + 1] - grid[y0 + 1][x0]) * tx;
        return top + (bot - top) * ty;
    };

    Image out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double f = field_at(y, x);
            double in[3] = {content.at(0, y, x), content.at(1, y, x), content.at(2, y, x)};
            for (int c = 0; c < 3; ++c) {
                double v = m[c][0] * in[0] + m[c][1] * in[1] + m[c][2] * in[2];
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                v = std::pow(v, gamma[c]) * f;
                out.at(c, y, x) = static_cast<float>(v);
            }
        }
    }
    out.clip01();
    return out;
}

Image weather_overlay(const Image& content, WeatherKind kind, int severity, int64_t seed) {
    if (severity < 1 || severity > 5)
        throw ConfigError("weather_overlay: severity must lie in [1, 5]");
    const std::vector<float> mask = weather_mask(content.h, content.w, kind, seed);
    const float blend = 0.12f + 0.14f * severity;
    const float haze = kind == WeatherKind::SNOW ? 0.05f * severity : 0.03f * severity;
    const float color[3] = {kind == WeatherKind::SNOW ? 1.0f : 0.82f,
                            kind == WeatherKind::SNOW ? 1.0f : 0.90f, 1.0f};
    Image out = content;
    const size_t plane = static_cast<size_t>(content.h) * content.w;
    for (int c = 0; c < 3; ++c) {
        float* p = out.data.data() + c * plane;
        for (size_t i = 0; i < plane; ++i) {
            const float a = blend * mask[i] + haze;
            p[i] = (1.f - a) * p[i] + a * color[c];
        }
    }
    out.clip01();
    return out;
}

Image cartoonize(const Image& content, int levels, int smooth_iters, bool edge_overlay) {
    if (levels < 2) throw ConfigError("cartoonize: levels must be >= 2");
    Image out = content;
    for (int i = 0; i < smooth_iters; ++i) guided_smooth(out, 2, 0.02f * 0.02f);
    const std::vector<float> mag = edge_overlay ? sobel_magnitude(out) : std::vector<float>();
    const float q = static_cast<float>(levels - 1);
    for (float& v : out.data) v = std::round(clamp01(v) * q) / q;
    if (edge_overlay) {
        const size_t plane = static_cast<size_t>(out.h) * out.w;
        for (int c = 0; c < 3; ++c) {
            float* p = out.data.data() + c * plane;
            for (size_t i = 0; i < plane; ++i)
                if (mag[i] > 1.2f) p[i] *= 0.45f;
        }
    }
    out.clip01();
    return out;
}

Image box_blur5(const Image& content) {
    Image out = content;
    const size_t plane = static_cast<size_t>(content.h) * content.w;
    for (int c = 0; c < 3; ++c)
        box_mean_plane(content.data.data() + c * plane, content.h, content.w, 2,
                       out.data.data() + c * plane);
    return out;
}

Image add_noise(const Image& content, double stddev, int64_t seed) {
    Pcg32 rng(mix64(static_cast<uint64_t>(seed)), kStreamStyle ^ 0x5a5a);
    Image out = content;
    for (float& v : out.data) v += static_cast<float>(rng.normal() * stddev);
    out.clip01();
    return out;
}

Image bilateral5(const Image& content, double sigma_space, double sigma_range) {
    const int h = content.h, w = content.w, r = 2;
    const std::vector<float> lum = luminance(content);
    Image out(h, w);
    const double inv_ss = 1.0 / (2.0 * sigma_space * sigma_space);
    const double inv_sr = 1.0 / (2.0 * sigma_range * sigma_range);
    double spatial[5][5];
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            spatial[dy + r][dx + r] = std::exp(-(dy * dy + dx * dx) * inv_ss);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double center = lum[static_cast<size_t>(y) * w + x];
            double wsum = 0.0, acc[3] = {0, 0, 0};
            for (int dy = -r; dy <= r; ++dy) {
                const int yy = std::clamp(y + dy, 0, h - 1);
                for (int dx = -r; dx <= r; ++dx) {
                    const int xx = std::clamp(x + dx, 0, w - 1);
                    const double d = lum[static_cast<size_t>(yy) * w + xx] - center;
                    const double wt = spatial[dy + r][dx + r] * std::exp(-d * d * inv_sr);
                    wsum += wt;
                    for (int c = 0; c < 3; ++c) acc[c] += wt * content.at(c, yy, xx);
                }
            }
            for (int c = 0; c < 3; ++c)
                out.at(c, y, x) = static_cast<float>(acc[c] / wsum);
        }
    }
    return out;
}

std::pair<Image, SegMap> rotate_pair(const Image& img, const SegMap& seg, double angle_deg,
                                     int unknown_id) {
    if (img.h != seg.h || img.w != seg.w)
        throw ShapeError("rotate_pair: image and seg-map shapes differ");
    const int h = img.h, w = img.w;
    const double a = angle_deg * kTwoPi / 360.0;
    const double ca = std::cos(a), sa = std::sin(a);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    Image oimg(h, w);
    SegMap oseg(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Inverse mapping: destination -> source.
            const double dy = y - cy, dx = x - cx;
            const double sx = ca * dx + sa * dy + cx;
            const double sy = -sa * dx + ca * dy + cy;
            const int nx = static_cast<int>(std::lround(sx));
            const int ny = static_cast<int>(std::lround(sy));
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) {
                oseg.at(y, x) = static_cast<uint8_t>(unknown_id);
                continue;  // image stays black outside the frame
            }
            oseg.at(y, x) = seg.at(ny, nx);
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, w - 1);
            const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, h - 1);
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double tx = std::clamp(sx - x0, 0.0, 1.0);
            const double ty = std::clamp(sy - y0, 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double top = img.at(c, y0, x0) * (1 - tx) + img.at(c, y0, x1) * tx;
                const double bot = img.at(c, y1, x0) * (1 - tx) + img.at(c, y1, x1) * tx;
                oimg.at(c, y, x) = static_cast<float>(top * (1 - ty) + bot * ty);
            }
        }
    }
    return {std::move(oimg), std::move(oseg)};
}

Image noise_reference(int h, int w, int64_t seed) {
    Pcg32 rng(mix64(static_cast<uint64_t>(seed)), kStreamNoiseRef);
    Image out(h, w);
    for (float& v : out.data) v = static_cast<float>(rng.uniform());
    return out;
}

std::pair<Image, SegMap> apply_ag(const AugContext& ctx, const AugmentationGroup& ag,
                                  const Image& image, const SegMap& segmap, int64_t rng_seed) {
    Pcg32 rng(mix64(static_cast<uint64_t>(rng_seed), static_cast<uint64_t>(ag.id)),
              0xd15bac);

    auto pick_reference = [&](bool allow_noise) -> Image {
        const size_t n_styles = ctx.bundle ? ctx.bundle->styles.size() : 0;
        if (allow_noise && (n_styles == 0 || rng.uniform() < 0.5))
            return noise_reference(image.h, image.w, static_cast<int64_t>(rng.next()));
        if (n_styles == 0)
            throw ConfigError("apply_ag: style reference bundle required for '" + ag.name + "'");
        const Image& ref = ctx.bundle->styles[rng.uniform_int(static_cast<uint32_t>(n_styles))];
        if (ref.h == image.h && ref.w == image.w) return ref;
        Image resized(image.h, image.w);
        nn::resize_bilinear_plane(ref.data.data(), 3, ref.h, ref.w, resized.data.data(),
                                  image.h, image.w);
        return resized;
    };

    switch (ag.kind) {
        case AugKind::FDA:
            return {fda_transfer(image, pick_reference(true), ag.param("beta", 0.09)), segmap};
        case AugKind::STAT_STYLE: {
            const double alpha = ag.param("alpha", 0.3);
            if (alpha == 0.0) return {image, segmap};
            return {stat_style_transfer(image, pick_reference(false), alpha), segmap};
        }
        case AugKind::RANDOM_STYLE:
            return {random_color_stylize(image, static_cast<int64_t>(rng.next())), segmap};
        case AugKind::WEATHER: {
            const WeatherKind kind = rng.uniform() < 0.5 ? WeatherKind::SNOW : WeatherKind::FROST;
            const int max_sev = static_cast<int>(ag.param("max_severity", 3));
            const int severity = rng.uniform_int(1, max_sev);
            return {weather_overlay(image, kind, severity, static_cast<int64_t>(rng.next())),
                    segmap};
        }
        case AugKind::CARTOON:
            return {cartoonize(image, static_cast<int>(ag.param("levels", 8))), segmap};
        case AugKind::WEAK_BLUR:
            return {box_blur5(image), segmap};
        case AugKind::WEAK_ROTATE: {
            const double max_angle = ag.param("max_angle_deg", 15.0);
            const double angle = rng.uniform(-max_angle, max_angle);
            return rotate_pair(image, segmap, angle, ctx.num_classes);
        }
        case AugKind::WEAK_NOISE:
            return {add_noise(image, ag.param("std", 0.04), static_cast<int64_t>(rng.next())),
                    segmap};
        case AugKind::WEAK_BILATERAL:
            return {bilateral5(image, ag.param("sigma_space", 2.0), ag.param("sigma_range", 0.1)),
                    segmap};
    }
    throw ConfigError("apply_ag: unknown augmentation kind");
}

}  // namespace sfda::aug
