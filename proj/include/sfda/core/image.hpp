#pragma once

#include <cstdint>
#include <vector>

#include "sfda/core/errors.hpp"

namespace sfda {

// H x W x 3 raster, values in [0,1]. Stored planar (channel, row, col) so the
// pixel planes can be handed to the network input without reshuffling.
struct Image {
    int h = 0;
    int w = 0;
    std::vector<float> data;  // size 3*h*w, index (c*h + y)*w + x

    Image() = default;
    Image(int h_, int w_) : h(h_), w(w_), data(static_cast<size_t>(3) * h_ * w_, 0.f) {}

    float& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
    size_t size() const { return data.size(); }

    void clip01() {
        for (float& v : data) v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    }
};

// H x W label raster over C classes; value C is the reserved UNKNOWN id.
struct SegMap {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> labels;  // size h*w, row-major

    SegMap() = default;
    SegMap(int h_, int w_) : h(h_), w(w_), labels(static_cast<size_t>(h_) * w_, 0) {}

    uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return labels.size(); }
};

// C x H x W per-pixel categorical distribution.
struct ProbMap {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<float> probs;  // index (k*h + y)*w + x

    ProbMap() = default;
    ProbMap(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_), probs(static_cast<size_t>(c_) * h_ * w_, 0.f) {}

    float& at(int k, int y, int x) { return probs[(static_cast<size_t>(k) * h + y) * w + x]; }
    float at(int k, int y, int x) const { return probs[(static_cast<size_t>(k) * h + y) * w + x]; }

    // Per-pixel argmax label raster.
    SegMap argmax() const {
        SegMap out(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                int best = 0;
                float bv = at(0, y, x);
                for (int k = 1; k < c; ++k) {
                    float v = at(k, y, x);
                    if (v > bv) { bv = v; best = k; }
                }
                out.at(y, x) = static_cast<uint8_t>(best);
            }
        }
        return out;
    }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError(std::string(what) + ": image shapes differ");
}

inline void require_same_shape(const SegMap& a, const SegMap& b, const char* what) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError(std::string(what) + ": seg-map shapes differ");
}

}  // namespace sfda
