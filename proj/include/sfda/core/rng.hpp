#pragma once

#include <cmath>
#include <cstdint>

namespace sfda {

// splitmix64 finalizer; used both as a stream-mixing hash and to expand a
// user seed into well-distributed internal state.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }
inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) { return mix64(mix64(a, b), c); }

// Deterministic per-element seed derivation for datasets and batches.
inline uint64_t derive_seed(uint64_t seed, uint64_t index) { return mix64(seed, index); }

// PCG32: small, fast, platform-stable. All randomness in the project flows
// through this generator so results do not depend on libstdc++ internals.
class Pcg32 {
public:
    explicit Pcg32(uint64_t seed = 0x853c49e6748fea9bULL, uint64_t stream = 0xda3e39cb94b95bdbULL) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next();
        state_ += mix64(seed);
        next();
    }

    uint32_t next() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    // Uniform in [0, 1).
    double uniform() { return next() * (1.0 / 4294967296.0); }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n > 0.
    uint32_t uniform_int(uint32_t n) {
        // Lemire-style rejection to kill modulo bias.
        uint64_t m = static_cast<uint64_t>(next()) * n;
        uint32_t lo = static_cast<uint32_t>(m);
        if (lo < n) {
            uint32_t t = (-n) % n;
            while (lo < t) {
                m = static_cast<uint64_t>(next()) * n;
                lo = static_cast<uint32_t>(m);
            }
        }
        return static_cast<uint32_t>(m >> 32);
    }

    int uniform_int(int lo, int hi_inclusive) {
        return lo + static_cast<int>(uniform_int(static_cast<uint32_t>(hi_inclusive - lo + 1)));
    }

    // Standard normal via Box-Muller (pair-cached).
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-12) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_ = 0;
    uint64_t inc_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace sfda
