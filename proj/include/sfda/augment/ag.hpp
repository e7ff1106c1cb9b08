#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sfda/core/image.hpp"

namespace sfda::aug {

enum class AugKind {
    FDA,
    STAT_STYLE,
    RANDOM_STYLE,
    WEATHER,
    CARTOON,
    WEAK_BLUR,
    WEAK_ROTATE,
    WEAK_NOISE,
    WEAK_BILATERAL,
};

std::string kind_to_string(AugKind k);
AugKind kind_from_string(const std::string& s);

// One class-preserving, domain-varying transform family. Non-geometric kinds
// leave the seg-map untouched; WEAK_ROTATE applies the identical spatial map
// to both rasters.
struct AugmentationGroup {
    int id = 0;
    std::string name;
    AugKind kind = AugKind::STAT_STYLE;
    std::map<std::string, double> params;
    bool geometric = false;

    double param(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }

    nlohmann::json to_json() const;
    static AugmentationGroup from_json(const nlohmann::json& j);
};

// Reference images for the Fourier and moment-matching stylizers. The style
// set ships with the repository; uniform-noise references are synthesized
// per call.
struct RefBundle {
    std::vector<Image> styles;
};

RefBundle load_ref_bundle(const std::string& dir);

// Everything apply_ag needs beyond the group itself.
struct AugContext {
    int num_classes = 8;  // UNKNOWN id for geometric fills
    const RefBundle* bundle = nullptr;
};

// The nine standard candidates (five strong groups, four weak ones).
std::vector<AugmentationGroup> standard_candidates();

// A do-nothing candidate (moment blend with zero strength); useful as a
// negative control in selection tests.
AugmentationGroup identity_candidate(int id);

}  // namespace sfda::aug
