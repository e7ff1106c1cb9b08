#include "sfda/augment/ag.hpp"

#include <filesystem>

#include "sfda/core/errors.hpp"
#include "sfda/core/io.hpp"

namespace sfda::aug {

namespace fs = std::filesystem;

std::string kind_to_string(AugKind k) {
    switch (k) {
        case AugKind::FDA: return "FDA";
        case AugKind::STAT_STYLE: return "STAT_STYLE";
        case AugKind::RANDOM_STYLE: return "RANDOM_STYLE";
        case AugKind::WEATHER: return "WEATHER";
        case AugKind::CARTOON: return "CARTOON";
        case AugKind::WEAK_BLUR: return "WEAK_BLUR";
        case AugKind::WEAK_ROTATE: return "WEAK_ROTATE";
        case AugKind::WEAK_NOISE: return "WEAK_NOISE";
        case AugKind::WEAK_BILATERAL: return "WEAK_BILATERAL";
    }
    throw ConfigError("unknown augmentation kind enum value");
}

AugKind kind_from_string(const std::string& s) {
    if (s == "FDA") return AugKind::FDA;
    if (s == "STAT_STYLE") return AugKind::STAT_STYLE;
    if (s == "RANDOM_STYLE") return AugKind::RANDOM_STYLE;
    if (s == "WEATHER") return AugKind::WEATHER;
    if (s == "CARTOON") return AugKind::CARTOON;
    if (s == "WEAK_BLUR") return AugKind::WEAK_BLUR;
    if (s == "WEAK_ROTATE") return AugKind::WEAK_ROTATE;
    if (s == "WEAK_NOISE") return AugKind::WEAK_NOISE;
    if (s == "WEAK_BILATERAL") return AugKind::WEAK_BILATERAL;
    throw ConfigError("unknown augmentation kind: " + s);
}

nlohmann::json AugmentationGroup::to_json() const {
    return nlohmann::json{{"id", id},
                          {"name", name},
                          {"kind", kind_to_string(kind)},
                          {"params", params},
                          {"geometric", geometric}};
}

AugmentationGroup AugmentationGroup::from_json(const nlohmann::json& j) {
    AugmentationGroup ag;
    ag.id = j.at("id").get<int>();
    ag.name = j.at("name").get<std::string>();
    ag.kind = kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("params"))
        ag.params = j.at("params").get<std::map<std::string, double>>();
    ag.geometric = j.value("geometric", ag.kind == AugKind::WEAK_ROTATE);
    return ag;
}

RefBundle load_ref_bundle(const std::string& dir) {
    const fs::path root(dir);
    const fs::path mpath = root / "manifest.json";
    if (!fs::exists(mpath))
        throw DependencyError("style reference manifest not found: " + mpath.string());
    json manifest = load_json_file(mpath);
    RefBundle bundle;
    for (const auto& name : manifest.at("styles"))
        bundle.styles.push_back(read_ppm(root / name.get<std::string>()));
    if (bundle.styles.empty())
        throw ConfigError("style reference bundle is empty: " + dir);
    return bundle;
}

std::vector<AugmentationGroup> standard_candidates() {
    std::vector<AugmentationGroup> ags;
    ags.push_back({1, "fourier-style", AugKind::FDA, {{"beta", 0.09}}, false});
    ags.push_back({2, "random-style", AugKind::RANDOM_STYLE, {}, false});
    ags.push_back({3, "moment-style", AugKind::STAT_STYLE, {{"alpha", 0.3}}, false});
    ags.push_back({4, "weather", AugKind::WEATHER, {{"max_severity", 3}}, false});
    ags.push_back({5, "cartoon", AugKind::CARTOON, {{"levels", 8}}, false});
    ags.push_back({6, "weak-blur", AugKind::WEAK_BLUR, {}, false});
    ags.push_back({7, "weak-rotate", AugKind::WEAK_ROTATE, {{"max_angle_deg", 15.0}}, true});
    ags.push_back({8, "weak-noise", AugKind::WEAK_NOISE, {{"std", 0.04}}, false});
    ags.push_back({9, "weak-bilateral", AugKind::WEAK_BILATERAL,
                   {{"sigma_space", 2.0}, {"sigma_range", 0.1}}, false});
    return ags;
}

AugmentationGroup identity_candidate(int id) {
    return {id, "identity", AugKind::STAT_STYLE, {{"alpha", 0.0}}, false};
}

}  // namespace sfda::aug
