#include "sfda/synthdata/dataset.hpp"

#include <cstdio>

#include "sfda/core/errors.hpp"
#include "sfda/core/io.hpp"

namespace sfda::synth {

namespace fs = std::filesystem;

void save_dataset(const fs::path& dir, const Dataset& ds) {
    fs::create_directories(dir);
    json entries = json::array();
    char name[64];
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        std::snprintf(name, sizeof(name), "img_%06zu.ppm", i);
        const std::string img_name = name;
        std::snprintf(name, sizeof(name), "lab_%06zu.pgm", i);
        const std::string lab_name = name;
        write_ppm(dir / img_name, ds.samples[i].image);
        json e{{"image", img_name}};
        if (ds.labeled) {
            write_pgm(dir / lab_name, ds.samples[i].labels);
            e["label"] = lab_name;
        }
        entries.push_back(e);
    }
    json manifest{{"spec", ds.spec.to_json()},
                  {"seed", ds.seed},
                  {"n", ds.samples.size()},
                  {"labeled", ds.labeled},
                  {"entries", entries}};
    save_json_file(dir / "manifest.json", manifest);
}

Dataset load_dataset(const fs::path& dir, bool with_labels) {
    const fs::path mpath = dir / "manifest.json";
    if (!fs::exists(mpath))
        throw DependencyError("dataset manifest not found: " + mpath.string());
    json manifest = load_json_file(mpath);
    Dataset ds;
    ds.spec = DomainSpec::from_json(manifest.at("spec"));
    ds.seed = manifest.at("seed").get<int64_t>();
    const bool stored_labels = manifest.at("labeled").get<bool>();
    ds.labeled = with_labels && stored_labels;
    for (const auto& e : manifest.at("entries")) {
        LabeledSample s;
        s.image = read_ppm(dir / e.at("image").get<std::string>());
        if (ds.labeled) s.labels = read_pgm(dir / e.at("label").get<std::string>());
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Dataset generate_dataset_struct(const DomainSpec& spec, int n, int64_t seed) {
    Dataset ds;
    ds.spec = spec;
    ds.seed = seed;
    ds.samples = generate_dataset(spec, n, seed);
    return ds;
}

}  // namespace sfda::synth
