#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sfda/synthdata/generator.hpp"

namespace sfda::synth {

// On-disk dataset: paired image/label rasters plus a JSON index manifest
// recording the spec and seeds. Target datasets keep their ground truth on
// disk for evaluation, but loaders can drop it.
struct Dataset {
    DomainSpec spec;
    int64_t seed = 0;
    std::vector<LabeledSample> samples;
    bool labeled = true;

    int size() const { return static_cast<int>(samples.size()); }
};

void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir, bool with_labels = true);

Dataset generate_dataset_struct(const DomainSpec& spec, int n, int64_t seed);

}  // namespace sfda::synth
