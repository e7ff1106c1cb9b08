#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sfda/core/image.hpp"
#include "sfda/synthdata/domain_spec.hpp"

namespace sfda::synth {

struct LabeledSample {
    Image image;
    SegMap labels;
};

// Renders one scene. Deterministic in (spec, sample_seed); ground truth never
// contains the UNKNOWN id.
LabeledSample generate_sample(const DomainSpec& spec, int64_t sample_seed);

// Element i is generate_sample(spec, derive_seed(seed, i)).
std::vector<LabeledSample> generate_dataset(const DomainSpec& spec, int n, int64_t seed);

// Derives a shifted domain: same class geometry distribution, appearance
// vector = injected + gamma * base.domain_params. If `injected` is empty, a
// plausible appearance vector is drawn from shift_seed.
DomainSpec make_shifted_domain(const DomainSpec& base, double gamma,
                               std::vector<double> injected, int64_t shift_seed);

}  // namespace sfda::synth
