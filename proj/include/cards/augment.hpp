#pragma once

#include <cstdint>
#include <string>

#include "cards/data.hpp"
#include "cards/rng.hpp"

namespace cards::harness {

enum class AugmentKind : std::uint8_t { clean = 0, gaussian = 1, mix = 2 };

const char* to_string(AugmentKind k);
AugmentKind augment_from_string(const std::string& s);

/// clean: identity.
/// gaussian: with probability p, add i.i.d. N(0, sigma * range) per pixel.
/// mix: 3 op chains of depth U{1..max_depth}, combined with Dirichlet(1)
/// weights, then blended with the original by a Beta(1,1) skip weight.  The
/// op set (circular shifts, flips, gamma, brightness) is disjoint from the
/// corruption suite.
struct AugmentationSpec {
    AugmentKind kind = AugmentKind::clean;
    double sigma = 0.1;  // gaussian: stddev as a fraction of the value range
    double p = 0.5;      // gaussian: application probability
    int max_depth = 3;   // mix: chain depth upper bound
};

/// Throws std::invalid_argument when sigma <= 0, p is outside [0, 1], or
/// max_depth < 1.
void validate(const AugmentationSpec& spec);

/// In-place augmentation of one (channels, d1, d2) image; `rng` is the
/// per-image stream.  Pixels stay inside [lo, hi].
void augment(float* image, std::int64_t channels, std::int64_t d1, std::int64_t d2,
             const AugmentationSpec& spec, float lo, float hi, Rng& rng);

/// Whole-dataset convenience: image i uses Rng(seed).derive("augment-pool")
/// .derive(i).  Used to build gate-index pools from the training set.
Tensor augment_pool(const Dataset& data, const AugmentationSpec& spec, std::uint64_t seed);

}  // namespace cards::harness
