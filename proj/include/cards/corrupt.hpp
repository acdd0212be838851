#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cards/data.hpp"
#include "cards/rng.hpp"

namespace cards::harness {

enum class CorruptionKind : std::uint8_t {
    gauss_noise = 0,
    shot_noise = 1,
    box_blur = 2,
    contrast = 3,
    pixelate = 4,
};

const char* to_string(CorruptionKind k);
CorruptionKind corruption_from_string(const std::string& s);  // throws on unknown kinds
std::vector<CorruptionKind> corruption_suite();               // all five, in enum order

/// Severity tables (index severity-1; fixed constants, versioned here):
///   gauss-noise  sigma/range   {0.04, 0.06, 0.09, 0.13, 0.18}
///   shot-noise   sigma/range   {0.06, 0.09, 0.13, 0.19, 0.27}, scaled by
///                sqrt(normalized intensity) per pixel
///   box-blur     kernel        {1, 3, 3, 5, 5} with passes {1, 1, 2, 2, 3}
///   contrast     factor        {0.75, 0.6, 0.45, 0.3, 0.2} about the mean
///   pixelate     block         {1, 2, 2, 4, 4}
/// Noise kinds draw one z-sequence per image stream and scale it by the
/// severity parameter, so for a fixed seed the per-pixel delta magnitude is
/// nondecreasing in severity.
struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::gauss_noise;
    int severity = 1;  // 1..5
};

void validate(const CorruptionSpec& spec);

/// In-place corruption of one (channels, d1, d2) image; `rng` is the
/// per-image stream (unused by the deterministic kinds).  Pixels stay inside
/// [lo, hi].
void corrupt(float* image, std::int64_t channels, std::int64_t d1, std::int64_t d2,
             const CorruptionSpec& spec, float lo, float hi, Rng& rng);

/// Corrupted copy of a dataset; image i uses Rng(seed).derive("corrupt")
/// .derive(i), so the z draws match across severities.
Dataset corrupt_dataset(const Dataset& data, const CorruptionSpec& spec, std::uint64_t seed);

}  // namespace cards::harness
