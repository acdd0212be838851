#pragma once

#include <cstdint>
#include <string>

#include "cards/data.hpp"

namespace cards::harness {

/// On-disk dataset description: a flat float32 image file plus a byte-per-
/// label file.  file size must equal count * channels * d1 * d2 * 4 bytes and
/// the label file must hold exactly `count` bytes.
struct DatasetManifest {
    std::string images_path;
    std::string labels_path;
    std::int64_t count = 0;
    std::int64_t channels = 1;
    std::int64_t d1 = 0;
    std::int64_t d2 = 0;
    std::int64_t classes = 0;
    float value_min = 0.f;
    float value_max = 1.f;
    std::uint64_t seed = 0;
};

/// Deterministic synthetic images in [0, 1]: each class gets an oriented
/// grating (orientation pi*c/classes, class-dependent frequency, small phase
/// jitter) with a class-dependent shape overlay (square / disc / cross at a
/// jittered anchor).  Labels cycle 0..classes-1, so the histogram is exactly
/// uniform; count must be divisible by classes.
Dataset make_synthetic(std::uint64_t seed, std::int64_t classes, std::int64_t count,
                       std::int64_t d1, std::int64_t d2, std::int64_t channels = 1);

/// Seeded class-balanced split: test_count images (test_count / classes from
/// each class, chosen by seed) go to test, the rest keep their order in train.
struct Split {
    Dataset train;
    Dataset test;
};
Split split_dataset(const Dataset& data, std::int64_t test_count, std::int64_t classes,
                    std::uint64_t seed);

/// Writes prefix + ".images.f32" (raw float32), ".labels.u8" (raw bytes), and
/// ".manifest.json"; returns the manifest.  Same data, same bytes.
DatasetManifest write_dataset(const Dataset& data, std::int64_t classes, std::uint64_t seed,
                              const std::string& prefix);

DatasetManifest load_manifest(const std::string& manifest_path);

/// Reads the files back, validating both size invariants.
Dataset load_dataset(const DatasetManifest& m);

}  // namespace cards::harness
