#include "cards/corrupt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cards::harness {

const char* to_string(CorruptionKind k) {
    switch (k) {
        case CorruptionKind::gauss_noise: return "gauss-noise";
        case CorruptionKind::shot_noise: return "shot-noise";
        case CorruptionKind::box_blur: return "box-blur";
        case CorruptionKind::contrast: return "contrast";
        case CorruptionKind::pixelate: return "pixelate";
    }
    return "?";
}

CorruptionKind corruption_from_string(const std::string& s) {
    if (s == "gauss-noise") return CorruptionKind::gauss_noise;
    if (s == "shot-noise") return CorruptionKind::shot_noise;
    if (s == "box-blur") return CorruptionKind::box_blur;
    if (s == "contrast") return CorruptionKind::contrast;
    if (s == "pixelate") return CorruptionKind::pixelate;
    throw std::invalid_argument("unknown corruption '" + s + "'");
}

std::vector<CorruptionKind> corruption_suite() {
    return {CorruptionKind::gauss_noise, CorruptionKind::shot_noise, CorruptionKind::box_blur,
            CorruptionKind::contrast, CorruptionKind::pixelate};
}

void validate(const CorruptionSpec& spec) {
    if (spec.severity < 1 || spec.severity > 5)
        throw std::invalid_argument("corruption: severity must be in 1..5");
}

namespace {

// Severity tables; see the header for the full listing.
constexpr double kGaussSigma[5] = {0.04, 0.06, 0.09, 0.13, 0.18};
constexpr double kShotSigma[5] = {0.06, 0.09, 0.13, 0.19, 0.27};
constexpr std::int64_t kBlurKernel[5] = {1, 3, 3, 5, 5};
constexpr int kBlurPasses[5] = {1, 1, 2, 2, 3};
constexpr double kContrastFactor[5] = {0.75, 0.6, 0.45, 0.3, 0.2};
constexpr std::int64_t kPixelBlock[5] = {1, 2, 2, 4, 4};

void box_blur_plane(float* p, std::int64_t d1, std::int64_t d2, std::int64_t k) {
    const std::int64_t half = k / 2;
    std::vector<float> src(p, p + d1 * d2);
    for (std::int64_t a = 0; a < d1; ++a) {
        for (std::int64_t b = 0; b < d2; ++b) {
            double acc = 0.0;
            for (std::int64_t da = -half; da <= half; ++da) {
                const std::int64_t ra = std::clamp(a + da, std::int64_t(0), d1 - 1);
                for (std::int64_t db = -half; db <= half; ++db) {
                    const std::int64_t rb = std::clamp(b + db, std::int64_t(0), d2 - 1);
                    acc += double(src[std::size_t(ra * d2 + rb)]);
                }
            }
            p[a * d2 + b] = float(acc / double(k * k));
        }
    }
}

void pixelate_plane(float* p, std::int64_t d1, std::int64_t d2, std::int64_t block) {
    for (std::int64_t a0 = 0; a0 < d1; a0 += block) {
        const std::int64_t a1 = std::min(d1, a0 + block);
        for (std::int64_t b0 = 0; b0 < d2; b0 += block) {
            const std::int64_t b1 = std::min(d2, b0 + block);
            double acc = 0.0;
            for (std::int64_t a = a0; a < a1; ++a)
                for (std::int64_t b = b0; b < b1; ++b) acc += double(p[a * d2 + b]);
            const float mean = float(acc / double((a1 - a0) * (b1 - b0)));
            for (std::int64_t a = a0; a < a1; ++a)
                for (std::int64_t b = b0; b < b1; ++b) p[a * d2 + b] = mean;
        }
    }
}

}  // namespace

void corrupt(float* image, std::int64_t channels, std::int64_t d1, std::int64_t d2,
             const CorruptionSpec& spec, float lo, float hi, Rng& rng) {
    validate(spec);
    const int s = spec.severity - 1;
    const std::int64_t numel = channels * d1 * d2;
    const std::int64_t plane = d1 * d2;
    const double range = double(hi) - double(lo);
    switch (spec.kind) {
        case CorruptionKind::gauss_noise: {
            const double sigma = kGaussSigma[s] * range;
            for (std::int64_t i = 0; i < numel; ++i)
                image[i] = float(std::clamp(double(image[i]) + sigma * rng.normal(), double(lo),
                                            double(hi)));
            return;
        }
        case CorruptionKind::shot_noise: {
            // Gaussian analog of shot noise: stddev grows with sqrt of the
            // normalized intensity, so bright pixels fluctuate more.
            const double sigma = kShotSigma[s] * range;
            for (std::int64_t i = 0; i < numel; ++i) {
                const double norm = std::clamp((double(image[i]) - lo) / range, 0.0, 1.0);
                image[i] = float(std::clamp(
                    double(image[i]) + sigma * std::sqrt(norm) * rng.normal(), double(lo),
                    double(hi)));
            }
            return;
        }
        case CorruptionKind::box_blur: {
            const std::int64_t k = kBlurKernel[s];
            if (k <= 1) return;
            for (int pass = 0; pass < kBlurPasses[s]; ++pass)
                for (std::int64_t c = 0; c < channels; ++c)
                    box_blur_plane(image + c * plane, d1, d2, k);
            return;
        }
        case CorruptionKind::contrast: {
            const double f = kContrastFactor[s];
            for (std::int64_t c = 0; c < channels; ++c) {
                float* p = image + c * plane;
                double mean = 0.0;
                for (std::int64_t i = 0; i < plane; ++i) mean += double(p[i]);
                mean /= double(plane);
                for (std::int64_t i = 0; i < plane; ++i)
                    p[i] = float(std::clamp(mean + f * (double(p[i]) - mean), double(lo),
                                            double(hi)));
            }
            return;
        }
        case CorruptionKind::pixelate: {
            const std::int64_t block = kPixelBlock[s];
            if (block <= 1) return;
            for (std::int64_t c = 0; c < channels; ++c)
                pixelate_plane(image + c * plane, d1, d2, block);
            return;
        }
    }
}

Dataset corrupt_dataset(const Dataset& data, const CorruptionSpec& spec, std::uint64_t seed) {
    validate(spec);
    Dataset out = data;
    const std::int64_t stride = data.channels() * data.d1() * data.d2();
    const Rng root = Rng(seed).derive("corrupt");
    for (std::int64_t i = 0; i < data.count(); ++i) {
        Rng rng = root.derive(std::uint64_t(i));
        corrupt(out.images.data.data() + i * stride, data.channels(), data.d1(), data.d2(), spec,
                data.value_min, data.value_max, rng);
    }
    return out;
}

}  // namespace cards::harness
