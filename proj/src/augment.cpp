#include "cards/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cards::harness {

const char* to_string(AugmentKind k) {
    switch (k) {
        case AugmentKind::clean: return "clean";
        case AugmentKind::gaussian: return "gaussian";
        case AugmentKind::mix: return "mix";
    }
    return "?";
}

AugmentKind augment_from_string(const std::string& s) {
    if (s == "clean") return AugmentKind::clean;
    if (s == "gaussian") return AugmentKind::gaussian;
    if (s == "mix") return AugmentKind::mix;
    throw std::invalid_argument("unknown augmentation '" + s + "'");
}

void validate(const AugmentationSpec& spec) {
    if (spec.kind == AugmentKind::gaussian) {
        if (!(spec.sigma > 0.0)) throw std::invalid_argument("augmentation: sigma must be > 0");
        if (spec.p < 0.0 || spec.p > 1.0)
            throw std::invalid_argument("augmentation: p must be in [0, 1]");
    }
    if (spec.kind == AugmentKind::mix && spec.max_depth < 1)
        throw std::invalid_argument("augmentation: max_depth must be at least 1");
}

namespace {

// The mix op set stays disjoint from the corruption suite: geometry and
// global intensity only — no noise, blur, contrast scaling, or pixelation.
enum { kRollRows = 0, kRollCols, kFlipRows, kFlipCols, kGamma, kBrightness, kOpCount };

void apply_op(int op, std::vector<float>& img, std::int64_t channels, std::int64_t d1,
              std::int64_t d2, float lo, float hi, Rng& rng) {
    const double range = double(hi) - double(lo);
    const std::int64_t plane = d1 * d2;
    std::vector<float> tmp(static_cast<std::size_t>(plane));
    switch (op) {
        case kRollRows: {
            const std::int64_t shift = 1 + std::int64_t(rng.index(std::uint64_t(d1 - 1)));
            for (std::int64_t c = 0; c < channels; ++c) {
                float* p = img.data() + c * plane;
                std::copy(p, p + plane, tmp.begin());
                for (std::int64_t a = 0; a < d1; ++a)
                    std::copy(tmp.begin() + ((a + shift) % d1) * d2,
                              tmp.begin() + ((a + shift) % d1) * d2 + d2, p + a * d2);
            }
            break;
        }
        case kRollCols: {
            const std::int64_t shift = 1 + std::int64_t(rng.index(std::uint64_t(d2 - 1)));
            for (std::int64_t c = 0; c < channels; ++c) {
                float* p = img.data() + c * plane;
                std::copy(p, p + plane, tmp.begin());
                for (std::int64_t a = 0; a < d1; ++a)
                    for (std::int64_t b = 0; b < d2; ++b)
                        p[a * d2 + b] = tmp[std::size_t(a * d2 + (b + shift) % d2)];
            }
            break;
        }
        case kFlipRows:
            for (std::int64_t c = 0; c < channels; ++c) {
                float* p = img.data() + c * plane;
                for (std::int64_t a = 0; a < d1 / 2; ++a)
                    std::swap_ranges(p + a * d2, p + (a + 1) * d2, p + (d1 - 1 - a) * d2);
            }
            break;
        case kFlipCols:
            for (std::int64_t c = 0; c < channels; ++c) {
                float* p = img.data() + c * plane;
                for (std::int64_t a = 0; a < d1; ++a)
                    std::reverse(p + a * d2, p + a * d2 + d2);
            }
            break;
        case kGamma: {
            const double gamma = rng.uniform(0.7, 1.4);
            for (float& v : img) {
                const double norm = std::clamp((double(v) - lo) / range, 0.0, 1.0);
                v = float(lo + range * std::pow(norm, gamma));
            }
            break;
        }
        case kBrightness: {
            const double delta = rng.uniform(-0.15, 0.15) * range;
            for (float& v : img) v = float(double(v) + delta);
            break;
        }
        default: break;
    }
}

}  // namespace

void augment(float* image, std::int64_t channels, std::int64_t d1, std::int64_t d2,
             const AugmentationSpec& spec, float lo, float hi, Rng& rng) {
    validate(spec);
    const std::int64_t numel = channels * d1 * d2;
    const double range = double(hi) - double(lo);
    switch (spec.kind) {
        case AugmentKind::clean:
            return;
        case AugmentKind::gaussian: {
            if (!rng.bernoulli(spec.p)) return;
            const double sigma = spec.sigma * range;
            for (std::int64_t i = 0; i < numel; ++i)
                image[i] = float(std::clamp(double(image[i]) + sigma * rng.normal(), double(lo),
                                            double(hi)));
            return;
        }
        case AugmentKind::mix: {
            // Three chains, Dirichlet(1) weights via normalized exponentials,
            // Beta(1,1) skip blend with the original.
            const int width = 3;
            double w[3];
            double wsum = 0.0;
            for (int i = 0; i < width; ++i) {
                w[i] = -std::log(1.0 - rng.uniform());
                wsum += w[i];
            }
            for (int i = 0; i < width; ++i) w[i] /= wsum;
            const double skip = rng.uniform();  // Beta(1,1)

            std::vector<double> mixed(std::size_t(numel), 0.0);
            for (int i = 0; i < width; ++i) {
                std::vector<float> chain(image, image + numel);
                const int depth = 1 + int(rng.index(std::uint64_t(spec.max_depth)));
                for (int d = 0; d < depth; ++d)
                    apply_op(int(rng.index(kOpCount)), chain, channels, d1, d2, lo, hi, rng);
                for (std::int64_t k = 0; k < numel; ++k)
                    mixed[std::size_t(k)] += w[i] * double(chain[std::size_t(k)]);
            }
            for (std::int64_t k = 0; k < numel; ++k)
                image[k] = float(std::clamp(
                    skip * double(image[k]) + (1.0 - skip) * mixed[std::size_t(k)], double(lo),
                    double(hi)));
            return;
        }
    }
}

Tensor augment_pool(const Dataset& data, const AugmentationSpec& spec, std::uint64_t seed) {
    validate(spec);
    Tensor pool = data.images;
    const std::int64_t stride = data.channels() * data.d1() * data.d2();
    const Rng root = Rng(seed).derive("augment-pool");
    for (std::int64_t i = 0; i < data.count(); ++i) {
        Rng rng = root.derive(std::uint64_t(i));
        augment(pool.data.data() + i * stride, data.channels(), data.d1(), data.d2(), spec,
                data.value_min, data.value_max, rng);
    }
    return pool;
}

}  // namespace cards::harness
