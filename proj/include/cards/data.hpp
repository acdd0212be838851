#pragma once

#include <cstdint>
#include <vector>

#include "cards/tensor.hpp"

namespace cards {

/// Labeled image set.  Images are (count, channels, d1, d2); labels are class
/// ids < 256.  value_min/value_max declare the pixel range; perturbation and
/// corruption code clamps back into it.
struct Dataset {
    Tensor images;
    std::vector<std::uint8_t> labels;
    float value_min = 0.f;
    float value_max = 1.f;

    std::int64_t count() const { return images.shape.empty() ? 0 : images.shape[0]; }
    std::int64_t channels() const { return images.shape[1]; }
    std::int64_t d1() const { return images.shape[2]; }
    std::int64_t d2() const { return images.shape[3]; }

    /// Pixels of one image, contiguous (channels * d1 * d2 floats).
    const float* image_ptr(std::int64_t i) const {
        return images.data.data() + std::size_t(i * channels() * d1() * d2());
    }
    float* image_ptr(std::int64_t i) {
        return images.data.data() + std::size_t(i * channels() * d1() * d2());
    }

    /// Copy one image out as a (channels, d1, d2) tensor.
    Tensor image(std::int64_t i) const {
        Tensor t({channels(), d1(), d2()});
        const float* p = image_ptr(i);
        std::copy(p, p + t.numel(), t.data.begin());
        return t;
    }

    /// Gather a batch of images by index into an (n, channels, d1, d2) tensor.
    Tensor gather(const std::vector<std::size_t>& idx) const {
        Tensor t({std::int64_t(idx.size()), channels(), d1(), d2()});
        const std::int64_t stride = channels() * d1() * d2();
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const float* p = image_ptr(std::int64_t(idx[k]));
            std::copy(p, p + stride, t.data.begin() + std::int64_t(k) * stride);
        }
        return t;
    }
};

}  // namespace cards
