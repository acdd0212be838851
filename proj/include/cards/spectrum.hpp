#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cards/tensor.hpp"

namespace cards::spectral {

/// Radially-averaged power spectrum: channels are averaged to one plane, the
/// plane goes through a unitary 2D DFT, and |F|^2 is averaged over integer
/// radius bins k = round(sqrt(u^2 + v^2)) of the centered frequencies.  Every
/// pixel lands in exactly one bin, so sum(bin mean * bin count) equals the
/// total power (Parseval).  Accepts (d1, d2) and (c, d1, d2); throws for
/// images smaller than 2x2.
std::vector<double> radial_power_spectrum(const Tensor& image);

/// Number of signature components for a d1 x d2 image: floor(min/2) + 1.
inline std::int64_t signature_length(std::int64_t d1, std::int64_t d2) {
    return std::min(d1, d2) / 2 + 1;
}

/// Unit-norm reciprocal spectrum: values[k] = 1 / (spectrum[k] + 1e-12) over
/// the first signature_length bins, scaled to unit Euclidean norm.
struct SpectralSignature {
    std::vector<double> values;
    bool normalized = false;
};

SpectralSignature signature(const Tensor& image);

/// One CSV row per signature, components comma-separated.
void save_signatures_csv(const std::vector<SpectralSignature>& sigs, const std::string& path);

}  // namespace cards::spectral
