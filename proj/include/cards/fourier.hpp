#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cards/data.hpp"
#include "cards/net.hpp"
#include "cards/rng.hpp"

namespace cards::spectral {

/// Real 2D Fourier basis matrix with unit Frobenius norm and zero phase: its
/// DFT support is exactly the conjugate pair {(i, j), (-i, -j)}.  Frequencies
/// are centered; (0, 0) is the DC basis.  Values are kept in double so the
/// norm holds to 1e-9 and better.
struct FourierBasis {
    std::int64_t d1 = 0, d2 = 0;
    std::int64_t i = 0, j = 0;
    std::vector<double> matrix;  // row-major d1 x d2
};

/// Centered frequency range along a dimension of size d: [-d/2, d - 1 - d/2].
inline std::int64_t freq_lo(std::int64_t d) { return -(d / 2); }
inline std::int64_t freq_hi(std::int64_t d) { return d - 1 - d / 2; }

FourierBasis fourier_basis(std::int64_t d1, std::int64_t d2, std::int64_t i, std::int64_t j);

struct PerturbSpec {
    double eps = 0.0;       // perturbation norm
    int r = 1;              // sign, +1 or -1
    bool per_channel = true;  // every channel receives the perturbation
};

/// image + r * eps * basis on every channel, clamped to [lo, hi].  eps == 0
/// returns the input bit-identically (no clamp).  Accepts (d1, d2) planes and
/// (c, d1, d2) images.
Tensor perturb(const Tensor& image, const FourierBasis& basis, const PerturbSpec& spec,
               float lo, float hi);

/// Error-rate grid over the centered frequency plane: row a holds frequency
/// i = a - d1/2, so DC sits at the grid center.
struct Heatmap {
    Tensor grid;  // (d1, d2), values in [0, 1]
    double eps = 0.0;
    std::string model_id;
};

/// grid[a][b] = 1 - accuracy on the dataset perturbed by that cell's basis,
/// with the sign r redrawn per image and channel from a stream seeded by the
/// cell.  Conjugate cells share one basis and one evaluation, so their values
/// are equal exactly.  Cells are independent work items; any worker count
/// produces bit-identical output.
Heatmap heatmap(const nn::Network& net, const Dataset& data, double eps, std::uint64_t seed,
                int workers = 1, const std::string& model_id = "");

/// Cellwise h - baseline; throws when dims or eps differ.
Heatmap diff_heatmap(const Heatmap& h, const Heatmap& baseline);

/// CSV rows "i,j,error" over centered frequencies, fixed 17-digit floats.
void save_heatmap_csv(const Heatmap& h, const std::string& path);

/// 8-bit binary PGM; error e maps to the gray level round(e * 255).
void save_heatmap_pgm(const Heatmap& h, const std::string& path);

}  // namespace cards::spectral
