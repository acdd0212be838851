#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cards/kdtree.hpp"
#include "cards/spectrum.hpp"
#include "cards/tensor.hpp"

namespace cards::gate {

/// Per-augmentation store of P unit-norm spectral signatures in a KD-tree.
/// Immutable after build; concurrent queries are safe.
struct SignatureIndex {
    std::string augmentation_id;
    std::int64_t P = 0;          // stored point count
    std::int64_t R = 0;          // signature dimension
    std::vector<double> points;  // row-major P x R
    std::uint64_t seed = 0;
    std::string source;  // provenance note, kept in the sidecar
    KdTree tree;
};

/// Sample P images without replacement by seed and store their signatures.
/// samples: (n, c, d1, d2); throws when P exceeds n or is not positive.
SignatureIndex build_index(const Tensor& samples, const std::string& augmentation_id,
                           std::int64_t P, std::uint64_t seed, const std::string& source = "");

/// Versioned binary (header, dims, points row-major) plus a JSON sidecar at
/// path + ".json" holding augmentation id, seed, and source.
void save_index(const SignatureIndex& index, const std::string& path);
SignatureIndex load_index(const std::string& path);

/// Mean of the per-image unit signatures.  Components are accumulated in
/// sorted order, so the result is exactly permutation-invariant; the mean
/// itself is generally not unit-norm.
std::vector<double> batch_mean_signature(const Tensor& batch);

/// min over stored signatures of the Euclidean distance to the batch mean.
double d_ss(const SignatureIndex& index, const Tensor& batch);
double d_ss(const SignatureIndex& index, const std::vector<double>& mean_signature);

/// Routing outcome: the full argmin set over augmentations.
struct GateDecision {
    std::vector<std::string> selected;  // ties keep every minimizer, in index order
    std::vector<std::pair<std::string, double>> distances;  // one per index, in order
    std::int64_t batch_size = 0;
};

GateDecision select(const std::vector<const SignatureIndex*>& indexes, const Tensor& batch);

/// JSON encoding of a decision (used by the CLI).
std::string decision_json(const GateDecision& d);

}  // namespace cards::gate
