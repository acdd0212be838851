#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cards/data.hpp"
#include "cards/rng.hpp"
#include "cards/tensor.hpp"

namespace cards::nn {

enum class LayerKind : std::uint8_t {
    dense = 0,
    conv2d = 1,
    relu = 2,
    global_avg_pool = 3,
    softmax_output = 4,
};

enum class Precision : std::uint8_t {
    full32 = 0,  // 32-bit float weights
    binary1 = 1, // weights constrained to {-alpha, +alpha}; 1 bit each in storage accounting
};

const char* to_string(LayerKind k);
const char* to_string(Precision p);

struct Layer {
    LayerKind kind = LayerKind::relu;
    Tensor weights;  // dense: (out, in); conv2d: (oc, ic, kh, kw); empty otherwise
    Tensor bias;     // (out) / (oc); empty means no bias
    Tensor mask;     // 0/1, same shape as weights; empty means unpruned
    Tensor scores;   // same shape as weights; only populated by score-based pruning
    Precision precision = Precision::full32;
    double binary_gain = 0.0;  // per-layer alpha when precision == binary1
    int stride = 1;
    int pad = 0;  // conv2d padding (same-padding by default from the builders)

    bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
    std::int64_t fan_in() const;
};

struct Network {
    std::vector<Layer> layers;

    /// Total weight count over parametric layers (biases excluded).
    std::int64_t weight_count() const;
    /// Unmasked weight count (== weight_count() when no masks are attached).
    std::int64_t nonzero_weight_count() const;
    /// 1 - nonzero/total over parametric layers.
    double sparsity() const;
    std::vector<std::size_t> prunable_layers() const;
};

bool bit_equal(const Network& a, const Network& b);

// ---- construction ----------------------------------------------------------

/// d-in, hidden..., classes MLP: dense/relu alternating, linear head.
Network make_mlp(std::int64_t in_dim, const std::vector<std::int64_t>& hidden,
                 std::int64_t classes);

/// Two 3x3 same-padded conv layers, global average pool, linear head.
Network make_conv2(std::int64_t in_channels, std::int64_t c1, std::int64_t c2,
                   std::int64_t classes);

/// Kaiming-normal: w ~ N(0, sqrt(2 / fan_in)), biases zero.
void init_kaiming(Network& net, Rng& rng);

/// Signed-constant: w = sign(N(0,1) sample) * sqrt(2 / fan_in), biases zero.
/// Layers are tagged binary1 with gain sqrt(2 / fan_in).
void init_signed_constant(Network& net, Rng& rng);

// ---- forward / backward ----------------------------------------------------

/// Pure forward pass.  Input (n, c, h, w) or (n, d); output (n, classes) —
/// logits, unless the net ends in a softmax_output layer, which emits
/// row-stochastic probabilities.
Tensor forward(const Network& net, const Tensor& batch);

/// Activations recorded for backprop: acts[i] is the input to layer i (after
/// any implicit flatten), acts.back() is the network output.
struct ForwardTrace {
    std::vector<Tensor> acts;
};

ForwardTrace forward_trace(const Network& net, const Tensor& batch);

/// Per-layer parameter gradients.  Weight gradients use the mask-free formula
/// (gradient w.r.t. the stored weight as if every position were live); the
/// optimizer skips masked positions, and score-based pruning multiplies by the
/// base weight instead.  Accumulation is double throughout.
struct Grads {
    std::vector<Tensor> w;  // aligned with net.layers; empty for non-parametric layers
    std::vector<Tensor> b;
};

Grads backward(const Network& net, const ForwardTrace& trace, const Tensor& dout);

// ---- loss / metrics --------------------------------------------------------

struct LossOut {
    double loss = 0.0;
    Tensor dlogits;  // (n, classes), mean-reduced
};

/// Mean cross-entropy over the batch, with log-sum-exp stabilization.
LossOut cross_entropy(const Tensor& logits, const std::vector<std::uint8_t>& labels,
                      std::size_t label_offset = 0);

Tensor softmax_rows(const Tensor& logits);

/// Row argmax; ties resolve to the lowest class index.
std::int64_t argmax_row(const Tensor& t, std::int64_t row);

/// Top-1 accuracy.  `workers` may fan the batches out over threads; the
/// result is identical for any worker count.
double evaluate(const Network& net, const Dataset& data, int workers = 1);

/// Accuracy on a raw image tensor + label list (corruption sweeps reuse this).
double evaluate_batch(const Network& net, const Tensor& images,
                      const std::vector<std::uint8_t>& labels, int workers = 1);

}  // namespace cards::nn
