#pragma once

#include <cstdint>
#include <vector>

#include "cards/optim.hpp"
#include "cards/prune.hpp"

namespace cards::prune {

/// Shared configuration for a full train-and-compress run.
struct RunConfig {
    Method method = Method::ft;
    Scope scope = Scope::global;
    double target_sparsity = 0.9;
    double epochs = 20.0;  // T: the base training budget
    std::int64_t batch_size = 32;
    nn::Schedule schedule;  // spans exactly `epochs`
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;

    double finetune_fraction = 0.25;  // FT: extra epochs after the one-shot prune, as T/4

    // GMP pruning events, in optimizer steps.  t0 + n*dt must not exceed the
    // total step count.
    std::int64_t gmp_t0 = 5;
    std::int64_t gmp_n = 105;
    std::int64_t gmp_dt = 1;

    double per_shot_rate = 0.2;     // LTH/LRR: fraction of survivors pruned per shot
    std::int64_t rewind_iter = -1;  // LTH/LRR: rewind step r; -1 = 3% of T's steps

    // On-the-fly training augmentation; (image pixels, channels, d1, d2, rng).
    std::function<void(float*, std::int64_t, std::int64_t, std::int64_t, Rng&)> augment;

    // Diagnostic hook for rewinding runs: called right after each shot's
    // restore with the 1-based shot number and the post-restore state.
    std::function<void(int, const nn::Network&, const nn::Optimizer&)> on_rewind;
};

struct RunResult {
    nn::Network net;
    nn::Network init;        // state the run started from, after seeding
    nn::Network rewind_net;  // lth/lrr only: the iteration-r checkpoint
    double achieved_sparsity = 0.0;
    std::vector<double> lr_trace;        // per optimizer step
    std::vector<double> sparsity_trace;  // after each pruning event
    std::int64_t total_steps = 0;
};

/// Train dense for T epochs (no pruning).  method/target ignored.
RunResult run_dense(nn::Network arch, const Dataset& data, const RunConfig& cfg);

/// Train T epochs, one-shot magnitude prune to the target, fine-tune for
/// finetune_fraction * T epochs at the held final learning rate.
RunResult run_ft(nn::Network arch, const Dataset& data, const RunConfig& cfg);

/// Train T epochs with the cubic sparsity ramp applied at the configured
/// pruning steps; the mask only ever grows.
RunResult run_gmp(nn::Network arch, const Dataset& data, const RunConfig& cfg);

/// Iterative magnitude pruning with rewinding.  method must be lth or lrr:
/// lth restores surviving weights (and momentum) to their iteration-r
/// checkpoint after each shot; lrr keeps the trained values.  Both restart
/// the LR schedule from step r, so the two traces are identical.
RunResult run_rewinding(nn::Network arch, const Dataset& data, const RunConfig& cfg);

/// Score-based pruning at fixed weights.  method must be ep (signed-constant
/// frozen weights) or bp (kaiming frozen weights, binarized to +-alpha with
/// alpha = mean |w| over survivors).  Weights are never trained; only scores
/// move, by straight-through SGD.
RunResult run_score_method(nn::Network arch, const Dataset& data, const RunConfig& cfg);

/// Dispatch on cfg.method.
RunResult run_method(nn::Network arch, const Dataset& data, const RunConfig& cfg);

}  // namespace cards::prune
