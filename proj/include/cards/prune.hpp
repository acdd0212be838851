#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cards/net.hpp"

namespace cards::prune {

enum class Scope : std::uint8_t { global = 0, layerwise = 1 };
enum class Method : std::uint8_t { ft = 0, gmp = 1, lth = 2, lrr = 3, ep = 4, bp = 5 };

const char* to_string(Scope s);
const char* to_string(Method m);
Scope scope_from_string(const std::string& s);
Method method_from_string(const std::string& s);

// ---- gradual magnitude pruning schedule ------------------------------------

/// Cubic sparsity ramp: s_t = s_f + (s_i - s_f) * (1 - (t - t0)/(n*dt))^3,
/// defined on the pruning steps t in {t0 + k*dt, k = 0..n}.
struct GmpSchedule {
    double s_i = 0.0;
    double s_f = 0.0;
    std::int64_t t0 = 5;
    std::int64_t n = 105;
    std::int64_t dt = 1;
};

/// Sparsity at pruning step t.  Throws std::invalid_argument when t is not
/// one of the schedule's pruning steps.
double gmp_sparsity(const GmpSchedule& s, std::int64_t t);

/// All pruning steps of the schedule, ascending.
std::vector<std::int64_t> gmp_event_steps(const GmpSchedule& s);

// ---- iterative-pruning arithmetic ------------------------------------------

/// Shots needed so that 1 - (1-rate)^n >= target; ceil with a small snap
/// window so targets that are exactly n shots don't round up to n+1.
std::int64_t rewind_shots_for_target(double target_sparsity, double per_shot_rate);

/// 1 - (1-rate)^shots.
double rewind_achieved_sparsity(double per_shot_rate, std::int64_t shots);

/// floor(fraction * n) in real arithmetic: a snap window absorbs the binary
/// representation error of fractions like 0.95 whose product is an integer.
inline std::int64_t floor_count(double fraction, std::int64_t n) {
    const double x = fraction * double(n);
    std::int64_t k = std::int64_t(x);
    if (x - double(k) > 1.0 - 1e-9) ++k;
    return k;
}

// ---- magnitude masks -------------------------------------------------------

/// Extend a network's masks by pruning `sparsity` of the *surviving* weights,
/// smallest magnitude first (ties: lowest flat index).  Scope selects one
/// global pool or per-layer pools.  Exactly floor(sparsity * candidates)
/// positions are newly masked and their weights zeroed.  Previously masked
/// positions stay masked.  Throws if sparsity is outside [0, 1) or if a layer
/// would be left without a single live weight.
void magnitude_mask(nn::Network& net, double sparsity, Scope scope);

/// Prune smallest-magnitude survivors until exactly `pruned_target` weights
/// are masked network-wide (monotone: throws if fewer are already masked than
/// requested would require un-masking).
void magnitude_mask_to_count(nn::Network& net, std::int64_t pruned_target);

/// Per-layer variant: pruned_targets[i] applies to the i-th prunable layer.
void magnitude_mask_to_count_layerwise(nn::Network& net,
                                       const std::vector<std::int64_t>& pruned_targets);

// ---- score masks (EP / BP) -------------------------------------------------

/// Recompute masks from layer scores: the top (candidates - floor(p * candidates))
/// scores survive, descending, ties by lowest flat index.  All weights are
/// candidates each call (score masks are not iterative).
void score_mask(nn::Network& net, double sparsity, Scope scope);

/// mean |w| over unpruned positions of one layer; throws if none survive.
double binary_gain_for_layer(const nn::Layer& l);

}  // namespace cards::prune
