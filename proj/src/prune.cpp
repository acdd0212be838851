#include "cards/prune.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cards::prune {

const char* to_string(Scope s) { return s == Scope::global ? "global" : "layerwise"; }

const char* to_string(Method m) {
    switch (m) {
        case Method::ft: return "ft";
        case Method::gmp: return "gmp";
        case Method::lth: return "lth";
        case Method::lrr: return "lrr";
        case Method::ep: return "ep";
        case Method::bp: return "bp";
    }
    return "?";
}

Scope scope_from_string(const std::string& s) {
    if (s == "global") return Scope::global;
    if (s == "layerwise") return Scope::layerwise;
    throw std::invalid_argument("unknown pruning scope: " + s);
}

Method method_from_string(const std::string& s) {
    for (int m = 0; m <= int(Method::bp); ++m)
        if (s == to_string(Method(m))) return Method(m);
    throw std::invalid_argument("unknown pruning method: " + s);
}

double gmp_sparsity(const GmpSchedule& s, std::int64_t t) {
    if (s.n <= 0 || s.dt <= 0) throw std::invalid_argument("gmp_sparsity: n and dt must be positive");
    const std::int64_t rel = t - s.t0;
    if (rel < 0 || rel % s.dt != 0 || rel / s.dt > s.n)
        throw std::invalid_argument("gmp_sparsity: step " + std::to_string(t) +
                                    " is not a pruning step of the schedule");
    const double u = double(rel) / double(s.n * s.dt);
    const double c = 1.0 - u;
    return s.s_f + (s.s_i - s.s_f) * c * c * c;
}

std::vector<std::int64_t> gmp_event_steps(const GmpSchedule& s) {
    std::vector<std::int64_t> out;
    out.reserve(std::size_t(s.n + 1));
    for (std::int64_t k = 0; k <= s.n; ++k) out.push_back(s.t0 + k * s.dt);
    return out;
}

std::int64_t rewind_shots_for_target(double target_sparsity, double per_shot_rate) {
    if (target_sparsity < 0.0 || target_sparsity >= 1.0)
        throw std::invalid_argument("rewind shots: target sparsity must be in [0, 1)");
    if (per_shot_rate <= 0.0 || per_shot_rate >= 1.0)
        throw std::invalid_argument("rewind shots: per-shot rate must be in (0, 1)");
    if (target_sparsity == 0.0) return 0;
    const double k = std::log1p(-target_sparsity) / std::log1p(-per_shot_rate);
    const double snapped = std::round(k);
    if (std::abs(k - snapped) < 1e-9) return std::int64_t(snapped);
    return std::int64_t(std::ceil(k));
}

double rewind_achieved_sparsity(double per_shot_rate, std::int64_t shots) {
    return 1.0 - std::pow(1.0 - per_shot_rate, double(shots));
}

// ---- mask machinery --------------------------------------------------------

namespace {

void ensure_masks(nn::Network& net) {
    for (auto li : net.prunable_layers()) {
        nn::Layer& l = net.layers[li];
        if (l.mask.empty()) l.mask = Tensor(l.weights.shape, 1.f);
    }
}

struct Candidate {
    float magnitude;
    std::uint32_t layer;
    std::uint32_t index;
};

/// Mask the `k` smallest-magnitude candidates.  Ordering is (magnitude,
/// layer, flat index) ascending, so equal magnitudes resolve to the earliest
/// position — deterministic regardless of sort internals.
void apply_smallest(nn::Network& net, std::vector<Candidate>& cands, std::int64_t k) {
    if (k <= 0) return;
    if (k > std::int64_t(cands.size()))
        throw std::invalid_argument("magnitude mask: cannot prune " + std::to_string(k) +
                                    " of " + std::to_string(cands.size()) + " candidates");
    auto lt = [](const Candidate& a, const Candidate& b) {
        if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
        if (a.layer != b.layer) return a.layer < b.layer;
        return a.index < b.index;
    };
    std::nth_element(cands.begin(), cands.begin() + (k - 1), cands.end(), lt);
    for (std::int64_t i = 0; i < k; ++i) {
        nn::Layer& l = net.layers[cands[std::size_t(i)].layer];
        l.mask.data[cands[std::size_t(i)].index] = 0.f;
        l.weights.data[cands[std::size_t(i)].index] = 0.f;
    }
}

void check_no_dead_layer(const nn::Network& net) {
    for (auto li : net.prunable_layers()) {
        const nn::Layer& l = net.layers[li];
        bool alive = false;
        for (float m : l.mask.data)
            if (m != 0.f) {
                alive = true;
                break;
            }
        if (!alive)
            throw std::runtime_error("magnitude mask: layer " + std::to_string(li) +
                                     " would lose its last weight; lower the target sparsity");
    }
}

std::vector<Candidate> survivors_of_layer(const nn::Network& net, std::size_t li) {
    std::vector<Candidate> out;
    const nn::Layer& l = net.layers[li];
    out.reserve(l.weights.data.size());
    for (std::size_t i = 0; i < l.weights.data.size(); ++i)
        if (l.mask.data[i] != 0.f)
            out.push_back({std::abs(l.weights.data[i]), std::uint32_t(li), std::uint32_t(i)});
    return out;
}

}  // namespace

void magnitude_mask(nn::Network& net, double sparsity, Scope scope) {
    if (sparsity < 0.0 || sparsity >= 1.0)
        throw std::invalid_argument("magnitude_mask: sparsity must be in [0, 1), got " +
                                    std::to_string(sparsity));
    ensure_masks(net);
    if (scope == Scope::global) {
        std::vector<Candidate> cands;
        for (auto li : net.prunable_layers()) {
            auto c = survivors_of_layer(net, li);
            cands.insert(cands.end(), c.begin(), c.end());
        }
        apply_smallest(net, cands, floor_count(sparsity, std::int64_t(cands.size())));
        check_no_dead_layer(net);
    } else {
        for (auto li : net.prunable_layers()) {
            auto cands = survivors_of_layer(net, li);
            apply_smallest(net, cands, floor_count(sparsity, std::int64_t(cands.size())));
        }
        check_no_dead_layer(net);
    }
}

void magnitude_mask_to_count(nn::Network& net, std::int64_t pruned_target) {
    ensure_masks(net);
    std::vector<Candidate> cands;
    std::int64_t pruned_now = 0;
    for (auto li : net.prunable_layers()) {
        const nn::Layer& l = net.layers[li];
        for (std::size_t i = 0; i < l.mask.data.size(); ++i) pruned_now += l.mask.data[i] == 0.f;
        auto c = survivors_of_layer(net, li);
        cands.insert(cands.end(), c.begin(), c.end());
    }
    if (pruned_target < pruned_now)
        throw std::invalid_argument("magnitude_mask_to_count: target " +
                                    std::to_string(pruned_target) + " below current pruned count " +
                                    std::to_string(pruned_now) + " (masks never shrink)");
    apply_smallest(net, cands, pruned_target - pruned_now);
    check_no_dead_layer(net);
}

void magnitude_mask_to_count_layerwise(nn::Network& net,
                                       const std::vector<std::int64_t>& pruned_targets) {
    ensure_masks(net);
    const auto layers = net.prunable_layers();
    if (layers.size() != pruned_targets.size())
        throw std::invalid_argument("magnitude_mask_to_count_layerwise: expected " +
                                    std::to_string(layers.size()) + " layer targets");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        nn::Layer& l = net.layers[layers[k]];
        std::int64_t pruned_now = 0;
        for (float m : l.mask.data) pruned_now += m == 0.f;
        if (pruned_targets[k] < pruned_now)
            throw std::invalid_argument(
                "magnitude_mask_to_count_layerwise: masks never shrink (layer " +
                std::to_string(layers[k]) + ")");
        auto cands = survivors_of_layer(net, layers[k]);
        apply_smallest(net, cands, pruned_targets[k] - pruned_now);
    }
    check_no_dead_layer(net);
}

void score_mask(nn::Network& net, double sparsity, Scope scope) {
    if (sparsity < 0.0 || sparsity >= 1.0)
        throw std::invalid_argument("score_mask: sparsity must be in [0, 1)");
    const auto layers = net.prunable_layers();
    for (auto li : layers) {
        if (net.layers[li].scores.empty())
            throw std::runtime_error("score_mask: layer " + std::to_string(li) +
                                     " has no scores");
        if (net.layers[li].mask.empty())
            net.layers[li].mask = Tensor(net.layers[li].weights.shape, 1.f);
    }

    struct Scored {
        float score;
        std::uint32_t layer;
        std::uint32_t index;
    };
    auto keep_order = [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;  // highest first
        if (a.layer != b.layer) return a.layer < b.layer;
        return a.index < b.index;
    };

    auto apply = [&](std::vector<Scored>& pool, std::int64_t keep) {
        // keep the top `keep`; everything after the cut is masked
        if (keep < std::int64_t(pool.size()))
            std::nth_element(pool.begin(), pool.begin() + keep, pool.end(), keep_order);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            nn::Layer& l = net.layers[pool[i].layer];
            l.mask.data[pool[i].index] = std::int64_t(i) < keep ? 1.f : 0.f;
        }
    };

    if (scope == Scope::global) {
        std::vector<Scored> pool;
        for (auto li : layers) {
            const nn::Layer& l = net.layers[li];
            for (std::size_t i = 0; i < l.scores.data.size(); ++i)
                pool.push_back({l.scores.data[i], std::uint32_t(li), std::uint32_t(i)});
        }
        const std::int64_t total = std::int64_t(pool.size());
        apply(pool, total - floor_count(sparsity, total));
        for (auto li : layers) {
            const nn::Layer& l = net.layers[li];
            bool alive = false;
            for (float m : l.mask.data) alive = alive || m != 0.f;
            if (!alive)
                throw std::runtime_error("score_mask: layer " + std::to_string(li) +
                                         " fully pruned under global scope");
        }
    } else {
        for (auto li : layers) {
            const nn::Layer& l = net.layers[li];
            std::vector<Scored> pool;
            pool.reserve(l.scores.data.size());
            for (std::size_t i = 0; i < l.scores.data.size(); ++i)
                pool.push_back({l.scores.data[i], std::uint32_t(li), std::uint32_t(i)});
            const std::int64_t total = std::int64_t(pool.size());
            apply(pool, total - floor_count(sparsity, total));
        }
    }
}

double binary_gain_for_layer(const nn::Layer& l) {
    double acc = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < l.weights.data.size(); ++i) {
        if (!l.mask.empty() && l.mask.data[i] == 0.f) continue;
        acc += std::abs(double(l.weights.data[i]));
        ++n;
    }
    if (n == 0) throw std::runtime_error("binary gain: layer has no surviving weights");
    return acc / double(n);
}

}  // namespace cards::prune
