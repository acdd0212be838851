#include <algorithm>
#include <cmath>

#include "cards/prune.hpp"
#include "doctest.h"

using namespace cards;
using namespace cards::prune;
using cards::nn::Network;

namespace {

Network single_dense(const std::vector<float>& w) {
    Network net = nn::make_mlp(std::int64_t(w.size()), {}, 1);
    net.layers[0].weights.shape = {1, std::int64_t(w.size())};
    net.layers[0].weights.data = w;
    return net;
}

Network two_dense(const std::vector<float>& w0, const std::vector<float>& w1) {
    Network net;
    nn::Layer a;
    a.kind = nn::LayerKind::dense;
    a.weights.shape = {1, std::int64_t(w0.size())};
    a.weights.data = w0;
    nn::Layer b;
    b.kind = nn::LayerKind::dense;
    b.weights.shape = {1, std::int64_t(w1.size())};
    b.weights.data = w1;
    net.layers.push_back(std::move(a));
    net.layers.push_back(std::move(b));
    return net;
}

std::vector<int> mask_of(const Network& net, std::size_t layer) {
    std::vector<int> m;
    for (float v : net.layers[layer].mask.data) m.push_back(v != 0.f);
    return m;
}

}  // namespace

TEST_CASE("cubic schedule endpoints and interior match the closed form") {
    GmpSchedule s{0.0, 0.9, 5, 105, 1};
    CHECK(gmp_sparsity(s, 5) == 0.0);
    CHECK(gmp_sparsity(s, 110) == 0.9);
    // interior point, evaluated independently
    const double expect = 0.9 + (0.0 - 0.9) * std::pow(1.0 - 52.0 / 105.0, 3);
    CHECK(std::abs(gmp_sparsity(s, 57) - expect) < 1e-12);
    // monotone nondecreasing across all pruning steps
    double prev = -1.0;
    for (std::int64_t t : gmp_event_steps(s)) {
        const double v = gmp_sparsity(s, t);
        CHECK(v >= prev);
        prev = v;
    }
    CHECK(prev == 0.9);
}

TEST_CASE("cubic schedule rejects steps outside the pruning set") {
    GmpSchedule s{0.0, 0.9, 5, 10, 3};
    CHECK_THROWS_AS(gmp_sparsity(s, 4), std::invalid_argument);
    CHECK_THROWS_AS(gmp_sparsity(s, 6), std::invalid_argument);   // not on the dt grid
    CHECK_THROWS_AS(gmp_sparsity(s, 38), std::invalid_argument);  // past t0 + n*dt
    CHECK_NOTHROW(gmp_sparsity(s, 35));
}

TEST_CASE("shot count formula: ceil with exact-target snap") {
    CHECK(rewind_shots_for_target(0.90, 0.20) == 11);
    CHECK(rewind_shots_for_target(0.95, 0.20) == 14);
    CHECK(rewind_shots_for_target(0.0, 0.20) == 0);
    // a target that is exactly 10 shots stays 10
    CHECK(rewind_shots_for_target(rewind_achieved_sparsity(0.2, 10), 0.2) == 10);
    // the 10-shot scheme lands at ~89% sparsity
    CHECK(rewind_achieved_sparsity(0.2, 10) == doctest::Approx(0.8926258176).epsilon(1e-9));
    CHECK(rewind_achieved_sparsity(0.2, 11) == doctest::Approx(0.9141006541).epsilon(1e-9));
}

TEST_CASE("global magnitude mask keeps the largest-magnitude half") {
    Network net = single_dense({3.f, -1.f, 2.f, -4.f});
    magnitude_mask(net, 0.5, Scope::global);
    CHECK(mask_of(net, 0) == std::vector<int>{1, 0, 0, 1});
    CHECK(net.layers[0].weights.data[1] == 0.f);
    CHECK(net.layers[0].weights.data[2] == 0.f);
    CHECK(net.layers[0].weights.data[0] == 3.f);
    CHECK(net.sparsity() == doctest::Approx(0.5));
}

TEST_CASE("sparsity zero attaches an all-ones mask and prunes nothing") {
    Network net = single_dense({3.f, -1.f, 2.f, -4.f});
    magnitude_mask(net, 0.0, Scope::global);
    CHECK(mask_of(net, 0) == std::vector<int>{1, 1, 1, 1});
    CHECK(net.layers[0].weights.data[3] == -4.f);
}

TEST_CASE("layerwise scope prunes each layer independently") {
    Network net = two_dense({1.f, 2.f}, {3.f, 4.f});
    magnitude_mask(net, 0.5, Scope::layerwise);
    CHECK(mask_of(net, 0) == std::vector<int>{0, 1});
    CHECK(mask_of(net, 1) == std::vector<int>{0, 1});
    // global at the same rate would instead drop both weights of layer 0 --
    // and then trip the dead-layer guard, which is its own test below.
}

TEST_CASE("iterative calls prune among survivors only") {
    Network net = single_dense({0.1f, 3.f, 5.f, 7.f});
    magnitude_mask(net, 0.25, Scope::global);  // floor(.25*4)=1: prunes 0.1
    CHECK(mask_of(net, 0) == std::vector<int>{0, 1, 1, 1});
    magnitude_mask(net, 0.5, Scope::global);  // floor(.5*3)=1 among {3,5,7}: prunes 3
    CHECK(mask_of(net, 0) == std::vector<int>{0, 0, 1, 1});
    CHECK(net.sparsity() == doctest::Approx(0.5));
}

TEST_CASE("magnitude ties break to the lowest flat index") {
    Network net = single_dense({2.f, -2.f, 2.f, 2.f});
    magnitude_mask(net, 0.5, Scope::global);
    CHECK(mask_of(net, 0) == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("mask counts are exact against a sort oracle") {
    Rng rng(55);
    Network net = nn::make_mlp(40, {20}, 5);
    nn::init_kaiming(net, rng);
    const double p = 0.73;
    // oracle: full stable sort of |w| over both layers
    struct Item {
        float mag;
        std::size_t layer, idx;
    };
    std::vector<Item> items;
    for (auto li : net.prunable_layers())
        for (std::size_t i = 0; i < net.layers[li].weights.data.size(); ++i)
            items.push_back({std::abs(net.layers[li].weights.data[i]), li, i});
    std::stable_sort(items.begin(), items.end(),
                     [](const Item& a, const Item& b) { return a.mag < b.mag; });
    const std::int64_t expect_pruned = std::int64_t(p * double(items.size()));

    magnitude_mask(net, p, Scope::global);
    std::int64_t pruned = net.weight_count() - net.nonzero_weight_count();
    CHECK(pruned == expect_pruned);
    for (std::int64_t i = 0; i < expect_pruned; ++i)
        CHECK(net.layers[items[std::size_t(i)].layer].mask.data[items[std::size_t(i)].idx] == 0.f);
    for (std::size_t i = std::size_t(expect_pruned); i < items.size(); ++i)
        CHECK(net.layers[items[i].layer].mask.data[items[i].idx] == 1.f);
}

TEST_CASE("sparsity outside [0,1) is rejected") {
    Network net = single_dense({1.f, 2.f});
    CHECK_THROWS_AS(magnitude_mask(net, 1.0, Scope::global), std::invalid_argument);
    CHECK_THROWS_AS(magnitude_mask(net, -0.1, Scope::global), std::invalid_argument);
}

TEST_CASE("a layer stripped of every weight trips the dead-layer guard") {
    Network net = two_dense({0.01f, 0.02f}, {3.f, 4.f, 5.f, 6.f});
    // global 0.5 would prune 3 weights: 0.01, 0.02, 3 -> layer 0 dies
    CHECK_THROWS_AS(magnitude_mask(net, 0.5, Scope::global), std::runtime_error);
}

TEST_CASE("masks never shrink through the count interface") {
    Network net = single_dense({1.f, 2.f, 3.f, 4.f});
    magnitude_mask_to_count(net, 2);
    CHECK(net.nonzero_weight_count() == 2);
    CHECK_THROWS_AS(magnitude_mask_to_count(net, 1), std::invalid_argument);
}

TEST_CASE("score mask keeps the top scores, ties to the lowest index") {
    Network net = single_dense({1.f, 1.f, 1.f, 1.f});
    net.layers[0].scores = Tensor({1, 4});
    net.layers[0].scores.data = {0.9f, 0.1f, 0.9f, 0.5f};
    score_mask(net, 0.5, Scope::global);
    CHECK(mask_of(net, 0) == std::vector<int>{1, 0, 1, 0});
    // re-running with different scores recomputes from scratch (not iterative)
    net.layers[0].scores.data = {0.1f, 0.9f, 0.5f, 0.9f};
    score_mask(net, 0.5, Scope::global);
    CHECK(mask_of(net, 0) == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("score mask against an independent sort oracle") {
    Rng rng(77);
    Network net = nn::make_mlp(30, {20}, 4);
    nn::init_kaiming(net, rng);
    for (auto li : net.prunable_layers()) {
        net.layers[li].scores = Tensor(net.layers[li].weights.shape);
        for (auto& s : net.layers[li].scores.data) s = float(rng.uniform());
    }
    const double p = 0.85;
    score_mask(net, p, Scope::layerwise);
    for (auto li : net.prunable_layers()) {
        const nn::Layer& l = net.layers[li];
        const std::int64_t n = l.weights.numel();
        const std::int64_t keep = n - std::int64_t(p * double(n));
        std::vector<std::size_t> order(std::size_t(n), 0);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return l.scores.data[a] > l.scores.data[b];
        });
        std::int64_t kept = 0;
        for (float m : l.mask.data) kept += m != 0.f;
        CHECK(kept == keep);
        for (std::int64_t i = 0; i < n; ++i)
            CHECK((l.mask.data[order[std::size_t(i)]] != 0.f) == (i < keep));
    }
}

TEST_CASE("binary gain is the mean absolute surviving weight") {
    nn::Layer l;
    l.kind = nn::LayerKind::dense;
    l.weights.shape = {1, 3};
    l.weights.data = {1.f, -2.f, 3.f};
    CHECK(binary_gain_for_layer(l) == doctest::Approx(2.0).epsilon(1e-12));
    l.mask = Tensor({1, 3}, 1.f);
    l.mask.data[2] = 0.f;
    CHECK(binary_gain_for_layer(l) == doctest::Approx(1.5).epsilon(1e-12));
    l.mask.data = {0.f, 0.f, 0.f};
    CHECK_THROWS_AS(binary_gain_for_layer(l), std::runtime_error);
}
