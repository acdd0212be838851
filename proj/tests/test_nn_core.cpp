#include <cmath>
#include <vector>

#include "cards/net.hpp"
#include "doctest.h"

using namespace cards;
using namespace cards::nn;

// Independent reference: plain double-precision matmul, no shared code with
// the library's forward pass.
static std::vector<double> matmul_oracle(const std::vector<double>& x, std::int64_t n,
                                         std::int64_t in, const Tensor& w, const Tensor& b) {
    std::vector<double> y(std::size_t(n * w.shape[0]), 0.0);
    for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t o = 0; o < w.shape[0]; ++o) {
            double acc = b.empty() ? 0.0 : double(b.at(o));
            for (std::int64_t i = 0; i < in; ++i)
                acc += double(w.at(o, i)) * x[std::size_t(r * in + i)];
            y[std::size_t(r * w.shape[0] + o)] = acc;
        }
    return y;
}

TEST_CASE("relu forward matches the definition") {
    Network net;
    net.layers.push_back(Layer{LayerKind::relu});
    Tensor x({1, 3});
    x.data = {2.f, -3.f, 0.f};
    Tensor y = forward(net, x);
    CHECK(y.data[0] == 2.f);
    CHECK(y.data[1] == 0.f);
    CHECK(y.data[2] == 0.f);
}

TEST_CASE("identity dense layer passes logits through") {
    Network net = make_mlp(3, {}, 3);
    for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 3; ++j) net.layers[0].weights.at(i, j) = i == j ? 1.f : 0.f;
    Tensor x({2, 3});
    x.data = {0.5f, -1.f, 2.f, 3.f, 0.f, -0.25f};
    Tensor y = forward(net, x);
    for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == x.data[i]);
}

TEST_CASE("two-layer MLP forward matches a double-precision matmul oracle") {
    Rng rng(42);
    Network net = make_mlp(8, {6}, 4);
    init_kaiming(net, rng);
    Tensor x({5, 8});
    for (auto& v : x.data) v = float(rng.uniform(-1.0, 1.0));

    std::vector<double> h = matmul_oracle(std::vector<double>(x.data.begin(), x.data.end()), 5, 8,
                                          net.layers[0].weights, net.layers[0].bias);
    for (auto& v : h) v = v > 0.0 ? v : 0.0;
    std::vector<double> want = matmul_oracle(h, 5, 6, net.layers[2].weights, net.layers[2].bias);

    Tensor y = forward(net, x);
    REQUIRE(y.shape == std::vector<std::int64_t>{5, 4});
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(double(y.data[i]) == doctest::Approx(want[i]).epsilon(1e-5));
}

TEST_CASE("forward is pure") {
    Rng rng(7);
    Network net = make_mlp(4, {5}, 3);
    init_kaiming(net, rng);
    Tensor x({2, 4});
    for (auto& v : x.data) v = float(rng.uniform(-1.0, 1.0));
    Tensor x_before = x;
    Network net_before = net;
    Tensor y1 = forward(net, x);
    Tensor y2 = forward(net, x);
    CHECK(bit_equal(x, x_before));
    CHECK(bit_equal(net, net_before));
    CHECK(bit_equal(y1, y2));
}

TEST_CASE("shape mismatch raises a structured dimension error") {
    Network net = make_mlp(4, {}, 2);
    Tensor x({1, 5});
    CHECK_THROWS_AS(forward(net, x), ShapeError);
    try {
        forward(net, x);
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("(2, 4)") != std::string::npos);
        CHECK(msg.find("(1, 5)") != std::string::npos);
    }
}

TEST_CASE("conv2d forward matches a direct correlation oracle") {
    Rng rng(11);
    Network net = make_conv2(1, 2, 3, 2);
    init_kaiming(net, rng);
    Tensor x({1, 1, 5, 5});
    for (auto& v : x.data) v = float(rng.uniform(0.0, 1.0));

    // First conv layer, checked cell by cell against a quadruple loop.
    const Layer& l = net.layers[0];
    Tensor y = forward(Network{{l}}, x);
    REQUIRE(y.shape == std::vector<std::int64_t>{1, 2, 5, 5});
    for (std::int64_t o = 0; o < 2; ++o)
        for (std::int64_t py = 0; py < 5; ++py)
            for (std::int64_t px = 0; px < 5; ++px) {
                double acc = double(l.bias.at(o));
                for (std::int64_t ky = 0; ky < 3; ++ky)
                    for (std::int64_t kx = 0; kx < 3; ++kx) {
                        std::int64_t iy = py + ky - 1, ix = px + kx - 1;
                        if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
                        acc += double(l.weights.at(o, 0, ky, kx)) * double(x.at(0, 0, iy, ix));
                    }
                CHECK(double(y.at(0, o, py, px)) == doctest::Approx(acc).epsilon(1e-6));
            }
}

TEST_CASE("global average pool averages each channel") {
    Network net;
    net.layers.push_back(Layer{LayerKind::global_avg_pool});
    Tensor x({1, 2, 2, 2});
    x.data = {1.f, 2.f, 3.f, 4.f, 10.f, 20.f, 30.f, 40.f};
    Tensor y = forward(net, x);
    REQUIRE(y.shape == std::vector<std::int64_t>{1, 2});
    CHECK(y.at(0, 0) == doctest::Approx(2.5));
    CHECK(y.at(0, 1) == doctest::Approx(25.0));
}

TEST_CASE("softmax_output emits row-stochastic output") {
    Network net = make_mlp(3, {}, 3);
    Rng rng(3);
    init_kaiming(net, rng);
    net.layers.push_back(Layer{LayerKind::softmax_output});
    Tensor x({4, 3});
    for (auto& v : x.data) v = float(rng.uniform(-2.0, 2.0));
    Tensor y = forward(net, x);
    for (std::int64_t r = 0; r < 4; ++r) {
        double s = 0.0;
        for (std::int64_t j = 0; j < 3; ++j) {
            CHECK(y.at(r, j) >= 0.f);
            s += double(y.at(r, j));
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("argmax ties resolve to the lowest class index") {
    Tensor logits({1, 4});
    logits.data = {1.f, 1.f, 1.f, 1.f};
    CHECK(argmax_row(logits, 0) == 0);
    logits.data = {0.f, 2.f, 2.f, 1.f};
    CHECK(argmax_row(logits, 0) == 1);
}

TEST_CASE("evaluate: constant class-0 predictor scores the label-0 fraction") {
    Network net = make_mlp(4, {}, 3);  // zero weights, zero bias: all-equal logits
    Dataset data;
    data.images = Tensor({4, 1, 2, 2});
    for (auto& v : data.images.data) v = 0.25f;
    data.labels = {0, 1, 2, 0};
    CHECK(nn::evaluate(net, data) == doctest::Approx(0.5));

    data.labels = {1, 1, 2, 2};
    CHECK(nn::evaluate(net, data) == doctest::Approx(0.0));
}

TEST_CASE("evaluate: seeded random net on balanced 10-class data sits near chance") {
    Rng rng(1234);
    Network net = make_mlp(16, {12}, 10);
    init_kaiming(net, rng);
    Dataset data;
    data.images = Tensor({1000, 1, 4, 4});
    for (auto& v : data.images.data) v = float(rng.uniform(0.0, 1.0));
    data.labels.resize(1000);
    for (int i = 0; i < 1000; ++i) data.labels[std::size_t(i)] = std::uint8_t(i % 10);
    const double acc = nn::evaluate(net, data);
    CHECK(acc >= 0.07);
    CHECK(acc <= 0.13);
}

TEST_CASE("evaluate is independent of worker count") {
    Rng rng(5);
    Network net = make_mlp(16, {8}, 4);
    init_kaiming(net, rng);
    Dataset data;
    data.images = Tensor({257, 1, 4, 4});
    for (auto& v : data.images.data) v = float(rng.uniform(0.0, 1.0));
    data.labels.resize(257);
    for (int i = 0; i < 257; ++i) data.labels[std::size_t(i)] = std::uint8_t(i % 4);
    const double a1 = nn::evaluate(net, data, 1);
    const double a8 = nn::evaluate(net, data, 8);
    CHECK(a1 == a8);
}

TEST_CASE("masked positions drop out of the forward pass") {
    Network net = make_mlp(2, {}, 2);
    net.layers[0].weights.data = {1.f, 2.f, 3.f, 4.f};
    net.layers[0].mask = Tensor({2, 2}, 1.f);
    net.layers[0].mask.data[1] = 0.f;
    Tensor x({1, 2});
    x.data = {1.f, 1.f};
    Tensor y = forward(net, x);
    CHECK(y.at(0, 0) == 1.f);  // 1*1 + 2*0(masked)
    CHECK(y.at(0, 1) == 7.f);
}
