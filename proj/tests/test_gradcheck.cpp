#include <cmath>
#include <vector>

#include "cards/net.hpp"
#include "doctest.h"

using namespace cards;
using namespace cards::nn;

// Finite-difference oracle.  The forward pass and loss are re-implemented
// here from scratch in full double precision ("64-bit shadow"), so the check
// is independent of the library's backward code.

namespace {

struct ShadowNet {
    // Parameters flattened layer by layer: weights then bias per parametric layer.
    std::vector<double> params;
    const Network* proto = nullptr;

    static ShadowNet from(const Network& net) {
        ShadowNet s;
        s.proto = &net;
        for (const auto& l : net.layers) {
            if (!l.has_params()) continue;
            for (float w : l.weights.data) s.params.push_back(double(w));
            for (float b : l.bias.data) s.params.push_back(double(b));
        }
        return s;
    }

    double loss(const Tensor& images, const std::vector<std::uint8_t>& labels) const {
        const Network& net = *proto;
        const std::int64_t n = images.shape[0];
        // activations as double planes
        std::vector<std::int64_t> shape = images.shape;
        std::vector<double> x(images.data.begin(), images.data.end());
        std::size_t pi = 0;
        for (const auto& l : net.layers) {
            switch (l.kind) {
                case LayerKind::dense: {
                    const std::int64_t out = l.weights.shape[0], in = l.weights.shape[1];
                    std::int64_t flat = 1;
                    for (std::size_t i = 1; i < shape.size(); ++i) flat *= shape[i];
                    REQUIRE(flat == in);
                    const double* W = &params[pi];
                    const double* B = &params[pi + std::size_t(out * in)];
                    std::vector<double> y(std::size_t(n * out));
                    for (std::int64_t r = 0; r < n; ++r)
                        for (std::int64_t o = 0; o < out; ++o) {
                            double acc = B[o];
                            for (std::int64_t i = 0; i < in; ++i)
                                acc += W[o * in + i] * x[std::size_t(r * in + i)];
                            y[std::size_t(r * out + o)] = acc;
                        }
                    x = std::move(y);
                    shape = {n, out};
                    pi += std::size_t(out * in + out);
                    break;
                }
                case LayerKind::conv2d: {
                    const std::int64_t oc = l.weights.shape[0], ic = l.weights.shape[1],
                                       kh = l.weights.shape[2], kw = l.weights.shape[3];
                    const std::int64_t h = shape[2], wd = shape[3];
                    const double* W = &params[pi];
                    const double* B = &params[pi + std::size_t(oc * ic * kh * kw)];
                    std::vector<double> y(std::size_t(n * oc * h * wd), 0.0);
                    for (std::int64_t b = 0; b < n; ++b)
                        for (std::int64_t o = 0; o < oc; ++o)
                            for (std::int64_t py = 0; py < h; ++py)
                                for (std::int64_t px = 0; px < wd; ++px) {
                                    double acc = B[o];
                                    for (std::int64_t c = 0; c < ic; ++c)
                                        for (std::int64_t ky = 0; ky < kh; ++ky)
                                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                                const std::int64_t iy = py + ky - l.pad;
                                                const std::int64_t ix = px + kx - l.pad;
                                                if (iy < 0 || iy >= h || ix < 0 || ix >= wd)
                                                    continue;
                                                acc += W[((o * ic + c) * kh + ky) * kw + kx] *
                                                       x[std::size_t(
                                                           ((b * ic + c) * h + iy) * wd + ix)];
                                            }
                                    y[std::size_t(((b * oc + o) * h + py) * wd + px)] = acc;
                                }
                    x = std::move(y);
                    shape = {n, oc, h, wd};
                    pi += std::size_t(oc * ic * kh * kw + oc);
                    break;
                }
                case LayerKind::relu:
                    for (auto& v : x) v = v > 0.0 ? v : 0.0;
                    break;
                case LayerKind::global_avg_pool: {
                    const std::int64_t c = shape[1], hw = shape[2] * shape[3];
                    std::vector<double> y(std::size_t(n * c));
                    for (std::int64_t b = 0; b < n; ++b)
                        for (std::int64_t ch = 0; ch < c; ++ch) {
                            double acc = 0.0;
                            for (std::int64_t i = 0; i < hw; ++i)
                                acc += x[std::size_t((b * c + ch) * hw + i)];
                            y[std::size_t(b * c + ch)] = acc / double(hw);
                        }
                    x = std::move(y);
                    shape = {n, c};
                    break;
                }
                case LayerKind::softmax_output:
                    FAIL("shadow net does not model softmax_output");
            }
        }
        const std::int64_t classes = shape[1];
        double total = 0.0;
        for (std::int64_t r = 0; r < n; ++r) {
            double mx = -1e300;
            for (std::int64_t j = 0; j < classes; ++j)
                mx = std::max(mx, x[std::size_t(r * classes + j)]);
            double z = 0.0;
            for (std::int64_t j = 0; j < classes; ++j)
                z += std::exp(x[std::size_t(r * classes + j)] - mx);
            total += -(x[std::size_t(r * classes + labels[std::size_t(r)])] - mx - std::log(z));
        }
        return total / double(n);
    }
};

void check_gradients(const Network& net, const Tensor& images,
                     const std::vector<std::uint8_t>& labels) {
    ForwardTrace trace = forward_trace(net, images);
    LossOut lo = cross_entropy(trace.acts.back(), labels);
    Grads g = backward(net, trace, lo.dlogits);

    std::vector<double> analytic;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        if (!net.layers[li].has_params()) continue;
        for (float v : g.w[li].data) analytic.push_back(double(v));
        for (float v : g.b[li].data) analytic.push_back(double(v));
    }

    ShadowNet shadow = ShadowNet::from(net);
    REQUIRE(shadow.params.size() == analytic.size());
    const double h = 1e-3;
    for (std::size_t i = 0; i < shadow.params.size(); ++i) {
        const double keep = shadow.params[i];
        shadow.params[i] = keep + h;
        const double lp = shadow.loss(images, labels);
        shadow.params[i] = keep - h;
        const double lm = shadow.loss(images, labels);
        shadow.params[i] = keep;
        const double fd = (lp - lm) / (2.0 * h);
        const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
        CHECK_MESSAGE(err <= 1e-4, "param ", i, ": analytic ", analytic[i], " vs fd ", fd);
    }
}

}  // namespace

TEST_CASE("backward matches central differences on a 3-layer MLP") {
    Rng rng(31);
    Network net = make_mlp(4, {5, 4}, 3);
    init_kaiming(net, rng);
    Tensor x({3, 1, 2, 2});
    for (auto& v : x.data) v = float(rng.uniform(-1.0, 1.0));
    check_gradients(net, x, {0, 2, 1});
}

TEST_CASE("backward matches central differences on the conv net") {
    Rng rng(32);
    Network net = make_conv2(1, 2, 2, 2);
    init_kaiming(net, rng);
    Tensor x({2, 1, 6, 6});
    for (auto& v : x.data) v = float(rng.uniform(0.0, 1.0));
    check_gradients(net, x, {1, 0});
}

TEST_CASE("masked-layer gradients still match on live positions") {
    Rng rng(33);
    Network net = make_mlp(4, {6}, 3);
    init_kaiming(net, rng);
    net.layers[0].mask = Tensor(net.layers[0].weights.shape, 1.f);
    for (auto& m : net.layers[0].mask.data) m = rng.bernoulli(0.7) ? 1.f : 0.f;
    // Zero out masked weights so the shadow (which has no mask concept) agrees
    // with the masked forward; live-position gradients must then coincide.
    for (std::size_t i = 0; i < net.layers[0].weights.data.size(); ++i)
        if (net.layers[0].mask.data[i] == 0.f) net.layers[0].weights.data[i] = 0.f;

    Tensor x({3, 1, 2, 2});
    for (auto& v : x.data) v = float(rng.uniform(-1.0, 1.0));
    const std::vector<std::uint8_t> labels = {0, 1, 2};

    ForwardTrace trace = forward_trace(net, x);
    LossOut lo = cross_entropy(trace.acts.back(), labels);
    Grads g = backward(net, trace, lo.dlogits);

    ShadowNet shadow = ShadowNet::from(net);
    const double h = 1e-3;
    for (std::size_t i = 0; i < net.layers[0].weights.data.size(); ++i) {
        if (net.layers[0].mask.data[i] == 0.f) continue;
        const double keep = shadow.params[i];
        shadow.params[i] = keep + h;
        const double lp = shadow.loss(x, labels);
        shadow.params[i] = keep - h;
        const double lm = shadow.loss(x, labels);
        shadow.params[i] = keep;
        const double fd = (lp - lm) / (2.0 * h);
        const double err = std::abs(double(g.w[0].data[i]) - fd) / std::max(1.0, std::abs(fd));
        CHECK(err <= 1e-4);
    }
}
