#include "cards/net.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace cards::nn {

const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::global_avg_pool: return "global_avg_pool";
        case LayerKind::softmax_output: return "softmax_output";
    }
    return "?";
}

const char* to_string(Precision p) {
    return p == Precision::full32 ? "full32" : "binary1";
}

std::int64_t Layer::fan_in() const {
    if (kind == LayerKind::dense) return weights.shape[1];
    if (kind == LayerKind::conv2d) return weights.shape[1] * weights.shape[2] * weights.shape[3];
    return 0;
}

std::int64_t Network::weight_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers)
        if (l.has_params()) n += l.weights.numel();
    return n;
}

std::int64_t Network::nonzero_weight_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers) {
        if (!l.has_params()) continue;
        if (l.mask.empty()) {
            n += l.weights.numel();
        } else {
            for (float m : l.mask.data) n += (m != 0.f);
        }
    }
    return n;
}

double Network::sparsity() const {
    const std::int64_t total = weight_count();
    if (total == 0) return 0.0;
    return 1.0 - double(nonzero_weight_count()) / double(total);
}

std::vector<std::size_t> Network::prunable_layers() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].has_params()) out.push_back(i);
    return out;
}

bool bit_equal(const Network& a, const Network& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const Layer& x = a.layers[i];
        const Layer& y = b.layers[i];
        if (x.kind != y.kind || x.precision != y.precision) return false;
        if (x.binary_gain != y.binary_gain) return false;
        if (x.stride != y.stride || x.pad != y.pad) return false;
        if (!cards::bit_equal(x.weights, y.weights)) return false;
        if (!cards::bit_equal(x.bias, y.bias)) return false;
        if (!cards::bit_equal(x.mask, y.mask)) return false;
        if (!cards::bit_equal(x.scores, y.scores)) return false;
    }
    return true;
}

namespace {
Layer plain_layer(LayerKind k) {
    Layer l;
    l.kind = k;
    return l;
}
}  // namespace

Network make_mlp(std::int64_t in_dim, const std::vector<std::int64_t>& hidden,
                 std::int64_t classes) {
    if (in_dim <= 0 || classes <= 0) throw std::invalid_argument("make_mlp: bad dimensions");
    Network net;
    std::int64_t prev = in_dim;
    for (std::int64_t h : hidden) {
        Layer d;
        d.kind = LayerKind::dense;
        d.weights = Tensor({h, prev});
        d.bias = Tensor({h});
        net.layers.push_back(std::move(d));
        net.layers.push_back(plain_layer(LayerKind::relu));
        prev = h;
    }
    Layer head;
    head.kind = LayerKind::dense;
    head.weights = Tensor({classes, prev});
    head.bias = Tensor({classes});
    net.layers.push_back(std::move(head));
    return net;
}

Network make_conv2(std::int64_t in_channels, std::int64_t c1, std::int64_t c2,
                   std::int64_t classes) {
    Network net;
    auto conv = [](std::int64_t ic, std::int64_t oc) {
        Layer l;
        l.kind = LayerKind::conv2d;
        l.weights = Tensor({oc, ic, 3, 3});
        l.bias = Tensor({oc});
        l.pad = 1;
        return l;
    };
    net.layers.push_back(conv(in_channels, c1));
    net.layers.push_back(plain_layer(LayerKind::relu));
    net.layers.push_back(conv(c1, c2));
    net.layers.push_back(plain_layer(LayerKind::relu));
    net.layers.push_back(plain_layer(LayerKind::global_avg_pool));
    Layer head;
    head.kind = LayerKind::dense;
    head.weights = Tensor({classes, c2});
    head.bias = Tensor({classes});
    net.layers.push_back(std::move(head));
    return net;
}

void init_kaiming(Network& net, Rng& rng) {
    for (auto& l : net.layers) {
        if (!l.has_params()) continue;
        const double sigma = std::sqrt(2.0 / double(l.fan_in()));
        for (auto& w : l.weights.data) w = float(rng.normal(0.0, sigma));
        for (auto& b : l.bias.data) b = 0.f;
    }
}

void init_signed_constant(Network& net, Rng& rng) {
    for (auto& l : net.layers) {
        if (!l.has_params()) continue;
        const double sigma = std::sqrt(2.0 / double(l.fan_in()));
        for (auto& w : l.weights.data) w = float(rng.normal() < 0.0 ? -sigma : sigma);
        for (auto& b : l.bias.data) b = 0.f;
        l.precision = Precision::binary1;
        l.binary_gain = sigma;
    }
}

// ---- forward ---------------------------------------------------------------

namespace {

Tensor effective_weights(const Layer& l) {
    if (l.mask.empty()) return l.weights;
    Tensor w = l.weights;
    for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] *= l.mask.data[i];
    return w;
}

Tensor flatten_rows(const Tensor& x) {
    Tensor f = x;
    std::int64_t n = x.shape[0];
    f.shape = {n, x.numel() / n};
    return f;
}

Tensor dense_forward(const Layer& l, const Tensor& x) {
    const Tensor w = effective_weights(l);
    const std::int64_t n = x.shape[0], in = x.shape[1], out = w.shape[0];
    if (w.shape[1] != in)
        throw ShapeError("dense: weight shape " + w.shape_str() + " does not accept input " +
                         x.shape_str());
    Tensor y({n, out});
    for (std::int64_t r = 0; r < n; ++r) {
        const float* xr = &x.data[std::size_t(r * in)];
        for (std::int64_t o = 0; o < out; ++o) {
            const float* wr = &w.data[std::size_t(o * in)];
            double acc = l.bias.empty() ? 0.0 : double(l.bias.at(o));
            for (std::int64_t i = 0; i < in; ++i) acc += double(wr[i]) * double(xr[i]);
            y.at(r, o) = float(acc);
        }
    }
    return y;
}

Tensor conv_forward(const Layer& l, const Tensor& x) {
    const Tensor w = effective_weights(l);
    const std::int64_t n = x.shape[0], ic = x.shape[1], h = x.shape[2], wd = x.shape[3];
    const std::int64_t oc = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    if (w.shape[1] != ic)
        throw ShapeError("conv2d: weight shape " + w.shape_str() + " does not accept input " +
                         x.shape_str());
    const int pad = l.pad, stride = l.stride;
    const std::int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::int64_t ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor y({n, oc, oh, ow});
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t o = 0; o < oc; ++o)
            for (std::int64_t py = 0; py < oh; ++py)
                for (std::int64_t px = 0; px < ow; ++px) {
                    double acc = l.bias.empty() ? 0.0 : double(l.bias.at(o));
                    for (std::int64_t c = 0; c < ic; ++c)
                        for (std::int64_t ky = 0; ky < kh; ++ky) {
                            const std::int64_t iy = py * stride + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                const std::int64_t ix = px * stride + kx - pad;
                                if (ix < 0 || ix >= wd) continue;
                                acc += double(w.at(o, c, ky, kx)) * double(x.at(b, c, iy, ix));
                            }
                        }
                    y.at(b, o, py, px) = float(acc);
                }
    return y;
}

Tensor layer_forward(const Layer& l, const Tensor& x) {
    switch (l.kind) {
        case LayerKind::dense:
            return dense_forward(l, x.shape.size() == 2 ? x : flatten_rows(x));
        case LayerKind::conv2d:
            if (x.shape.size() != 4)
                throw ShapeError("conv2d: expected 4-d input, got " + x.shape_str());
            return conv_forward(l, x);
        case LayerKind::relu: {
            Tensor y = x;
            for (auto& v : y.data) v = v > 0.f ? v : 0.f;
            return y;
        }
        case LayerKind::global_avg_pool: {
            if (x.shape.size() != 4)
                throw ShapeError("global_avg_pool: expected 4-d input, got " + x.shape_str());
            const std::int64_t n = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
            Tensor y({n, c});
            for (std::int64_t b = 0; b < n; ++b)
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    double acc = 0.0;
                    const float* p = &x.data[std::size_t((b * c + ch) * hw)];
                    for (std::int64_t i = 0; i < hw; ++i) acc += double(p[i]);
                    y.at(b, ch) = float(acc / double(hw));
                }
            return y;
        }
        case LayerKind::softmax_output:
            return softmax_rows(x);
    }
    throw std::runtime_error("layer_forward: unknown layer kind");
}

}  // namespace

Tensor forward(const Network& net, const Tensor& batch) {
    if (batch.shape.empty()) throw ShapeError("forward: empty input");
    Tensor x = batch;
    for (const auto& l : net.layers) x = layer_forward(l, x);
    return x;
}

ForwardTrace forward_trace(const Network& net, const Tensor& batch) {
    ForwardTrace t;
    t.acts.reserve(net.layers.size() + 1);
    Tensor x = batch;
    for (const auto& l : net.layers) {
        if (l.kind == LayerKind::dense && x.shape.size() != 2) x = flatten_rows(x);
        t.acts.push_back(x);
        x = layer_forward(l, x);
    }
    t.acts.push_back(std::move(x));
    return t;
}

Grads backward(const Network& net, const ForwardTrace& trace, const Tensor& dout) {
    const std::size_t L = net.layers.size();
    if (trace.acts.size() != L + 1)
        throw std::runtime_error("backward: trace does not match network depth");
    Grads g;
    g.w.resize(L);
    g.b.resize(L);
    Tensor delta = dout;
    for (std::size_t li = L; li-- > 0;) {
        const Layer& l = net.layers[li];
        const Tensor& x = trace.acts[li];
        switch (l.kind) {
            case LayerKind::dense: {
                const Tensor w = effective_weights(l);
                const std::int64_t n = x.shape[0], in = x.shape[1], out = w.shape[0];
                Tensor dw({out, in});
                for (std::int64_t o = 0; o < out; ++o)
                    for (std::int64_t i = 0; i < in; ++i) {
                        double acc = 0.0;
                        for (std::int64_t r = 0; r < n; ++r)
                            acc += double(delta.at(r, o)) * double(x.at(r, i));
                        dw.at(o, i) = float(acc);
                    }
                Tensor db({out});
                for (std::int64_t o = 0; o < out; ++o) {
                    double acc = 0.0;
                    for (std::int64_t r = 0; r < n; ++r) acc += double(delta.at(r, o));
                    db.at(o) = float(acc);
                }
                Tensor dx({n, in});
                for (std::int64_t r = 0; r < n; ++r)
                    for (std::int64_t i = 0; i < in; ++i) {
                        double acc = 0.0;
                        for (std::int64_t o = 0; o < out; ++o)
                            acc += double(delta.at(r, o)) * double(w.at(o, i));
                        dx.at(r, i) = float(acc);
                    }
                g.w[li] = std::move(dw);
                g.b[li] = std::move(db);
                delta = std::move(dx);
                break;
            }
            case LayerKind::conv2d: {
                const Tensor w = effective_weights(l);
                const std::int64_t n = x.shape[0], ic = x.shape[1], h = x.shape[2],
                                   wd = x.shape[3];
                const std::int64_t oc = w.shape[0], kh = w.shape[2], kw = w.shape[3];
                const int pad = l.pad, stride = l.stride;
                const std::int64_t oh = delta.shape[2], ow = delta.shape[3];
                Tensor dw(w.shape);
                std::vector<double> dwacc(std::size_t(dw.numel()), 0.0);
                Tensor db({oc});
                std::vector<double> dbacc(std::size_t(oc), 0.0);
                std::vector<double> dxacc(std::size_t(x.numel()), 0.0);
                for (std::int64_t b = 0; b < n; ++b)
                    for (std::int64_t o = 0; o < oc; ++o)
                        for (std::int64_t py = 0; py < oh; ++py)
                            for (std::int64_t px = 0; px < ow; ++px) {
                                const double d = double(delta.at(b, o, py, px));
                                dbacc[std::size_t(o)] += d;
                                for (std::int64_t c = 0; c < ic; ++c)
                                    for (std::int64_t ky = 0; ky < kh; ++ky) {
                                        const std::int64_t iy = py * stride + ky - pad;
                                        if (iy < 0 || iy >= h) continue;
                                        for (std::int64_t kx = 0; kx < kw; ++kx) {
                                            const std::int64_t ix = px * stride + kx - pad;
                                            if (ix < 0 || ix >= wd) continue;
                                            const std::size_t wi = std::size_t(
                                                ((o * ic + c) * kh + ky) * kw + kx);
                                            const std::size_t xi = std::size_t(
                                                ((b * ic + c) * h + iy) * wd + ix);
                                            dwacc[wi] += d * double(x.data[xi]);
                                            dxacc[xi] += d * double(w.data[wi]);
                                        }
                                    }
                            }
                for (std::size_t i = 0; i < dwacc.size(); ++i) dw.data[i] = float(dwacc[i]);
                for (std::int64_t o = 0; o < oc; ++o) db.at(o) = float(dbacc[std::size_t(o)]);
                Tensor dx(x.shape);
                for (std::size_t i = 0; i < dxacc.size(); ++i) dx.data[i] = float(dxacc[i]);
                g.w[li] = std::move(dw);
                g.b[li] = std::move(db);
                delta = std::move(dx);
                break;
            }
            case LayerKind::relu: {
                Tensor dx = delta;
                for (std::size_t i = 0; i < dx.data.size(); ++i)
                    if (x.data[i] <= 0.f) dx.data[i] = 0.f;
                delta = std::move(dx);
                break;
            }
            case LayerKind::global_avg_pool: {
                const std::int64_t n = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
                Tensor dx(x.shape);
                for (std::int64_t b = 0; b < n; ++b)
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const float d = float(double(delta.at(b, ch)) / double(hw));
                        float* p = &dx.data[std::size_t((b * c + ch) * hw)];
                        for (std::int64_t i = 0; i < hw; ++i) p[i] = d;
                    }
                delta = std::move(dx);
                break;
            }
            case LayerKind::softmax_output:
                throw std::runtime_error(
                    "backward: softmax_output layers are inference-only; train on logits");
        }
    }
    return g;
}

// ---- loss / metrics --------------------------------------------------------

Tensor softmax_rows(const Tensor& logits) {
    const std::int64_t n = logits.shape[0], c = logits.shape[1];
    Tensor p({n, c});
    for (std::int64_t r = 0; r < n; ++r) {
        double mx = -1e300;
        for (std::int64_t j = 0; j < c; ++j) mx = std::max(mx, double(logits.at(r, j)));
        double z = 0.0;
        for (std::int64_t j = 0; j < c; ++j) z += std::exp(double(logits.at(r, j)) - mx);
        for (std::int64_t j = 0; j < c; ++j)
            p.at(r, j) = float(std::exp(double(logits.at(r, j)) - mx) / z);
    }
    return p;
}

LossOut cross_entropy(const Tensor& logits, const std::vector<std::uint8_t>& labels,
                      std::size_t label_offset) {
    const std::int64_t n = logits.shape[0], c = logits.shape[1];
    if (label_offset + std::size_t(n) > labels.size())
        throw std::invalid_argument("cross_entropy: not enough labels for batch");
    LossOut out;
    out.dlogits = Tensor({n, c});
    double total = 0.0;
    for (std::int64_t r = 0; r < n; ++r) {
        const std::uint8_t y = labels[label_offset + std::size_t(r)];
        if (std::int64_t(y) >= c)
            throw std::invalid_argument("cross_entropy: label " + std::to_string(int(y)) +
                                        " out of range for " + std::to_string(c) + " classes");
        double mx = -1e300;
        for (std::int64_t j = 0; j < c; ++j) mx = std::max(mx, double(logits.at(r, j)));
        double z = 0.0;
        for (std::int64_t j = 0; j < c; ++j) z += std::exp(double(logits.at(r, j)) - mx);
        total += -(double(logits.at(r, y)) - mx - std::log(z));
        for (std::int64_t j = 0; j < c; ++j) {
            const double p = std::exp(double(logits.at(r, j)) - mx) / z;
            out.dlogits.at(r, j) = float((p - (j == std::int64_t(y) ? 1.0 : 0.0)) / double(n));
        }
    }
    out.loss = total / double(n);
    return out;
}

std::int64_t argmax_row(const Tensor& t, std::int64_t row) {
    const std::int64_t c = t.shape[1];
    std::int64_t best = 0;
    float bv = t.at(row, 0);
    for (std::int64_t j = 1; j < c; ++j)
        if (t.at(row, j) > bv) {  // strict: ties keep the lowest index
            bv = t.at(row, j);
            best = j;
        }
    return best;
}

double evaluate_batch(const Network& net, const Tensor& images,
                      const std::vector<std::uint8_t>& labels, int workers) {
    const std::int64_t n = images.shape[0];
    if (n == 0) throw std::invalid_argument("evaluate: empty dataset");
    if (labels.size() != std::size_t(n))
        throw std::invalid_argument("evaluate: label count does not match image count");
    const std::int64_t chunk = 64;
    const std::int64_t nchunks = (n + chunk - 1) / chunk;
    std::vector<std::int64_t> correct(std::size_t(nchunks), 0);

    auto run_chunk = [&](std::int64_t ci) {
        const std::int64_t lo = ci * chunk, hi = std::min(n, lo + chunk);
        const std::int64_t stride = images.numel() / n;
        Tensor batch({hi - lo, images.shape[1], images.shape[2], images.shape[3]});
        std::copy(images.data.begin() + lo * stride, images.data.begin() + hi * stride,
                  batch.data.begin());
        Tensor out = forward(net, batch);
        std::int64_t c = 0;
        for (std::int64_t r = 0; r < hi - lo; ++r)
            c += argmax_row(out, r) == std::int64_t(labels[std::size_t(lo + r)]);
        correct[std::size_t(ci)] = c;
    };

    if (workers <= 1) {
        for (std::int64_t ci = 0; ci < nchunks; ++ci) run_chunk(ci);
    } else {
        std::atomic<std::int64_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::int64_t ci; (ci = next.fetch_add(1)) < nchunks;) run_chunk(ci);
            });
        for (auto& t : pool) t.join();
    }
    std::int64_t total = 0;
    for (auto c : correct) total += c;
    return double(total) / double(n);
}

double evaluate(const Network& net, const Dataset& data, int workers) {
    return evaluate_batch(net, data.images, data.labels, workers);
}

}  // namespace cards::nn
