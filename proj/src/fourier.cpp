#include "cards/fourier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace cards::spectral {

namespace {

void check_freq(std::int64_t d, std::int64_t f, const char* axis) {
    if (f < freq_lo(d) || f > freq_hi(d))
        throw std::out_of_range(std::string("fourier_basis: frequency ") + axis + " = " +
                                std::to_string(f) + " outside [" + std::to_string(freq_lo(d)) +
                                ", " + std::to_string(freq_hi(d)) + "]");
}

}  // namespace

FourierBasis fourier_basis(std::int64_t d1, std::int64_t d2, std::int64_t i, std::int64_t j) {
    if (d1 < 1 || d2 < 1) throw std::invalid_argument("fourier_basis: empty dims");
    check_freq(d1, i, "i");
    check_freq(d2, j, "j");
    FourierBasis basis{d1, d2, i, j, std::vector<double>(std::size_t(d1 * d2), 0.0)};
    double norm2 = 0.0;
    for (std::int64_t a = 0; a < d1; ++a)
        for (std::int64_t b = 0; b < d2; ++b) {
            const double phase =
                2.0 * M_PI * (double(i) * double(a) / double(d1) + double(j) * double(b) / double(d2));
            const double v = std::cos(phase);
            basis.matrix[std::size_t(a * d2 + b)] = v;
            norm2 += v * v;
        }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : basis.matrix) v *= inv;
    return basis;
}

Tensor perturb(const Tensor& image, const FourierBasis& basis, const PerturbSpec& spec,
               float lo, float hi) {
    const std::size_t nd = image.shape.size();
    if (nd != 2 && nd != 3)
        throw std::invalid_argument("perturb: expected a (d1, d2) or (c, d1, d2) image, got " +
                                    image.shape_str());
    const std::int64_t d1 = image.shape[nd - 2], d2 = image.shape[nd - 1];
    if (d1 != basis.d1 || d2 != basis.d2)
        throw std::invalid_argument("perturb: image is " + std::to_string(d1) + "x" +
                                    std::to_string(d2) + " but the basis is " +
                                    std::to_string(basis.d1) + "x" + std::to_string(basis.d2));
    if (spec.eps == 0.0) return image;
    const std::int64_t channels = nd == 3 ? image.shape[0] : 1;
    const double scale = double(spec.r) * spec.eps;
    Tensor out = image;
    for (std::int64_t c = 0; c < channels; ++c) {
        float* plane = out.data.data() + c * d1 * d2;
        for (std::int64_t p = 0; p < d1 * d2; ++p) {
            const double v = double(plane[p]) + scale * basis.matrix[std::size_t(p)];
            plane[p] = std::min(hi, std::max(lo, float(v)));
        }
    }
    return out;
}

namespace {

// Row index <-> raw DFT index along a dimension of size d (rows are centered).
std::int64_t row_to_raw(std::int64_t a, std::int64_t d) { return (a + d - d / 2) % d; }
std::int64_t raw_to_row(std::int64_t u, std::int64_t d) { return (u + d / 2) % d; }
std::int64_t conj_row(std::int64_t a, std::int64_t d) {
    return raw_to_row((d - row_to_raw(a, d)) % d, d);
}

}  // namespace

Heatmap heatmap(const nn::Network& net, const Dataset& data, double eps, std::uint64_t seed,
                int workers, const std::string& model_id) {
    const std::int64_t d1 = data.d1(), d2 = data.d2();
    const std::int64_t channels = data.channels();
    const std::int64_t n = data.count();
    Heatmap h{Tensor({d1, d2}), eps, model_id};

    if (eps == 0.0) {
        const double err = 1.0 - nn::evaluate(net, data, workers);
        for (float& v : h.grid.data) v = float(err);
        return h;
    }

    // Cells come in conjugate pairs that share a basis (cosines are even), so
    // each pair is computed once and mirrored; the canonical cell's seed keeps
    // the result independent of scheduling.
    std::vector<std::pair<std::int64_t, std::int64_t>> cells;
    for (std::int64_t a = 0; a < d1; ++a)
        for (std::int64_t b = 0; b < d2; ++b) {
            const std::int64_t ca = conj_row(a, d1), cb = conj_row(b, d2);
            if (std::make_pair(a, b) <= std::make_pair(ca, cb)) cells.emplace_back(a, b);
        }

    const Rng root = Rng(seed).derive("heatmap");
    auto run_cell = [&](std::size_t ci) {
        const auto [a, b] = cells[ci];
        const FourierBasis basis = fourier_basis(d1, d2, a - d1 / 2, b - d2 / 2);
        Rng rng = root.derive(std::uint64_t(a * d2 + b));
        Tensor images = data.images;
        for (std::int64_t k = 0; k < n; ++k) {
            float* img = images.data.data() + k * channels * d1 * d2;
            for (std::int64_t c = 0; c < channels; ++c) {
                const double scale = double(rng.sign()) * eps;
                float* plane = img + c * d1 * d2;
                for (std::int64_t p = 0; p < d1 * d2; ++p) {
                    const double v = double(plane[p]) + scale * basis.matrix[std::size_t(p)];
                    plane[p] = std::min(data.value_max, std::max(data.value_min, float(v)));
                }
            }
        }
        const float err = float(1.0 - nn::evaluate_batch(net, images, data.labels, 1));
        h.grid.at(a, b) = err;
        h.grid.at(conj_row(a, d1), conj_row(b, d2)) = err;
    };

    if (workers <= 1) {
        for (std::size_t ci = 0; ci < cells.size(); ++ci) run_cell(ci);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t ci; (ci = next.fetch_add(1)) < cells.size();) run_cell(ci);
            });
        for (auto& t : pool) t.join();
    }
    return h;
}

Heatmap diff_heatmap(const Heatmap& h, const Heatmap& baseline) {
    if (h.grid.shape != baseline.grid.shape)
        throw std::invalid_argument("diff_heatmap: dims " + h.grid.shape_str() + " vs " +
                                    baseline.grid.shape_str());
    if (h.eps != baseline.eps)
        throw std::invalid_argument("diff_heatmap: eps " + std::to_string(h.eps) + " vs " +
                                    std::to_string(baseline.eps));
    Heatmap out{Tensor(h.grid.shape), h.eps, h.model_id + "-minus-" + baseline.model_id};
    for (std::size_t p = 0; p < out.grid.data.size(); ++p)
        out.grid.data[p] = h.grid.data[p] - baseline.grid.data[p];
    return out;
}

void save_heatmap_csv(const Heatmap& h, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_heatmap_csv: cannot open " + path);
    os << "i,j,error\n";
    const std::int64_t d1 = h.grid.shape[0], d2 = h.grid.shape[1];
    char buf[64];
    for (std::int64_t a = 0; a < d1; ++a)
        for (std::int64_t b = 0; b < d2; ++b) {
            std::snprintf(buf, sizeof buf, "%lld,%lld,%.9g\n", (long long)(a - d1 / 2),
                          (long long)(b - d2 / 2), double(h.grid.at(a, b)));
            os << buf;
        }
    if (!os) throw std::runtime_error("save_heatmap_csv: write failed for " + path);
}

void save_heatmap_pgm(const Heatmap& h, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_heatmap_pgm: cannot open " + path);
    const std::int64_t d1 = h.grid.shape[0], d2 = h.grid.shape[1];
    os << "P5\n" << d2 << " " << d1 << "\n255\n";
    for (float v : h.grid.data) {
        const long g = std::lround(std::min(1.0, std::max(0.0, double(v))) * 255.0);
        os.put(char(static_cast<unsigned char>(g)));
    }
    if (!os) throw std::runtime_error("save_heatmap_pgm: write failed for " + path);
}

}  // namespace cards::spectral
