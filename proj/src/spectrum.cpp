#include "cards/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cards::spectral {

namespace {

/// Channel-averaged double plane from a (d1, d2) or (c, d1, d2) tensor.
std::vector<double> to_plane(const Tensor& image, std::int64_t& d1, std::int64_t& d2) {
    const std::size_t nd = image.shape.size();
    if (nd != 2 && nd != 3)
        throw std::invalid_argument("spectrum: expected a (d1, d2) or (c, d1, d2) image, got " +
                                    image.shape_str());
    d1 = image.shape[nd - 2];
    d2 = image.shape[nd - 1];
    if (d1 < 2 || d2 < 2)
        throw std::invalid_argument("spectrum: image " + std::to_string(d1) + "x" +
                                    std::to_string(d2) + " is smaller than 2x2");
    const std::int64_t channels = nd == 3 ? image.shape[0] : 1;
    std::vector<double> plane(std::size_t(d1 * d2), 0.0);
    for (std::int64_t c = 0; c < channels; ++c)
        for (std::int64_t p = 0; p < d1 * d2; ++p)
            plane[std::size_t(p)] += double(image.data[std::size_t(c * d1 * d2 + p)]);
    const double inv = 1.0 / double(channels);
    for (double& v : plane) v *= inv;
    return plane;
}

std::int64_t center_freq(std::int64_t u, std::int64_t d) { return 2 * u < d ? u : u - d; }

}  // namespace

std::vector<double> radial_power_spectrum(const Tensor& image) {
    std::int64_t d1 = 0, d2 = 0;
    const std::vector<double> plane = to_plane(image, d1, d2);

    // Separable DFT, rows then columns, unitary normalization.
    std::vector<double> re(std::size_t(d1 * d2), 0.0), im(std::size_t(d1 * d2), 0.0);
    for (std::int64_t a = 0; a < d1; ++a)
        for (std::int64_t v = 0; v < d2; ++v) {
            double sr = 0.0, si = 0.0;
            for (std::int64_t b = 0; b < d2; ++b) {
                const double th = 2.0 * M_PI * double(v) * double(b) / double(d2);
                const double x = plane[std::size_t(a * d2 + b)];
                sr += x * std::cos(th);
                si -= x * std::sin(th);
            }
            re[std::size_t(a * d2 + v)] = sr;
            im[std::size_t(a * d2 + v)] = si;
        }
    std::vector<double> fre(std::size_t(d1 * d2), 0.0), fim(std::size_t(d1 * d2), 0.0);
    const double unit = 1.0 / std::sqrt(double(d1) * double(d2));
    for (std::int64_t u = 0; u < d1; ++u)
        for (std::int64_t v = 0; v < d2; ++v) {
            double sr = 0.0, si = 0.0;
            for (std::int64_t a = 0; a < d1; ++a) {
                const double th = 2.0 * M_PI * double(u) * double(a) / double(d1);
                const double c = std::cos(th), s = std::sin(th);
                const double xr = re[std::size_t(a * d2 + v)], xi = im[std::size_t(a * d2 + v)];
                sr += xr * c + xi * s;
                si += xi * c - xr * s;
            }
            fre[std::size_t(u * d2 + v)] = sr * unit;
            fim[std::size_t(u * d2 + v)] = si * unit;
        }

    std::int64_t kmax = 0;
    for (std::int64_t u = 0; u < d1; ++u)
        for (std::int64_t v = 0; v < d2; ++v) {
            const double cu = double(center_freq(u, d1)), cv = double(center_freq(v, d2));
            kmax = std::max<std::int64_t>(kmax, std::llround(std::sqrt(cu * cu + cv * cv)));
        }
    std::vector<double> sum(std::size_t(kmax + 1), 0.0);
    std::vector<std::int64_t> cnt(std::size_t(kmax + 1), 0);
    for (std::int64_t u = 0; u < d1; ++u)
        for (std::int64_t v = 0; v < d2; ++v) {
            const double cu = double(center_freq(u, d1)), cv = double(center_freq(v, d2));
            const std::size_t k = std::size_t(std::llround(std::sqrt(cu * cu + cv * cv)));
            const std::size_t p = std::size_t(u * d2 + v);
            sum[k] += fre[p] * fre[p] + fim[p] * fim[p];
            ++cnt[k];
        }
    std::vector<double> bins(std::size_t(kmax + 1), 0.0);
    for (std::size_t k = 0; k < bins.size(); ++k)
        if (cnt[k] > 0) bins[k] = sum[k] / double(cnt[k]);
    return bins;
}

SpectralSignature signature(const Tensor& image) {
    const std::vector<double> bins = radial_power_spectrum(image);
    const std::size_t nd = image.shape.size();
    const std::int64_t R = signature_length(image.shape[nd - 2], image.shape[nd - 1]);
    SpectralSignature sig;
    sig.values.resize(std::size_t(R), 0.0);
    double norm2 = 0.0;
    for (std::int64_t k = 0; k < R; ++k) {
        const double v = 1.0 / (bins[std::size_t(k)] + 1e-12);
        sig.values[std::size_t(k)] = v;
        norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : sig.values) v *= inv;
    sig.normalized = true;
    return sig;
}

void save_signatures_csv(const std::vector<SpectralSignature>& sigs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_signatures_csv: cannot open " + path);
    char buf[32];
    for (const auto& sig : sigs) {
        for (std::size_t k = 0; k < sig.values.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", sig.values[k]);
            os << (k ? "," : "") << buf;
        }
        os << "\n";
    }
    if (!os) throw std::runtime_error("save_signatures_csv: write failed for " + path);
}

}  // namespace cards::spectral
