#include "cards/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace cards::nn {

namespace {

// Little-endian on-disk layout, written on a little-endian host.

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error(std::string("checkpoint: truncated reading ") + what);
    return v;
}

void put_floats(std::ostream& os, const std::vector<float>& v) {
    if (!v.empty())
        os.write(reinterpret_cast<const char*>(v.data()),
                 std::streamsize(v.size() * sizeof(float)));
}

void get_floats(std::istream& is, std::vector<float>& v, std::size_t n, const char* what) {
    v.resize(n);
    if (n == 0) return;
    is.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(float)));
    if (!is) throw std::runtime_error(std::string("checkpoint: truncated reading ") + what);
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    put<std::uint32_t>(os, kCheckpointMagic);
    put<std::uint16_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, std::uint32_t(net.layers.size()));
    for (const Layer& l : net.layers) {
        put<std::uint8_t>(os, std::uint8_t(l.kind));
        put<std::uint8_t>(os, std::uint8_t(l.precision));
        std::uint8_t flags = 0;
        if (!l.bias.empty()) flags |= 1;
        if (!l.mask.empty()) flags |= 2;
        if (!l.scores.empty()) flags |= 4;
        put<std::uint8_t>(os, flags);
        put<std::int32_t>(os, l.stride);
        put<std::int32_t>(os, l.pad);
        put<double>(os, l.binary_gain);
        put<std::uint8_t>(os, std::uint8_t(l.weights.shape.size()));
        for (auto d : l.weights.shape) put<std::int64_t>(os, d);
        if (flags & 1) put<std::int64_t>(os, l.bias.numel());
        put_floats(os, l.weights.data);
        if (flags & 1) put_floats(os, l.bias.data);
        if (flags & 2) {
            const std::size_t n = l.mask.data.size();
            std::vector<std::uint8_t> bits((n + 7) / 8, 0);
            for (std::size_t i = 0; i < n; ++i)
                if (l.mask.data[i] != 0.f) bits[i / 8] |= std::uint8_t(1u << (i % 8));
            if (!bits.empty())
                os.write(reinterpret_cast<const char*>(bits.data()),
                         std::streamsize(bits.size()));
        }
        if (flags & 4) put_floats(os, l.scores.data);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

Network load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    const auto magic = get<std::uint32_t>(is, "magic");
    if (magic != kCheckpointMagic)
        throw std::runtime_error("checkpoint: bad magic in " + path +
                                 " (not a network checkpoint)");
    const auto version = get<std::uint16_t>(is, "version");
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version) + " in " + path);
    const auto nlayers = get<std::uint32_t>(is, "layer count");
    Network net;
    net.layers.resize(nlayers);
    for (std::uint32_t li = 0; li < nlayers; ++li) {
        Layer& l = net.layers[li];
        const auto kind = get<std::uint8_t>(is, "layer kind");
        if (kind > std::uint8_t(LayerKind::softmax_output))
            throw std::runtime_error("checkpoint: unknown layer kind " + std::to_string(kind));
        l.kind = LayerKind(kind);
        const auto prec = get<std::uint8_t>(is, "precision");
        if (prec > std::uint8_t(Precision::binary1))
            throw std::runtime_error("checkpoint: unknown precision tag " + std::to_string(prec));
        l.precision = Precision(prec);
        const auto flags = get<std::uint8_t>(is, "flags");
        l.stride = get<std::int32_t>(is, "stride");
        l.pad = get<std::int32_t>(is, "pad");
        l.binary_gain = get<double>(is, "binary gain");
        const auto ndim = get<std::uint8_t>(is, "weight rank");
        l.weights.shape.resize(ndim);
        for (auto& d : l.weights.shape) d = get<std::int64_t>(is, "weight dim");
        std::int64_t bias_n = 0;
        if (flags & 1) bias_n = get<std::int64_t>(is, "bias size");
        const std::size_t wn = ndim ? std::size_t(l.weights.numel()) : 0;
        get_floats(is, l.weights.data, wn, "weights");
        if (flags & 1) {
            l.bias.shape = {bias_n};
            get_floats(is, l.bias.data, std::size_t(bias_n), "bias");
        }
        if (flags & 2) {
            std::vector<std::uint8_t> bits((wn + 7) / 8);
            if (!bits.empty()) {
                is.read(reinterpret_cast<char*>(bits.data()), std::streamsize(bits.size()));
                if (!is) throw std::runtime_error("checkpoint: truncated reading mask");
            }
            l.mask.shape = l.weights.shape;
            l.mask.data.resize(wn);
            for (std::size_t i = 0; i < wn; ++i)
                l.mask.data[i] = (bits[i / 8] >> (i % 8)) & 1u ? 1.f : 0.f;
        }
        if (flags & 4) {
            l.scores.shape = l.weights.shape;
            get_floats(is, l.scores.data, wn, "scores");
        }
    }
    return net;
}

}  // namespace cards::nn
