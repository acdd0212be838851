#include "cards/gate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "cards/rng.hpp"
#include "json.hpp"

namespace cards::gate {

namespace {

constexpr std::uint32_t kMagic = 0x58494743;  // "CGIX"
constexpr std::uint32_t kVersion = 1;

Tensor image_view(const Tensor& batch, std::int64_t k) {
    const std::int64_t c = batch.shape[1], d1 = batch.shape[2], d2 = batch.shape[3];
    Tensor img({c, d1, d2});
    const std::int64_t stride = c * d1 * d2;
    std::copy(batch.data.begin() + k * stride, batch.data.begin() + (k + 1) * stride,
              img.data.begin());
    return img;
}

template <typename T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw std::runtime_error(std::string("load_index: truncated reading ") + what);
    return v;
}

}  // namespace

SignatureIndex build_index(const Tensor& samples, const std::string& augmentation_id,
                           std::int64_t P, std::uint64_t seed, const std::string& source) {
    if (samples.shape.size() != 4)
        throw std::invalid_argument("build_index: expected (n, c, d1, d2) samples, got " +
                                    samples.shape_str());
    const std::int64_t n = samples.shape[0];
    if (P <= 0) throw std::invalid_argument("build_index: P must be positive");
    if (P > n)
        throw std::invalid_argument("build_index: P = " + std::to_string(P) + " exceeds the " +
                                    std::to_string(n) + " available samples");
    SignatureIndex index;
    index.augmentation_id = augmentation_id;
    index.P = P;
    index.R = spectral::signature_length(samples.shape[2], samples.shape[3]);
    index.seed = seed;
    index.source = source;
    index.points.reserve(std::size_t(P * index.R));

    Rng rng = Rng(seed).derive("index-sample");
    const std::vector<std::size_t> picks = rng.sample_without_replacement(std::size_t(n), std::size_t(P));
    for (std::size_t pi : picks) {
        const spectral::SpectralSignature sig = spectral::signature(image_view(samples, std::int64_t(pi)));
        index.points.insert(index.points.end(), sig.values.begin(), sig.values.end());
    }
    index.tree = KdTree(index.points, index.R);
    return index;
}

void save_index(const SignatureIndex& index, const std::string& path) {
    {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("save_index: cannot open " + path);
        put<std::uint32_t>(os, kMagic);
        put<std::uint32_t>(os, kVersion);
        put<std::int64_t>(os, index.R);
        put<std::int64_t>(os, index.P);
        for (double v : index.points) put<double>(os, v);
        if (!os) throw std::runtime_error("save_index: write failed for " + path);
    }
    nlohmann::json meta;
    meta["augmentation_id"] = index.augmentation_id;
    meta["seed"] = index.seed;
    meta["source"] = index.source;
    std::ofstream js(path + ".json");
    if (!js) throw std::runtime_error("save_index: cannot open " + path + ".json");
    js << meta.dump(2) << "\n";
    if (!js) throw std::runtime_error("save_index: write failed for " + path + ".json");
}

SignatureIndex load_index(const std::string& path) {
    SignatureIndex index;
    {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw std::runtime_error("load_index: cannot open " + path);
        if (get<std::uint32_t>(is, "magic") != kMagic)
            throw std::runtime_error("load_index: bad magic in " + path);
        const std::uint32_t version = get<std::uint32_t>(is, "version");
        if (version != kVersion)
            throw std::runtime_error("load_index: unsupported version " + std::to_string(version));
        index.R = get<std::int64_t>(is, "dimension");
        index.P = get<std::int64_t>(is, "point count");
        if (index.R <= 0 || index.P < 0) throw std::runtime_error("load_index: bad dims in " + path);
        index.points.resize(std::size_t(index.P * index.R));
        is.read(reinterpret_cast<char*>(index.points.data()),
                std::streamsize(index.points.size() * sizeof(double)));
        if (!is) throw std::runtime_error("load_index: truncated reading points");
    }
    std::ifstream js(path + ".json");
    if (js) {
        nlohmann::json meta = nlohmann::json::parse(js, nullptr, false);
        if (!meta.is_discarded()) {
            index.augmentation_id = meta.value("augmentation_id", "");
            index.seed = meta.value("seed", std::uint64_t(0));
            index.source = meta.value("source", "");
        }
    }
    index.tree = KdTree(index.points, index.R);
    return index;
}

std::vector<double> batch_mean_signature(const Tensor& batch) {
    if (batch.shape.size() != 4)
        throw std::invalid_argument("batch_mean_signature: expected (m, c, d1, d2), got " +
                                    batch.shape_str());
    const std::int64_t m = batch.shape[0];
    if (m < 1) throw std::invalid_argument("batch_mean_signature: empty batch");
    const std::int64_t R = spectral::signature_length(batch.shape[2], batch.shape[3]);
    std::vector<std::vector<double>> comp;
    comp.resize(std::size_t(R));
    for (auto& c : comp) c.reserve(std::size_t(m));
    for (std::int64_t k = 0; k < m; ++k) {
        const spectral::SpectralSignature sig = spectral::signature(image_view(batch, k));
        for (std::int64_t r = 0; r < R; ++r) comp[std::size_t(r)].push_back(sig.values[std::size_t(r)]);
    }
    // Sorted accumulation: the mean is bit-identical under any batch order.
    std::vector<double> mean(std::size_t(R), 0.0);
    for (std::int64_t r = 0; r < R; ++r) {
        std::sort(comp[std::size_t(r)].begin(), comp[std::size_t(r)].end());
        double acc = 0.0;
        for (double v : comp[std::size_t(r)]) acc += v;
        mean[std::size_t(r)] = acc / double(m);
    }
    return mean;
}

double d_ss(const SignatureIndex& index, const std::vector<double>& mean_signature) {
    if (std::int64_t(mean_signature.size()) != index.R)
        throw std::invalid_argument("d_ss: signature dimension " +
                                    std::to_string(mean_signature.size()) + " does not match " +
                                    std::to_string(index.R));
    return std::sqrt(index.tree.nearest(mean_signature).dist2);
}

double d_ss(const SignatureIndex& index, const Tensor& batch) {
    return d_ss(index, batch_mean_signature(batch));
}

GateDecision select(const std::vector<const SignatureIndex*>& indexes, const Tensor& batch) {
    if (indexes.empty()) throw std::invalid_argument("select: no indexes");
    GateDecision decision;
    decision.batch_size = batch.shape.empty() ? 0 : batch.shape[0];
    const std::vector<double> mean = batch_mean_signature(batch);
    double best = std::numeric_limits<double>::infinity();
    for (const SignatureIndex* index : indexes) {
        const double d = d_ss(*index, mean);
        decision.distances.emplace_back(index->augmentation_id, d);
        best = std::min(best, d);
    }
    for (const auto& [id, d] : decision.distances)
        if (d == best) decision.selected.push_back(id);
    return decision;
}

std::string decision_json(const GateDecision& d) {
    nlohmann::json out;
    out["selected"] = d.selected;
    nlohmann::json dist = nlohmann::json::object();
    for (const auto& [id, v] : d.distances) dist[id] = v;
    out["distances"] = dist;
    out["batch_size"] = d.batch_size;
    return out.dump(2);
}

}  // namespace cards::gate
