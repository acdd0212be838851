#include "cards/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cards/rng.hpp"
#include "json.hpp"

namespace cards::harness {

namespace {

void draw_image(float* px, std::int64_t channels, std::int64_t d1, std::int64_t d2,
                std::int64_t cls, std::int64_t classes, Rng& rng) {
    const double theta = M_PI * double(cls) / double(classes);
    const double freq = 2.0 + double(cls % 3);
    const double phase = rng.uniform(-0.35, 0.35);
    const double amp = rng.uniform(0.30, 0.40);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double scale = double(std::max(d1, d2));

    // Shape overlay: kind cycles with the class, the anchor jitters a little.
    const int shape = int(cls % 3);
    const double ca = 0.5 * double(d1) + rng.uniform(-double(d1) / 8.0, double(d1) / 8.0);
    const double cb = 0.5 * double(d2) + rng.uniform(-double(d2) / 8.0, double(d2) / 8.0);
    const double rad = 0.17 * scale;

    for (std::int64_t a = 0; a < d1; ++a) {
        for (std::int64_t b = 0; b < d2; ++b) {
            const double u = (double(a) * ct + double(b) * st) / scale;
            double v = 0.5 + amp * std::sin(2.0 * M_PI * freq * u + phase);
            const double da = std::abs(double(a) - ca), db = std::abs(double(b) - cb);
            bool inside = false;
            if (shape == 0) inside = da <= rad && db <= rad;
            else if (shape == 1) inside = da * da + db * db <= rad * rad;
            else inside = (da <= 1.0 || db <= 1.0) && da <= rad && db <= rad;
            if (inside) v += 0.25;
            px[a * d2 + b] = float(std::clamp(v, 0.0, 1.0));
        }
    }
    // Channels carry the same pattern.
    for (std::int64_t c = 1; c < channels; ++c)
        std::copy(px, px + d1 * d2, px + c * d1 * d2);
}

void write_raw(const std::string& path, const void* data, std::size_t bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(static_cast<const char*>(data), std::streamsize(bytes));
    if (!out) throw std::runtime_error("short write to " + path);
}

std::vector<char> read_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
}

}  // namespace

Dataset make_synthetic(std::uint64_t seed, std::int64_t classes, std::int64_t count,
                       std::int64_t d1, std::int64_t d2, std::int64_t channels) {
    if (classes < 2) throw std::invalid_argument("make_synthetic: need at least 2 classes");
    if (count < 1 || count % classes != 0)
        throw std::invalid_argument("make_synthetic: count must be a positive multiple of classes");
    if (d1 < 8 || d2 < 8) throw std::invalid_argument("make_synthetic: dims must be at least 8");
    if (channels < 1) throw std::invalid_argument("make_synthetic: channels must be positive");

    Dataset data;
    data.images = Tensor({count, channels, d1, d2});
    data.labels.reserve(std::size_t(count));
    const Rng root = Rng(seed).derive("image");
    for (std::int64_t i = 0; i < count; ++i) {
        const std::int64_t cls = i % classes;
        Rng rng = root.derive(std::uint64_t(i));
        draw_image(data.images.data.data() + i * channels * d1 * d2, channels, d1, d2, cls,
                   classes, rng);
        data.labels.push_back(std::uint8_t(cls));
    }
    return data;
}

Split split_dataset(const Dataset& data, std::int64_t test_count, std::int64_t classes,
                    std::uint64_t seed) {
    const std::int64_t n = data.count();
    if (test_count < 0 || test_count >= n)
        throw std::invalid_argument("split_dataset: test_count out of range");
    if (classes < 1 || test_count % classes != 0)
        throw std::invalid_argument("split_dataset: test_count must be a multiple of classes");

    std::vector<std::vector<std::int64_t>> by_class(static_cast<std::size_t>(classes));
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t cls = data.labels[std::size_t(i)];
        if (cls >= classes) throw std::invalid_argument("split_dataset: label exceeds classes");
        by_class[std::size_t(cls)].push_back(i);
    }
    std::vector<bool> in_test(std::size_t(n), false);
    const std::int64_t per_class = test_count / classes;
    const Rng root = Rng(seed).derive("split");
    for (std::int64_t cls = 0; cls < classes; ++cls) {
        auto& members = by_class[std::size_t(cls)];
        if (std::int64_t(members.size()) < per_class)
            throw std::invalid_argument("split_dataset: class too small for the requested split");
        Rng rng = root.derive(std::uint64_t(cls));
        std::vector<std::int64_t> pick = members;
        rng.shuffle(pick);
        for (std::int64_t k = 0; k < per_class; ++k) in_test[std::size_t(pick[std::size_t(k)])] = true;
    }

    const std::int64_t stride = data.channels() * data.d1() * data.d2();
    auto gather = [&](bool pick_test, std::int64_t m) {
        Dataset out;
        out.images = Tensor({m, data.channels(), data.d1(), data.d2()});
        out.value_min = data.value_min;
        out.value_max = data.value_max;
        std::int64_t at = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            if (in_test[std::size_t(i)] != pick_test) continue;
            std::copy(data.image_ptr(i), data.image_ptr(i) + stride,
                      out.images.data.begin() + at * stride);
            out.labels.push_back(data.labels[std::size_t(i)]);
            ++at;
        }
        return out;
    };
    Split split;
    split.test = gather(true, test_count);
    split.train = gather(false, n - test_count);
    return split;
}

DatasetManifest write_dataset(const Dataset& data, std::int64_t classes, std::uint64_t seed,
                              const std::string& prefix) {
    DatasetManifest m;
    m.images_path = prefix + ".images.f32";
    m.labels_path = prefix + ".labels.u8";
    m.count = data.count();
    m.channels = data.channels();
    m.d1 = data.d1();
    m.d2 = data.d2();
    m.classes = classes;
    m.value_min = data.value_min;
    m.value_max = data.value_max;
    m.seed = seed;

    write_raw(m.images_path, data.images.data.data(), data.images.data.size() * sizeof(float));
    write_raw(m.labels_path, data.labels.data(), data.labels.size());

    nlohmann::json j;
    j["images"] = m.images_path;
    j["labels"] = m.labels_path;
    j["count"] = m.count;
    j["channels"] = m.channels;
    j["d1"] = m.d1;
    j["d2"] = m.d2;
    j["classes"] = m.classes;
    j["value_min"] = m.value_min;
    j["value_max"] = m.value_max;
    j["seed"] = m.seed;
    std::ofstream out(prefix + ".manifest.json");
    if (!out) throw std::runtime_error("cannot write " + prefix + ".manifest.json");
    out << j.dump(2) << "\n";
    return m;
}

DatasetManifest load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open " + manifest_path);
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("dataset manifest: malformed JSON");
    DatasetManifest m;
    m.images_path = j.at("images").get<std::string>();
    m.labels_path = j.at("labels").get<std::string>();
    m.count = j.at("count").get<std::int64_t>();
    m.channels = j.at("channels").get<std::int64_t>();
    m.d1 = j.at("d1").get<std::int64_t>();
    m.d2 = j.at("d2").get<std::int64_t>();
    m.classes = j.at("classes").get<std::int64_t>();
    m.value_min = j.at("value_min").get<float>();
    m.value_max = j.at("value_max").get<float>();
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
}

Dataset load_dataset(const DatasetManifest& m) {
    const std::vector<char> image_bytes = read_raw(m.images_path);
    const std::size_t expect = std::size_t(m.count * m.channels * m.d1 * m.d2) * sizeof(float);
    if (image_bytes.size() != expect)
        throw std::runtime_error("dataset: " + m.images_path + " holds " +
                                 std::to_string(image_bytes.size()) + " bytes, manifest implies " +
                                 std::to_string(expect));
    const std::vector<char> label_bytes = read_raw(m.labels_path);
    if (std::int64_t(label_bytes.size()) != m.count)
        throw std::runtime_error("dataset: " + m.labels_path + " holds " +
                                 std::to_string(label_bytes.size()) + " labels, manifest says " +
                                 std::to_string(m.count));

    Dataset data;
    data.images = Tensor({m.count, m.channels, m.d1, m.d2});
    std::copy(image_bytes.begin(), image_bytes.end(),
              reinterpret_cast<char*>(data.images.data.data()));
    data.labels.assign(label_bytes.begin(), label_bytes.end());
    for (std::uint8_t l : data.labels)
        if (l >= m.classes) throw std::runtime_error("dataset: label exceeds class count");
    data.value_min = m.value_min;
    data.value_max = m.value_max;
    return data;
}

}  // namespace cards::harness
