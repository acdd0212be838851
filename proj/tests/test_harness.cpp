#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "cards/augment.hpp"
#include "cards/config.hpp"
#include "cards/corrupt.hpp"
#include "cards/report.hpp"
#include "cards/rng.hpp"
#include "cards/synth.hpp"
#include "doctest.h"

using namespace cards;
using namespace cards::harness;

namespace {

std::vector<char> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
}

struct TempFiles {
    std::vector<std::string> paths;
    std::string add(std::string p) {
        paths.push_back(p);
        return p;
    }
    ~TempFiles() {
        for (const auto& p : paths) std::remove(p.c_str());
    }
};

/// Solves (A + lambda I) x = b for symmetric positive definite A via
/// Cholesky; used by the closed-form ridge probe below.
std::vector<double> ridge_solve(std::vector<double> a, std::vector<double> b, std::size_t n,
                                double lambda) {
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += lambda;
    // In-place lower Cholesky.
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        REQUIRE(d > 0.0);
        a[j * n + j] = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / a[j * n + j];
        }
    }
    // L y = b, then L^T x = y.
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (std::size_t ii = n; ii > 0; --ii) {
        const std::size_t i = ii - 1;
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
        b[i] = s / a[i * n + i];
    }
    return b;
}

double image_mse(const float* a, const float* b, std::int64_t n) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = double(a[i]) - double(b[i]);
        acc += d * d;
    }
    return acc / double(n);
}

}  // namespace

TEST_CASE("synthetic data is deterministic, balanced, and validated") {
    const Dataset a = make_synthetic(5, 4, 48, 12, 12);
    const Dataset b = make_synthetic(5, 4, 48, 12, 12);
    CHECK(bit_equal(a.images, b.images));
    CHECK(a.labels == b.labels);
    CHECK_FALSE(bit_equal(a.images, make_synthetic(6, 4, 48, 12, 12).images));

    std::vector<int> hist(4, 0);
    for (auto l : a.labels) hist[l] += 1;
    CHECK(hist == std::vector<int>{12, 12, 12, 12});
    for (float v : a.images.data) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }

    CHECK_THROWS_AS(make_synthetic(1, 4, 50, 12, 12), std::invalid_argument);  // 50 % 4 != 0
    CHECK_THROWS_AS(make_synthetic(1, 1, 48, 12, 12), std::invalid_argument);
    CHECK_THROWS_AS(make_synthetic(1, 4, 48, 4, 12), std::invalid_argument);
}

TEST_CASE("a closed-form linear probe separates the 2-class variant") {
    const Dataset data = make_synthetic(11, 2, 240, 16, 16);
    const Split split = split_dataset(data, 80, 2, 11);
    const std::size_t d = 256, n = d + 1;  // pixels + bias

    std::vector<double> gram(n * n, 0.0), rhs(n, 0.0);
    for (std::int64_t i = 0; i < split.train.count(); ++i) {
        const float* px = split.train.image_ptr(i);
        std::vector<double> x(n, 1.0);
        for (std::size_t k = 0; k < d; ++k) x[k] = double(px[k]);
        const double y = split.train.labels[std::size_t(i)] ? 1.0 : -1.0;
        for (std::size_t r = 0; r < n; ++r) {
            rhs[r] += x[r] * y;
            for (std::size_t c = 0; c < n; ++c) gram[r * n + c] += x[r] * x[c];
        }
    }
    const std::vector<double> w = ridge_solve(gram, rhs, n, 1e-3 * double(split.train.count()));

    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < split.test.count(); ++i) {
        const float* px = split.test.image_ptr(i);
        double score = w[d];
        for (std::size_t k = 0; k < d; ++k) score += w[k] * double(px[k]);
        correct += (score > 0.0) == (split.test.labels[std::size_t(i)] == 1);
    }
    CHECK(double(correct) / double(split.test.count()) > 0.8);
}

TEST_CASE("split_dataset is balanced, disjoint, and seeded") {
    const Dataset data = make_synthetic(7, 3, 60, 12, 12);
    const Split split = split_dataset(data, 15, 3, 7);
    CHECK(split.test.count() == 15);
    CHECK(split.train.count() == 45);
    std::vector<int> hist(3, 0);
    for (auto l : split.test.labels) hist[l] += 1;
    CHECK(hist == std::vector<int>{5, 5, 5});

    // No image appears on both sides (first-pixel fingerprints all differ
    // because every image draws its own phase/anchors).
    for (std::int64_t i = 0; i < split.test.count(); ++i)
        for (std::int64_t j = 0; j < split.train.count(); ++j)
            CHECK(image_mse(split.test.image_ptr(i), split.train.image_ptr(j), 144) > 0.0);

    const Split again = split_dataset(data, 15, 3, 7);
    CHECK(bit_equal(again.test.images, split.test.images));
    const Split other = split_dataset(data, 15, 3, 8);
    CHECK_FALSE(bit_equal(other.test.images, split.test.images));

    CHECK_THROWS_AS(split_dataset(data, 16, 3, 7), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(data, 60, 3, 7), std::invalid_argument);
}

TEST_CASE("dataset files round-trip byte-identically") {
    TempFiles tmp;
    const Dataset data = make_synthetic(9, 2, 20, 8, 8);
    const auto add = [&](const std::string& prefix) {
        tmp.add(prefix + ".images.f32");
        tmp.add(prefix + ".labels.u8");
        tmp.add(prefix + ".manifest.json");
        return prefix;
    };
    const DatasetManifest m = write_dataset(data, 2, 9, add("test_harness_a"));
    CHECK(m.count == 20);
    write_dataset(data, 2, 9, add("test_harness_b"));
    CHECK(file_bytes("test_harness_a.images.f32") == file_bytes("test_harness_b.images.f32"));
    CHECK(file_bytes("test_harness_a.labels.u8") == file_bytes("test_harness_b.labels.u8"));

    const DatasetManifest back = load_manifest("test_harness_a.manifest.json");
    CHECK(back.images_path == m.images_path);
    CHECK(back.d1 == 8);
    const Dataset loaded = load_dataset(back);
    CHECK(bit_equal(loaded.images, data.images));
    CHECK(loaded.labels == data.labels);

    // Violating the size invariant is caught.
    std::ofstream trunc("test_harness_a.images.f32", std::ios::binary | std::ios::trunc);
    trunc << "short";
    trunc.close();
    CHECK_THROWS_AS(load_dataset(back), std::runtime_error);
}

TEST_CASE("clean and zero-probability augmentations are the identity") {
    const Dataset data = make_synthetic(13, 2, 8, 12, 12);
    Tensor work = data.images;
    Rng rng(1);
    AugmentationSpec clean;
    augment(work.data.data(), 1, 12, 12, clean, 0.f, 1.f, rng);
    CHECK(bit_equal(work, data.images));

    AugmentationSpec gauss;
    gauss.kind = AugmentKind::gaussian;
    gauss.p = 0.0;
    augment(work.data.data(), 1, 12, 12, gauss, 0.f, 1.f, rng);
    CHECK(bit_equal(work, data.images));
}

TEST_CASE("gaussian augmentation perturbs at the declared scale") {
    // One flat 0.5 image with 10^5 pixels: clamping at [0, 1] is a 5-sigma
    // event, so the empirical delta stddev estimates sigma cleanly.
    const std::int64_t d1 = 250, d2 = 400;
    std::vector<float> image(std::size_t(d1 * d2), 0.5f);
    AugmentationSpec spec;
    spec.kind = AugmentKind::gaussian;
    spec.p = 1.0;
    Rng rng = Rng(17).derive("augment").derive(0);
    augment(image.data(), 1, d1, d2, spec, 0.f, 1.f, rng);

    double sum = 0.0, sq = 0.0;
    for (float v : image) {
        const double delta = double(v) - 0.5;
        sum += delta;
        sq += delta * delta;
    }
    const double n = double(d1 * d2);
    const double stddev = std::sqrt(sq / n - (sum / n) * (sum / n));
    CHECK(stddev == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("gaussian augmentation applies with probability p") {
    const Dataset data = make_synthetic(19, 2, 200, 8, 8);
    AugmentationSpec spec;
    spec.kind = AugmentKind::gaussian;
    spec.p = 0.5;
    const Rng root = Rng(23).derive("augment");
    int changed = 0;
    for (std::int64_t i = 0; i < 200; ++i) {
        std::vector<float> image(data.image_ptr(i), data.image_ptr(i) + 64);
        Rng rng = root.derive(std::uint64_t(i));
        augment(image.data(), 1, 8, 8, spec, 0.f, 1.f, rng);
        changed += !std::equal(image.begin(), image.end(), data.image_ptr(i));
    }
    CHECK(changed > 70);
    CHECK(changed < 130);
}

TEST_CASE("mix augmentation is seeded, bounded, and validated") {
    const Dataset data = make_synthetic(29, 2, 4, 12, 12);
    AugmentationSpec spec;
    spec.kind = AugmentKind::mix;

    std::vector<float> a(data.image_ptr(0), data.image_ptr(0) + 144);
    std::vector<float> b = a;
    Rng r1 = Rng(31).derive(7);
    Rng r2 = Rng(31).derive(7);
    augment(a.data(), 1, 12, 12, spec, 0.f, 1.f, r1);
    augment(b.data(), 1, 12, 12, spec, 0.f, 1.f, r2);
    CHECK(a == b);
    CHECK_FALSE(std::equal(a.begin(), a.end(), data.image_ptr(0)));
    for (float v : a) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }

    AugmentationSpec bad = spec;
    bad.max_depth = 0;
    Rng r3(1);
    CHECK_THROWS_AS(augment(a.data(), 1, 12, 12, bad, 0.f, 1.f, r3), std::invalid_argument);
    bad = AugmentationSpec{};
    bad.kind = AugmentKind::gaussian;
    bad.sigma = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad.sigma = 0.1;
    bad.p = 1.5;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("augment_pool derives one stream per image") {
    const Dataset data = make_synthetic(37, 2, 12, 8, 8);
    AugmentationSpec spec;
    spec.kind = AugmentKind::mix;
    const Tensor p1 = augment_pool(data, spec, 41);
    const Tensor p2 = augment_pool(data, spec, 41);
    CHECK(bit_equal(p1, p2));
    CHECK(p1.shape == data.images.shape);
    CHECK_FALSE(bit_equal(p1, augment_pool(data, spec, 42)));
}

TEST_CASE("augmentation and corruption names round-trip") {
    for (AugmentKind k : {AugmentKind::clean, AugmentKind::gaussian, AugmentKind::mix})
        CHECK(augment_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(augment_from_string("sharpen"), std::invalid_argument);
    for (CorruptionKind k : corruption_suite())
        CHECK(corruption_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(corruption_from_string("fog"), std::invalid_argument);
    CHECK(corruption_suite().size() == 5);
}

TEST_CASE("degenerate corruption severities are the identity") {
    const Dataset data = make_synthetic(43, 2, 4, 12, 12);
    std::vector<float> image(data.image_ptr(1), data.image_ptr(1) + 144);
    Rng rng(1);
    corrupt(image.data(), 1, 12, 12, {CorruptionKind::pixelate, 1}, 0.f, 1.f, rng);
    CHECK(std::equal(image.begin(), image.end(), data.image_ptr(1)));
    corrupt(image.data(), 1, 12, 12, {CorruptionKind::box_blur, 1}, 0.f, 1.f, rng);
    CHECK(std::equal(image.begin(), image.end(), data.image_ptr(1)));

    CHECK_THROWS_AS(validate(CorruptionSpec{CorruptionKind::box_blur, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(validate(CorruptionSpec{CorruptionKind::box_blur, 6}),
                    std::invalid_argument);
}

TEST_CASE("corruption distortion is severity-monotone") {
    const Dataset data = make_synthetic(47, 2, 100, 16, 16);
    for (CorruptionKind kind : corruption_suite()) {
        for (std::int64_t i = 0; i < data.count(); ++i) {
            double prev = -1.0;
            for (int severity = 1; severity <= 5; ++severity) {
                std::vector<float> image(data.image_ptr(i), data.image_ptr(i) + 256);
                Rng rng = Rng(53).derive("corrupt").derive(std::uint64_t(i));
                corrupt(image.data(), 1, 16, 16, {kind, severity}, 0.f, 1.f, rng);
                const double mse = image_mse(image.data(), data.image_ptr(i), 256);
                CHECK(mse >= prev - 1e-12);
                prev = mse;
            }
        }
    }
}

TEST_CASE("gauss-noise severity 5 beats severity 1 on every image") {
    const Dataset data = make_synthetic(59, 2, 100, 16, 16);
    for (std::int64_t i = 0; i < 100; ++i) {
        std::vector<float> s1(data.image_ptr(i), data.image_ptr(i) + 256);
        std::vector<float> s5 = s1;
        Rng r1 = Rng(61).derive("corrupt").derive(std::uint64_t(i));
        Rng r5 = Rng(61).derive("corrupt").derive(std::uint64_t(i));
        corrupt(s1.data(), 1, 16, 16, {CorruptionKind::gauss_noise, 1}, 0.f, 1.f, r1);
        corrupt(s5.data(), 1, 16, 16, {CorruptionKind::gauss_noise, 5}, 0.f, 1.f, r5);
        CHECK(image_mse(s5.data(), data.image_ptr(i), 256) >
              image_mse(s1.data(), data.image_ptr(i), 256));
    }
}

TEST_CASE("shot noise scales with intensity") {
    std::vector<float> bright(256, 0.9f), dark(256, 0.1f);
    Rng rb = Rng(67).derive(1);
    Rng rd = Rng(67).derive(1);  // same z draws
    corrupt(bright.data(), 1, 16, 16, {CorruptionKind::shot_noise, 3}, 0.f, 1.f, rb);
    corrupt(dark.data(), 1, 16, 16, {CorruptionKind::shot_noise, 3}, 0.f, 1.f, rd);
    std::vector<float> b0(256, 0.9f), d0(256, 0.1f);
    CHECK(image_mse(bright.data(), b0.data(), 256) > image_mse(dark.data(), d0.data(), 256));
}

TEST_CASE("deterministic corruptions consume no randomness") {
    const Dataset data = make_synthetic(71, 2, 2, 12, 12);
    for (CorruptionKind kind :
         {CorruptionKind::box_blur, CorruptionKind::contrast, CorruptionKind::pixelate}) {
        std::vector<float> a(data.image_ptr(0), data.image_ptr(0) + 144);
        std::vector<float> b = a;
        Rng r1(1), r2(999);
        corrupt(a.data(), 1, 12, 12, {kind, 4}, 0.f, 1.f, r1);
        corrupt(b.data(), 1, 12, 12, {kind, 4}, 0.f, 1.f, r2);
        CHECK(a == b);
    }
}

TEST_CASE("corrupt_dataset preserves labels and is seeded") {
    const Dataset data = make_synthetic(73, 3, 30, 12, 12);
    const Dataset c1 = corrupt_dataset(data, {CorruptionKind::gauss_noise, 3}, 79);
    const Dataset c2 = corrupt_dataset(data, {CorruptionKind::gauss_noise, 3}, 79);
    CHECK(bit_equal(c1.images, c2.images));
    CHECK(c1.labels == data.labels);
    CHECK(c1.images.shape == data.images.shape);
    CHECK_FALSE(bit_equal(c1.images, data.images));
    CHECK_FALSE(bit_equal(c1.images, corrupt_dataset(data, {CorruptionKind::gauss_noise, 3}, 80).images));
}

TEST_CASE("config parses sections, comments, and typed values") {
    const Config cfg = parse_config(
        "# a comment\n"
        "top = hello\n"
        "\n"
        "[grid]\n"
        "seeds = 1, 2, 3\n"
        "lr = 0.05   # trailing comment\n"
        "deep = first\n"
        "deep = second\n"
        "[grid.deck]\n"
        "enable = true\n"
        "size = 2\n");
    CHECK(cfg.get("top", "") == "hello");
    CHECK(cfg.get_int_list("grid.seeds") == std::vector<std::int64_t>{1, 2, 3});
    CHECK(cfg.get_double("grid.lr", 0.0) == 0.05);
    CHECK(cfg.get("grid.deep", "") == "second");  // later assignment wins
    CHECK(cfg.get_bool("grid.deck.enable", false));
    CHECK(cfg.get_int("grid.deck.size", 0) == 2);
    CHECK(cfg.get_int("grid.deck.missing", 7) == 7);
    CHECK(cfg.get_list("absent").empty());
    CHECK(cfg.require("top") == "hello");

    CHECK_THROWS_AS(cfg.require("nope"), std::runtime_error);
    CHECK_THROWS_AS(cfg.get_int("top", 0), std::runtime_error);
    CHECK_THROWS_AS(parse_config("[grid\nx = 1\n"), std::runtime_error);
    CHECK_THROWS_AS(parse_config("just some words\n"), std::runtime_error);
    // The error names the offending line.
    try {
        parse_config("a = 1\nbroken line\n");
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("csv tables round-trip with escaping") {
    CsvTable t;
    t.columns = {"name", "value", "note"};
    t.add_row({"plain", "1", "ok"});
    t.add_row({"comma, inside", "2", "quote \" inside"});
    t.add_row({"newline\ninside", "3", ""});
    const std::string text = csv_text(t);
    const CsvTable back = parse_csv(text);
    CHECK(back.columns == t.columns);
    REQUIRE(back.rows.size() == 3);
    CHECK(back.rows[1][0] == "comma, inside");
    CHECK(back.rows[1][2] == "quote \" inside");
    CHECK(back.rows[2][0] == "newline\ninside");
    CHECK(csv_text(back) == text);

    TempFiles tmp;
    save_csv(t, tmp.add("test_harness_table.csv"));
    const CsvTable loaded = load_csv("test_harness_table.csv");
    CHECK(csv_text(loaded) == text);

    CHECK_THROWS_AS(t.add_row({"too", "short"}), std::invalid_argument);
    CHECK_THROWS_AS(parse_csv(""), std::runtime_error);
    CHECK(format_value(0.125) == "0.125");
    CHECK(format_value(std::int64_t(4640)) == "4640");
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
}
