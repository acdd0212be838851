#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace cards {

/// Thrown when an operation receives tensors whose shapes cannot be combined.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Dense row-major float32 tensor.  Reductions over it are accumulated in
/// double by the code that consumes it; storage stays 32-bit.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> s, float fill = 0.f) : shape(std::move(s)) {
        data.assign(std::size_t(numel()), fill);
    }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    bool empty() const { return data.empty(); }
    std::int64_t dim(std::size_t i) const { return shape.at(i); }

    float& at(std::int64_t i) { return data[std::size_t(i)]; }
    float at(std::int64_t i) const { return data[std::size_t(i)]; }

    float& at(std::int64_t i, std::int64_t j) { return data[std::size_t(i * shape[1] + j)]; }
    float at(std::int64_t i, std::int64_t j) const { return data[std::size_t(i * shape[1] + j)]; }

    float& at(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
        return data[std::size_t(((a * shape[1] + b) * shape[2] + c) * shape[3] + d)];
    }
    float at(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) const {
        return data[std::size_t(((a * shape[1] + b) * shape[2] + c) * shape[3] + d)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }
};

inline void require_shape(const Tensor& t, const std::vector<std::int64_t>& want,
                          const char* where) {
    if (t.shape != want) {
        Tensor w;
        w.shape = want;
        throw ShapeError(std::string(where) + ": expected shape " + w.shape_str() + ", got " +
                         t.shape_str());
    }
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) return false;
    if (a.data.empty()) return b.data.empty();
    // Compare representations, not values: distinguishes -0.0f from 0.0f.
    return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

}  // namespace cards
