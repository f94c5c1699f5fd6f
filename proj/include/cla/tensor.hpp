#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "cla/errors.hpp"

namespace claprobe {

// Dense row-major tensor of doubles. Shape [] with one element is a scalar.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), data(numel_of(shape), 0.0) {}
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != data.size())
            throw ShapeError("tensor: shape/data size mismatch");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    bool empty() const { return data.empty(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // (channel, row, col) accessor for rank-3 tensors.
    double& at3(std::size_t c, std::size_t r, std::size_t col) {
        return data[(c * shape[1] + r) * shape[2] + col];
    }
    double at3(std::size_t c, std::size_t r, std::size_t col) const {
        return data[(c * shape[1] + r) * shape[2] + col];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

    static Tensor vector(std::vector<double> v) {
        std::vector<std::size_t> s{v.size()};
        return Tensor(std::move(s), std::move(v));
    }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    out += "]";
    return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double squared_l2(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

inline double norm2(const std::vector<double>& a) {
    double acc = 0.0;
    for (double v : a) acc += v * v;
    return std::sqrt(acc);
}

} // namespace claprobe
