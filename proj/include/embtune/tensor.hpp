#pragma once

#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace embtune {

// Dense row-major tensor. Everything in this project is rank <= 2;
// scalars are [1,1] and row vectors [1,n].
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : shape{rows, cols}, v(rows * cols, fill) {}

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols, 0.0); }
    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v[0] = x;
        return t;
    }
    static Tensor row(const std::vector<double>& vals) {
        Tensor t(1, vals.size());
        t.v = vals;
        return t;
    }

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 0 : shape[1]; }
    std::size_t size() const { return v.size(); }

    double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }
    double* row_ptr(std::size_t r) { return v.data() + r * cols(); }
    const double* row_ptr(std::size_t r) const { return v.data() + r * cols(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Glorot-uniform weight plus zero bias for a dense layer, deterministic
// in the seed. Weight shape is [fan_in, fan_out] (inputs are row vectors).
std::pair<Tensor, Tensor> dense_init(std::size_t fan_in, std::size_t fan_out,
                                     std::uint64_t seed);

}  // namespace embtune
