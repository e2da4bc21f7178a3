#include "embtune/tensor.hpp"

#include <cmath>

#include "embtune/kernels.hpp"

namespace embtune {

bool Tensor::all_finite() const {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions differ (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    }
    const auto& k = kernels::active();
    Tensor c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row_ptr(i);
        for (std::size_t t = 0; t < a.cols(); ++t) {
            const double aval = a.at(i, t);
            if (aval != 0.0) k.axpy(aval, b.row_ptr(t), ci, b.cols());
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    Tensor t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    }
    return t;
}

std::pair<Tensor, Tensor> dense_init(std::size_t fan_in, std::size_t fan_out,
                                     std::uint64_t seed) {
    if (fan_in < 1 || fan_out < 1) {
        throw std::invalid_argument("dense_init: fan_in and fan_out must be >= 1");
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor w(fan_in, fan_out);
    for (double& x : w.v) x = dist(rng);
    Tensor b(1, fan_out, 0.0);
    return {std::move(w), std::move(b)};
}

}  // namespace embtune
