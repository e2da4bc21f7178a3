#pragma once

#include <cstddef>
#include <vector>

// Flat double-precision kernels used by the tensor/autodiff layer.
// A scalar reference implementation always exists; on x86 an AVX2
// variant (and on aarch64 a NEON variant) is selected at runtime.
// SIMD reductions may reassociate, so dot/sum/sumsq agree with the
// scalar kernels only up to rounding; elementwise kernels are exact.

namespace embtune::kernels {

struct Ops {
    const char* name;
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(const double* a, double c, double* out, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    double (*sumsq)(const double* a, std::size_t n);
};

const Ops& scalar();

// Best variant supported by the running CPU (scalar fallback).
const Ops& active();

// Every variant usable on this machine, scalar first. Used by the
// equivalence tests.
std::vector<const Ops*> available();

}  // namespace embtune::kernels
