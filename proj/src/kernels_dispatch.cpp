#include "embtune/kernels.hpp"

namespace embtune::kernels {

#if defined(EMBTUNE_HAVE_AVX2_TU)
const Ops* avx2_ops();
#endif
#if defined(EMBTUNE_HAVE_NEON_TU)
const Ops* neon_ops();
#endif

namespace {

const Ops* pick_best() {
#if defined(EMBTUNE_HAVE_AVX2_TU)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        return avx2_ops();
    }
#endif
#if defined(EMBTUNE_HAVE_NEON_TU)
    return neon_ops();
#endif
    return &scalar();
}

}  // namespace

const Ops& active() {
    static const Ops* best = pick_best();
    return *best;
}

std::vector<const Ops*> available() {
    std::vector<const Ops*> out{&scalar()};
#if defined(EMBTUNE_HAVE_AVX2_TU)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        out.push_back(avx2_ops());
    }
#endif
#if defined(EMBTUNE_HAVE_NEON_TU)
    out.push_back(neon_ops());
#endif
    return out;
}

}  // namespace embtune::kernels
