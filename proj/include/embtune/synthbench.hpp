#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "embtune/tensor.hpp"
#include "embtune/traces.hpp"

namespace embtune {

// Synthetic trace-set generator. Workload latents are drawn per
// template; metrics are a fixed nonlinear mix of (latent, config); the
// latency surface is strictly positive with both monotone resource
// knobs and non-monotone bowl knobs, so grid tuning is non-trivial.
struct SynthSpec {
    std::size_t n_templates = 8;
    std::size_t workloads_per_template = 5;
    std::size_t k_true = 4;
    std::size_t s = 6;   // knob count
    std::size_t p = 20;  // metric count
    std::size_t configs_per_workload = 30;
    std::size_t shared_config_count = 10;  // I_s
    double noise_std = 0.01;
    std::uint64_t seed = 1;

    void validate() const;
};

struct LatencySurface {
    // y = base(w) * (1 + sum_q coef_q(w) * g_q(v_q)); the first
    // `monotone_knobs` knobs decrease latency as they grow, the rest are
    // quadratic bowls with workload-dependent centers.
    std::size_t monotone_knobs = 4;
    std::vector<double> base_dir;                 // k_true
    std::vector<std::vector<double>> coef_dirs;   // s x k_true
    std::vector<std::vector<double>> center_dirs; // bowl knobs x k_true
};

struct GroundTruth {
    std::vector<std::string> workload_ids;
    std::vector<std::vector<double>> latents;  // per workload, k_true
    Tensor mix_w1, mix_b1, mix_w2, mix_b2;     // metric map
    LatencySurface surface;
    std::vector<double> knob_levels;           // the finite grid per knob

    int workload_index(const std::string& id) const;  // -1 if unknown
};

std::pair<TraceSet, GroundTruth> generate(const SynthSpec& spec);

// Noiseless latency surface value for a known workload and a config in
// the generator's (raw) knob domain.
double true_latency(const GroundTruth& gt, const std::string& workload_id,
                    const std::vector<double>& config);

nlohmann::ordered_json ground_truth_to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::ordered_json& j);

}  // namespace embtune
