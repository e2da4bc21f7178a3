#include "embtune/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace embtune {

void SynthSpec::validate() const {
    if (n_templates < 1 || workloads_per_template < 1 || k_true < 1 || s < 1 || p < 1 ||
        configs_per_workload < 1) {
        throw std::invalid_argument("SynthSpec: all counts must be >= 1");
    }
    if (shared_config_count > configs_per_workload) {
        throw std::invalid_argument("SynthSpec: shared_config_count > configs_per_workload");
    }
    if (noise_std < 0.0) throw std::invalid_argument("SynthSpec: noise_std < 0");
}

int GroundTruth::workload_index(const std::string& id) const {
    for (std::size_t i = 0; i < workload_ids.size(); ++i) {
        if (workload_ids[i] == id) return static_cast<int>(i);
    }
    return -1;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double dot_vec(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double surface_value(const LatencySurface& sf, const std::vector<double>& w,
                     const std::vector<double>& v) {
    const double base = 20.0 * (1.0 + sigmoid(dot_vec(sf.base_dir, w)));
    double factor = 1.0;
    for (std::size_t q = 0; q < v.size(); ++q) {
        const double coef = 0.5 + 0.5 * sigmoid(dot_vec(sf.coef_dirs[q], w));
        double g;
        if (q < sf.monotone_knobs) {
            g = 0.8 * (1.0 - v[q]);
        } else {
            const double center =
                0.25 + 0.5 * sigmoid(dot_vec(sf.center_dirs[q - sf.monotone_knobs], w));
            const double d = v[q] - center;
            g = 1.2 * d * d;
        }
        factor += coef * g;
    }
    return base * factor;
}

std::string pad2(std::size_t i) {
    return (i < 10 ? "0" : "") + std::to_string(i);
}

}  // namespace

std::pair<TraceSet, GroundTruth> generate(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    GroundTruth gt;
    gt.knob_levels = {0.0, 0.25, 0.5, 0.75, 1.0};
    const std::size_t monotone = spec.s >= 3 ? spec.s - 2 : spec.s;
    gt.surface.monotone_knobs = monotone;

    // Workload latents: template centroid plus a small per-workload offset.
    std::vector<std::vector<double>> centroids(spec.n_templates,
                                               std::vector<double>(spec.k_true));
    for (auto& c : centroids) {
        for (double& x : c) x = gauss(rng);
    }
    for (std::size_t t = 0; t < spec.n_templates; ++t) {
        for (std::size_t w = 0; w < spec.workloads_per_template; ++w) {
            std::vector<double> latent(spec.k_true);
            for (std::size_t d = 0; d < spec.k_true; ++d) {
                latent[d] = centroids[t][d] + 0.25 * gauss(rng);
            }
            gt.workload_ids.push_back("t" + pad2(t) + "_w" + pad2(w));
            gt.latents.push_back(std::move(latent));
        }
    }

    // Fixed two-layer tanh metric map over (latent || config). The config
    // block gets a larger weight scale so that metrics visibly entangle
    // workload and configuration.
    const std::size_t in_dim = spec.k_true + spec.s;
    const std::size_t hid = 32;
    gt.mix_w1 = Tensor(in_dim, hid);
    const double w_scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (std::size_t r = 0; r < in_dim; ++r) {
        const double rs = r < spec.k_true ? w_scale : 2.0 * w_scale;
        for (std::size_t c = 0; c < hid; ++c) gt.mix_w1.at(r, c) = rs * gauss(rng);
    }
    gt.mix_b1 = Tensor(1, hid);
    for (double& x : gt.mix_b1.v) x = 0.1 * gauss(rng);
    gt.mix_w2 = Tensor(hid, spec.p);
    const double w2_scale = 1.0 / std::sqrt(static_cast<double>(hid));
    for (double& x : gt.mix_w2.v) x = w2_scale * gauss(rng);
    gt.mix_b2 = Tensor(1, spec.p);

    gt.surface.base_dir.resize(spec.k_true);
    for (double& x : gt.surface.base_dir) x = gauss(rng);
    gt.surface.coef_dirs.assign(spec.s, std::vector<double>(spec.k_true));
    for (auto& d : gt.surface.coef_dirs) {
        for (double& x : d) x = gauss(rng);
    }
    gt.surface.center_dirs.assign(spec.s - monotone, std::vector<double>(spec.k_true));
    for (auto& d : gt.surface.center_dirs) {
        for (double& x : d) x = gauss(rng);
    }

    std::uniform_int_distribution<std::size_t> level(0, gt.knob_levels.size() - 1);
    auto draw_config = [&]() {
        std::vector<double> v(spec.s);
        for (double& x : v) x = gt.knob_levels[level(rng)];
        return v;
    };
    auto config_key = [](const std::vector<double>& v) {
        std::string k;
        for (double x : v) k += format_double(x) + "|";
        return k;
    };

    // Shared pool: drawn once, bitwise identical across workloads.
    std::vector<std::vector<double>> shared;
    std::unordered_set<std::string> shared_keys;
    while (shared.size() < spec.shared_config_count) {
        auto v = draw_config();
        if (shared_keys.insert(config_key(v)).second) shared.push_back(std::move(v));
    }

    TraceSet traces;
    for (std::size_t q = 0; q < spec.s; ++q) {
        traces.knob_names.push_back(q < monotone ? "k_res" + std::to_string(q)
                                                 : "k_opt" + std::to_string(q - monotone));
    }
    for (std::size_t m = 0; m < spec.p; ++m) traces.metric_names.push_back("m_" + pad2(m));

    const Tensor w1t = gt.mix_w1;  // row-major [in_dim, hid]
    for (std::size_t j = 0; j < gt.workload_ids.size(); ++j) {
        std::vector<std::vector<double>> configs = shared;
        std::unordered_set<std::string> keys = shared_keys;
        while (configs.size() < spec.configs_per_workload) {
            auto v = draw_config();
            if (keys.insert(config_key(v)).second) configs.push_back(std::move(v));
        }
        for (const auto& cfg : configs) {
            Observation o;
            o.workload_id = gt.workload_ids[j];
            o.template_id = o.workload_id.substr(0, o.workload_id.find('_'));
            o.config = cfg;

            Tensor in(1, in_dim);
            for (std::size_t d = 0; d < spec.k_true; ++d) in.at(0, d) = gt.latents[j][d];
            for (std::size_t q = 0; q < spec.s; ++q) in.at(0, spec.k_true + q) = cfg[q];
            Tensor h = matmul(in, w1t);
            for (std::size_t c = 0; c < hid; ++c) {
                h.at(0, c) = std::tanh(h.at(0, c) + gt.mix_b1.at(0, c));
            }
            Tensor x = matmul(h, gt.mix_w2);
            o.metrics.resize(spec.p);
            for (std::size_t m = 0; m < spec.p; ++m) {
                o.metrics[m] = x.at(0, m) + gt.mix_b2.at(0, m) + spec.noise_std * gauss(rng);
            }

            const double y = surface_value(gt.surface, gt.latents[j], cfg);
            const double noisy = y * (1.0 + spec.noise_std * gauss(rng));
            o.latency = std::max(noisy, 1e-6);
            traces.observations.push_back(std::move(o));
        }
    }
    traces.validate();
    return {std::move(traces), std::move(gt)};
}

double true_latency(const GroundTruth& gt, const std::string& workload_id,
                    const std::vector<double>& config) {
    const int idx = gt.workload_index(workload_id);
    if (idx < 0) throw std::invalid_argument("true_latency: unknown workload " + workload_id);
    if (config.size() != gt.surface.coef_dirs.size()) {
        throw std::invalid_argument("true_latency: config dimension mismatch");
    }
    return surface_value(gt.surface, gt.latents[static_cast<std::size_t>(idx)], config);
}

namespace {

nlohmann::ordered_json tensor_to_json(const Tensor& t) {
    return {{"shape", t.shape}, {"values", t.v}};
}

Tensor tensor_from_json(const nlohmann::ordered_json& j) {
    Tensor t;
    t.shape = j.at("shape").get<std::vector<std::size_t>>();
    t.v = j.at("values").get<std::vector<double>>();
    return t;
}

}  // namespace

nlohmann::ordered_json ground_truth_to_json(const GroundTruth& gt) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["workload_ids"] = gt.workload_ids;
    j["latents"] = gt.latents;
    j["mix_w1"] = tensor_to_json(gt.mix_w1);
    j["mix_b1"] = tensor_to_json(gt.mix_b1);
    j["mix_w2"] = tensor_to_json(gt.mix_w2);
    j["mix_b2"] = tensor_to_json(gt.mix_b2);
    j["surface"] = {{"monotone_knobs", gt.surface.monotone_knobs},
                    {"base_dir", gt.surface.base_dir},
                    {"coef_dirs", gt.surface.coef_dirs},
                    {"center_dirs", gt.surface.center_dirs}};
    j["knob_levels"] = gt.knob_levels;
    return j;
}

GroundTruth ground_truth_from_json(const nlohmann::ordered_json& j) {
    GroundTruth gt;
    gt.workload_ids = j.at("workload_ids").get<std::vector<std::string>>();
    gt.latents = j.at("latents").get<std::vector<std::vector<double>>>();
    gt.mix_w1 = tensor_from_json(j.at("mix_w1"));
    gt.mix_b1 = tensor_from_json(j.at("mix_b1"));
    gt.mix_w2 = tensor_from_json(j.at("mix_w2"));
    gt.mix_b2 = tensor_from_json(j.at("mix_b2"));
    gt.surface.monotone_knobs = j.at("surface").at("monotone_knobs").get<std::size_t>();
    gt.surface.base_dir = j.at("surface").at("base_dir").get<std::vector<double>>();
    gt.surface.coef_dirs =
        j.at("surface").at("coef_dirs").get<std::vector<std::vector<double>>>();
    gt.surface.center_dirs =
        j.at("surface").at("center_dirs").get<std::vector<std::vector<double>>>();
    gt.knob_levels = j.at("knob_levels").get<std::vector<double>>();
    return gt;
}

nlohmann::ordered_json synth_spec_to_json(const SynthSpec& spec) {
    nlohmann::ordered_json j;
    j["n_templates"] = spec.n_templates;
    j["workloads_per_template"] = spec.workloads_per_template;
    j["k_true"] = spec.k_true;
    j["s"] = spec.s;
    j["p"] = spec.p;
    j["configs_per_workload"] = spec.configs_per_workload;
    j["shared_config_count"] = spec.shared_config_count;
    j["noise_std"] = spec.noise_std;
    j["seed"] = spec.seed;
    return j;
}

SynthSpec synth_spec_from_json(const nlohmann::ordered_json& j) {
    SynthSpec spec;
    if (j.contains("n_templates")) spec.n_templates = j.at("n_templates").get<std::size_t>();
    if (j.contains("workloads_per_template")) {
        spec.workloads_per_template = j.at("workloads_per_template").get<std::size_t>();
    }
    if (j.contains("k_true")) spec.k_true = j.at("k_true").get<std::size_t>();
    if (j.contains("s")) spec.s = j.at("s").get<std::size_t>();
    if (j.contains("p")) spec.p = j.at("p").get<std::size_t>();
    if (j.contains("configs_per_workload")) {
        spec.configs_per_workload = j.at("configs_per_workload").get<std::size_t>();
    }
    if (j.contains("shared_config_count")) {
        spec.shared_config_count = j.at("shared_config_count").get<std::size_t>();
    }
    if (j.contains("noise_std")) spec.noise_std = j.at("noise_std").get<double>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
}

}  // namespace embtune
