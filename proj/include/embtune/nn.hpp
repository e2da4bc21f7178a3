#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "embtune/graph.hpp"

namespace embtune {

enum class Activation { Identity, Tanh, Sigmoid, Relu };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected stack. widths includes input and output extents;
// layer l maps widths[l] -> widths[l+1] via X W + b.
struct Mlp {
    std::vector<std::size_t> widths;
    Activation hidden = Activation::Tanh;
    Activation output = Activation::Identity;
    std::vector<int> w_ids;
    std::vector<int> b_ids;

    static Mlp create(ParamStore& store, const std::string& prefix,
                      std::vector<std::size_t> widths, Activation hidden,
                      Activation output, std::uint64_t seed);
    // Rebind to parameters already present in the store (after reload).
    static Mlp bind(const ParamStore& store, const std::string& prefix,
                    std::vector<std::size_t> widths, Activation hidden,
                    Activation output);

    std::size_t in_dim() const { return widths.front(); }
    std::size_t out_dim() const { return widths.back(); }
    std::size_t layer_count() const { return widths.size() - 1; }

    // Differentiable forward; if acts is non-null it receives the
    // post-activation value of every layer (for Jacobian assembly).
    Value forward(Tape& tape, Value x, std::vector<Value>* acts = nullptr) const;

    // Inference path without a tape.
    Tensor forward_plain(const ParamStore& store, const Tensor& x) const;

    std::vector<int> param_ids() const;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction over a ParamStore. Moment slots are created
// for every parameter; step() may update all parameters or a subset.
class Adam {
public:
    Adam(const ParamStore& store, AdamConfig cfg = {});

    void step(ParamStore& store, const std::vector<Tensor>& grads);
    void step(ParamStore& store, const std::vector<Tensor>& grads,
              const std::vector<int>& ids);

    long step_count() const { return step_count_; }

private:
    AdamConfig cfg_;
    long step_count_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

// Collect gradients for every store parameter from a finished tape.
std::vector<Tensor> all_grads(const Tape& tape, const ParamStore& store);

// Central finite-difference check of the analytic gradient of the loss
// produced by `build` w.r.t. the given parameters. Returns the max over
// components of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(ParamStore& store, const std::vector<int>& ids,
                  const std::function<Value(Tape&)>& build, double h = 1e-5);

// Mean over rows of the squared L2 distance between rows of pred and
// target (the reconstruction/regression losses in this project).
Value mse_rows(Tape& tape, Value pred, Value target);

// Parameter serialization: {schema_version, layers:[{name,shape,values}]}.
nlohmann::ordered_json params_to_json(const ParamStore& store);
ParamStore params_from_json(const nlohmann::ordered_json& j);

}  // namespace embtune
