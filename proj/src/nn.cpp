#include "embtune/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace embtune {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Relu: return "relu";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation: " + name);
}

namespace {

Value apply_activation(Tape& tape, Value x, Activation a) {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Tanh: return tape.tanh_of(x);
        case Activation::Sigmoid: return tape.sigmoid_of(x);
        case Activation::Relu: return tape.relu_of(x);
    }
    return x;
}

void apply_activation_plain(Tensor& t, Activation a) {
    switch (a) {
        case Activation::Identity: return;
        case Activation::Tanh:
            for (double& x : t.v) x = std::tanh(x);
            return;
        case Activation::Sigmoid:
            for (double& x : t.v) x = 1.0 / (1.0 + std::exp(-x));
            return;
        case Activation::Relu:
            for (double& x : t.v) x = x > 0.0 ? x : 0.0;
            return;
    }
}

}  // namespace

Mlp Mlp::create(ParamStore& store, const std::string& prefix,
                std::vector<std::size_t> widths, Activation hidden,
                Activation output, std::uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least one layer");
    Mlp m;
    m.widths = std::move(widths);
    m.hidden = hidden;
    m.output = output;
    for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
        auto [w, b] = dense_init(m.widths[l], m.widths[l + 1], seed + l);
        m.w_ids.push_back(store.add(prefix + ".w" + std::to_string(l), std::move(w)));
        m.b_ids.push_back(store.add(prefix + ".b" + std::to_string(l), std::move(b)));
    }
    return m;
}

Mlp Mlp::bind(const ParamStore& store, const std::string& prefix,
              std::vector<std::size_t> widths, Activation hidden,
              Activation output) {
    Mlp m;
    m.widths = std::move(widths);
    m.hidden = hidden;
    m.output = output;
    for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
        const int w = store.find(prefix + ".w" + std::to_string(l));
        const int b = store.find(prefix + ".b" + std::to_string(l));
        if (w < 0 || b < 0) {
            throw std::runtime_error("Mlp::bind: missing parameter " + prefix +
                                     ".w/b" + std::to_string(l));
        }
        m.w_ids.push_back(w);
        m.b_ids.push_back(b);
    }
    return m;
}

Value Mlp::forward(Tape& tape, Value x, std::vector<Value>* acts) const {
    Value h = x;
    for (std::size_t l = 0; l < layer_count(); ++l) {
        Value pre = tape.add_row(tape.matmul(h, tape.param(w_ids[l])), tape.param(b_ids[l]));
        h = apply_activation(tape, pre, l + 1 == layer_count() ? output : hidden);
        if (acts) acts->push_back(h);
    }
    return h;
}

Tensor Mlp::forward_plain(const ParamStore& store, const Tensor& x) const {
    Tensor h = x;
    for (std::size_t l = 0; l < layer_count(); ++l) {
        Tensor pre = matmul(h, store.value(w_ids[l]));
        const Tensor& b = store.value(b_ids[l]);
        for (std::size_t r = 0; r < pre.rows(); ++r) {
            for (std::size_t c = 0; c < pre.cols(); ++c) pre.at(r, c) += b.at(0, c);
        }
        apply_activation_plain(pre, l + 1 == layer_count() ? output : hidden);
        h = std::move(pre);
    }
    return h;
}

std::vector<int> Mlp::param_ids() const {
    std::vector<int> ids;
    for (std::size_t l = 0; l < w_ids.size(); ++l) {
        ids.push_back(w_ids[l]);
        ids.push_back(b_ids[l]);
    }
    return ids;
}

Adam::Adam(const ParamStore& store, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(store.count());
    v_.reserve(store.count());
    for (const auto& p : store.params) {
        m_.push_back(Tensor::zeros(p.value.rows(), p.value.cols()));
        v_.push_back(Tensor::zeros(p.value.rows(), p.value.cols()));
    }
}

void Adam::step(ParamStore& store, const std::vector<Tensor>& grads) {
    std::vector<int> ids(store.count());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    step(store, grads, ids);
}

void Adam::step(ParamStore& store, const std::vector<Tensor>& grads,
                const std::vector<int>& ids) {
    if (grads.size() != store.count()) {
        throw std::invalid_argument("Adam::step: gradient count mismatch");
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (int id : ids) {
        auto i = static_cast<std::size_t>(id);
        Tensor& p = store.value(id);
        const Tensor& g = grads[i];
        if (!g.same_shape(p)) {
            throw std::invalid_argument("Adam::step: gradient shape mismatch for " +
                                        store.name(id));
        }
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t t = 0; t < p.size(); ++t) {
            m.v[t] = cfg_.beta1 * m.v[t] + (1.0 - cfg_.beta1) * g.v[t];
            v.v[t] = cfg_.beta2 * v.v[t] + (1.0 - cfg_.beta2) * g.v[t] * g.v[t];
            const double mhat = m.v[t] / bc1;
            const double vhat = v.v[t] / bc2;
            p.v[t] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

std::vector<Tensor> all_grads(const Tape& tape, const ParamStore& store) {
    std::vector<Tensor> grads;
    grads.reserve(store.count());
    for (std::size_t i = 0; i < store.count(); ++i) {
        grads.push_back(tape.grad_of_param(static_cast<int>(i)));
    }
    return grads;
}

double grad_check(ParamStore& store, const std::vector<int>& ids,
                  const std::function<Value(Tape&)>& build, double h) {
    Tape tape(&store);
    Value loss = build(tape);
    if (!std::isfinite(tape.scalar_value(loss))) {
        throw std::runtime_error("grad_check: loss is not finite");
    }
    tape.backward(loss);
    std::vector<Tensor> analytic;
    for (int id : ids) analytic.push_back(tape.grad_of_param(id));

    const auto eval = [&]() {
        Tape t(&store);
        const double f = t.scalar_value(build(t));
        if (!std::isfinite(f)) throw std::runtime_error("grad_check: loss is not finite");
        return f;
    };

    double worst = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        Tensor& p = store.value(ids[i]);
        for (std::size_t t = 0; t < p.size(); ++t) {
            const double orig = p.v[t];
            p.v[t] = orig + h;
            const double fp = eval();
            p.v[t] = orig - h;
            const double fm = eval();
            p.v[t] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[i].v[t];
            const double err = std::fabs(a - numeric) /
                               std::max(1e-8, std::fabs(a) + std::fabs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

Value mse_rows(Tape& tape, Value pred, Value target) {
    Value d = tape.sub(pred, target);
    const double rows = static_cast<double>(tape.value(pred).rows());
    return tape.scale(tape.sumsq(d), 1.0 / rows);
}

nlohmann::ordered_json params_to_json(const ParamStore& store) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto& p : store.params) {
        nlohmann::ordered_json layer;
        layer["name"] = p.name;
        layer["shape"] = p.value.shape;
        layer["values"] = p.value.v;
        j["layers"].push_back(std::move(layer));
    }
    return j;
}

ParamStore params_from_json(const nlohmann::ordered_json& j) {
    if (j.at("schema_version").get<int>() != 1) {
        throw std::runtime_error("params_from_json: unsupported schema_version");
    }
    ParamStore store;
    for (const auto& layer : j.at("layers")) {
        Tensor t;
        t.shape = layer.at("shape").get<std::vector<std::size_t>>();
        t.v = layer.at("values").get<std::vector<double>>();
        std::size_t numel = 1;
        for (std::size_t e : t.shape) numel *= e;
        if (numel != t.v.size()) {
            throw std::runtime_error("params_from_json: shape/value count mismatch");
        }
        store.add(layer.at("name").get<std::string>(), std::move(t));
    }
    return store;
}

}  // namespace embtune
