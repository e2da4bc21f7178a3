#include "embtune/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace embtune {

const char* pool_kind_name(PoolKind p) {
    return p == PoolKind::Shared ? "shared" : "arbitrary";
}

PoolKind pool_kind_from_name(const std::string& name) {
    if (name == "shared") return PoolKind::Shared;
    if (name == "arbitrary") return PoolKind::Arbitrary;
    throw std::invalid_argument("unknown pool kind: " + name);
}

std::string AdmissionScheme::name() const {
    return std::string(pool_kind_name(pool)) + "/" + std::to_string(n_obs) + "-obs";
}

std::vector<double> workload_encoding(const Embedder& emb, const TraceSet& scaled_obs) {
    if (scaled_obs.n() == 0) throw std::invalid_argument("workload_encoding: no observations");
    Tensor z = emb.encode_batch(metrics_matrix(scaled_obs));
    std::vector<double> centroid(z.cols(), 0.0);
    for (std::size_t r = 0; r < z.rows(); ++r) {
        for (std::size_t c = 0; c < z.cols(); ++c) centroid[c] += z.at(r, c);
    }
    for (double& v : centroid) v /= static_cast<double>(z.rows());
    return centroid;
}

double Regressor::predict_scaled(const std::vector<double>& z,
                                 const std::vector<double>& scaled_config) const {
    if (z.size() != zdim || scaled_config.size() != s) {
        throw std::invalid_argument("Regressor: dimension mismatch");
    }
    Tensor in(1, zdim + s);
    for (std::size_t c = 0; c < zdim; ++c) in.at(0, c) = z[c];
    for (std::size_t c = 0; c < s; ++c) in.at(0, zdim + c) = scaled_config[c];
    return net.forward_plain(store, in).v[0];
}

std::vector<double> Regressor::encode(const std::vector<double>& scaled_metrics) const {
    if (!finetuned) throw std::logic_error("Regressor: no finetuned encoder");
    Tensor in(1, encoder.in_dim());
    in.v = scaled_metrics;
    Tensor out = encoder.forward_plain(store, in);
    return std::vector<double>(out.v.begin() + static_cast<long>(enc_slice_begin),
                               out.v.begin() + static_cast<long>(enc_slice_begin + zdim));
}

nlohmann::ordered_json Regressor::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["zdim"] = zdim;
    j["s"] = s;
    j["net_widths"] = net.widths;
    j["finetuned"] = finetuned;
    if (finetuned) {
        j["encoder_widths"] = encoder.widths;
        j["enc_slice_begin"] = enc_slice_begin;
    }
    j["hyper"] = hyper.to_json();
    j["epoch_losses"] = epoch_losses;
    j["params"] = params_to_json(store);
    return j;
}

Regressor Regressor::from_json(const nlohmann::ordered_json& j) {
    Regressor r;
    r.zdim = j.at("zdim").get<std::size_t>();
    r.s = j.at("s").get<std::size_t>();
    r.finetuned = j.at("finetuned").get<bool>();
    r.hyper = Hyper::from_json(j.at("hyper"));
    r.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
    r.store = params_from_json(j.at("params"));
    r.net = Mlp::bind(r.store, "net", j.at("net_widths").get<std::vector<std::size_t>>(),
                      Activation::Tanh, Activation::Identity);
    if (r.finetuned) {
        r.encoder = Mlp::bind(r.store, "enc",
                              j.at("encoder_widths").get<std::vector<std::size_t>>(),
                              Activation::Tanh, Activation::Identity);
        r.enc_slice_begin = j.at("enc_slice_begin").get<std::size_t>();
    }
    return r;
}

namespace {

std::vector<std::size_t> net_widths(std::size_t in, const std::vector<std::size_t>& hidden) {
    std::vector<std::size_t> w{in};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(1);
    return w;
}

void check_finite_loss(double loss) {
    if (!std::isfinite(loss)) {
        throw std::runtime_error("training aborted: non-finite loss");
    }
}

Regressor train_regressor_fixed(const Embedder& emb, const TraceSet& train,
                                const Hyper& hyper) {
    Regressor r;
    r.zdim = emb.out_dim();
    r.s = train.knob_count();
    r.hyper = hyper;
    r.net = Mlp::create(r.store, "net", net_widths(r.zdim + r.s, hyper.hidden),
                        Activation::Tanh, Activation::Identity, hyper.seed + 2000);

    // Fixed per-workload encoding centroids.
    std::unordered_map<std::string, std::vector<double>> centroids;
    for (const auto& id : train.workload_ids()) {
        TraceSet sub;
        sub.knob_names = train.knob_names;
        sub.metric_names = train.metric_names;
        for (std::size_t i : train.indices_of(id)) {
            sub.observations.push_back(train.observations[i]);
        }
        centroids[id] = workload_encoding(emb, sub);
    }

    Tensor feats(train.n(), r.zdim + r.s);
    Tensor targets(train.n(), 1);
    for (std::size_t i = 0; i < train.n(); ++i) {
        const auto& o = train.observations[i];
        const auto& z = centroids[o.workload_id];
        for (std::size_t c = 0; c < r.zdim; ++c) feats.at(i, c) = z[c];
        for (std::size_t c = 0; c < r.s; ++c) feats.at(i, r.zdim + c) = o.config[c];
        targets.at(i, 0) = o.latency;
    }

    Adam opt(r.store, {hyper.lr, 0.9, 0.999, 1e-8});
    std::mt19937_64 rng(hyper.seed + 9);
    std::vector<std::size_t> order(train.n());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            const std::size_t stop = std::min(order.size(), start + hyper.batch);
            Tensor fb(stop - start, r.zdim + r.s);
            Tensor tb(stop - start, 1);
            for (std::size_t i = start; i < stop; ++i) {
                for (std::size_t c = 0; c < fb.cols(); ++c) {
                    fb.at(i - start, c) = feats.at(order[i], c);
                }
                tb.at(i - start, 0) = targets.at(order[i], 0);
            }
            Tape tape(&r.store);
            Value pred = r.net.forward(tape, tape.constant(std::move(fb)));
            Value loss = mse_rows(tape, pred, tape.constant(std::move(tb)));
            const double l = tape.scalar_value(loss);
            check_finite_loss(l);
            tape.backward(loss);
            opt.step(r.store, all_grads(tape, r.store));
            epoch_loss += l;
            ++batches;
        }
        r.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
    }
    return r;
}

Regressor train_regressor_finetuned(const NnModel& base, const TraceSet& train,
                                    const Hyper& hyper) {
    Regressor r;
    r.zdim = base.k;
    r.s = train.knob_count();
    r.finetuned = true;
    r.enc_slice_begin = base.slice_begin;
    r.hyper = hyper;

    // Private copy of the encoder parameters; training never touches the
    // embedder that was passed in.
    for (int id : base.encoder.param_ids()) {
        r.store.add(base.store.name(id), base.store.value(id));
    }
    r.encoder = Mlp::bind(r.store, "enc", base.encoder.widths, base.encoder.hidden,
                          base.encoder.output);
    r.net = Mlp::create(r.store, "net", net_widths(r.zdim + r.s, hyper.hidden),
                        Activation::Tanh, Activation::Identity, hyper.seed + 2000);

    const auto ids = train.workload_ids();
    Adam opt(r.store, {hyper.lr, 0.9, 0.999, 1e-8});
    std::mt19937_64 rng(hyper.seed + 9);
    std::vector<std::string> order = ids;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (const auto& id : order) {
            const auto rows = train.indices_of(id);
            const std::size_t n = rows.size();
            Tensor xb(n, train.metric_count());
            Tensor vb(n, r.s);
            Tensor yb(n, 1);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& o = train.observations[rows[i]];
                for (std::size_t c = 0; c < xb.cols(); ++c) xb.at(i, c) = o.metrics[c];
                for (std::size_t c = 0; c < r.s; ++c) vb.at(i, c) = o.config[c];
                yb.at(i, 0) = o.latency;
            }
            Tape tape(&r.store);
            Value enc = r.encoder.forward(tape, tape.constant(std::move(xb)));
            Value z = tape.slice_cols(enc, r.enc_slice_begin, r.zdim);
            // In-graph centroid: (1/n) ones . Z, repeated per row.
            Value mean_row = tape.matmul(
                tape.constant(Tensor(1, n, 1.0 / static_cast<double>(n))), z);
            Value zrep = tape.repeat_rows(mean_row, n);
            Value in = tape.concat_cols(zrep, tape.constant(std::move(vb)));
            Value pred = r.net.forward(tape, in);
            Value loss = mse_rows(tape, pred, tape.constant(std::move(yb)));
            const double l = tape.scalar_value(loss);
            check_finite_loss(l);
            tape.backward(loss);
            opt.step(r.store, all_grads(tape, r.store));
            epoch_loss += l;
        }
        r.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return r;
}

}  // namespace

Regressor train_regressor(const Embedder& emb, const TraceSet& scaled_train,
                          const Hyper& hyper, bool finetune) {
    if (!finetune) return train_regressor_fixed(emb, scaled_train, hyper);
    const auto* nn = dynamic_cast<const NnModel*>(&emb);
    if (nn == nullptr) {
        throw std::invalid_argument("train_regressor: finetune requires a neural embedder");
    }
    return train_regressor_finetuned(*nn, scaled_train, hyper);
}

}  // namespace embtune
