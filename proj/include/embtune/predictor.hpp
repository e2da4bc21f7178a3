#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "embtune/embedders.hpp"
#include "embtune/traces.hpp"

namespace embtune {

enum class PoolKind { Shared, Arbitrary };

// Admission scheme for an unseen workload: where its first observations
// may come from (the shared pool or anywhere) and how many there are.
struct AdmissionScheme {
    PoolKind pool = PoolKind::Arbitrary;
    std::size_t n_obs = 1;

    std::string name() const;
};

const char* pool_kind_name(PoolKind p);
PoolKind pool_kind_from_name(const std::string& name);

// Centroid of the embedder's encodings of the given scaled observations.
std::vector<double> workload_encoding(const Embedder& emb, const TraceSet& scaled_obs);

// Latency regressor over (workload encoding, scaled config). When
// finetuned it carries its own copy of the encoder, jointly optimized
// with the head; otherwise encodings are fixed inputs.
struct Regressor {
    ParamStore store;
    Mlp net;  // (zdim + s) -> ... -> 1
    std::size_t zdim = 0;
    std::size_t s = 0;
    bool finetuned = false;
    Mlp encoder;  // bound into store when finetuned
    std::size_t enc_slice_begin = 0;
    Hyper hyper;
    std::vector<double> epoch_losses;

    double predict_scaled(const std::vector<double>& z,
                          const std::vector<double>& scaled_config) const;
    // Encoding through the finetuned encoder copy; throws when not finetuned.
    std::vector<double> encode(const std::vector<double>& scaled_metrics) const;

    nlohmann::ordered_json to_json() const;
    static Regressor from_json(const nlohmann::ordered_json& j);
};

// Trains the regression head on per-workload encoding centroids from the
// scaled training set. finetune=true additionally backpropagates into a
// private copy of the encoder (neural embedders only); the original
// embedder is never modified.
Regressor train_regressor(const Embedder& emb, const TraceSet& scaled_train,
                          const Hyper& hyper, bool finetune = false);

}  // namespace embtune
