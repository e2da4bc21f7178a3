#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "embtune/predictor.hpp"
#include "embtune/synthbench.hpp"

namespace embtune {

// 100 * mean(|pred - actual| / actual); actuals must be positive.
double mape(const std::vector<double>& pred, const std::vector<double>& actual);

// A fully trained pipeline: scaler fitted on the raw training split,
// one embedding method, and the latency regressor on top of it. The
// embedding architecture replaces the (embedder, regressor) pair.
struct TrainedModel {
    EmbedKind kind = EmbedKind::Identity;
    ScalerStats scaler;
    std::unique_ptr<Embedder> embedder;
    Regressor regressor;
    std::optional<EmbeddingArchModel> arch;
    std::vector<std::vector<double>> shared_pool;  // from the raw training split
    Hyper hyper;

    nlohmann::ordered_json to_json() const;
    static TrainedModel from_json(const nlohmann::ordered_json& j);
};

TrainedModel train_method(const TraceSet& raw_train, EmbedKind kind, const Hyper& hyper,
                          bool finetune = false);

struct SchemeResult {
    std::string scheme;
    double mape_pooled = 0.0;  // over all scored (workload, config) pairs
    double mape_macro = 0.0;   // mean of per-workload MAPEs
    std::size_t n_scored = 0;
    std::size_t n_workloads = 0;
};

// Direct latency source, used to substitute a ground-truth oracle for
// the trained predictor in tests: (workload_id, raw config) -> seconds.
using LatencyFn = std::function<double(const std::string&, const std::vector<double>&)>;

// Evaluates one admission scheme on unseen workloads. Admission
// observations are chosen deterministically from the seed and are
// excluded from scoring. When `oracle` is non-null it replaces the
// model's predictions (the admission bookkeeping stays identical).
SchemeResult evaluate_scheme(const TrainedModel& m, const TraceSet& raw_test,
                             AdmissionScheme scheme, std::uint64_t seed,
                             const LatencyFn* oracle = nullptr);

struct EvalReport {
    std::string method;
    std::uint64_t seed = 0;
    std::vector<SchemeResult> rows;

    nlohmann::ordered_json to_json() const;
    std::string to_table() const;
};

EvalReport evaluate_all_schemes(const TrainedModel& m, const TraceSet& raw_test,
                                std::uint64_t seed);

// Element-wise mean of per-seed reports (same method and scheme order).
EvalReport average_reports(const std::vector<EvalReport>& reports);

// Picks the candidate with the lowest mean arbitrary/1-obs MAPE across
// workload-level folds of the training split; ties go to the earlier
// candidate.
std::size_t kfold_tune(const TraceSet& raw_train, EmbedKind kind,
                       const std::vector<Hyper>& candidates, std::size_t folds,
                       std::uint64_t seed);

}  // namespace embtune
