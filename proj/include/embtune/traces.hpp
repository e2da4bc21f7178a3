#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace embtune {

// One execution trace: which workload ran, under which knob vector,
// the averaged runtime metrics, and the observed latency in seconds.
struct Observation {
    std::string workload_id;
    std::string template_id;
    std::vector<double> config;   // length s
    std::vector<double> metrics;  // length p
    double latency = 0.0;         // > 0
};

struct TraceSet {
    std::vector<Observation> observations;
    std::vector<std::string> knob_names;
    std::vector<std::string> metric_names;

    std::size_t n() const { return observations.size(); }
    std::size_t knob_count() const { return knob_names.size(); }
    std::size_t metric_count() const { return metric_names.size(); }

    std::vector<std::string> workload_ids() const;  // distinct, first-seen order
    std::vector<std::size_t> indices_of(const std::string& workload_id) const;
    void validate() const;
};

// CSV columns: workload_id, template_id, latency, k_* knobs, m_* metrics.
TraceSet parse_trace_csv(const std::string& text);
std::string write_trace_csv(const TraceSet& t);

struct ColumnStats {
    std::string name;
    double min = 0.0;
    double max = 0.0;
};

struct ScalerStats {
    std::vector<ColumnStats> knobs;
    std::vector<ColumnStats> metrics;
    std::vector<bool> metric_constant;  // true where min == max on the fit set
    double latency_min = 0.0;
    double latency_max = 0.0;

    std::size_t retained_metric_count() const;
    double scale_latency(double y) const;
    double unscale_latency(double y) const;
    double scale_knob(std::size_t q, double v) const;
    double unscale_knob(std::size_t q, double v) const;
};

// Fitted on the training split only; constant knobs are rejected
// (an untunable knob is a data error, not a droppable column).
ScalerStats fit_scaler(const TraceSet& train);

// Min-max scales knobs, metrics and latency; drops constant metric
// columns. Values outside the fitted range are NOT clamped.
TraceSet apply_scaler(const ScalerStats& stats, const TraceSet& t);

// Workload-level split: each workload's observations land wholly on one
// side. Deterministic in the seed.
std::pair<TraceSet, TraceSet> split_workloads(const TraceSet& t, double test_fraction,
                                              std::uint64_t seed);

// Configurations (exact vector match) present in every workload of t.
// This is the shared pool the triplet miner and the Shared admission
// scheme key on.
std::vector<std::vector<double>> shared_pool_configs(const TraceSet& t);

nlohmann::ordered_json scaler_to_json(const ScalerStats& s);
ScalerStats scaler_from_json(const nlohmann::ordered_json& j);

// Shortest decimal form that round-trips the exact double.
std::string format_double(double x);

}  // namespace embtune
