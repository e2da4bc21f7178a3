#include "embtune/traces.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace embtune {

std::string format_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::vector<std::string> TraceSet::workload_ids() const {
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (const auto& o : observations) {
        if (seen.insert(o.workload_id).second) ids.push_back(o.workload_id);
    }
    return ids;
}

std::vector<std::size_t> TraceSet::indices_of(const std::string& workload_id) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < observations.size(); ++i) {
        if (observations[i].workload_id == workload_id) out.push_back(i);
    }
    return out;
}

void TraceSet::validate() const {
    if (observations.empty()) throw std::invalid_argument("TraceSet: empty");
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& o = observations[i];
        if (o.workload_id.empty()) {
            throw std::invalid_argument("TraceSet: empty workload id at row " +
                                        std::to_string(i));
        }
        if (o.config.size() != knob_count() || o.metrics.size() != metric_count()) {
            throw std::invalid_argument("TraceSet: dimension mismatch at row " +
                                        std::to_string(i));
        }
        if (!(o.latency > 0.0)) {
            throw std::invalid_argument("TraceSet: non-positive latency at row " +
                                        std::to_string(i));
        }
        for (double x : o.config) {
            if (!std::isfinite(x)) throw std::invalid_argument("TraceSet: non-finite knob");
        }
        for (double x : o.metrics) {
            if (!std::isfinite(x)) throw std::invalid_argument("TraceSet: non-finite metric");
        }
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& col) {
    double x = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
        throw std::invalid_argument("trace csv: non-numeric cell '" + cell + "' at row " +
                                    std::to_string(row) + ", column " + col);
    }
    return x;
}

}  // namespace

TraceSet parse_trace_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("trace csv: missing header");
    const auto header = split_line(line);
    if (header.size() < 3 || header[0] != "workload_id" || header[1] != "template_id" ||
        header[2] != "latency") {
        throw std::invalid_argument(
            "trace csv: header must start with workload_id,template_id,latency");
    }
    TraceSet t;
    std::size_t i = 3;
    for (; i < header.size() && header[i].rfind("k_", 0) == 0; ++i) {
        t.knob_names.push_back(header[i]);
    }
    for (; i < header.size(); ++i) {
        if (header[i].rfind("m_", 0) != 0) {
            throw std::invalid_argument("trace csv: unexpected column '" + header[i] +
                                        "' (knob columns k_* must precede metric columns m_*)");
        }
        t.metric_names.push_back(header[i]);
    }

    std::size_t row = 1;  // 1-based file rows; the header is row 1
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw std::invalid_argument("trace csv: ragged row " + std::to_string(row) +
                                        " (" + std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(header.size()) + ")");
        }
        Observation o;
        o.workload_id = cells[0];
        o.template_id = cells[1];
        o.latency = parse_number(cells[2], row, "latency");
        if (!(o.latency > 0.0)) {
            throw std::invalid_argument("trace csv: latency must be > 0 at row " +
                                        std::to_string(row));
        }
        std::size_t c = 3;
        for (std::size_t q = 0; q < t.knob_count(); ++q, ++c) {
            o.config.push_back(parse_number(cells[c], row, header[c]));
        }
        for (std::size_t m = 0; m < t.metric_count(); ++m, ++c) {
            o.metrics.push_back(parse_number(cells[c], row, header[c]));
        }
        t.observations.push_back(std::move(o));
    }
    t.validate();
    return t;
}

std::string write_trace_csv(const TraceSet& t) {
    std::string out = "workload_id,template_id,latency";
    for (const auto& k : t.knob_names) out += "," + k;
    for (const auto& m : t.metric_names) out += "," + m;
    out += "\n";
    for (const auto& o : t.observations) {
        out += o.workload_id + "," + o.template_id + "," + format_double(o.latency);
        for (double x : o.config) out += "," + format_double(x);
        for (double x : o.metrics) out += "," + format_double(x);
        out += "\n";
    }
    return out;
}

std::size_t ScalerStats::retained_metric_count() const {
    std::size_t n = 0;
    for (bool c : metric_constant) {
        if (!c) ++n;
    }
    return n;
}

double ScalerStats::scale_latency(double y) const {
    const double span = latency_max - latency_min;
    return span == 0.0 ? 0.0 : (y - latency_min) / span;
}

double ScalerStats::unscale_latency(double y) const {
    return latency_min + y * (latency_max - latency_min);
}

double ScalerStats::scale_knob(std::size_t q, double v) const {
    const auto& c = knobs.at(q);
    return (v - c.min) / (c.max - c.min);
}

double ScalerStats::unscale_knob(std::size_t q, double v) const {
    const auto& c = knobs.at(q);
    return c.min + v * (c.max - c.min);
}

ScalerStats fit_scaler(const TraceSet& train) {
    if (train.n() < 2) throw std::invalid_argument("fit_scaler: need at least 2 observations");
    ScalerStats s;
    for (std::size_t q = 0; q < train.knob_count(); ++q) {
        ColumnStats c{train.knob_names[q], train.observations[0].config[q],
                      train.observations[0].config[q]};
        for (const auto& o : train.observations) {
            c.min = std::min(c.min, o.config[q]);
            c.max = std::max(c.max, o.config[q]);
        }
        if (c.min == c.max) {
            throw std::invalid_argument("fit_scaler: knob '" + c.name +
                                        "' is constant on the training set");
        }
        s.knobs.push_back(c);
    }
    for (std::size_t m = 0; m < train.metric_count(); ++m) {
        ColumnStats c{train.metric_names[m], train.observations[0].metrics[m],
                      train.observations[0].metrics[m]};
        for (const auto& o : train.observations) {
            c.min = std::min(c.min, o.metrics[m]);
            c.max = std::max(c.max, o.metrics[m]);
        }
        s.metrics.push_back(c);
        s.metric_constant.push_back(c.min == c.max);
    }
    s.latency_min = s.latency_max = train.observations[0].latency;
    for (const auto& o : train.observations) {
        s.latency_min = std::min(s.latency_min, o.latency);
        s.latency_max = std::max(s.latency_max, o.latency);
    }
    return s;
}

TraceSet apply_scaler(const ScalerStats& stats, const TraceSet& t) {
    if (stats.knobs.size() != t.knob_count() || stats.metrics.size() != t.metric_count()) {
        throw std::invalid_argument("apply_scaler: column count mismatch");
    }
    for (std::size_t q = 0; q < t.knob_count(); ++q) {
        if (stats.knobs[q].name != t.knob_names[q]) {
            throw std::invalid_argument("apply_scaler: knob column mismatch at '" +
                                        t.knob_names[q] + "'");
        }
    }
    for (std::size_t m = 0; m < t.metric_count(); ++m) {
        if (stats.metrics[m].name != t.metric_names[m]) {
            throw std::invalid_argument("apply_scaler: metric column mismatch at '" +
                                        t.metric_names[m] + "'");
        }
    }
    TraceSet out;
    out.knob_names = t.knob_names;
    for (std::size_t m = 0; m < t.metric_count(); ++m) {
        if (!stats.metric_constant[m]) out.metric_names.push_back(t.metric_names[m]);
    }
    out.observations.reserve(t.n());
    for (const auto& o : t.observations) {
        Observation so;
        so.workload_id = o.workload_id;
        so.template_id = o.template_id;
        for (std::size_t q = 0; q < t.knob_count(); ++q) {
            so.config.push_back(stats.scale_knob(q, o.config[q]));
        }
        for (std::size_t m = 0; m < t.metric_count(); ++m) {
            if (stats.metric_constant[m]) continue;
            const auto& c = stats.metrics[m];
            so.metrics.push_back((o.metrics[m] - c.min) / (c.max - c.min));
        }
        // Scaled latency can be 0 (the training minimum); keep a strictly
        // positive floor out of the domain model by storing the scaled
        // value directly and validating later against the raw set.
        so.latency = stats.scale_latency(o.latency);
        out.observations.push_back(std::move(so));
    }
    return out;
}

std::pair<TraceSet, TraceSet> split_workloads(const TraceSet& t, double test_fraction,
                                              std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("split_workloads: fraction must be in (0,1)");
    }
    auto ids = t.workload_ids();
    if (ids.size() < 2) throw std::invalid_argument("split_workloads: need >= 2 workloads");
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    auto n_test = static_cast<std::size_t>(
        std::lround(test_fraction * static_cast<double>(ids.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, ids.size() - 1);
    std::unordered_set<std::string> test_ids(ids.begin(), ids.begin() + static_cast<long>(n_test));

    TraceSet train, test;
    train.knob_names = test.knob_names = t.knob_names;
    train.metric_names = test.metric_names = t.metric_names;
    for (const auto& o : t.observations) {
        (test_ids.count(o.workload_id) ? test : train).observations.push_back(o);
    }
    return {std::move(train), std::move(test)};
}

std::vector<std::vector<double>> shared_pool_configs(const TraceSet& t) {
    const auto ids = t.workload_ids();
    std::unordered_map<std::string, std::unordered_set<std::string>> per_workload;
    auto key = [](const std::vector<double>& cfg) {
        std::string k;
        for (double x : cfg) k += format_double(x) + "|";
        return k;
    };
    for (const auto& o : t.observations) per_workload[o.workload_id].insert(key(o.config));

    std::vector<std::vector<double>> shared;
    std::unordered_set<std::string> taken;
    for (const auto& o : t.observations) {
        const std::string k = key(o.config);
        if (taken.count(k)) continue;
        bool everywhere = true;
        for (const auto& id : ids) {
            if (!per_workload[id].count(k)) {
                everywhere = false;
                break;
            }
        }
        if (everywhere) {
            taken.insert(k);
            shared.push_back(o.config);
        }
    }
    return shared;
}

nlohmann::ordered_json scaler_to_json(const ScalerStats& s) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["knobs"] = nlohmann::ordered_json::array();
    for (const auto& c : s.knobs) {
        j["knobs"].push_back({{"name", c.name}, {"min", c.min}, {"max", c.max}});
    }
    j["metrics"] = nlohmann::ordered_json::array();
    for (std::size_t m = 0; m < s.metrics.size(); ++m) {
        j["metrics"].push_back({{"name", s.metrics[m].name},
                                {"min", s.metrics[m].min},
                                {"max", s.metrics[m].max},
                                {"constant", static_cast<bool>(s.metric_constant[m])}});
    }
    j["latency"] = {{"min", s.latency_min}, {"max", s.latency_max}};
    return j;
}

ScalerStats scaler_from_json(const nlohmann::ordered_json& j) {
    if (j.at("schema_version").get<int>() != 1) {
        throw std::runtime_error("scaler_from_json: unsupported schema_version");
    }
    ScalerStats s;
    for (const auto& c : j.at("knobs")) {
        s.knobs.push_back({c.at("name").get<std::string>(), c.at("min").get<double>(),
                           c.at("max").get<double>()});
    }
    for (const auto& c : j.at("metrics")) {
        s.metrics.push_back({c.at("name").get<std::string>(), c.at("min").get<double>(),
                             c.at("max").get<double>()});
        s.metric_constant.push_back(c.at("constant").get<bool>());
    }
    s.latency_min = j.at("latency").at("min").get<double>();
    s.latency_max = j.at("latency").at("max").get<double>();
    return s;
}

}  // namespace embtune
