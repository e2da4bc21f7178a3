#include "embtune/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace embtune {

double mape(const std::vector<double>& pred, const std::vector<double>& actual) {
    if (pred.size() != actual.size()) throw std::invalid_argument("mape: length mismatch");
    if (pred.empty()) throw std::invalid_argument("mape: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!(actual[i] > 0.0)) {
            throw std::invalid_argument("mape: actual values must be positive");
        }
        total += std::fabs(pred[i] - actual[i]) / actual[i];
    }
    return 100.0 * total / static_cast<double>(pred.size());
}

TrainedModel train_method(const TraceSet& raw_train, EmbedKind kind, const Hyper& hyper,
                          bool finetune) {
    TrainedModel m;
    m.kind = kind;
    m.hyper = hyper;
    m.scaler = fit_scaler(raw_train);
    m.shared_pool = shared_pool_configs(raw_train);
    const TraceSet scaled = apply_scaler(m.scaler, raw_train);
    const std::size_t p = scaled.metric_count();

    switch (kind) {
        case EmbedKind::Identity:
            m.embedder = std::make_unique<IdentityEmbedder>(p);
            break;
        case EmbedKind::Pca:
            m.embedder = std::make_unique<PcaEmbedder>(
                fit_pca(metrics_matrix(scaled), hyper.k));
            break;
        case EmbedKind::Kpca: {
            const double gamma =
                hyper.gamma_rbf > 0.0 ? hyper.gamma_rbf : 1.0 / static_cast<double>(p);
            m.embedder = std::make_unique<KpcaEmbedder>(
                fit_kpca(metrics_matrix(scaled), hyper.k, gamma));
            break;
        }
        case EmbedKind::EmbeddingArch:
            m.arch = train_embedding_arch(scaled, hyper);
            return m;
        case EmbedKind::CustomAe:
            m.embedder = train_custom_ae(scaled, hyper);
            break;
        case EmbedKind::ContractiveAe:
            m.embedder = train_contractive_ae(scaled, hyper);
            break;
        case EmbedKind::BetaVae:
            m.embedder = train_beta_vae(scaled, hyper);
            break;
        case EmbedKind::Siamese:
            m.embedder = train_siamese(scaled, hyper);
            break;
        case EmbedKind::Hybrid1:
            m.embedder = train_hybrid1(scaled, hyper);
            break;
        case EmbedKind::Hybrid2:
            m.embedder = train_hybrid2(scaled, hyper);
            break;
    }
    m.regressor = train_regressor(*m.embedder, scaled, hyper, finetune);
    return m;
}

nlohmann::ordered_json TrainedModel::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = embed_kind_name(kind);
    j["hyper"] = hyper.to_json();
    j["scaler"] = scaler_to_json(scaler);
    nlohmann::ordered_json pool = nlohmann::ordered_json::array();
    for (const auto& cfg : shared_pool) pool.push_back(cfg);
    j["shared_pool"] = pool;
    if (arch.has_value()) {
        j["arch"] = arch->to_json();
    } else {
        j["embedder"] = embedder->to_json();
        j["regressor"] = regressor.to_json();
    }
    return j;
}

TrainedModel TrainedModel::from_json(const nlohmann::ordered_json& j) {
    TrainedModel m;
    m.kind = embed_kind_from_name(j.at("kind").get<std::string>());
    m.hyper = Hyper::from_json(j.at("hyper"));
    m.scaler = scaler_from_json(j.at("scaler"));
    m.shared_pool = j.at("shared_pool").get<std::vector<std::vector<double>>>();
    if (j.contains("arch")) {
        m.arch = EmbeddingArchModel::from_json(j.at("arch"));
    } else {
        m.embedder = embedder_from_json(j.at("embedder"));
        m.regressor = Regressor::from_json(j.at("regressor"));
    }
    return m;
}

namespace {

std::string config_key(const std::vector<double>& cfg) {
    std::string k;
    for (double x : cfg) k += format_double(x) + "|";
    return k;
}

TraceSet subset(const TraceSet& t, const std::vector<std::size_t>& rows) {
    TraceSet out;
    out.knob_names = t.knob_names;
    out.metric_names = t.metric_names;
    for (std::size_t i : rows) out.observations.push_back(t.observations[i]);
    return out;
}

}  // namespace

SchemeResult evaluate_scheme(const TrainedModel& m, const TraceSet& raw_test,
                             AdmissionScheme scheme, std::uint64_t seed,
                             const LatencyFn* oracle) {
    if (scheme.n_obs == 0) throw std::invalid_argument("evaluate_scheme: n_obs must be > 0");
    const TraceSet scaled_test = apply_scaler(m.scaler, raw_test);

    std::unordered_set<std::string> pool_keys;
    for (const auto& cfg : m.shared_pool) pool_keys.insert(config_key(cfg));

    std::mt19937_64 rng(seed);
    std::vector<double> all_pred;
    std::vector<double> all_actual;
    std::vector<double> per_workload_mape;

    for (const auto& id : raw_test.workload_ids()) {
        const auto rows = raw_test.indices_of(id);
        std::vector<std::size_t> candidates;
        if (scheme.pool == PoolKind::Shared) {
            for (std::size_t i : rows) {
                if (pool_keys.count(config_key(raw_test.observations[i].config))) {
                    candidates.push_back(i);
                }
            }
        } else {
            candidates = rows;
        }
        if (candidates.size() < scheme.n_obs) {
            throw std::invalid_argument("evaluate_scheme: workload " + id + " has only " +
                                        std::to_string(candidates.size()) +
                                        " admissible observations for " + scheme.name());
        }
        std::shuffle(candidates.begin(), candidates.end(), rng);
        std::vector<std::size_t> admission_rows(
            candidates.begin(), candidates.begin() + static_cast<long>(scheme.n_obs));
        std::unordered_set<std::size_t> admission(admission_rows.begin(),
                                                  admission_rows.end());
        std::vector<std::size_t> scored;
        for (std::size_t i : rows) {
            if (!admission.count(i)) scored.push_back(i);
        }
        if (scored.empty()) continue;
        for (std::size_t i : scored) {
            if (admission.count(i)) {
                throw std::logic_error("evaluate_scheme: admission row leaked into scoring");
            }
        }

        const TraceSet admit_scaled = subset(scaled_test, admission_rows);
        std::vector<double> pred;
        std::vector<double> actual;
        if (oracle != nullptr) {
            for (std::size_t i : scored) {
                pred.push_back((*oracle)(id, raw_test.observations[i].config));
                actual.push_back(raw_test.observations[i].latency);
            }
        } else if (m.arch.has_value()) {
            EmbeddingArchModel local = *m.arch;
            local.incremental_embed(id, admit_scaled, seed + 101);
            for (std::size_t i : scored) {
                const double ps =
                    local.predict_scaled(id, scaled_test.observations[i].config);
                pred.push_back(m.scaler.unscale_latency(ps));
                actual.push_back(raw_test.observations[i].latency);
            }
        } else {
            std::vector<double> z;
            if (m.regressor.finetuned) {
                z.assign(m.regressor.zdim, 0.0);
                for (const auto& o : admit_scaled.observations) {
                    const auto zi = m.regressor.encode(o.metrics);
                    for (std::size_t c = 0; c < z.size(); ++c) z[c] += zi[c];
                }
                for (double& v : z) v /= static_cast<double>(admit_scaled.n());
            } else {
                z = workload_encoding(*m.embedder, admit_scaled);
            }
            for (std::size_t i : scored) {
                const double ps =
                    m.regressor.predict_scaled(z, scaled_test.observations[i].config);
                pred.push_back(m.scaler.unscale_latency(ps));
                actual.push_back(raw_test.observations[i].latency);
            }
        }

        per_workload_mape.push_back(mape(pred, actual));
        all_pred.insert(all_pred.end(), pred.begin(), pred.end());
        all_actual.insert(all_actual.end(), actual.begin(), actual.end());
    }

    SchemeResult res;
    res.scheme = scheme.name();
    res.mape_pooled = mape(all_pred, all_actual);
    double macro = 0.0;
    for (double v : per_workload_mape) macro += v;
    res.mape_macro = macro / static_cast<double>(per_workload_mape.size());
    res.n_scored = all_pred.size();
    res.n_workloads = per_workload_mape.size();
    return res;
}

EvalReport evaluate_all_schemes(const TrainedModel& m, const TraceSet& raw_test,
                                std::uint64_t seed) {
    EvalReport r;
    r.method = embed_kind_name(m.kind);
    r.seed = seed;
    for (PoolKind pool : {PoolKind::Shared, PoolKind::Arbitrary}) {
        for (std::size_t n_obs : {std::size_t{1}, std::size_t{5}}) {
            r.rows.push_back(evaluate_scheme(m, raw_test, {pool, n_obs}, seed));
        }
    }
    return r;
}

EvalReport average_reports(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("average_reports: empty input");
    EvalReport out = reports.front();
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].rows.size() != out.rows.size()) {
            throw std::invalid_argument("average_reports: scheme count mismatch");
        }
        for (std::size_t r = 0; r < out.rows.size(); ++r) {
            if (reports[i].rows[r].scheme != out.rows[r].scheme) {
                throw std::invalid_argument("average_reports: scheme order mismatch");
            }
            out.rows[r].mape_pooled += reports[i].rows[r].mape_pooled;
            out.rows[r].mape_macro += reports[i].rows[r].mape_macro;
        }
    }
    const double n = static_cast<double>(reports.size());
    for (auto& row : out.rows) {
        row.mape_pooled /= n;
        row.mape_macro /= n;
    }
    return out;
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["method"] = method;
    j["seed"] = seed;
    nlohmann::ordered_json rs = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        rs.push_back({{"scheme", r.scheme},
                      {"mape_pooled", r.mape_pooled},
                      {"mape_macro", r.mape_macro},
                      {"n_scored", r.n_scored},
                      {"n_workloads", r.n_workloads}});
    }
    j["rows"] = rs;
    return j;
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os << "method: " << method << "\n";
    os << std::left << std::setw(20) << "scheme" << std::right << std::setw(14)
       << "mape_pooled" << std::setw(14) << "mape_macro" << std::setw(10) << "scored"
       << std::setw(11) << "workloads" << "\n";
    for (const auto& r : rows) {
        os << std::left << std::setw(20) << r.scheme << std::right << std::fixed
           << std::setprecision(3) << std::setw(14) << r.mape_pooled << std::setw(14)
           << r.mape_macro << std::setw(10) << r.n_scored << std::setw(11) << r.n_workloads
           << "\n";
    }
    return os.str();
}

std::size_t kfold_tune(const TraceSet& raw_train, EmbedKind kind,
                       const std::vector<Hyper>& candidates, std::size_t folds,
                       std::uint64_t seed) {
    if (candidates.empty()) throw std::invalid_argument("kfold_tune: no candidates");
    if (candidates.size() == 1) return 0;
    auto ids = raw_train.workload_ids();
    if (folds < 2 || folds > ids.size()) {
        throw std::invalid_argument("kfold_tune: fold count out of range");
    }
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    std::vector<std::vector<std::string>> fold_ids(folds);
    for (std::size_t i = 0; i < ids.size(); ++i) fold_ids[i % folds].push_back(ids[i]);

    double best_score = 0.0;
    std::size_t best = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        double total = 0.0;
        bool failed = false;
        for (std::size_t f = 0; f < folds && !failed; ++f) {
            std::unordered_set<std::string> held(fold_ids[f].begin(), fold_ids[f].end());
            TraceSet tr;
            TraceSet te;
            tr.knob_names = te.knob_names = raw_train.knob_names;
            tr.metric_names = te.metric_names = raw_train.metric_names;
            for (const auto& o : raw_train.observations) {
                (held.count(o.workload_id) ? te : tr).observations.push_back(o);
            }
            try {
                TrainedModel m = train_method(tr, kind, candidates[c]);
                total += evaluate_scheme(m, te, {PoolKind::Arbitrary, 1}, seed + f).mape_pooled;
            } catch (const std::runtime_error&) {
                // a diverging candidate (non-finite training loss) is not
                // an error of the tuner; it simply loses the comparison
                failed = true;
            }
        }
        const double score =
            failed ? std::numeric_limits<double>::infinity() : total / static_cast<double>(folds);
        if (c == 0 || score < best_score) {
            best_score = score;
            best = c;
        }
    }
    return best;
}

}  // namespace embtune
