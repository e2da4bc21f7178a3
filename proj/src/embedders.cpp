#include "embtune/embedders.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace embtune {

const char* embed_kind_name(EmbedKind k) {
    switch (k) {
        case EmbedKind::Identity: return "identity";
        case EmbedKind::Pca: return "pca";
        case EmbedKind::Kpca: return "kpca";
        case EmbedKind::EmbeddingArch: return "embedding";
        case EmbedKind::CustomAe: return "custom_ae";
        case EmbedKind::ContractiveAe: return "contractive_ae";
        case EmbedKind::BetaVae: return "beta_vae";
        case EmbedKind::Siamese: return "siamese";
        case EmbedKind::Hybrid1: return "hybrid1";
        case EmbedKind::Hybrid2: return "hybrid2";
    }
    return "identity";
}

EmbedKind embed_kind_from_name(const std::string& name) {
    for (EmbedKind k : {EmbedKind::Identity, EmbedKind::Pca, EmbedKind::Kpca,
                        EmbedKind::EmbeddingArch, EmbedKind::CustomAe,
                        EmbedKind::ContractiveAe, EmbedKind::BetaVae, EmbedKind::Siamese,
                        EmbedKind::Hybrid1, EmbedKind::Hybrid2}) {
        if (name == embed_kind_name(k)) return k;
    }
    throw std::invalid_argument("unknown embedder kind: " + name);
}

nlohmann::ordered_json Hyper::to_json() const {
    nlohmann::ordered_json j;
    j["k"] = k;
    j["hidden"] = hidden;
    j["epochs"] = epochs;
    j["batch"] = batch;
    j["lr"] = lr;
    j["gamma"] = gamma;
    j["lambda"] = lambda;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["temperature"] = temperature;
    j["gamma_rbf"] = gamma_rbf;
    j["snn_sign"] = snn_sign;
    j["seed"] = seed;
    return j;
}

Hyper Hyper::from_json(const nlohmann::ordered_json& j) {
    Hyper h;
    if (j.contains("k")) h.k = j.at("k").get<std::size_t>();
    if (j.contains("hidden")) h.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.contains("epochs")) h.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch")) h.batch = j.at("batch").get<std::size_t>();
    if (j.contains("lr")) h.lr = j.at("lr").get<double>();
    if (j.contains("gamma")) h.gamma = j.at("gamma").get<double>();
    if (j.contains("lambda")) h.lambda = j.at("lambda").get<double>();
    if (j.contains("alpha")) h.alpha = j.at("alpha").get<double>();
    if (j.contains("beta")) h.beta = j.at("beta").get<double>();
    if (j.contains("temperature")) h.temperature = j.at("temperature").get<double>();
    if (j.contains("gamma_rbf")) h.gamma_rbf = j.at("gamma_rbf").get<double>();
    if (j.contains("snn_sign")) h.snn_sign = j.at("snn_sign").get<double>();
    if (j.contains("seed")) h.seed = j.at("seed").get<std::uint64_t>();
    return h;
}

void Hyper::set(const std::string& key, const std::string& value) {
    auto as_size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
    if (key == "k") k = as_size();
    else if (key == "epochs") epochs = as_size();
    else if (key == "batch") batch = as_size();
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "lr") lr = std::stod(value);
    else if (key == "gamma") gamma = std::stod(value);
    else if (key == "lambda") lambda = std::stod(value);
    else if (key == "alpha") alpha = std::stod(value);
    else if (key == "beta") beta = std::stod(value);
    else if (key == "temperature") temperature = std::stod(value);
    else if (key == "gamma_rbf") gamma_rbf = std::stod(value);
    else if (key == "snn_sign") snn_sign = std::stod(value);
    else if (key == "hidden") {
        hidden.clear();
        std::size_t pos = 0;
        while (pos < value.size()) {
            std::size_t next = value.find(':', pos);
            if (next == std::string::npos) next = value.size();
            hidden.push_back(static_cast<std::size_t>(std::stoull(value.substr(pos, next - pos))));
            pos = next + 1;
        }
    } else {
        throw std::invalid_argument("unknown hyperparameter: " + key);
    }
}

Tensor Embedder::encode_batch(const Tensor& x) const {
    Tensor z(x.rows(), out_dim());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::vector<double> row(x.row_ptr(r), x.row_ptr(r) + x.cols());
        auto e = encode(row);
        for (std::size_t c = 0; c < e.size(); ++c) z.at(r, c) = e[c];
    }
    return z;
}

// ---------------------------------------------------------------------
// Identity

std::vector<double> IdentityEmbedder::encode(const std::vector<double>& x) const {
    if (x.size() != p_) throw std::invalid_argument("IdentityEmbedder: dimension mismatch");
    return x;
}

nlohmann::ordered_json IdentityEmbedder::to_json() const {
    return {{"schema_version", 1}, {"kind", "identity"}, {"p", p_}};
}

// ---------------------------------------------------------------------
// Jacobi eigensolver

std::pair<std::vector<double>, Tensor> jacobi_eigensolve(const Tensor& sym) {
    const std::size_t n = sym.rows();
    if (sym.cols() != n) throw std::invalid_argument("jacobi: matrix must be square");
    Tensor a = sym;
    Tensor v(n, n);
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    auto offdiag = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) s += a.at(i, j) * a.at(i, j);
        }
        return s;
    };
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(a.at(i, i)));
    scale = std::max(scale, 1.0);

    for (int sweep = 0; sweep < 128 && offdiag() > 1e-26 * scale * scale; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a.at(i, p);
                    const double aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a.at(p, i);
                    const double aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v.at(i, p);
                    const double viq = v.at(i, q);
                    v.at(i, p) = c * vip - s * viq;
                    v.at(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a.at(x, x) > a.at(y, y); });

    std::vector<double> eigvals(n);
    Tensor vecs(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        eigvals[c] = a.at(order[c], order[c]);
        for (std::size_t r = 0; r < n; ++r) vecs.at(r, c) = v.at(r, order[c]);
    }
    return {std::move(eigvals), std::move(vecs)};
}

// ---------------------------------------------------------------------
// PCA

namespace {

void fix_component_sign(double* comp, std::size_t n) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (std::fabs(comp[i]) > std::fabs(comp[arg])) arg = i;
    }
    if (comp[arg] < 0.0) {
        for (std::size_t i = 0; i < n; ++i) comp[i] = -comp[i];
    }
}

}  // namespace

PcaEmbedder fit_pca(const Tensor& x, std::size_t k) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (k > std::min(n, p)) throw std::invalid_argument("fit_pca: k > min(N,p)");
    PcaEmbedder e;
    e.mean.assign(p, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) e.mean[c] += x.at(r, c);
    }
    for (double& m : e.mean) m /= static_cast<double>(n);

    Tensor cov(p, p);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < p; ++i) {
            const double xi = x.at(r, i) - e.mean[i];
            for (std::size_t j = i; j < p; ++j) {
                cov.at(i, j) += xi * (x.at(r, j) - e.mean[j]);
            }
        }
    }
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i; j < p; ++j) {
            cov.at(i, j) /= denom;
            cov.at(j, i) = cov.at(i, j);
        }
    }

    auto [eigvals, vecs] = jacobi_eigensolve(cov);
    e.components = Tensor(k, p);
    e.eigenvalues.assign(eigvals.begin(), eigvals.begin() + static_cast<long>(k));
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t r = 0; r < p; ++r) e.components.at(c, r) = vecs.at(r, c);
        fix_component_sign(e.components.row_ptr(c), p);
    }
    return e;
}

std::vector<double> PcaEmbedder::encode(const std::vector<double>& x) const {
    if (x.size() != mean.size()) throw std::invalid_argument("PcaEmbedder: dimension mismatch");
    std::vector<double> centered(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - mean[i];
    std::vector<double> z(components.rows(), 0.0);
    for (std::size_t c = 0; c < components.rows(); ++c) {
        for (std::size_t i = 0; i < centered.size(); ++i) {
            z[c] += components.at(c, i) * centered[i];
        }
    }
    return z;
}

std::vector<double> PcaEmbedder::reconstruct(const std::vector<double>& z) const {
    std::vector<double> x = mean;
    for (std::size_t c = 0; c < components.rows(); ++c) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += z[c] * components.at(c, i);
    }
    return x;
}

nlohmann::ordered_json PcaEmbedder::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "pca";
    j["mean"] = mean;
    j["components"] = {{"shape", components.shape}, {"values", components.v}};
    j["eigenvalues"] = eigenvalues;
    return j;
}

// ---------------------------------------------------------------------
// KPCA

namespace {

double rbf_kernel(const double* a, const double* b, std::size_t n, double gamma) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return std::exp(-gamma * d);
}

}  // namespace

KpcaEmbedder fit_kpca(const Tensor& x, std::size_t k, double gamma_rbf) {
    const std::size_t n = x.rows();
    if (k > n) throw std::invalid_argument("fit_kpca: k > N");
    if (!(gamma_rbf > 0.0)) throw std::invalid_argument("fit_kpca: gamma_rbf must be > 0");

    Tensor km(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            km.at(i, j) = km.at(j, i) = rbf_kernel(x.row_ptr(i), x.row_ptr(j), x.cols(), gamma_rbf);
        }
    }

    KpcaEmbedder e;
    e.gamma = gamma_rbf;
    e.train_x = x;
    e.k_row_means.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) e.k_row_means[i] += km.at(i, j);
        e.k_row_means[i] /= static_cast<double>(n);
    }
    e.k_mean = 0.0;
    for (double m : e.k_row_means) e.k_mean += m;
    e.k_mean /= static_cast<double>(n);

    Tensor kc(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            kc.at(i, j) = km.at(i, j) - e.k_row_means[i] - e.k_row_means[j] + e.k_mean;
        }
    }

    auto [eigvals, vecs] = jacobi_eigensolve(kc);
    std::size_t kept = 0;
    e.alphas = Tensor(n, k);
    for (std::size_t c = 0; c < n && kept < k; ++c) {
        if (eigvals[c] <= 1e-12) {
            std::cerr << "fit_kpca: skipping non-positive eigenvalue " << eigvals[c]
                      << ", reducing k\n";
            break;
        }
        const double inv = 1.0 / std::sqrt(eigvals[c]);
        for (std::size_t r = 0; r < n; ++r) e.alphas.at(r, kept) = vecs.at(r, c) * inv;
        e.eigenvalues.push_back(eigvals[c]);
        ++kept;
    }
    if (kept < k) {
        Tensor reduced(n, kept);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < kept; ++c) reduced.at(r, c) = e.alphas.at(r, c);
        }
        e.alphas = std::move(reduced);
    }
    // Sign convention as in PCA: largest-magnitude alpha entry positive.
    for (std::size_t c = 0; c < e.alphas.cols(); ++c) {
        std::size_t arg = 0;
        for (std::size_t r = 1; r < n; ++r) {
            if (std::fabs(e.alphas.at(r, c)) > std::fabs(e.alphas.at(arg, c))) arg = r;
        }
        if (e.alphas.at(arg, c) < 0.0) {
            for (std::size_t r = 0; r < n; ++r) e.alphas.at(r, c) = -e.alphas.at(r, c);
        }
    }
    return e;
}

std::vector<double> KpcaEmbedder::encode(const std::vector<double>& x) const {
    const std::size_t n = train_x.rows();
    if (x.size() != train_x.cols()) throw std::invalid_argument("KpcaEmbedder: dimension mismatch");
    std::vector<double> kv(n);
    double kv_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        kv[i] = rbf_kernel(x.data(), train_x.row_ptr(i), x.size(), gamma);
        kv_mean += kv[i];
    }
    kv_mean /= static_cast<double>(n);
    std::vector<double> z(alphas.cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double centered = kv[i] - kv_mean - k_row_means[i] + k_mean;
        for (std::size_t c = 0; c < alphas.cols(); ++c) z[c] += centered * alphas.at(i, c);
    }
    return z;
}

nlohmann::ordered_json KpcaEmbedder::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "kpca";
    j["gamma"] = gamma;
    j["train_x"] = {{"shape", train_x.shape}, {"values", train_x.v}};
    j["alphas"] = {{"shape", alphas.shape}, {"values", alphas.v}};
    j["eigenvalues"] = eigenvalues;
    j["k_row_means"] = k_row_means;
    j["k_mean"] = k_mean;
    return j;
}

// ---------------------------------------------------------------------
// Neural embedders

std::vector<double> NnModel::encode(const std::vector<double>& x) const {
    if (x.size() != p) throw std::invalid_argument("NnModel: dimension mismatch");
    Tensor in(1, p);
    in.v = x;
    Tensor out = encoder.forward_plain(store, in);
    return std::vector<double>(out.v.begin() + static_cast<long>(slice_begin),
                               out.v.begin() + static_cast<long>(slice_begin + k));
}

Tensor NnModel::encode_batch(const Tensor& x) const {
    Tensor out = encoder.forward_plain(store, x);
    Tensor z(x.rows(), k);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < k; ++c) z.at(r, c) = out.at(r, slice_begin + c);
    }
    return z;
}

nlohmann::ordered_json NnModel::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = embed_kind_name(kind_);
    j["p"] = p;
    j["s"] = s;
    j["k"] = k;
    j["slice_begin"] = slice_begin;
    j["encoder_widths"] = encoder.widths;
    j["has_decoder"] = has_decoder;
    if (has_decoder) j["decoder_widths"] = decoder.widths;
    j["hidden_activation"] = activation_name(encoder.hidden);
    j["hyper"] = hyper.to_json();
    j["epoch_losses"] = epoch_losses;
    j["params"] = params_to_json(store);
    return j;
}

std::unique_ptr<NnModel> NnModel::from_json(const nlohmann::ordered_json& j) {
    auto m = std::make_unique<NnModel>();
    m->kind_ = embed_kind_from_name(j.at("kind").get<std::string>());
    m->p = j.at("p").get<std::size_t>();
    m->s = j.at("s").get<std::size_t>();
    m->k = j.at("k").get<std::size_t>();
    m->slice_begin = j.at("slice_begin").get<std::size_t>();
    m->hyper = Hyper::from_json(j.at("hyper"));
    m->epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
    m->store = params_from_json(j.at("params"));
    const Activation hidden =
        activation_from_name(j.at("hidden_activation").get<std::string>());
    m->encoder = Mlp::bind(m->store, "enc",
                           j.at("encoder_widths").get<std::vector<std::size_t>>(), hidden,
                           Activation::Identity);
    m->has_decoder = j.at("has_decoder").get<bool>();
    if (m->has_decoder) {
        m->decoder = Mlp::bind(m->store, "dec",
                               j.at("decoder_widths").get<std::vector<std::size_t>>(), hidden,
                               Activation::Identity);
    }
    return m;
}

std::unique_ptr<Embedder> embedder_from_json(const nlohmann::ordered_json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "identity") {
        return std::make_unique<IdentityEmbedder>(j.at("p").get<std::size_t>());
    }
    if (kind == "pca") {
        auto e = std::make_unique<PcaEmbedder>();
        e->mean = j.at("mean").get<std::vector<double>>();
        e->components.shape = j.at("components").at("shape").get<std::vector<std::size_t>>();
        e->components.v = j.at("components").at("values").get<std::vector<double>>();
        e->eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
        return e;
    }
    if (kind == "kpca") {
        auto e = std::make_unique<KpcaEmbedder>();
        e->gamma = j.at("gamma").get<double>();
        e->train_x.shape = j.at("train_x").at("shape").get<std::vector<std::size_t>>();
        e->train_x.v = j.at("train_x").at("values").get<std::vector<double>>();
        e->alphas.shape = j.at("alphas").at("shape").get<std::vector<std::size_t>>();
        e->alphas.v = j.at("alphas").at("values").get<std::vector<double>>();
        e->eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
        e->k_row_means = j.at("k_row_means").get<std::vector<double>>();
        e->k_mean = j.at("k_mean").get<double>();
        return e;
    }
    return NnModel::from_json(j);
}

// ---------------------------------------------------------------------
// Triplets and losses

std::vector<Triplet> mine_triplets(const TraceSet& train,
                                   const std::vector<std::vector<double>>& shared_pool,
                                   std::uint64_t seed) {
    if (shared_pool.empty()) throw std::invalid_argument("mine_triplets: empty shared pool");
    const auto ids = train.workload_ids();
    if (ids.size() < 2) {
        throw std::invalid_argument("mine_triplets: need >= 2 workloads for negatives");
    }

    auto config_key = [](const std::vector<double>& cfg) {
        std::string k;
        for (double x : cfg) k += format_double(x) + "|";
        return k;
    };
    std::vector<std::string> shared_keys;
    shared_keys.reserve(shared_pool.size());
    for (const auto& cfg : shared_pool) shared_keys.push_back(config_key(cfg));

    // workload -> shared config key -> observation index
    std::unordered_map<std::string, std::unordered_map<std::string, std::size_t>> at_shared;
    std::unordered_map<std::string, std::vector<std::size_t>> all_obs;
    std::vector<std::string> obs_key(train.n());
    for (std::size_t i = 0; i < train.n(); ++i) {
        const auto& o = train.observations[i];
        obs_key[i] = config_key(o.config);
        at_shared[o.workload_id][obs_key[i]] = i;
        all_obs[o.workload_id].push_back(i);
    }
    for (const auto& id : ids) {
        for (const auto& key : shared_keys) {
            if (!at_shared[id].count(key)) {
                throw std::invalid_argument("mine_triplets: workload " + id +
                                            " is missing a shared-pool configuration");
            }
        }
    }

    std::mt19937_64 rng(seed);
    std::vector<Triplet> out;
    for (std::size_t a = 0; a < ids.size(); ++a) {
        const auto& aid = ids[a];
        for (const auto& key : shared_keys) {
            Triplet t;
            t.anchor = at_shared[aid][key];
            // positive: same workload at a different config
            std::vector<std::size_t> pos_pool;
            for (std::size_t i : all_obs[aid]) {
                if (obs_key[i] != key) pos_pool.push_back(i);
            }
            if (pos_pool.empty()) {
                throw std::invalid_argument("mine_triplets: workload " + aid +
                                            " has no positive candidates");
            }
            std::uniform_int_distribution<std::size_t> pick(0, pos_pool.size() - 1);
            t.positive = pos_pool[pick(rng)];
            // negative: another workload at the anchor's config
            std::uniform_int_distribution<std::size_t> pick_w(0, ids.size() - 2);
            std::size_t widx = pick_w(rng);
            if (widx >= a) ++widx;
            t.negative = at_shared[ids[widx]][key];
            out.push_back(t);
        }
    }
    return out;
}

double triplet_loss(const std::vector<double>& za, const std::vector<double>& zp,
                    const std::vector<double>& zn, double alpha) {
    if (za.size() != zp.size() || za.size() != zn.size()) {
        throw std::invalid_argument("triplet_loss: dimension mismatch");
    }
    double dp = 0.0;
    double dn = 0.0;
    for (std::size_t i = 0; i < za.size(); ++i) {
        dp += (za[i] - zp[i]) * (za[i] - zp[i]);
        dn += (za[i] - zn[i]) * (za[i] - zn[i]);
    }
    return std::max(0.0, dp - dn + alpha);
}

Value build_snn_term(Tape& tape, Value z, const std::vector<int>& workload_label,
                     const std::vector<int>& config_label, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("snn: temperature must be > 0");
    const std::size_t n = tape.value(z).rows();
    if (workload_label.size() != n || config_label.size() != n) {
        throw std::invalid_argument("snn: label count mismatch");
    }
    const double inv_t = -1.0 / temperature;
    Value total{};
    bool have_total = false;
    for (std::size_t i = 0; i < n; ++i) {
        Value zi = tape.slice_rows(z, i, 1);
        Value num{};
        Value den{};
        bool have_num = false;
        bool have_den = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const bool same_workload = workload_label[j] == workload_label[i];
            const bool same_config = config_label[j] == config_label[i];
            const bool in_num = same_workload && !same_config;
            const bool in_den = !same_workload && !same_config;
            if (!in_num && !in_den) continue;
            Value d = tape.sumsq(tape.sub(zi, tape.slice_rows(z, j, 1)));
            Value e = tape.exp_of(tape.scale(d, inv_t));
            if (in_num) {
                num = have_num ? tape.add(num, e) : e;
                have_num = true;
            } else {
                den = have_den ? tape.add(den, e) : e;
                have_den = true;
            }
        }
        if (!have_num || !have_den) {
            throw std::invalid_argument(
                "snn: point " + std::to_string(i) +
                " lacks a same-workload or different-workload partner in the batch");
        }
        Value term = tape.sub(tape.log_of(den), tape.log_of(num));
        total = have_total ? tape.add(total, term) : term;
        have_total = true;
    }
    return tape.scale(total, 1.0 / static_cast<double>(n));
}

double snn_loss(const std::vector<std::vector<double>>& z,
                const std::vector<int>& workload_label,
                const std::vector<int>& config_label, double temperature) {
    if (z.empty()) throw std::invalid_argument("snn: empty batch");
    Tensor zt(z.size(), z[0].size());
    for (std::size_t r = 0; r < z.size(); ++r) {
        for (std::size_t c = 0; c < z[r].size(); ++c) zt.at(r, c) = z[r][c];
    }
    Tape tape;
    Value zv = tape.constant(std::move(zt));
    return tape.scalar_value(build_snn_term(tape, zv, workload_label, config_label, temperature));
}

namespace {

Value activation_derivative(Tape& tape, Value act, Activation a) {
    const Tensor& t = tape.value(act);
    Value ones = tape.constant(Tensor(t.rows(), t.cols(), 1.0));
    switch (a) {
        case Activation::Identity: return ones;
        case Activation::Tanh: return tape.sub(ones, tape.mul(act, act));
        case Activation::Sigmoid: return tape.mul(act, tape.sub(ones, act));
        case Activation::Relu:
            throw std::invalid_argument("contractive penalty requires a smooth activation");
    }
    return ones;
}

}  // namespace

Value build_custom_ae_loss(Tape& tape, const Mlp& enc, const Mlp& dec, const Tensor& x,
                           const Tensor& v, double gamma, std::size_t s) {
    Value xc = tape.constant(x);
    Value bottleneck = enc.forward(tape, xc);
    Value recon = dec.forward(tape, bottleneck);
    Value loss = mse_rows(tape, recon, xc);
    if (gamma != 0.0) {
        Value ev = tape.slice_cols(bottleneck, 0, s);
        loss = tape.add(loss, tape.scale(mse_rows(tape, ev, tape.constant(v)), gamma));
    }
    return loss;
}

Value build_contractive_penalty(Tape& tape, const Mlp& enc, const Tensor& x,
                                std::size_t slice_begin, std::size_t k) {
    Value total{};
    bool have = false;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        Tensor row(1, x.cols());
        for (std::size_t c = 0; c < x.cols(); ++c) row.at(0, c) = x.at(r, c);
        Value xi = tape.constant(std::move(row));
        std::vector<Value> acts;
        enc.forward(tape, xi, &acts);

        Value jac{};
        bool have_jac = false;
        for (std::size_t l = 0; l < enc.layer_count(); ++l) {
            Value wt = tape.transpose_of(tape.param(enc.w_ids[l]));
            jac = have_jac ? tape.matmul(wt, jac) : wt;
            have_jac = true;
            const Activation a = l + 1 == enc.layer_count() ? enc.output : enc.hidden;
            if (a != Activation::Identity) {
                Value d = activation_derivative(tape, acts[l], a);
                jac = tape.row_scale(jac, tape.transpose_of(d));
            }
        }
        Value pen = tape.sumsq(tape.slice_rows(jac, slice_begin, k));
        total = have ? tape.add(total, pen) : pen;
        have = true;
    }
    return tape.scale(total, 1.0 / static_cast<double>(x.rows()));
}

Value build_beta_vae_loss(Tape& tape, const Mlp& enc, const Mlp& dec, const Tensor& x,
                          const Tensor& eps, double beta, std::size_t k) {
    const std::size_t n = x.rows();
    Value xc = tape.constant(x);
    Value out = enc.forward(tape, xc);
    Value mu = tape.slice_cols(out, 0, k);
    Value logvar = tape.clamp_of(tape.slice_cols(out, k, k), -10.0, 10.0);
    Value sigma = tape.exp_of(tape.scale(logvar, 0.5));
    Value zsample = tape.add(mu, tape.mul(sigma, tape.constant(eps)));
    Value recon = dec.forward(tape, zsample);
    Value loss = mse_rows(tape, recon, xc);
    if (beta != 0.0) {
        Value ones = tape.constant(Tensor(n, k, 1.0));
        Value term = tape.sub(tape.add(tape.mul(mu, mu), tape.exp_of(logvar)),
                              tape.add(ones, logvar));
        Value kl = tape.scale(tape.sum(term), 0.5 / static_cast<double>(n));
        loss = tape.add(loss, tape.scale(kl, beta));
    }
    return loss;
}

Value build_triplet_term(Tape& tape, const Mlp& enc, const Tensor& xa, const Tensor& xp,
                         const Tensor& xn, double alpha, std::size_t slice_begin,
                         std::size_t k) {
    const std::size_t m = xa.rows();
    auto embed = [&](const Tensor& x) {
        return tape.slice_cols(enc.forward(tape, tape.constant(x)), slice_begin, k);
    };
    Value za = embed(xa);
    Value zp = embed(xp);
    Value zn = embed(xn);
    Value dpos = tape.sum_cols(tape.mul(tape.sub(za, zp), tape.sub(za, zp)));
    Value dneg = tape.sum_cols(tape.mul(tape.sub(za, zn), tape.sub(za, zn)));
    Value margin = tape.constant(Tensor(m, 1, alpha));
    Value hinge = tape.relu_of(tape.add(tape.sub(dpos, dneg), margin));
    return tape.scale(tape.sum(hinge), 1.0 / static_cast<double>(m));
}

Value build_hybrid1_loss(Tape& tape, const Mlp& enc, const Mlp& dec, const Tensor& xa,
                         const Tensor& xp, const Tensor& xn, const Tensor& va,
                         const Tensor& vp, const Tensor& vn, const Hyper& hyper,
                         std::size_t s) {
    Value loss = build_triplet_term(tape, enc, xa, xp, xn, hyper.alpha, s, hyper.k);
    if (hyper.gamma != 0.0 || hyper.lambda != 0.0) {
        const Tensor* xs[3] = {&xa, &xp, &xn};
        const Tensor* vs[3] = {&va, &vp, &vn};
        for (int t = 0; t < 3; ++t) {
            Value xc = tape.constant(*xs[t]);
            Value bottleneck = enc.forward(tape, xc);
            if (hyper.gamma != 0.0) {
                Value recon = dec.forward(tape, bottleneck);
                loss = tape.add(loss, tape.scale(mse_rows(tape, recon, xc), hyper.gamma));
            }
            if (hyper.lambda != 0.0) {
                Value ev = tape.slice_cols(bottleneck, 0, s);
                loss = tape.add(
                    loss, tape.scale(mse_rows(tape, ev, tape.constant(*vs[t])), hyper.lambda));
            }
        }
    }
    return loss;
}

Value build_hybrid2_loss(Tape& tape, const Mlp& enc, const Mlp& dec, const Tensor& x,
                         const std::vector<int>& workload_label,
                         const std::vector<int>& config_label, const Hyper& hyper) {
    Value xc = tape.constant(x);
    Value z = enc.forward(tape, xc);
    Value recon = dec.forward(tape, z);
    Value loss = mse_rows(tape, recon, xc);
    if (hyper.lambda != 0.0) {
        Value snn = build_snn_term(tape, z, workload_label, config_label, hyper.temperature);
        loss = tape.add(loss, tape.scale(snn, hyper.lambda * hyper.snn_sign));
    }
    return loss;
}

// ---------------------------------------------------------------------
// Trainers

namespace {

std::vector<std::size_t> make_widths(std::size_t in, const std::vector<std::size_t>& hidden,
                                     std::size_t out) {
    std::vector<std::size_t> w{in};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(out);
    return w;
}

std::vector<std::size_t> reversed_hidden(const std::vector<std::size_t>& hidden) {
    return std::vector<std::size_t>(hidden.rbegin(), hidden.rend());
}

void check_finite_loss(double loss) {
    if (!std::isfinite(loss)) {
        throw std::runtime_error("training aborted: non-finite loss");
    }
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
    Tensor out(rows.size(), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x.at(rows[r], c);
    }
    return out;
}

// Plain AE-family training loop over (X, V) minibatches.
template <typename LossBuilder>
std::unique_ptr<NnModel> train_ae_family(const TraceSet& train, const Hyper& hyper,
                                         EmbedKind kind, std::size_t bottleneck,
                                         std::size_t slice_begin, std::size_t decoder_in,
                                         LossBuilder&& build) {
    auto model = std::make_unique<NnModel>();
    model->kind_ = kind;
    model->p = train.metric_count();
    model->s = train.knob_count();
    model->k = hyper.k;
    model->slice_begin = slice_begin;
    model->hyper = hyper;
    model->encoder = Mlp::create(model->store, "enc",
                                 make_widths(model->p, hyper.hidden, bottleneck),
                                 Activation::Tanh, Activation::Identity, hyper.seed);
    model->has_decoder = true;
    model->decoder = Mlp::create(model->store, "dec",
                                 make_widths(decoder_in, reversed_hidden(hyper.hidden), model->p),
                                 Activation::Tanh, Activation::Identity, hyper.seed + 1000);

    const Tensor x = metrics_matrix(train);
    const Tensor v = configs_matrix(train);
    Adam opt(model->store, {hyper.lr, 0.9, 0.999, 1e-8});
    std::mt19937_64 rng(hyper.seed + 7);
    std::vector<std::size_t> order(train.n());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            const std::size_t stop = std::min(order.size(), start + hyper.batch);
            std::vector<std::size_t> rows(order.begin() + static_cast<long>(start),
                                          order.begin() + static_cast<long>(stop));
            Tensor xb = gather_rows(x, rows);
            Tensor vb = gather_rows(v, rows);
            Tape tape(&model->store);
            Value loss = build(tape, *model, xb, vb, rng);
            const double l = tape.scalar_value(loss);
            check_finite_loss(l);
            tape.backward(loss);
            opt.step(model->store, all_grads(tape, model->store));
            epoch_loss += l;
            ++batches;
        }
        model->epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
    }
    return model;
}

}  // namespace

Tensor metrics_matrix(const TraceSet& t) {
    Tensor x(t.n(), t.metric_count());
    for (std::size_t r = 0; r < t.n(); ++r) {
        for (std::size_t c = 0; c < t.metric_count(); ++c) {
            x.at(r, c) = t.observations[r].metrics[c];
        }
    }
    return x;
}

Tensor configs_matrix(const TraceSet& t) {
    Tensor v(t.n(), t.knob_count());
    for (std::size_t r = 0; r < t.n(); ++r) {
        for (std::size_t c = 0; c < t.knob_count(); ++c) {
            v.at(r, c) = t.observations[r].config[c];
        }
    }
    return v;
}

std::unique_ptr<NnModel> train_custom_ae(const TraceSet& train, const Hyper& hyper) {
    const std::size_t s = train.knob_count();
    return train_ae_family(
        train, hyper, EmbedKind::CustomAe, s + hyper.k, s, s + hyper.k,
        [&hyper, s](Tape& tape, NnModel& m, const Tensor& xb, const Tensor& vb,
                    std::mt19937_64&) {
            return build_custom_ae_loss(tape, m.encoder, m.decoder, xb, vb, hyper.gamma, s);
        });
}

std::unique_ptr<NnModel> train_contractive_ae(const TraceSet& train, const Hyper& hyper) {
    const std::size_t s = train.knob_count();
    return train_ae_family(
        train, hyper, EmbedKind::ContractiveAe, s + hyper.k, s, s + hyper.k,
        [&hyper, s](Tape& tape, NnModel& m, const Tensor& xb, const Tensor& vb,
                    std::mt19937_64&) {
            Value loss = build_custom_ae_loss(tape, m.encoder, m.decoder, xb, vb, hyper.gamma, s);
            Value pen = build_contractive_penalty(tape, m.encoder, xb, s, hyper.k);
            return tape.add(loss, tape.scale(pen, hyper.lambda));
        });
}

std::unique_ptr<NnModel> train_beta_vae(const TraceSet& train, const Hyper& hyper) {
    if (hyper.beta < 0.0) throw std::invalid_argument("train_beta_vae: beta must be >= 0");
    return train_ae_family(
        train, hyper, EmbedKind::BetaVae, 2 * hyper.k, 0, hyper.k,
        [&hyper](Tape& tape, NnModel& m, const Tensor& xb, const Tensor&,
                 std::mt19937_64& rng) {
            std::normal_distribution<double> gauss(0.0, 1.0);
            Tensor eps(xb.rows(), hyper.k);
            for (double& e : eps.v) e = gauss(rng);
            return build_beta_vae_loss(tape, m.encoder, m.decoder, xb, eps, hyper.beta, hyper.k);
        });
}

namespace {

struct TripletTensors {
    Tensor xa, xp, xn, va, vp, vn;
};

TripletTensors gather_triplets(const TraceSet& train, const std::vector<Triplet>& batch) {
    const std::size_t p = train.metric_count();
    const std::size_t s = train.knob_count();
    TripletTensors t{Tensor(batch.size(), p), Tensor(batch.size(), p), Tensor(batch.size(), p),
                     Tensor(batch.size(), s), Tensor(batch.size(), s), Tensor(batch.size(), s)};
    for (std::size_t r = 0; r < batch.size(); ++r) {
        const auto& oa = train.observations[batch[r].anchor];
        const auto& op = train.observations[batch[r].positive];
        const auto& on = train.observations[batch[r].negative];
        for (std::size_t c = 0; c < p; ++c) {
            t.xa.at(r, c) = oa.metrics[c];
            t.xp.at(r, c) = op.metrics[c];
            t.xn.at(r, c) = on.metrics[c];
        }
        for (std::size_t c = 0; c < s; ++c) {
            t.va.at(r, c) = oa.config[c];
            t.vp.at(r, c) = op.config[c];
            t.vn.at(r, c) = on.config[c];
        }
    }
    return t;
}

template <typename LossBuilder>
std::unique_ptr<NnModel> train_triplet_family(const TraceSet& train, const Hyper& hyper,
                                              EmbedKind kind, std::size_t bottleneck,
                                              std::size_t slice_begin, bool with_decoder,
                                              LossBuilder&& build) {
    auto model = std::make_unique<NnModel>();
    model->kind_ = kind;
    model->p = train.metric_count();
    model->s = train.knob_count();
    model->k = hyper.k;
    model->slice_begin = slice_begin;
    model->hyper = hyper;
    model->encoder = Mlp::create(model->store, "enc",
                                 make_widths(model->p, hyper.hidden, bottleneck),
                                 Activation::Tanh, Activation::Identity, hyper.seed);
    if (with_decoder) {
        model->has_decoder = true;
        model->decoder = Mlp::create(
            model->store, "dec",
            make_widths(bottleneck, reversed_hidden(hyper.hidden), model->p), Activation::Tanh,
            Activation::Identity, hyper.seed + 1000);
    }

    const auto shared = shared_pool_configs(train);
    Adam opt(model->store, {hyper.lr, 0.9, 0.999, 1e-8});

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        auto triplets = mine_triplets(train, shared, hyper.seed + 31 * epoch);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < triplets.size(); start += hyper.batch) {
            const std::size_t stop = std::min(triplets.size(), start + hyper.batch);
            std::vector<Triplet> batch(triplets.begin() + static_cast<long>(start),
                                       triplets.begin() + static_cast<long>(stop));
            TripletTensors t = gather_triplets(train, batch);
            Tape tape(&model->store);
            Value loss = build(tape, *model, t);
            const double l = tape.scalar_value(loss);
            check_finite_loss(l);
            tape.backward(loss);
            opt.step(model->store, all_grads(tape, model->store));
            epoch_loss += l;
            ++batches;
        }
        model->epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
    }
    return model;
}

}  // namespace

std::unique_ptr<NnModel> train_siamese(const TraceSet& train, const Hyper& hyper) {
    return train_triplet_family(
        train, hyper, EmbedKind::Siamese, hyper.k, 0, false,
        [&hyper](Tape& tape, NnModel& m, const TripletTensors& t) {
            return build_triplet_term(tape, m.encoder, t.xa, t.xp, t.xn, hyper.alpha, 0,
                                      hyper.k);
        });
}

std::unique_ptr<NnModel> train_hybrid1(const TraceSet& train, const Hyper& hyper) {
    const std::size_t s = train.knob_count();
    return train_triplet_family(
        train, hyper, EmbedKind::Hybrid1, s + hyper.k, s, true,
        [&hyper, s](Tape& tape, NnModel& m, const TripletTensors& t) {
            return build_hybrid1_loss(tape, m.encoder, m.decoder, t.xa, t.xp, t.xn, t.va,
                                      t.vp, t.vn, hyper, s);
        });
}

std::unique_ptr<NnModel> train_hybrid2(const TraceSet& train, const Hyper& hyper) {
    auto model = std::make_unique<NnModel>();
    model->kind_ = EmbedKind::Hybrid2;
    model->p = train.metric_count();
    model->s = train.knob_count();
    model->k = hyper.k;
    model->slice_begin = 0;
    model->hyper = hyper;
    model->encoder = Mlp::create(model->store, "enc",
                                 make_widths(model->p, hyper.hidden, hyper.k),
                                 Activation::Tanh, Activation::Identity, hyper.seed);
    model->has_decoder = true;
    model->decoder = Mlp::create(model->store, "dec",
                                 make_widths(hyper.k, reversed_hidden(hyper.hidden), model->p),
                                 Activation::Tanh, Activation::Identity, hyper.seed + 1000);

    const auto ids = train.workload_ids();
    if (ids.size() < 2) {
        throw std::invalid_argument("train_hybrid2: need >= 2 workloads per batch");
    }
    std::unordered_map<std::string, std::vector<std::size_t>> by_workload;
    for (std::size_t i = 0; i < train.n(); ++i) {
        by_workload[train.observations[i].workload_id].push_back(i);
    }
    for (const auto& id : ids) {
        if (by_workload[id].size() < 2) {
            throw std::invalid_argument("train_hybrid2: workload " + id +
                                        " has fewer than 2 observations");
        }
    }
    // Stratified batches: groups of up to 4 workloads x 4 configs each.
    const std::size_t group_workloads = std::min<std::size_t>(4, ids.size());
    auto config_key = [](const std::vector<double>& cfg) {
        std::string k;
        for (double x : cfg) k += format_double(x) + "|";
        return k;
    };
    std::unordered_map<std::string, int> config_ids;
    auto config_label = [&](std::size_t obs) {
        const std::string key = config_key(train.observations[obs].config);
        auto it = config_ids.find(key);
        if (it == config_ids.end()) {
            it = config_ids.emplace(key, static_cast<int>(config_ids.size())).first;
        }
        return it->second;
    };
    std::unordered_map<std::string, int> workload_ids_map;
    for (std::size_t i = 0; i < ids.size(); ++i) workload_ids_map[ids[i]] = static_cast<int>(i);

    const Tensor x = metrics_matrix(train);
    Adam opt(model->store, {hyper.lr, 0.9, 0.999, 1e-8});
    std::mt19937_64 rng(hyper.seed + 7);
    std::vector<std::string> order = ids;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start + group_workloads <= order.size();
             start += group_workloads) {
            std::vector<std::size_t> rows;
            std::vector<int> wl;
            std::vector<int> cl;
            for (std::size_t g = 0; g < group_workloads; ++g) {
                const auto& id = order[start + g];
                auto obs = by_workload[id];
                std::shuffle(obs.begin(), obs.end(), rng);
                const std::size_t take = std::min<std::size_t>(4, obs.size());
                for (std::size_t i = 0; i < take; ++i) {
                    rows.push_back(obs[i]);
                    wl.push_back(workload_ids_map[id]);
                    cl.push_back(config_label(obs[i]));
                }
            }
            Tensor xb = gather_rows(x, rows);
            Tape tape(&model->store);
            Value loss = build_hybrid2_loss(tape, model->encoder, model->decoder, xb, wl, cl,
                                            hyper);
            const double l = tape.scalar_value(loss);
            check_finite_loss(l);
            tape.backward(loss);
            opt.step(model->store, all_grads(tape, model->store));
            epoch_loss += l;
            ++batches;
        }
        model->epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
    }
    return model;
}

// ---------------------------------------------------------------------
// Embedding architecture

int EmbeddingArchModel::row_index(const std::string& workload_id) const {
    for (std::size_t i = 0; i < workload_ids.size(); ++i) {
        if (workload_ids[i] == workload_id) return static_cast<int>(i);
    }
    return -1;
}

std::vector<double> EmbeddingArchModel::embedding_of(const std::string& workload_id) const {
    const int idx = row_index(workload_id);
    if (idx < 0) {
        throw std::invalid_argument("embedding lookup: unknown workload " + workload_id +
                                    " (requires incremental training first)");
    }
    return store.value(z_param_ids[static_cast<std::size_t>(idx)]).v;
}

double EmbeddingArchModel::predict_scaled_row(const std::vector<double>& z,
                                              const std::vector<double>& config) const {
    Tensor in(1, k + s);
    for (std::size_t c = 0; c < k; ++c) in.at(0, c) = z[c];
    for (std::size_t c = 0; c < s; ++c) in.at(0, k + c) = config[c];
    return net.forward_plain(store, in).v[0];
}

double EmbeddingArchModel::predict_scaled(const std::string& workload_id,
                                          const std::vector<double>& config) const {
    return predict_scaled_row(embedding_of(workload_id), config);
}

EmbeddingArchModel train_embedding_arch(const TraceSet& train, const Hyper& hyper) {
    EmbeddingArchModel m;
    m.k = hyper.k;
    m.s = train.knob_count();
    m.hyper = hyper;
    m.workload_ids = train.workload_ids();
    for (std::size_t j = 0; j < m.workload_ids.size(); ++j) {
        auto [row, bias] = dense_init(1, hyper.k, hyper.seed + 5000 + j);
        (void)bias;
        m.z_param_ids.push_back(m.store.add("z." + m.workload_ids[j], std::move(row)));
    }
    std::vector<std::size_t> widths{hyper.k + m.s};
    widths.insert(widths.end(), hyper.hidden.begin(), hyper.hidden.end());
    widths.push_back(1);
    m.net = Mlp::create(m.store, "net", widths, Activation::Tanh, Activation::Identity,
                        hyper.seed);

    Adam opt(m.store, {hyper.lr, 0.9, 0.999, 1e-8});
    std::mt19937_64 rng(hyper.seed + 7);
    std::vector<std::size_t> order(m.workload_ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t j : order) {
            const auto rows = train.indices_of(m.workload_ids[j]);
            Tensor vb(rows.size(), m.s);
            Tensor yb(rows.size(), 1);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const auto& o = train.observations[rows[r]];
                for (std::size_t c = 0; c < m.s; ++c) vb.at(r, c) = o.config[c];
                yb.at(r, 0) = o.latency;
            }
            Tape tape(&m.store);
            Value z = tape.repeat_rows(tape.param(m.z_param_ids[j]), rows.size());
            Value in = tape.concat_cols(z, tape.constant(vb));
            Value pred = m.net.forward(tape, in);
            Value loss = mse_rows(tape, pred, tape.constant(yb));
            const double l = tape.scalar_value(loss);
            check_finite_loss(l);
            tape.backward(loss);
            std::vector<int> ids = m.net.param_ids();
            ids.push_back(m.z_param_ids[j]);
            opt.step(m.store, all_grads(tape, m.store), ids);
            epoch_loss += l;
        }
        m.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return m;
}

void EmbeddingArchModel::incremental_embed(const std::string& workload_id,
                                           const TraceSet& scaled_obs, std::uint64_t seed) {
    if (scaled_obs.n() < k) {
        throw std::invalid_argument(
            "incremental_embed: need at least k=" + std::to_string(k) + " observations, got " +
            std::to_string(scaled_obs.n()));
    }
    for (const auto& o : scaled_obs.observations) {
        if (o.workload_id != workload_id) {
            throw std::invalid_argument("incremental_embed: mixed workload ids");
        }
    }
    const int existing = row_index(workload_id);
    int z_id;
    if (existing >= 0) {
        z_id = z_param_ids[static_cast<std::size_t>(existing)];
        auto [row, bias] = dense_init(1, k, seed);
        (void)bias;
        store.value(z_id) = std::move(row);
    } else {
        auto [row, bias] = dense_init(1, k, seed);
        (void)bias;
        z_id = store.add("z." + workload_id, std::move(row));
        workload_ids.push_back(workload_id);
        z_param_ids.push_back(z_id);
    }

    Tensor vb(scaled_obs.n(), s);
    Tensor yb(scaled_obs.n(), 1);
    for (std::size_t r = 0; r < scaled_obs.n(); ++r) {
        const auto& o = scaled_obs.observations[r];
        for (std::size_t c = 0; c < s; ++c) vb.at(r, c) = o.config[c];
        yb.at(r, 0) = o.latency;
    }
    Adam opt(store, {hyper.lr, 0.9, 0.999, 1e-8});
    const std::vector<int> only_row{z_id};
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        Tape tape(&store);
        Value z = tape.repeat_rows(tape.param(z_id), scaled_obs.n());
        Value in = tape.concat_cols(z, tape.constant(vb));
        Value pred = net.forward(tape, in);
        Value loss = mse_rows(tape, pred, tape.constant(yb));
        check_finite_loss(tape.scalar_value(loss));
        tape.backward(loss);
        opt.step(store, all_grads(tape, store), only_row);
    }
}

nlohmann::ordered_json EmbeddingArchModel::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "embedding";
    j["k"] = k;
    j["s"] = s;
    j["workload_ids"] = workload_ids;
    j["net_widths"] = net.widths;
    j["hyper"] = hyper.to_json();
    j["epoch_losses"] = epoch_losses;
    j["params"] = params_to_json(store);
    return j;
}

EmbeddingArchModel EmbeddingArchModel::from_json(const nlohmann::ordered_json& j) {
    EmbeddingArchModel m;
    m.k = j.at("k").get<std::size_t>();
    m.s = j.at("s").get<std::size_t>();
    m.workload_ids = j.at("workload_ids").get<std::vector<std::string>>();
    m.hyper = Hyper::from_json(j.at("hyper"));
    m.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
    m.store = params_from_json(j.at("params"));
    m.net = Mlp::bind(m.store, "net", j.at("net_widths").get<std::vector<std::size_t>>(),
                      Activation::Tanh, Activation::Identity);
    for (const auto& id : m.workload_ids) {
        const int pid = m.store.find("z." + id);
        if (pid < 0) throw std::runtime_error("embedding model: missing row for " + id);
        m.z_param_ids.push_back(pid);
    }
    return m;
}

}  // namespace embtune
