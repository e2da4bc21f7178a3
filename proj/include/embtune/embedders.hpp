#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "embtune/nn.hpp"
#include "embtune/traces.hpp"

namespace embtune {

enum class EmbedKind {
    Identity,
    Pca,
    Kpca,
    EmbeddingArch,
    CustomAe,
    ContractiveAe,
    BetaVae,
    Siamese,
    Hybrid1,
    Hybrid2,
};

const char* embed_kind_name(EmbedKind k);
EmbedKind embed_kind_from_name(const std::string& name);

// Training hyperparameters. The paper leaves optimizer, epochs, batch
// sizes and loss coefficients open; these are configuration surface.
struct Hyper {
    std::size_t k = 8;                       // embedding dimension
    std::vector<std::size_t> hidden = {64, 32};
    std::size_t epochs = 200;
    std::size_t batch = 16;
    double lr = 1e-3;
    double gamma = 1.0;        // config-approximation coefficient (Custom AE, Hybrid1 recon)
    double lambda = 0.1;       // contractive / config-head / SNN coefficient
    double alpha = 1.0;        // triplet margin
    double beta = 1.0;         // KL coefficient
    double temperature = 1.0;  // SNN temperature
    double gamma_rbf = 0.0;    // KPCA kernel width; 0 means 1/p
    double snn_sign = 1.0;     // +1 follows the Hybrid2 objective as displayed
    std::uint64_t seed = 0;

    nlohmann::ordered_json to_json() const;
    static Hyper from_json(const nlohmann::ordered_json& j);
    void set(const std::string& key, const std::string& value);
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbedKind kind() const = 0;
    virtual std::size_t in_dim() const = 0;
    virtual std::size_t out_dim() const = 0;
    virtual std::vector<double> encode(const std::vector<double>& x) const = 0;
    virtual Tensor encode_batch(const Tensor& x) const;
    virtual nlohmann::ordered_json to_json() const = 0;
};

std::unique_ptr<Embedder> embedder_from_json(const nlohmann::ordered_json& j);

// ---------------------------------------------------------------------
// Baselines

class IdentityEmbedder final : public Embedder {
public:
    explicit IdentityEmbedder(std::size_t p) : p_(p) {}
    EmbedKind kind() const override { return EmbedKind::Identity; }
    std::size_t in_dim() const override { return p_; }
    std::size_t out_dim() const override { return p_; }
    std::vector<double> encode(const std::vector<double>& x) const override;
    nlohmann::ordered_json to_json() const override;

private:
    std::size_t p_;
};

class PcaEmbedder final : public Embedder {
public:
    EmbedKind kind() const override { return EmbedKind::Pca; }
    std::size_t in_dim() const override { return mean.size(); }
    std::size_t out_dim() const override { return components.rows(); }
    std::vector<double> encode(const std::vector<double>& x) const override;
    nlohmann::ordered_json to_json() const override;

    // Reconstruction from an encoding (mean + z . components).
    std::vector<double> reconstruct(const std::vector<double>& z) const;

    std::vector<double> mean;
    Tensor components;  // [k, p], rows ordered by descending eigenvalue
    std::vector<double> eigenvalues;
};

class KpcaEmbedder final : public Embedder {
public:
    EmbedKind kind() const override { return EmbedKind::Kpca; }
    std::size_t in_dim() const override { return train_x.cols(); }
    std::size_t out_dim() const override { return alphas.cols(); }
    std::vector<double> encode(const std::vector<double>& x) const override;
    nlohmann::ordered_json to_json() const override;

    double gamma = 0.0;
    Tensor train_x;  // [N, p]
    Tensor alphas;   // [N, k], eigenvectors scaled by 1/sqrt(eigenvalue)
    std::vector<double> eigenvalues;
    std::vector<double> k_row_means;  // per-training-point mean of the kernel matrix
    double k_mean = 0.0;
};

PcaEmbedder fit_pca(const Tensor& x, std::size_t k);
KpcaEmbedder fit_kpca(const Tensor& x, std::size_t k, double gamma_rbf);

// Cyclic Jacobi eigensolver for symmetric matrices; returns eigenvalues
// in descending order with eigenvectors as matching COLUMNS.
std::pair<std::vector<double>, Tensor> jacobi_eigensolve(const Tensor& sym);

// ---------------------------------------------------------------------
// Neural embedders

// A trained encoder (plus optional decoder and config head sharing the
// same ParamStore). The exposed encoding is a column slice of the
// encoder output: [slice_begin, slice_begin+k).
class NnModel final : public Embedder {
public:
    EmbedKind kind() const override { return kind_; }
    std::size_t in_dim() const override { return p; }
    std::size_t out_dim() const override { return k; }
    std::vector<double> encode(const std::vector<double>& x) const override;
    Tensor encode_batch(const Tensor& x) const override;
    nlohmann::ordered_json to_json() const override;
    static std::unique_ptr<NnModel> from_json(const nlohmann::ordered_json& j);

    ParamStore store;
    Mlp encoder;
    bool has_decoder = false;
    Mlp decoder;
    std::size_t p = 0;
    std::size_t s = 0;
    std::size_t k = 0;
    std::size_t slice_begin = 0;
    EmbedKind kind_ = EmbedKind::CustomAe;
    Hyper hyper;
    std::vector<double> epoch_losses;
};

std::unique_ptr<NnModel> train_custom_ae(const TraceSet& scaled_train, const Hyper& hyper);
std::unique_ptr<NnModel> train_contractive_ae(const TraceSet& scaled_train, const Hyper& hyper);
std::unique_ptr<NnModel> train_beta_vae(const TraceSet& scaled_train, const Hyper& hyper);
std::unique_ptr<NnModel> train_siamese(const TraceSet& scaled_train, const Hyper& hyper);
std::unique_ptr<NnModel> train_hybrid1(const TraceSet& scaled_train, const Hyper& hyper);
std::unique_ptr<NnModel> train_hybrid2(const TraceSet& scaled_train, const Hyper& hyper);

// ---------------------------------------------------------------------
// Triplets

struct Triplet {
    std::size_t anchor;
    std::size_t positive;
    std::size_t negative;
};

// One anchor per (training workload, shared config) per epoch; the
// positive comes from the same workload under another config, the
// negative from another workload under the anchor's config.
std::vector<Triplet> mine_triplets(const TraceSet& train,
                                   const std::vector<std::vector<double>>& shared_pool,
                                   std::uint64_t seed);

// Closed form: max(0, |za-zp|^2 - |za-zn|^2 + alpha).
double triplet_loss(const std::vector<double>& za, const std::vector<double>& zp,
                    const std::vector<double>& zn, double alpha);

// Soft-nearest-neighbor loss over a batch of embeddings. Numerator:
// same workload, different config. Denominator: different workload AND
// different config. Mean over points of -log(num/den).
double snn_loss(const std::vector<std::vector<double>>& z,
                const std::vector<int>& workload_label,
                const std::vector<int>& config_label, double temperature);

// ---------------------------------------------------------------------
// Loss graph builders (shared between trainers and gradient checks)

Value build_custom_ae_loss(Tape& tape, const Mlp& enc, const Mlp& dec, const Tensor& x,
                           const Tensor& v, double gamma, std::size_t s);
// Mean over rows of the squared Frobenius norm of the Jacobian of the
// [slice_begin, slice_begin+k) encoder outputs w.r.t. the input.
Value build_contractive_penalty(Tape& tape, const Mlp& enc, const Tensor& x,
                                std::size_t slice_begin, std::size_t k);
Value build_beta_vae_loss(Tape& tape, const Mlp& enc, const Mlp& dec, const Tensor& x,
                          const Tensor& eps, double beta, std::size_t k);
Value build_triplet_term(Tape& tape, const Mlp& enc, const Tensor& xa, const Tensor& xp,
                         const Tensor& xn, double alpha, std::size_t slice_begin,
                         std::size_t k);
Value build_snn_term(Tape& tape, Value z, const std::vector<int>& workload_label,
                     const std::vector<int>& config_label, double temperature);
Value build_hybrid1_loss(Tape& tape, const Mlp& enc, const Mlp& dec, const Tensor& xa,
                         const Tensor& xp, const Tensor& xn, const Tensor& va,
                         const Tensor& vp, const Tensor& vn, const Hyper& hyper,
                         std::size_t s);
Value build_hybrid2_loss(Tape& tape, const Mlp& enc, const Mlp& dec, const Tensor& x,
                         const std::vector<int>& workload_label,
                         const std::vector<int>& config_label, const Hyper& hyper);

// ---------------------------------------------------------------------
// Embedding architecture (latency-supervised workload rows)

class EmbeddingArchModel {
public:
    ParamStore store;
    std::vector<std::string> workload_ids;
    std::vector<int> z_param_ids;  // aligned with workload_ids
    Mlp net;                       // (k+s) -> ... -> 1
    std::size_t k = 0;
    std::size_t s = 0;
    Hyper hyper;
    std::vector<double> epoch_losses;

    int row_index(const std::string& workload_id) const;  // -1 if unknown
    std::vector<double> embedding_of(const std::string& workload_id) const;
    // Scaled-latency prediction; throws for unknown workloads.
    double predict_scaled(const std::string& workload_id,
                          const std::vector<double>& config) const;
    double predict_scaled_row(const std::vector<double>& z,
                              const std::vector<double>& config) const;

    // Adds a row for a new workload and optimizes only that row against
    // its observations; every other parameter stays bit-identical.
    // Requires at least k observations.
    void incremental_embed(const std::string& workload_id,
                           const TraceSet& scaled_obs, std::uint64_t seed);

    nlohmann::ordered_json to_json() const;
    static EmbeddingArchModel from_json(const nlohmann::ordered_json& j);
};

EmbeddingArchModel train_embedding_arch(const TraceSet& scaled_train, const Hyper& hyper);

// ---------------------------------------------------------------------
// Helpers

Tensor metrics_matrix(const TraceSet& t);
Tensor configs_matrix(const TraceSet& t);

}  // namespace embtune
