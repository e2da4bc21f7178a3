#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "embtune/embedders.hpp"
#include "embtune/synthbench.hpp"

using namespace embtune;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor t(r, c);
    for (double& v : t.v) v = d(rng);
    return t;
}

Tensor random_covariance(std::size_t n, std::uint64_t seed) {
    const Tensor x = random_matrix(n + 3, n, seed);
    Tensor cov(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < x.rows(); ++r) s += x.at(r, i) * x.at(r, j);
            cov.at(i, j) = s;
        }
    }
    return cov;
}

// Independent eigen oracle: power iteration with deflation. Only valid
// for symmetric PSD matrices with separated eigenvalues.
std::pair<std::vector<double>, std::vector<std::vector<double>>> power_eigen(
    Tensor a, std::size_t k, std::uint64_t seed) {
    const std::size_t n = a.rows();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<double> vals;
    std::vector<std::vector<double>> vecs;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> v(n);
        for (double& x : v) x = gauss(rng);
        for (int it = 0; it < 20000; ++it) {
            std::vector<double> av(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) av[i] += a.at(i, j) * v[j];
            }
            double norm = 0.0;
            for (double x : av) norm += x * x;
            norm = std::sqrt(norm);
            for (std::size_t i = 0; i < n; ++i) v[i] = av[i] / norm;
        }
        double lambda = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) lambda += v[i] * a.at(i, j) * v[j];
        }
        vals.push_back(lambda);
        vecs.push_back(v);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) a.at(i, j) -= lambda * v[i] * v[j];
        }
    }
    return {vals, vecs};
}

TraceSet tiny_traces(std::size_t n_workloads = 3, std::size_t n_configs = 4,
                     std::size_t shared = 2, std::uint64_t seed = 1) {
    // scaled-domain toy set with a shared config prefix
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    TraceSet t;
    t.knob_names = {"k_a", "k_b"};
    t.metric_names = {"m_0", "m_1", "m_2"};
    std::vector<std::vector<double>> shared_cfgs;
    for (std::size_t i = 0; i < shared; ++i) shared_cfgs.push_back({d(rng), d(rng)});
    for (std::size_t w = 0; w < n_workloads; ++w) {
        const double base = 0.2 + 0.2 * static_cast<double>(w);
        for (std::size_t c = 0; c < n_configs; ++c) {
            Observation o;
            o.workload_id = "w" + std::to_string(w);
            o.config = c < shared ? shared_cfgs[c]
                                  : std::vector<double>{d(rng), d(rng)};
            o.metrics = {base + 0.3 * o.config[0], base * base + 0.2 * o.config[1],
                         0.5 * base + 0.1 * d(rng)};
            o.latency = 0.1 + base + 0.4 * o.config[0];
            t.observations.push_back(o);
        }
    }
    return t;
}

Hyper tiny_hyper() {
    Hyper h;
    h.k = 2;
    h.hidden = {6};
    h.epochs = 3;
    h.batch = 4;
    h.seed = 3;
    return h;
}

}  // namespace

TEST_CASE("jacobi matches the power-iteration oracle on random covariances") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        for (std::size_t n : {std::size_t{3}, std::size_t{5}, std::size_t{8}}) {
            const Tensor cov = random_covariance(n, seed * 10 + n);
            auto [vals, vecs] = jacobi_eigensolve(cov);
            auto [ovals, ovecs] = power_eigen(cov, std::min<std::size_t>(3, n), seed + 77);
            for (std::size_t c = 0; c < ovals.size(); ++c) {
                CHECK(std::fabs(vals[c] - ovals[c]) <
                      1e-8 * std::max(1.0, std::fabs(ovals[c])));
                double dot = 0.0;
                for (std::size_t r = 0; r < n; ++r) dot += vecs.at(r, c) * ovecs[c][r];
                CHECK(std::fabs(std::fabs(dot) - 1.0) < 1e-8);
            }
        }
    }
}

TEST_CASE("pca: collinear data, k=1") {
    Tensor x(3, 2);
    x.at(1, 0) = x.at(1, 1) = 1.0;
    x.at(2, 0) = x.at(2, 1) = 2.0;
    const PcaEmbedder e = fit_pca(x, 1);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::fabs(e.components.at(0, 0) - inv_sqrt2) < 1e-9);
    CHECK(std::fabs(e.components.at(0, 1) - inv_sqrt2) < 1e-9);
    // all variance on the first component
    CHECK(e.eigenvalues[0] > 0.0);
    for (std::size_t r = 0; r < 3; ++r) {
        const std::vector<double> row{x.at(r, 0), x.at(r, 1)};
        const auto rec = e.reconstruct(e.encode(row));
        CHECK(std::fabs(rec[0] - row[0]) < 1e-8);
        CHECK(std::fabs(rec[1] - row[1]) < 1e-8);
    }
}

TEST_CASE("pca: k=p reconstructs exactly; k too large throws") {
    const Tensor x = random_matrix(12, 4, 5);
    const PcaEmbedder e = fit_pca(x, 4);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::vector<double> row(x.row_ptr(r), x.row_ptr(r) + 4);
        const auto rec = e.reconstruct(e.encode(row));
        for (std::size_t c = 0; c < 4; ++c) CHECK(std::fabs(rec[c] - row[c]) < 1e-9);
    }
    CHECK_THROWS_AS(fit_pca(x, 5), std::invalid_argument);
}

TEST_CASE("pca: sign convention and eigenvalue ordering") {
    const Tensor x = random_matrix(20, 5, 9);
    const PcaEmbedder e = fit_pca(x, 5);
    for (std::size_t c = 1; c < 5; ++c) CHECK(e.eigenvalues[c - 1] >= e.eigenvalues[c]);
    for (std::size_t c = 0; c < 5; ++c) {
        double best = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            if (std::fabs(e.components.at(c, i)) > std::fabs(best)) {
                best = e.components.at(c, i);
            }
        }
        CHECK(best > 0.0);
    }
}

TEST_CASE("kpca: in-sample encoding matches the fitted projection") {
    const Tensor x = random_matrix(10, 3, 21);
    const KpcaEmbedder e = fit_kpca(x, 3, 0.7);
    // expected projection of training point i: sum_j Kc(i,j) alpha(j,c)
    const std::size_t n = x.rows();
    auto kernel = [&](std::size_t i, std::size_t j) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            const double t = x.at(i, c) - x.at(j, c);
            d2 += t * t;
        }
        return std::exp(-0.7 * d2);
    };
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(x.row_ptr(i), x.row_ptr(i) + 3);
        const auto z = e.encode(row);
        for (std::size_t c = 0; c < e.alphas.cols(); ++c) {
            double expect = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double kc = kernel(i, j) - e.k_row_means[i] - e.k_row_means[j] + e.k_mean;
                expect += kc * e.alphas.at(j, c);
            }
            CHECK(std::fabs(z[c] - expect) < 1e-8);
        }
    }
}

TEST_CASE("kpca: small gamma approximates linear pca up to scale and sign") {
    const Tensor x = random_matrix(12, 2, 33);
    const PcaEmbedder pca = fit_pca(x, 1);
    const KpcaEmbedder kpca = fit_kpca(x, 1, 1e-6);
    std::vector<double> a, b;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::vector<double> row(x.row_ptr(r), x.row_ptr(r) + 2);
        a.push_back(pca.encode(row)[0]);
        b.push_back(kpca.encode(row)[0]);
    }
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
        sab += a[i] * b[i];
    }
    CHECK(std::fabs(sab) / std::sqrt(saa * sbb) > 0.999);
}

TEST_CASE("kpca: preconditions") {
    const Tensor x = random_matrix(5, 2, 4);
    CHECK_THROWS_AS(fit_kpca(x, 6, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(fit_kpca(x, 2, 0.0), std::invalid_argument);
}

TEST_CASE("triplet_loss closed forms") {
    const std::vector<double> z00{0.0, 0.0};
    CHECK(triplet_loss(z00, z00, z00, 0.5) == 0.5);
    CHECK(triplet_loss({0, 0}, {1, 0}, {2, 0}, 0.5) == 0.0);
    CHECK(triplet_loss({0, 0}, {1, 0}, {1, 0}, 0.5) == 0.5);
}

TEST_CASE("snn_loss: equal embeddings with one partner each gives zero") {
    const std::vector<std::vector<double>> z(4, {1.5, -0.5});
    const std::vector<int> wl{0, 0, 1, 1};
    const std::vector<int> cl{0, 1, 0, 1};
    CHECK(std::fabs(snn_loss(z, wl, cl, 1.0)) < 1e-12);
}

TEST_CASE("snn_loss: matches a direct sum-of-exponentials oracle") {
    const std::vector<std::vector<double>> z{{0, 0}, {0, 1}, {3, 0}, {3, 1}};
    const std::vector<int> wl{0, 0, 1, 1};
    const std::vector<int> cl{0, 1, 0, 1};
    const double T = 1.0;
    auto d2 = [&](std::size_t i, std::size_t j) {
        const double dx = z[i][0] - z[j][0];
        const double dy = z[i][1] - z[j][1];
        return dx * dx + dy * dy;
    };
    double expect = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            if (j == i) continue;
            if (wl[j] == wl[i] && cl[j] != cl[i]) num += std::exp(-d2(i, j) / T);
            if (wl[j] != wl[i] && cl[j] != cl[i]) den += std::exp(-d2(i, j) / T);
        }
        expect += -std::log(num / den);
    }
    expect /= 4.0;
    CHECK(std::fabs(snn_loss(z, wl, cl, T) - expect) < 1e-9);
}

TEST_CASE("snn_loss: decreasing in the separation distance") {
    const std::vector<int> wl{0, 0, 1, 1};
    const std::vector<int> cl{0, 1, 0, 1};
    auto batch = [](double d) {
        return std::vector<std::vector<double>>{{0, 0}, {0, 0}, {d, 0}, {d, 0}};
    };
    const double near = snn_loss(batch(1.0), wl, cl, 1.0);
    const double far = snn_loss(batch(5.0), wl, cl, 1.0);
    CHECK(far < near);
    CHECK(far < 0.0);
}

TEST_CASE("snn_loss: empty numerator or denominator is an error") {
    // two workloads, one config each: no same-workload partner
    CHECK_THROWS_AS(snn_loss({{0, 0}, {1, 1}}, {0, 1}, {0, 1}, 1.0),
                    std::invalid_argument);
    // one workload only: no different-workload partner
    CHECK_THROWS_AS(snn_loss({{0, 0}, {1, 1}}, {0, 0}, {0, 1}, 1.0),
                    std::invalid_argument);
}

TEST_CASE("mine_triplets: enumeration, invariants, determinism") {
    const TraceSet t = tiny_traces(2, 4, 2, 5);
    const auto pool = shared_pool_configs(t);
    REQUIRE(pool.size() == 2);
    const auto triplets = mine_triplets(t, pool, 11);
    CHECK(triplets.size() == 4);  // 2 workloads x 2 shared configs
    for (const auto& tr : triplets) {
        const auto& a = t.observations[tr.anchor];
        const auto& p = t.observations[tr.positive];
        const auto& n = t.observations[tr.negative];
        CHECK(a.workload_id == p.workload_id);
        CHECK(a.config != p.config);
        CHECK(a.workload_id != n.workload_id);
        CHECK(a.config == n.config);
    }
    const auto again = mine_triplets(t, pool, 11);
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        CHECK(triplets[i].anchor == again[i].anchor);
        CHECK(triplets[i].positive == again[i].positive);
        CHECK(triplets[i].negative == again[i].negative);
    }
}

TEST_CASE("mine_triplets: missing shared config and single workload are errors") {
    TraceSet t = tiny_traces(2, 4, 2, 5);
    const auto pool = shared_pool_configs(t);
    TraceSet crippled = t;
    // remove workload w1's first shared-pool observation
    for (std::size_t i = 0; i < crippled.n(); ++i) {
        if (crippled.observations[i].workload_id == "w1" &&
            crippled.observations[i].config == pool[0]) {
            crippled.observations.erase(crippled.observations.begin() + i);
            break;
        }
    }
    CHECK_THROWS_WITH_AS(mine_triplets(crippled, pool, 1), doctest::Contains("w1"),
                         std::invalid_argument);

    TraceSet lone;
    lone.knob_names = t.knob_names;
    lone.metric_names = t.metric_names;
    for (const auto& o : t.observations) {
        if (o.workload_id == "w0") lone.observations.push_back(o);
    }
    CHECK_THROWS_AS(mine_triplets(lone, shared_pool_configs(lone), 1),
                    std::invalid_argument);
}

TEST_CASE("contractive penalty: single linear layer equals squared Frobenius norm") {
    ParamStore store;
    Mlp enc = Mlp::create(store, "e", {3, 2}, Activation::Tanh, Activation::Identity, 7);
    double fro2 = 0.0;
    for (double v : store.value(enc.w_ids[0]).v) fro2 += v * v;
    Tape tape(&store);
    const Tensor x = random_matrix(4, 3, 13);
    const double pen = tape.scalar_value(build_contractive_penalty(tape, enc, x, 0, 2));
    CHECK(std::fabs(pen - fro2) < 1e-9);
}

TEST_CASE("contractive penalty: identity encoder on k inputs equals k") {
    ParamStore store;
    Mlp enc = Mlp::create(store, "e", {3, 3}, Activation::Tanh, Activation::Identity, 7);
    Tensor eye(3, 3);
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    store.value(enc.w_ids[0]) = eye;
    store.value(enc.b_ids[0]) = Tensor(1, 3, 0.0);
    Tape tape(&store);
    const double pen = tape.scalar_value(
        build_contractive_penalty(tape, enc, random_matrix(2, 3, 1), 0, 3));
    CHECK(std::fabs(pen - 3.0) < 1e-9);
}

TEST_CASE("contractive penalty: matches finite-difference Jacobian on tanh encoders") {
    ParamStore store;
    Mlp enc = Mlp::create(store, "e", {4, 5, 3}, Activation::Tanh, Activation::Identity, 2);
    const std::size_t slice = 1, k = 2;
    const Tensor x = random_matrix(1, 4, 8);
    Tape tape(&store);
    const double pen =
        tape.scalar_value(build_contractive_penalty(tape, enc, x, slice, k));

    const double h = 1e-6;
    double fd = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
        Tensor xp = x, xm = x;
        xp.at(0, c) += h;
        xm.at(0, c) -= h;
        const Tensor op = enc.forward_plain(store, xp);
        const Tensor om = enc.forward_plain(store, xm);
        for (std::size_t r = slice; r < slice + k; ++r) {
            const double j = (op.at(0, r) - om.at(0, r)) / (2.0 * h);
            fd += j * j;
        }
    }
    CHECK(std::fabs(pen - fd) < 1e-4 * std::max(1.0, fd));
}

TEST_CASE("contractive training rejects relu encoders via the penalty builder") {
    ParamStore store;
    Mlp enc = Mlp::create(store, "e", {3, 4, 2}, Activation::Relu, Activation::Identity, 7);
    Tape tape(&store);
    CHECK_THROWS_AS(build_contractive_penalty(tape, enc, random_matrix(1, 3, 1), 0, 2),
                    std::invalid_argument);
}

TEST_CASE("beta-vae KL closed forms via the beta ablation") {
    // Encoder fixed to the identity: input (mu, logvar) passes straight through.
    ParamStore store;
    Mlp enc = Mlp::create(store, "e", {2, 2}, Activation::Tanh, Activation::Identity, 1);
    Mlp dec = Mlp::create(store, "d", {1, 2}, Activation::Tanh, Activation::Identity, 2);
    Tensor eye(2, 2);
    eye.at(0, 0) = eye.at(1, 1) = 1.0;
    store.value(enc.w_ids[0]) = eye;
    store.value(enc.b_ids[0]) = Tensor(1, 2, 0.0);
    const Tensor eps(1, 1, 0.37);

    auto loss_at = [&](double mu, double logvar, double beta) {
        Tensor x(1, 2);
        x.at(0, 0) = mu;
        x.at(0, 1) = logvar;
        Tape tape(&store);
        return tape.scalar_value(build_beta_vae_loss(tape, enc, dec, x, eps, beta, 1));
    };
    // mu=0, sigma=1 -> KL = 0
    CHECK(std::fabs(loss_at(0.0, 0.0, 1.0) - loss_at(0.0, 0.0, 0.0)) < 1e-9);
    // mu=1, sigma=1, k=1 -> KL = 0.5
    CHECK(std::fabs((loss_at(1.0, 0.0, 1.0) - loss_at(1.0, 0.0, 0.0)) - 0.5) < 1e-9);
}

TEST_CASE("custom AE loss: gamma=0 is the plain reconstruction objective") {
    ParamStore store;
    Mlp enc = Mlp::create(store, "e", {3, 4}, Activation::Tanh, Activation::Identity, 3);
    Mlp dec = Mlp::create(store, "d", {4, 3}, Activation::Tanh, Activation::Identity, 4);
    const Tensor x = random_matrix(5, 3, 6);
    const Tensor v = random_matrix(5, 2, 7);
    Tape tape(&store);
    const double l0 =
        tape.scalar_value(build_custom_ae_loss(tape, enc, dec, x, v, 0.0, 2));
    // manual reconstruction loss
    const Tensor recon = dec.forward_plain(store, enc.forward_plain(store, x));
    double manual = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        manual += (recon.v[i] - x.v[i]) * (recon.v[i] - x.v[i]);
    }
    manual /= static_cast<double>(x.rows());
    CHECK(std::fabs(l0 - manual) < 1e-12);
}

TEST_CASE("hybrid1 loss: gamma=0, lambda=0 equals the plain triplet term") {
    ParamStore store;
    Mlp enc = Mlp::create(store, "e", {3, 4}, Activation::Tanh, Activation::Identity, 3);
    Mlp dec = Mlp::create(store, "d", {4, 3}, Activation::Tanh, Activation::Identity, 4);
    const Tensor xa = random_matrix(3, 3, 1), xp = random_matrix(3, 3, 2),
                 xn = random_matrix(3, 3, 3);
    const Tensor va = random_matrix(3, 2, 4), vp = random_matrix(3, 2, 5),
                 vn = random_matrix(3, 2, 6);
    Hyper h;
    h.k = 2;
    h.gamma = 0.0;
    h.lambda = 0.0;
    h.alpha = 0.7;
    Tape t1(&store);
    const double full = t1.scalar_value(
        build_hybrid1_loss(t1, enc, dec, xa, xp, xn, va, vp, vn, h, 2));
    Tape t2(&store);
    const double plain =
        t2.scalar_value(build_triplet_term(t2, enc, xa, xp, xn, 0.7, 2, 2));
    CHECK(std::fabs(full - plain) < 1e-12);
}

TEST_CASE("hybrid2 loss: lambda=0 is the plain autoencoder objective") {
    ParamStore store;
    Mlp enc = Mlp::create(store, "e", {3, 2}, Activation::Tanh, Activation::Identity, 3);
    Mlp dec = Mlp::create(store, "d", {2, 3}, Activation::Tanh, Activation::Identity, 4);
    const Tensor x = random_matrix(4, 3, 9);
    const std::vector<int> wl{0, 0, 1, 1};
    const std::vector<int> cl{0, 1, 2, 3};
    Hyper h;
    h.lambda = 0.0;
    Tape tape(&store);
    const double loss =
        tape.scalar_value(build_hybrid2_loss(tape, enc, dec, x, wl, cl, h));
    const Tensor recon = dec.forward_plain(store, enc.forward_plain(store, x));
    double manual = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        manual += (recon.v[i] - x.v[i]) * (recon.v[i] - x.v[i]);
    }
    manual /= static_cast<double>(x.rows());
    CHECK(std::fabs(loss - manual) < 1e-12);
}

TEST_CASE("snn gradient vanishes as the temperature grows") {
    ParamStore store;
    const int z = store.add("z", random_matrix(4, 2, 17, -2.0, 2.0));
    const std::vector<int> wl{0, 0, 1, 1};
    const std::vector<int> cl{0, 1, 2, 3};
    auto max_grad = [&](double temperature) {
        Tape tape(&store);
        Value loss = build_snn_term(tape, tape.param(z), wl, cl, temperature);
        tape.backward(loss);
        double m = 0.0;
        for (double g : tape.grad_of_param(z).v) m = std::max(m, std::fabs(g));
        return m;
    };
    const double g1 = max_grad(1.0);
    const double ghuge = max_grad(1e6);
    CHECK(ghuge < 1e-4);
    CHECK(ghuge < g1 * 1e-3);
}

TEST_CASE("loss gradients pass grad_check on small instances") {
    const TraceSet t = tiny_traces();
    const Hyper h = tiny_hyper();
    const Tensor x = metrics_matrix(t);
    const Tensor v = configs_matrix(t);
    const std::size_t s = t.knob_count();

    SUBCASE("custom AE") {
        ParamStore store;
        Mlp enc = Mlp::create(store, "e", {3, 5, s + 2}, Activation::Tanh,
                              Activation::Identity, 1);
        Mlp dec = Mlp::create(store, "d", {s + 2, 5, 3}, Activation::Tanh,
                              Activation::Identity, 2);
        std::vector<int> ids = enc.param_ids();
        const auto dids = dec.param_ids();
        ids.insert(ids.end(), dids.begin(), dids.end());
        CHECK(grad_check(store, ids, [&](Tape& tape) {
                  return build_custom_ae_loss(tape, enc, dec, x, v, 0.8, s);
              }) < 1e-4);
    }
    SUBCASE("contractive penalty") {
        ParamStore store;
        Mlp enc = Mlp::create(store, "e", {3, 4, s + 2}, Activation::Tanh,
                              Activation::Identity, 5);
        CHECK(grad_check(store, enc.param_ids(), [&](Tape& tape) {
                  return build_contractive_penalty(tape, enc, x, s, 2);
              }) < 1e-4);
    }
    SUBCASE("beta vae") {
        ParamStore store;
        Mlp enc = Mlp::create(store, "e", {3, 5, 4}, Activation::Tanh,
                              Activation::Identity, 6);
        Mlp dec = Mlp::create(store, "d", {2, 5, 3}, Activation::Tanh,
                              Activation::Identity, 7);
        const Tensor eps = random_matrix(x.rows(), 2, 99);
        std::vector<int> ids = enc.param_ids();
        const auto dids = dec.param_ids();
        ids.insert(ids.end(), dids.begin(), dids.end());
        CHECK(grad_check(store, ids, [&](Tape& tape) {
                  return build_beta_vae_loss(tape, enc, dec, x, eps, 1.3, 2);
              }) < 1e-4);
    }
    SUBCASE("triplet and hybrid1") {
        ParamStore store;
        Mlp enc = Mlp::create(store, "e", {3, 4, s + 2}, Activation::Tanh,
                              Activation::Identity, 8);
        Mlp dec = Mlp::create(store, "d", {s + 2, 4, 3}, Activation::Tanh,
                              Activation::Identity, 9);
        const Tensor xa = random_matrix(3, 3, 1, 0.0, 1.0);
        const Tensor xp = random_matrix(3, 3, 2, 0.0, 1.0);
        const Tensor xn = random_matrix(3, 3, 3, 0.0, 1.0);
        const Tensor va = random_matrix(3, s, 4, 0.0, 1.0);
        const Tensor vp = random_matrix(3, s, 5, 0.0, 1.0);
        const Tensor vn = random_matrix(3, s, 6, 0.0, 1.0);
        // shrink the encoder so squared embedding distances stay ~1e-3:
        // margin 0.05 then keeps the hinge strictly active (never near its
        // kink) while the small loss value keeps finite-difference roundoff
        // well under the 1e-4 relative-error budget
        for (int id : enc.param_ids()) {
            for (double& v : store.value(id).v) v *= 0.05;
        }
        CHECK(grad_check(store, enc.param_ids(), [&](Tape& tape) {
                  return build_triplet_term(tape, enc, xa, xp, xn, 0.05, s, 2);
              }) < 1e-4);
        std::vector<int> ids = enc.param_ids();
        const auto dids = dec.param_ids();
        ids.insert(ids.end(), dids.begin(), dids.end());
        Hyper hh = h;
        hh.alpha = 0.05;
        CHECK(grad_check(store, ids, [&](Tape& tape) {
                  return build_hybrid1_loss(tape, enc, dec, xa, xp, xn, va, vp, vn, hh, s);
              }) < 1e-4);
    }
    SUBCASE("hybrid2 / snn") {
        ParamStore store;
        Mlp enc = Mlp::create(store, "e", {3, 4, 2}, Activation::Tanh,
                              Activation::Identity, 10);
        Mlp dec = Mlp::create(store, "d", {2, 4, 3}, Activation::Tanh,
                              Activation::Identity, 11);
        const Tensor xb = random_matrix(4, 3, 12, 0.0, 1.0);
        const std::vector<int> wl{0, 0, 1, 1};
        const std::vector<int> cl{0, 1, 2, 3};
        std::vector<int> ids = enc.param_ids();
        const auto dids = dec.param_ids();
        ids.insert(ids.end(), dids.begin(), dids.end());
        CHECK(grad_check(store, ids, [&](Tape& tape) {
                  return build_hybrid2_loss(tape, enc, dec, xb, wl, cl, h);
              }) < 1e-4);
    }
}

TEST_CASE("trainers: deterministic given the seed") {
    const TraceSet t = tiny_traces(3, 5, 2, 9);
    const Hyper h = tiny_hyper();
    auto m1 = train_siamese(t, h);
    auto m2 = train_siamese(t, h);
    REQUIRE(m1->store.count() == m2->store.count());
    for (std::size_t i = 0; i < m1->store.count(); ++i) {
        CHECK(m1->store.value(static_cast<int>(i)).v ==
              m2->store.value(static_cast<int>(i)).v);
    }
}

TEST_CASE("custom AE training reduces the loss") {
    const TraceSet t = tiny_traces(3, 6, 2, 13);
    Hyper h = tiny_hyper();
    h.epochs = 40;
    auto m = train_custom_ae(t, h);
    REQUIRE(m->epoch_losses.size() == 40);
    CHECK(m->epoch_losses.back() < m->epoch_losses.front());
    for (double l : m->epoch_losses) CHECK(std::isfinite(l));
}

TEST_CASE("nn embedder encodes deterministically and round-trips through json") {
    const TraceSet t = tiny_traces();
    auto m = train_custom_ae(t, tiny_hyper());
    const std::vector<double> x{0.3, 0.6, 0.1};
    const auto z1 = m->encode(x);
    CHECK(z1.size() == 2);
    CHECK(z1 == m->encode(x));
    CHECK_THROWS_AS(m->encode({0.1, 0.2}), std::invalid_argument);

    auto back = embedder_from_json(m->to_json());
    CHECK(back->encode(x) == z1);
}

TEST_CASE("pca/kpca embedders round-trip through json") {
    const Tensor x = random_matrix(9, 4, 50);
    const PcaEmbedder pca = fit_pca(x, 2);
    const KpcaEmbedder kpca = fit_kpca(x, 2, 0.4);
    const std::vector<double> probe{0.2, -0.1, 0.5, 0.9};
    CHECK(embedder_from_json(pca.to_json())->encode(probe) == pca.encode(probe));
    CHECK(embedder_from_json(kpca.to_json())->encode(probe) == kpca.encode(probe));
}

TEST_CASE("embedding arch: constant latency converges; lookup is observation-free") {
    TraceSet t;
    t.knob_names = {"k_a"};
    t.metric_names = {"m_0"};
    const double c = 0.6;
    for (int i = 0; i < 8; ++i) {
        Observation o;
        o.workload_id = "w0";
        o.config = {0.125 * i};
        o.metrics = {0.5};
        o.latency = c;
        t.observations.push_back(o);
    }
    Hyper h = tiny_hyper();
    h.epochs = 4000;
    h.lr = 5e-3;
    h.batch = 8;  // full batch: no shuffling noise near the optimum
    const EmbeddingArchModel m = train_embedding_arch(t, h);
    CHECK(m.epoch_losses.back() < 1e-4 * c * c);
    CHECK(m.embedding_of("w0") == m.embedding_of("w0"));
    CHECK_THROWS_AS(m.embedding_of("unknown"), std::invalid_argument);
}

TEST_CASE("embedding arch grad check") {
    const TraceSet t = tiny_traces(2, 3, 1, 21);
    ParamStore store;
    auto [z0, zb] = dense_init(1, 2, 3);
    (void)zb;
    const int zid = store.add("z", std::move(z0));
    Mlp net = Mlp::create(store, "n", {2 + t.knob_count(), 4, 1}, Activation::Tanh,
                          Activation::Identity, 5);
    const Tensor v = configs_matrix(t);
    Tensor y(t.n(), 1);
    for (std::size_t i = 0; i < t.n(); ++i) y.at(i, 0) = t.observations[i].latency;
    std::vector<int> ids = net.param_ids();
    ids.push_back(zid);
    CHECK(grad_check(store, ids, [&](Tape& tape) {
              Value z = tape.repeat_rows(tape.param(zid), t.n());
              Value in = tape.concat_cols(z, tape.constant(v));
              return mse_rows(tape, net.forward(tape, in), tape.constant(y));
          }) < 1e-4);
}

TEST_CASE("incremental embedding: frozen parameters stay bit-identical") {
    const TraceSet t = tiny_traces(3, 6, 2, 31);
    Hyper h = tiny_hyper();
    h.epochs = 30;
    EmbeddingArchModel m = train_embedding_arch(t, h);

    const auto net_ids = m.net.param_ids();
    std::vector<Tensor> before;
    for (int id : net_ids) before.push_back(m.store.value(id));
    std::vector<Tensor> rows_before;
    for (int id : m.z_param_ids) rows_before.push_back(m.store.value(id));

    TraceSet fresh;
    fresh.knob_names = t.knob_names;
    fresh.metric_names = t.metric_names;
    for (int i = 0; i < 4; ++i) {
        Observation o;
        o.workload_id = "w_new";
        o.config = {0.2 * i, 0.1};
        o.metrics = {0.1, 0.2, 0.3};
        o.latency = 0.4 + 0.05 * i;
        fresh.observations.push_back(o);
    }
    m.incremental_embed("w_new", fresh, 77);

    for (std::size_t i = 0; i < net_ids.size(); ++i) {
        CHECK(m.store.value(net_ids[i]).v == before[i].v);
    }
    for (std::size_t i = 0; i < rows_before.size(); ++i) {
        CHECK(m.store.value(m.z_param_ids[i]).v == rows_before[i].v);
    }
    CHECK(m.embedding_of("w_new").size() == h.k);
}

TEST_CASE("incremental embedding: fewer observations than k is an error") {
    const TraceSet t = tiny_traces(3, 6, 2, 31);
    Hyper h = tiny_hyper();
    h.k = 8;
    h.epochs = 2;
    EmbeddingArchModel m = train_embedding_arch(t, h);
    TraceSet five;
    five.knob_names = t.knob_names;
    five.metric_names = t.metric_names;
    for (int i = 0; i < 5; ++i) {
        Observation o;
        o.workload_id = "w_new";
        o.config = {0.2 * i, 0.3};
        o.metrics = {0.1, 0.2, 0.3};
        o.latency = 0.5;
        five.observations.push_back(o);
    }
    CHECK_THROWS_AS(m.incremental_embed("w_new", five, 1), std::invalid_argument);
}

TEST_CASE("incremental refit of a known workload stays competitive") {
    const TraceSet t = tiny_traces(3, 8, 2, 41);
    Hyper h = tiny_hyper();
    h.epochs = 200;
    h.lr = 5e-3;
    EmbeddingArchModel m = train_embedding_arch(t, h);

    TraceSet own;
    own.knob_names = t.knob_names;
    own.metric_names = t.metric_names;
    for (std::size_t i : t.indices_of("w1")) own.observations.push_back(t.observations[i]);

    auto mse_of = [&](const EmbeddingArchModel& model) {
        double total = 0.0;
        for (const auto& o : own.observations) {
            const double p = model.predict_scaled("w1", o.config);
            total += (p - o.latency) * (p - o.latency);
        }
        return total / static_cast<double>(own.observations.size());
    };
    const double original = mse_of(m);
    EmbeddingArchModel refit = m;
    // the refit optimizes only a 2-d row against a frozen net, so give
    // it enough full-batch steps to actually converge
    refit.hyper.epochs = 3000;
    refit.hyper.lr = 1e-2;
    refit.incremental_embed("w1", own, 5);
    CHECK(mse_of(refit) <= 2.0 * original + 1e-12);
}

TEST_CASE("embedding arch json round trip preserves predictions") {
    const TraceSet t = tiny_traces(3, 5, 2, 51);
    Hyper h = tiny_hyper();
    h.epochs = 10;
    const EmbeddingArchModel m = train_embedding_arch(t, h);
    const EmbeddingArchModel back = EmbeddingArchModel::from_json(m.to_json());
    const std::vector<double> cfg{0.4, 0.6};
    CHECK(back.predict_scaled("w0", cfg) == m.predict_scaled("w0", cfg));
    CHECK(back.embedding_of("w2") == m.embedding_of("w2"));
}

TEST_CASE("hyper: set parsing and json round trip") {
    Hyper h;
    h.set("k", "5");
    h.set("lr", "0.01");
    h.set("hidden", "16:8");
    CHECK(h.k == 5);
    CHECK(h.lr == 0.01);
    CHECK(h.hidden == std::vector<std::size_t>{16, 8});
    CHECK_THROWS_AS(h.set("nope", "1"), std::invalid_argument);
    const Hyper back = Hyper::from_json(h.to_json());
    CHECK(back.k == 5);
    CHECK(back.hidden == h.hidden);
    CHECK(back.lr == h.lr);
}

TEST_CASE("embed kind names round trip") {
    for (EmbedKind k : {EmbedKind::Identity, EmbedKind::Pca, EmbedKind::Kpca,
                        EmbedKind::EmbeddingArch, EmbedKind::CustomAe,
                        EmbedKind::ContractiveAe, EmbedKind::BetaVae, EmbedKind::Siamese,
                        EmbedKind::Hybrid1, EmbedKind::Hybrid2}) {
        CHECK(embed_kind_from_name(embed_kind_name(k)) == k);
    }
    CHECK_THROWS_AS(embed_kind_from_name("bogus"), std::invalid_argument);
}
