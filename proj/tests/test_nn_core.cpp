#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "embtune/nn.hpp"

using namespace embtune;

TEST_CASE("backward: loss = x^2 at x=3 gives gradient 6") {
    ParamStore store;
    const int x = store.add("x", Tensor::scalar(3.0));
    Tape tape(&store);
    Value xv = tape.param(x);
    Value loss = tape.mul(xv, xv);
    tape.backward(loss);
    CHECK(tape.grad_of_param(x).v[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar losses") {
    ParamStore store;
    const int x = store.add("x", Tensor::row({1.0, 2.0}));
    Tape tape(&store);
    Value v = tape.param(x);
    CHECK_THROWS(tape.backward(v));
}

TEST_CASE("backward: loss = sum(x W) gradient w.r.t. W broadcasts x") {
    ParamStore store;
    const int w = store.add("w", Tensor(2, 3, 0.5));
    Tape tape(&store);
    Tensor x(1, 2);
    x.at(0, 0) = 2.0;
    x.at(0, 1) = -1.0;
    Value loss = tape.sum(tape.matmul(tape.constant(x), tape.param(w)));
    tape.backward(loss);
    const Tensor g = tape.grad_of_param(w);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(g.at(0, c) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(g.at(1, c) == doctest::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("grad_check: quadratic and linear closed cases") {
    ParamStore store;
    const int x = store.add("x", Tensor::scalar(3.0));
    const double err_sq = grad_check(store, {x}, [&](Tape& t) {
        Value v = t.param(x);
        return t.mul(v, v);
    });
    CHECK(err_sq < 1e-6);

    ParamStore store2;
    const int y = store2.add("y", Tensor::row({1.0, -2.0, 0.5}));
    const double err_lin = grad_check(store2, {y}, [&](Tape& t) {
        return t.sum(t.scale(t.param(y), 4.0));
    });
    CHECK(err_lin < 1e-9);
}

TEST_CASE("grad_check: random 2-layer tanh MLP vs finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ParamStore store;
        Mlp mlp = Mlp::create(store, "m", {4, 6, 2}, Activation::Tanh,
                              Activation::Identity, seed);
        std::mt19937_64 rng(seed + 99);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        Tensor x(3, 4);
        Tensor target(3, 2);
        for (double& v : x.v) v = d(rng);
        for (double& v : target.v) v = d(rng);
        const double err = grad_check(store, mlp.param_ids(), [&](Tape& t) {
            Value pred = mlp.forward(t, t.constant(x));
            return mse_rows(t, pred, t.constant(target));
        });
        CHECK(err < 1e-4);
    }
}

TEST_CASE("grad_check rejects non-finite losses") {
    ParamStore store;
    const int x = store.add("x", Tensor::scalar(0.0));
    CHECK_THROWS(grad_check(store, {x}, [&](Tape& t) {
        return t.log_of(t.param(x));  // log(0) = -inf
    }));
}

TEST_CASE("activation derivative identities") {
    ParamStore store;
    const int x = store.add("x", Tensor::row({-1.2, 0.0, 0.7, 2.5}));

    Tape t1(&store);
    Value th = t1.tanh_of(t1.param(x));
    t1.backward(t1.sum(th));
    const Tensor gt = t1.grad_of_param(x);
    for (std::size_t i = 0; i < 4; ++i) {
        const double y = std::tanh(store.value(x).v[i]);
        CHECK(gt.v[i] == doctest::Approx(1.0 - y * y).epsilon(1e-12));
    }

    Tape t2(&store);
    Value sg = t2.sigmoid_of(t2.param(x));
    t2.backward(t2.sum(sg));
    const Tensor gs = t2.grad_of_param(x);
    for (std::size_t i = 0; i < 4; ++i) {
        const double y = 1.0 / (1.0 + std::exp(-store.value(x).v[i]));
        CHECK(gs.v[i] == doctest::Approx(y * (1.0 - y)).epsilon(1e-12));
    }
}

TEST_CASE("dense_init: shapes, zero bias, determinism, Glorot bound") {
    auto [w, b] = dense_init(1, 1, 7);
    CHECK(w.shape == std::vector<std::size_t>{1, 1});
    CHECK(b.shape == std::vector<std::size_t>{1, 1});
    CHECK(b.v[0] == 0.0);

    auto [w1, b1] = dense_init(4, 4, 3);
    auto [w2, b2] = dense_init(4, 4, 3);
    CHECK(w1.v == w2.v);
    CHECK(b1.v == b2.v);

    auto [big, bias] = dense_init(100, 100, 11);
    (void)bias;
    const double bound = std::sqrt(6.0 / 200.0);
    for (double v : big.v) {
        CHECK(v <= bound);
        CHECK(v >= -bound);
    }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    ParamStore store;
    const int x = store.add("x", Tensor::row({1.0, 2.0}));
    Adam opt(store);
    const Tensor before = store.value(x);
    opt.step(store, {Tensor(1, 2, 0.0)});
    CHECK(store.value(x).v == before.v);
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adam: constant gradient moves opposite its sign") {
    ParamStore store;
    const int x = store.add("x", Tensor::scalar(0.0));
    Adam opt(store, {0.01, 0.9, 0.999, 1e-8});
    for (int i = 0; i < 50; ++i) opt.step(store, {Tensor::scalar(2.0)});
    CHECK(store.value(x).v[0] < 0.0);
}

TEST_CASE("adam: quadratic bowl converges") {
    ParamStore store;
    const int w = store.add("w", Tensor::row({1.0, -2.0, 0.5, 3.0}));
    Adam opt(store, {0.05, 0.9, 0.999, 1e-8});
    for (int i = 0; i < 500; ++i) {
        Tape tape(&store);
        Value loss = tape.sumsq(tape.param(w));
        tape.backward(loss);
        opt.step(store, all_grads(tape, store));
    }
    double norm = 0.0;
    for (double v : store.value(w).v) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("adam rejects gradient shape mismatches") {
    ParamStore store;
    store.add("x", Tensor::row({1.0, 2.0}));
    Adam opt(store);
    CHECK_THROWS(opt.step(store, {Tensor(2, 2, 0.0)}));
}

TEST_CASE("mse_rows: mean over rows of squared row distance") {
    ParamStore store;
    Tape tape(&store);
    Tensor a(2, 2);
    a.at(0, 0) = 1.0;
    a.at(0, 1) = 2.0;
    a.at(1, 0) = 0.0;
    a.at(1, 1) = 0.0;
    Tensor b(2, 2);  // zeros
    Value loss = mse_rows(tape, tape.constant(a), tape.constant(b));
    // (1 + 4 + 0 + 0) / 2 rows
    CHECK(tape.scalar_value(loss) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("parameter serialization round-trips bit-stable") {
    ParamStore store;
    Mlp::create(store, "m", {3, 5, 2}, Activation::Tanh, Activation::Identity, 42);
    const auto j = params_to_json(store);
    ParamStore back = params_from_json(j);
    REQUIRE(back.count() == store.count());
    for (std::size_t i = 0; i < store.count(); ++i) {
        const int id = static_cast<int>(i);
        CHECK(back.name(id) == store.name(id));
        CHECK(back.value(id).shape == store.value(id).shape);
        CHECK(back.value(id).v == store.value(id).v);
    }
    // second round trip is identical text
    CHECK(params_to_json(back).dump() == j.dump());
}

TEST_CASE("backward is deterministic") {
    ParamStore store;
    Mlp mlp = Mlp::create(store, "m", {4, 8, 1}, Activation::Tanh, Activation::Identity, 5);
    Tensor x(2, 4, 0.3);
    auto run = [&]() {
        Tape tape(&store);
        Value loss = tape.sum(mlp.forward(tape, tape.constant(x)));
        tape.backward(loss);
        return all_grads(tape, store);
    };
    const auto g1 = run();
    const auto g2 = run();
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i].v == g2[i].v);
}
