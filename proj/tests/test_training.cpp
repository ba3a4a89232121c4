#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>

#include "uwno/training.hpp"

#include "test_helpers.hpp"

using namespace uwno;
using uwno::test::grad_check;
using uwno::test::random_tensor;

namespace {

UwnoConfig tiny_model_config() {
    UwnoConfig c;
    c.spatial_dims = 1;
    c.resolution = {16};
    c.width = 4;
    c.proj_dim = 8;
    c.layers = 2;
    c.wavelet = "db1";
    c.level = 2;
    return c;
}

DatasetBundle tiny_dataset(std::uint64_t seed, std::int64_t n = 8) {
    return gen_advection(n, 16, 0.5, seed, 1, 0.0, n - 2);
}

}  // namespace

TEST_CASE("relative_l2 hand cases") {
    Rng rng(1);
    Tensor u = random_tensor({3, 5}, rng, 0.5, 1.5);
    CHECK(relative_l2(u, u).item() == 0.0);

    Tensor zero = Tensor::zeros({3, 5});
    CHECK(relative_l2(zero, u).item() == Catch::Approx(1.0).margin(1e-15));

    Tensor t = Tensor::from_data({1, 2}, {3, 4});
    Tensor p = Tensor::from_data({1, 2}, {3, 0});
    CHECK(relative_l2(p, t).item() == Catch::Approx(0.8).margin(1e-15));

    CHECK_THROWS_AS(relative_l2(zero, Tensor::zeros({3, 5})), NumericError);
    CHECK_THROWS_AS(relative_l2(Tensor::zeros({2, 2}), Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("relative_l2 is differentiable") {
    Rng rng(2);
    Tensor u = random_tensor({4, 6}, rng, 0.5, 1.5);
    Tensor p = random_tensor({4, 6}, rng, -1, 1, true);
    auto loss_fn = [&] { return relative_l2(p, u); };
    CHECK(grad_check(p, loss_fn) < 1e-5);
}

TEST_CASE("learning-rate schedule values are exact") {
    TrainConfig cfg;
    CHECK(std::abs(lr_at(0, cfg) - 0.001) < 1e-15);
    CHECK(std::abs(lr_at(50, cfg) - 0.0005) < 1e-15);
    CHECK(std::abs(lr_at(120, cfg) - 0.00025) < 1e-15);

    // piecewise constant, non-increasing, halving exactly at multiples of 50
    double prev = lr_at(0, cfg);
    for (int e = 1; e <= 200; ++e) {
        const double lr = lr_at(e, cfg);
        CHECK(lr <= prev);
        if (e % 50 == 0)
            CHECK(lr == Catch::Approx(prev / 2).epsilon(1e-15));
        else
            CHECK(lr == prev);
        prev = lr;
    }
    CHECK_THROWS_AS(lr_at(-1, cfg), ValueError);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    Tensor w = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    AdamOptimizer opt({{"w", w}});
    std::vector<double> before = w.data();
    opt.step(1e-3);  // no grad at all
    opt.step(1e-3);
    CHECK(w.data() == before);
}

TEST_CASE("adam: first step moves by about -lr sign(g)") {
    Tensor w = Tensor::scalar(0.0, true);
    AdamOptimizer opt({{"w", w}});
    Tensor loss = mul(w, 4.0);  // constant gradient 4
    loss.backward();
    const double lr = 0.01;
    opt.step(lr);
    // bias-corrected first step: m/(1-b1) = g, v/(1-b2) = g^2 -> -lr g/(|g|+eps)
    CHECK(w.data()[0] == Catch::Approx(-lr).epsilon(1e-6));
}

TEST_CASE("adam: converges on a quadratic") {
    Tensor w = Tensor::scalar(0.0, true);
    AdamOptimizer opt({{"w", w}});
    for (int i = 0; i < 2000; ++i) {
        Tensor d = sub(w, 3.0);
        Tensor loss = mul(d, d);
        w.zero_grad();
        loss.backward();
        opt.step(0.01);
        if (std::abs(w.data()[0] - 3.0) < 1e-3) break;
    }
    CHECK(std::abs(w.data()[0] - 3.0) < 1e-3);
}

TEST_CASE("adam: NaN gradient aborts with the parameter name") {
    Tensor w = Tensor::from_data({2}, {1.0, 2.0}, true);
    AdamOptimizer opt({{"my.param", w}});
    Tensor bad = Tensor::from_data({2}, {std::nan(""), 0.0});
    Tensor loss = sum(mul(w, bad));
    loss.backward();
    try {
        opt.step(1e-3);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("my.param") != std::string::npos);
    }
}

TEST_CASE("train: zero epochs returns the initial model and empty history") {
    DatasetBundle data = tiny_dataset(3);
    UwnoModel m(tiny_model_config(), 5);
    TrainConfig cfg;
    cfg.epochs = 0;
    auto before = m.named_parameters();
    std::vector<std::vector<double>> snap;
    for (auto& [n, t] : before) snap.push_back(t.data());
    TrainResult r = train(m, data, cfg);
    CHECK(r.history.empty());
    CHECK_FALSE(r.aborted);
    auto after = m.named_parameters();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i].second.data() == snap[i]);
}

TEST_CASE("train: same seed twice gives bit-identical losses") {
    auto run = [] {
        DatasetBundle data = tiny_dataset(3);
        UwnoModel m(tiny_model_config(), 7);
        TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 3;
        cfg.seed = 42;
        return train(m, data, cfg);
    };
    TrainResult a = run();
    TrainResult b = run();
    REQUIRE(a.history.size() == 2);
    for (std::size_t e = 0; e < 2; ++e) {
        CHECK(std::memcmp(&a.history[e].train_rel_l2, &b.history[e].train_rel_l2,
                          sizeof(double)) == 0);
        CHECK(std::memcmp(&a.history[e].test_rel_l2, &b.history[e].test_rel_l2,
                          sizeof(double)) == 0);
    }
}

TEST_CASE("train: loss is non-increasing early for most seeds (smoke)") {
    int good = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        DatasetBundle data = tiny_dataset(11);
        UwnoModel m(tiny_model_config(), seed);
        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.batch_size = 6;
        cfg.seed = seed;
        TrainResult r = train(m, data, cfg);
        bool mono = true;
        for (std::size_t e = 1; e < r.history.size(); ++e)
            if (r.history[e].train_rel_l2 > r.history[e - 1].train_rel_l2) mono = false;
        if (mono) ++good;
    }
    CHECK(good >= 9);
}

TEST_CASE("train: aborts on non-finite loss and keeps partial metrics") {
    DatasetBundle data = tiny_dataset(13);
    UwnoModel m(tiny_model_config(), 9);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 6;
    m.p1_w.data()[0] = std::nan("");
    TrainResult r = train(m, data, cfg);
    CHECK(r.aborted);
    CHECK(!r.abort_reason.empty());
}

TEST_CASE("evaluate: perfect and zero predictors") {
    DatasetBundle data = tiny_dataset(17);
    UwnoModel m(tiny_model_config(), 21);
    // a dataset whose targets are exactly the model outputs evaluates to 0
    Tensor outputs;
    {
        NoGradGuard ng;
        outputs = m.forward(data.inputs, data.grid);
    }
    CHECK(evaluate(m, data.inputs, outputs, data.grid) == 0.0);

    // zero projection weights force the zero predictor: error 1.0
    UwnoModel z(tiny_model_config(), 22);
    z.q2_w.data().assign(z.q2_w.numel(), 0.0);
    z.q2_b.data().assign(z.q2_b.numel(), 0.0);
    CHECK(evaluate(z, data.inputs, data.outputs, data.grid) ==
          Catch::Approx(1.0).margin(1e-15));

    CHECK_THROWS_AS(evaluate(m, slice(data.inputs, 0, 0, 0), outputs, data.grid), ValueError);
}

TEST_CASE("evaluate is invariant to the batch size and pure") {
    DatasetBundle data = tiny_dataset(19);
    UwnoModel m(tiny_model_config(), 23);
    const double e1 = evaluate(m, data.inputs, data.outputs, data.grid, 1);
    const double e20 = evaluate(m, data.inputs, data.outputs, data.grid, 20);
    const double e3 = evaluate(m, data.inputs, data.outputs, data.grid, 3);
    CHECK(std::abs(e1 - e20) < 1e-12);
    CHECK(std::abs(e1 - e3) < 1e-12);
    const double again = evaluate(m, data.inputs, data.outputs, data.grid, 20);
    CHECK(std::memcmp(&again, &e20, sizeof(double)) == 0);
}

TEST_CASE("checkpoint roundtrip preserves evaluation bit-exactly") {
    DatasetBundle data = tiny_dataset(23);
    UwnoModel m(tiny_model_config(), 31);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 6;
    cfg.seed = 1;
    train(m, data, cfg);
    const double before = evaluate(m, data.inputs, data.outputs, data.grid);
    const std::string path = "train_ckpt_roundtrip.uwno";
    m.save(path);
    UwnoModel r = UwnoModel::load(path);
    const double after = evaluate(r, data.inputs, data.outputs, data.grid);
    CHECK(std::memcmp(&before, &after, sizeof(double)) == 0);
    std::remove(path.c_str());
}

TEST_CASE("metrics CSV has the fixed header and survives a roundtrip") {
    MetricHistory h;
    h.push_back({0, 0.5, 0.6, 1e-3, 1.25});
    h.push_back({1, 0.25, 0.3, 1e-3, 1.5});
    CsvTable t = metrics_to_csv(h);
    REQUIRE(t.header ==
            std::vector<std::string>{"epoch", "train_rel_l2", "test_rel_l2", "lr", "seconds"});
    write_csv("metrics_roundtrip_test.csv", t);
    CsvTable back = read_csv("metrics_roundtrip_test.csv");
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0][1] == 0.5);
    CHECK(back.rows[1][3] == 1e-3);
    std::remove("metrics_roundtrip_test.csv");
}
