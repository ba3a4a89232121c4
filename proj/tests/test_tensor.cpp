#include <catch2/catch_amalgamated.hpp>

#include "uwno/conv.hpp"
#include "uwno/rng.hpp"
#include "uwno/tensor.hpp"

#include "test_helpers.hpp"

using namespace uwno;
using uwno::test::fd_gradient;
using uwno::test::grad_check;
using uwno::test::max_rel_err;
using uwno::test::random_tensor;

TEST_CASE("elementwise add/mul basics") {
    Tensor a = Tensor::from_data({2}, {1, 2});
    Tensor b = Tensor::from_data({2}, {3, 4});
    Tensor c = add(a, b);
    CHECK(c.data() == std::vector<double>{4, 6});

    Tensor x = Tensor::from_data({3}, {0.1, -2.5, 7.25});
    CHECK(bit_equal(mul(x, 1.0), x));
}

TEST_CASE("grad of sum(x*x)") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    Tensor loss = sum(mul(x, x));
    loss.backward();
    CHECK(x.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("shape mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    try {
        add(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
}

TEST_CASE("broadcast: scalar and singleton axes") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor s = Tensor::scalar(10.0);
    CHECK(add(a, s).data() == std::vector<double>{11, 12, 13, 14, 15, 16});
    CHECK(add(s, a).data() == std::vector<double>{11, 12, 13, 14, 15, 16});

    Tensor row = Tensor::from_data({1, 3}, {10, 20, 30});
    CHECK(add(a, row).data() == std::vector<double>{11, 22, 33, 14, 25, 36});

    // gradient reduces over the broadcast axis
    Tensor rowg = Tensor::from_data({1, 3}, {10, 20, 30}, true);
    Tensor loss = sum(mul(a, rowg));
    loss.backward();
    CHECK(rowg.grad() == std::vector<double>{1 + 4, 2 + 5, 3 + 6});
}

TEST_CASE("broadcast gradients match finite differences") {
    Rng rng(11);
    Tensor a = random_tensor({2, 3, 4}, rng, -1, 1, true);
    Tensor b = random_tensor({2, 1, 4}, rng, 0.4, 1.4, true);
    Tensor w = random_tensor({2, 3, 4}, rng);
    auto loss_fn = [&] { return sum(mul(w, div(a, b))); };
    CHECK(grad_check(a, loss_fn) < 1e-5);
    CHECK(grad_check(b, loss_fn) < 1e-5);
}

TEST_CASE("matmul identity and hand product") {
    Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Rng rng(3);
    Tensor b = random_tensor({3, 2}, rng);
    CHECK(max_abs_diff(matmul(eye, b), b) == 0.0);

    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor ones = Tensor::from_data({2, 1}, {1, 1});
    CHECK(matmul(a, ones).data() == std::vector<double>{3, 7});

    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})), ShapeError);
}

TEST_CASE("matmul gradient vs finite differences") {
    Rng rng(5);
    Tensor a = random_tensor({3, 4}, rng, -1, 1, true);
    Tensor b = random_tensor({4, 2}, rng, -1, 1, true);
    auto loss_fn = [&] { return sum(matmul(a, b)); };
    CHECK(grad_check(a, loss_fn) < 1e-6);
    CHECK(grad_check(b, loss_fn) < 1e-6);

    // batched variant with equal leading axes
    Tensor ab = random_tensor({2, 3, 4}, rng, -1, 1, true);
    Tensor bb = random_tensor({2, 4, 2}, rng, -1, 1, true);
    Tensor w = random_tensor({2, 3, 2}, rng);
    auto loss2 = [&] { return sum(mul(w, matmul(ab, bb))); };
    CHECK(grad_check(ab, loss2) < 1e-5);
    CHECK(grad_check(bb, loss2) < 1e-5);
}

TEST_CASE("linear layer value and gradients") {
    Rng rng(7);
    Tensor x = random_tensor({2, 5, 3}, rng, -1, 1, true);
    Tensor w = random_tensor({4, 3}, rng, -1, 1, true);
    Tensor b = random_tensor({4}, rng, -1, 1, true);
    Tensor y = linear(x, w, b);
    REQUIRE(y.shape() == Shape{2, 5, 4});
    // manual check of one output element
    double ref = b.data()[1];
    for (int i = 0; i < 3; ++i) ref += x.data()[(1 * 5 + 2) * 3 + i] * w.data()[1 * 3 + i];
    CHECK(y.data()[(1 * 5 + 2) * 4 + 1] == Catch::Approx(ref).epsilon(1e-14));

    Tensor wt = random_tensor({2, 5, 4}, rng);
    auto loss_fn = [&] { return sum(mul(wt, linear(x, w, b))); };
    CHECK(grad_check(x, loss_fn) < 1e-5);
    CHECK(grad_check(w, loss_fn) < 1e-5);
    CHECK(grad_check(b, loss_fn) < 1e-5);
}

TEST_CASE("conv1d identity kernel and hand case") {
    Tensor x = Tensor::from_data({1, 1, 4}, {1, 2, 3, 4});
    Tensor wid = Tensor::from_data({1, 1, 1}, {1});
    CHECK(max_abs_diff(conv1d(x, wid, 1, PaddingMode::None), x) == 0.0);

    Tensor w = Tensor::from_data({1, 1, 2}, {1, 1});
    Tensor y = conv1d(x, w, 1, PaddingMode::None);
    CHECK(y.shape() == Shape{1, 1, 3});
    CHECK(y.data() == std::vector<double>{3, 5, 7});
}

TEST_CASE("conv1d padding modes and stride") {
    Tensor x = Tensor::from_data({1, 1, 4}, {1, 2, 3, 4});
    Tensor w = Tensor::from_data({1, 1, 3}, {1, 1, 1});
    Tensor yz = conv1d(x, w, 1, PaddingMode::Zero);
    CHECK(yz.shape() == Shape{1, 1, 4});
    CHECK(yz.data() == std::vector<double>{3, 6, 9, 7});  // zero pad 1 each side
    Tensor yp = conv1d(x, w, 1, PaddingMode::Periodic);
    CHECK(yp.data() == std::vector<double>{7, 6, 9, 8});  // wraps 4|1 2 3 4|1
    Tensor ys = conv1d(x, w, 2, PaddingMode::Zero);
    CHECK(ys.shape() == Shape{1, 1, 2});

    Tensor wbig = Tensor::from_data({1, 1, 6}, {1, 1, 1, 1, 1, 1});
    CHECK_THROWS_AS(conv1d(x, wbig, 1, PaddingMode::None), ShapeError);
}

TEST_CASE("conv1d gradient wrt weights on random input") {
    Rng rng(13);
    Tensor x = random_tensor({1, 2, 8}, rng, -1, 1, true);
    Tensor w = random_tensor({3, 2, 3}, rng, -1, 1, true);
    Tensor wt = random_tensor({1, 3, 6}, rng);
    auto loss_fn = [&] { return sum(mul(wt, conv1d(x, w, 1, PaddingMode::None))); };
    CHECK(grad_check(w, loss_fn) < 1e-6);
    CHECK(grad_check(x, loss_fn) < 1e-6);
}

TEST_CASE("conv2d gradient vs finite differences") {
    Rng rng(17);
    Tensor x = random_tensor({1, 2, 6, 6}, rng, -1, 1, true);
    Tensor w = random_tensor({2, 2, 3, 3}, rng, -1, 1, true);
    Tensor b = random_tensor({2}, rng, -1, 1, true);
    Tensor wt = random_tensor({1, 2, 6, 6}, rng);
    auto loss_fn = [&] {
        return sum(mul(wt, conv2d_bias(x, w, b, 1, PaddingMode::Zero)));
    };
    CHECK(grad_check(x, loss_fn) < 1e-6);
    CHECK(grad_check(w, loss_fn) < 1e-6);
    CHECK(grad_check(b, loss_fn) < 1e-6);

    // periodic padding path
    auto loss_p = [&] {
        return sum(mul(wt, conv2d_bias(x, w, b, 1, PaddingMode::Periodic)));
    };
    CHECK(grad_check(x, loss_p) < 1e-6);
    CHECK(grad_check(w, loss_p) < 1e-6);
}

TEST_CASE("pointwise conv equals linear over channels") {
    Rng rng(19);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor w = random_tensor({5, 3, 1, 1}, rng);
    Tensor y = conv2d_pointwise(x, w);
    Tensor xl = to_channels_last(x);
    Tensor w2 = reshape(w, {5, 3});
    Tensor ref = to_channels_first(linear(xl, w2));
    CHECK(max_abs_diff(y, ref) < 1e-14);
}

TEST_CASE("avg_pool and upsample") {
    Tensor c = Tensor::full({1, 1, 4, 4}, 3.25);
    Tensor p = avg_pool2d(c);
    CHECK(p.shape() == Shape{1, 1, 2, 2});
    for (double v : p.data()) CHECK(v == 3.25);

    CHECK_THROWS_AS(avg_pool2d(Tensor::zeros({1, 1, 5, 4})), ShapeError);
    CHECK_THROWS_AS(avg_pool1d(Tensor::zeros({1, 1, 5})), ShapeError);

    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor u = upsample2x_2d(x);
    CHECK(u.shape() == Shape{1, 1, 4, 4});
    CHECK(u.data() == std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});

    Rng rng(23);
    Tensor xr = random_tensor({2, 3, 4, 6}, rng, -1, 1, true);
    Tensor wt = random_tensor({2, 3, 2, 3}, rng);
    auto loss_fn = [&] { return sum(mul(wt, avg_pool2d(xr))); };
    CHECK(grad_check(xr, loss_fn) < 1e-6);
    Tensor wt2 = random_tensor({2, 3, 8, 12}, rng);
    auto loss_up = [&] { return sum(mul(wt2, upsample2x_2d(xr))); };
    CHECK(grad_check(xr, loss_up) < 1e-6);
}

TEST_CASE("concat and slice") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_data({2, 1}, {5, 6});
    Tensor c = concat({a, b}, 1);
    CHECK(c.shape() == Shape{2, 3});
    CHECK(c.data() == std::vector<double>{1, 2, 5, 3, 4, 6});
    CHECK(max_abs_diff(slice(c, 1, 0, 2), a) == 0.0);
    CHECK(max_abs_diff(slice(c, 1, 2, 1), b) == 0.0);

    CHECK_THROWS_AS(concat({Tensor::zeros({2, 2, 3}), Tensor::zeros({2, 2, 4})}, 1), ShapeError);

    Rng rng(29);
    Tensor x = random_tensor({2, 3, 4}, rng, -1, 1, true);
    Tensor y = random_tensor({2, 2, 4}, rng, -1, 1, true);
    Tensor wt = random_tensor({2, 5, 4}, rng);
    auto loss_fn = [&] { return sum(mul(wt, concat({x, y}, 1))); };
    CHECK(grad_check(x, loss_fn) < 1e-6);
    CHECK(grad_check(y, loss_fn) < 1e-6);
}

TEST_CASE("permute and reshape gradients") {
    Rng rng(31);
    Tensor x = random_tensor({2, 3, 4, 5}, rng, -1, 1, true);
    Tensor p = permute(x, {0, 3, 1, 2});
    CHECK(p.shape() == Shape{2, 5, 3, 4});
    CHECK(max_abs_diff(permute(p, {0, 2, 3, 1}), x) == 0.0);

    Tensor wt = random_tensor({2, 5, 3, 4}, rng);
    auto loss_fn = [&] { return sum(mul(wt, permute(x, {0, 3, 1, 2}))); };
    CHECK(grad_check(x, loss_fn) < 1e-6);

    Tensor wt2 = random_tensor({6, 20}, rng);
    auto loss_rs = [&] { return sum(mul(wt2, reshape(x, {6, 20}))); };
    CHECK(grad_check(x, loss_rs) < 1e-6);
}

TEST_CASE("backward basics") {
    Tensor x = Tensor::from_data({2}, {1, 1}, true);
    Tensor loss = sum(mul(x, 3.0));
    loss.backward();
    CHECK(x.grad() == std::vector<double>{3, 3});

    CHECK_THROWS_AS(mul(x, 2.0).backward(), ShapeError);  // non-scalar

    Tensor det = Tensor::from_data({2}, {1, 1}, false);
    Tensor l2 = sum(mul(det, det));
    l2.backward();
    CHECK_FALSE(det.has_grad());
}

TEST_CASE("repeated backward accumulates leaf gradients") {
    Tensor x = Tensor::from_data({2}, {2, 5}, true);
    Tensor loss = sum(mul(x, x));
    loss.backward();
    std::vector<double> g1 = x.grad();
    loss.backward();
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(x.grad()[i] == Catch::Approx(2 * g1[i]).epsilon(1e-15));
}

TEST_CASE("diamond graph visits each op once") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    Tensor y = mul(x, x);
    Tensor z = add(y, y);  // y consumed twice
    Tensor loss = sum(z);
    loss.backward();
    CHECK(x.grad() == std::vector<double>{4, 8, 12});  // d/dx 2x^2 = 4x
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(37);
    const double alpha = 1.7, beta = -0.6;
    Tensor w = random_tensor({4}, rng);
    auto f = [&](Tensor& x) { return sum(mul(w, mul(x, x))); };
    auto g = [&](Tensor& x) { return sum(mul(x, exp(x))); };

    Tensor x1 = random_tensor({4}, rng, -1, 1, true);
    Tensor x2 = Tensor::from_data(x1.shape(), x1.data(), true);
    Tensor x3 = Tensor::from_data(x1.shape(), x1.data(), true);

    f(x1).backward();
    g(x2).backward();
    add(mul(f(x3), alpha), mul(g(x3), beta)).backward();
    for (std::size_t i = 0; i < x1.numel(); ++i)
        CHECK(std::abs(x3.grad()[i] - (alpha * x1.grad()[i] + beta * x2.grad()[i])) < 1e-12);
}

TEST_CASE("determinism: identical op sequences are bit-identical") {
    auto run = [] {
        Rng rng(1234);
        Tensor x = random_tensor({4, 5}, rng, -1, 1, true);
        Tensor w = random_tensor({5, 3}, rng);
        Tensor y = tanh(matmul(x, Tensor::from_data({5, 3}, w.data())));
        Tensor loss = mean(mul(y, y));
        loss.backward();
        return std::make_pair(loss.item(), x.grad());
    };
    auto [l1, g1] = run();
    auto [l2, g2] = run();
    CHECK(std::memcmp(&l1, &l2, sizeof(double)) == 0);
    CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("activation closed forms") {
    // GELU tanh approximation at a few points
    for (double v : {-1.5, -0.3, 0.0, 0.7, 2.0}) {
        Tensor x = Tensor::scalar(v);
        const double c = std::sqrt(2.0 / M_PI);
        const double ref = 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
        CHECK(gelu(x).item() == Catch::Approx(ref).margin(1e-15));
        const double sp = std::log1p(std::exp(v));
        CHECK(mish(x).item() == Catch::Approx(v * std::tanh(sp)).margin(1e-12));
    }
    CHECK(gelu(Tensor::scalar(0.0)).item() == 0.0);
    CHECK(mish(Tensor::scalar(0.0)).item() == 0.0);
}

TEST_CASE("finite differences agree for every primitive op") {
    Rng rng(41);
    Tensor w = random_tensor({16}, rng, 0.2, 1.0);

    auto check_unary = [&](const char* name, std::function<Tensor(const Tensor&)> op,
                           double lo, double hi) {
        Tensor x = random_tensor({16}, rng, lo, hi, true);
        auto loss_fn = [&] { return sum(mul(w, op(x))); };
        INFO(name);
        CHECK(grad_check(x, loss_fn) < 1e-5);
    };
    check_unary("neg", [](const Tensor& t) { return neg(t); }, -1, 1);
    check_unary("exp", [](const Tensor& t) { return exp(t); }, -1, 1);
    check_unary("tanh", [](const Tensor& t) { return tanh(t); }, -1, 1);
    check_unary("erf", [](const Tensor& t) { return erf(t); }, -1, 1);
    check_unary("gelu", [](const Tensor& t) { return gelu(t); }, -1, 1);
    check_unary("mish", [](const Tensor& t) { return mish(t); }, -1, 1);
    check_unary("sqrt", [](const Tensor& t) { return sqrt(t); }, 0.3, 1.0);
    check_unary("log", [](const Tensor& t) { return log(t); }, 0.3, 1.0);
    check_unary("pow2.5", [](const Tensor& t) { return pow(t, 2.5); }, 0.3, 1.0);

    auto check_binary = [&](const char* name,
                            std::function<Tensor(const Tensor&, const Tensor&)> op,
                            double blo, double bhi) {
        Tensor x = random_tensor({16}, rng, -1, 1, true);
        Tensor y = random_tensor({16}, rng, blo, bhi, true);
        auto loss_fn = [&] { return sum(mul(w, op(x, y))); };
        INFO(name);
        CHECK(grad_check(x, loss_fn) < 1e-5);
        CHECK(grad_check(y, loss_fn) < 1e-5);
    };
    check_binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, -1, 1);
    check_binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, -1, 1);
    check_binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, -1, 1);
    check_binary("div", [](const Tensor& a, const Tensor& b) { return div(a, b); }, 0.3, 1.0);
}

TEST_CASE("reductions") {
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    CHECK(sum(x).item() == 21.0);
    CHECK(mean(x).item() == Catch::Approx(3.5));
    Tensor s = sum_samplewise(x);
    CHECK(s.shape() == Shape{2});
    CHECK(s.data() == std::vector<double>{6, 15});

    Rng rng(43);
    Tensor xr = random_tensor({3, 4}, rng, -1, 1, true);
    Tensor w = random_tensor({3}, rng);
    auto loss_fn = [&] { return sum(mul(w, sum_samplewise(mul(xr, xr)))); };
    CHECK(grad_check(xr, loss_fn) < 1e-5);
}

TEST_CASE("two-layer model gradients vs finite differences") {
    Rng rng(47);
    Tensor x = random_tensor({4, 6}, rng);
    Tensor target = random_tensor({4, 2}, rng);
    Tensor w1 = random_tensor({8, 6}, rng, -0.5, 0.5, true);
    Tensor b1 = random_tensor({8}, rng, -0.5, 0.5, true);
    Tensor w2 = random_tensor({2, 8}, rng, -0.5, 0.5, true);
    Tensor b2 = random_tensor({2}, rng, -0.5, 0.5, true);
    auto loss_fn = [&] {
        Tensor h = tanh(linear(x, w1, b1));
        Tensor out = linear(h, w2, b2);
        Tensor d = sub(out, target);
        return mean(mul(d, d));
    };
    for (Tensor* p : {&w1, &b1, &w2, &b2}) CHECK(grad_check(*p, loss_fn, 1e-6) < 1e-5);
}

TEST_CASE("no-grad mode skips the tape") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    NoGradGuard ng;
    Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
}
