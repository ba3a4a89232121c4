#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "uwno/container.hpp"
#include "uwno/data.hpp"
#include "uwno/csv.hpp"
#include "uwno/fft.hpp"

#include "test_helpers.hpp"

using namespace uwno;
using uwno::test::random_tensor;

TEST_CASE("poisson closed form") {
    CHECK(poisson_solution(0, 0, 0.37, -0.82) == 0.0);
    CHECK(poisson_source(0, 0, 0.37, -0.82) == 0.0);
    // alpha=1, beta=0 at (0.5, 0): u = sin(pi/2) (1 + cos 0) = 2
    CHECK(poisson_solution(1, 0, 0.5, 0.0) == Catch::Approx(2.0).margin(1e-15));
    // boundary values vanish
    for (double t : {-0.6, 0.1, 0.9}) {
        CHECK(std::abs(poisson_solution(1.3, -0.8, 1.0, t)) < 1e-12);
        CHECK(std::abs(poisson_solution(1.3, -0.8, t, -1.0)) < 1e-12);
    }
}

TEST_CASE("poisson pairs satisfy the PDE (finite-difference oracle)") {
    // five-point Laplacian of u vs f at two resolutions: O(h^2) consistency
    auto residual = [](std::size_t res) {
        DatasetBundle b = gen_poisson(2, res, 99, 1);
        const double h = 2.0 / double(res - 1);
        const auto& u = b.outputs.data();
        const auto& f = b.inputs.data();
        double worst = 0;
        for (std::size_t i = 1; i + 1 < res; ++i)
            for (std::size_t j = 1; j + 1 < res; ++j) {
                const double lap = (u[(i + 1) * res + j] + u[(i - 1) * res + j] +
                                    u[i * res + j + 1] + u[i * res + j - 1] -
                                    4 * u[i * res + j]) /
                                   (h * h);
                worst = std::max(worst, std::abs(lap - f[i * res + j]));
            }
        return worst;
    };
    const double r33 = residual(33);
    const double r65 = residual(65);
    // 5-point Laplacian defect is h^2/12 (u_xxxx + u_yyyy); with |alpha|,
    // |beta| <= 2 the fourth derivatives are bounded by 2 (2 pi)^4 * 2
    const double m4 = 2.0 * std::pow(2.0 * M_PI, 4) * 2.0;
    CHECK(r33 < 10.0 * (2.0 / 32) * (2.0 / 32) * m4);
    const double ratio = r33 / r65;
    CHECK(ratio > 2.5);          // halving h divides the defect by about 4
    CHECK(ratio < 6.0);
}

TEST_CASE("poisson generator validation and determinism") {
    CHECK_THROWS_AS(gen_poisson(10, 4, 0), ValueError);
    CHECK_THROWS_AS(gen_poisson(1, 33, 0), ValueError);
    DatasetBundle a = gen_poisson(4, 16, 7);
    DatasetBundle b = gen_poisson(4, 16, 7);
    CHECK(bit_equal(a.inputs, b.inputs));
    CHECK(bit_equal(a.outputs, b.outputs));
    CHECK(a.n_train == 3);  // default 4/5 split, n - max(1, n/5)
    // grid spans [-1, 1] inclusive and is strictly increasing
    CHECK(a.grid.data()[0] == -1.0);
    CHECK(a.grid.data()[(15 * 16 + 15) * 2] == 1.0);
}

TEST_CASE("advection: full-period shift is the identity") {
    DatasetBundle b = gen_advection(3, 32, 1.0, 11, 1, 0.0, 2);
    CHECK(bit_equal(b.inputs, b.outputs));
}

TEST_CASE("advection: grid-multiple shift is an exact circular permutation") {
    const std::size_t res = 64;
    DatasetBundle b = gen_advection(2, res, 0.25, 5, 1, 0.0, 1);  // shift of 16 cells
    const auto& in = b.inputs.data();
    const auto& out = b.outputs.data();
    for (std::size_t s = 0; s < 2; ++s) {
        double mi = 0, mo = 0;
        for (std::size_t i = 0; i < res; ++i) {
            mi = std::max(mi, in[s * res + i]);
            mo = std::max(mo, out[s * res + i]);
            CHECK(out[s * res + i] == in[s * res + (i + res - 16) % res]);
        }
        CHECK(mi == mo);
    }
}

TEST_CASE("advection case 2: the t = 0 row is the initial condition") {
    DatasetBundle b = gen_advection(2, 40, 0.5, 13, 2, 0.0, 1);
    REQUIRE(b.inputs.shape() == Shape{2, 40, 40, 1});
    REQUIRE(b.outputs.shape() == Shape{2, 40, 40, 1});
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t x = 0; x < 40; ++x)
            CHECK(b.outputs.data()[(s * 40 + 0) * 40 + x] ==
                  b.inputs.data()[(s * 40 + 0) * 40 + x]);
    // grid channels are (x, t)
    CHECK(b.grid.data()[(3 * 40 + 5) * 2 + 0] == 5.0 / 40.0);
    CHECK(b.grid.data()[(3 * 40 + 5) * 2 + 1] == 3 * 0.025);
}

TEST_CASE("advection input validation") {
    CHECK_THROWS_AS(gen_advection(4, 8, 0.5, 0), ValueError);       // resolution < 16
    CHECK_THROWS_AS(gen_advection(4, 64, 0.0, 0), ValueError);      // t_final out of range
    CHECK_THROWS_AS(gen_advection(4, 64, 1.5, 0), ValueError);
    CHECK_THROWS_AS(gen_advection(4, 64, 0.5, 0, 2), ValueError);   // case 2 needs 40
    CHECK_THROWS_AS(gen_advection(4, 64, 0.5, 0, 3), ValueError);   // unknown case
}

TEST_CASE("advection default t_final recorded in metadata") {
    DatasetBundle b = gen_advection(2, 16, 0.5, 3, 1, 0.0, 1);
    bool found = false;
    for (auto& [k, v] : b.gen_params)
        if (k == "t_final") {
            found = true;
            CHECK(v == 0.5);
        }
    CHECK(found);
}

TEST_CASE("burgers: zero stays zero and constants are steady states") {
    std::vector<double> zero(64, 0.0);
    std::vector<double> u1 = burgers_solve(zero, 0.1, 1.0);
    for (double v : u1) CHECK(v == 0.0);

    std::vector<double> c(64, 1.7);
    std::vector<double> c1 = burgers_oracle_step(c, 0.1, 1e-3);
    for (double v : c1) CHECK(v == Catch::Approx(1.7).margin(1e-12));
}

TEST_CASE("burgers: pure diffusion decays each mode exactly") {
    const std::size_t n = 128;
    const double nu = 0.1, dt = 1e-3;
    for (int k : {1, 3, 9}) {
        std::vector<double> u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = std::sin(2.0 * M_PI * k * double(i) / n);
        std::vector<double> v = burgers_oracle_step(u, nu, dt, /*nonlinear=*/false);
        const double decay = std::exp(-nu * 4.0 * M_PI * M_PI * k * k * dt);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(v[i] == Catch::Approx(decay * u[i]).margin(1e-10));
    }
}

TEST_CASE("burgers: residual at t = 0 matches the analytic right-hand side") {
    const std::size_t n = 256;
    const double nu = 0.1, dt = 1e-5;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = std::sin(2.0 * M_PI * double(i) / n);
    std::vector<double> v = burgers_oracle_step(u, nu, dt);
    double worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = double(i) / n;
        const double rhs = -M_PI * std::sin(4.0 * M_PI * x) -
                           nu * 4.0 * M_PI * M_PI * std::sin(2.0 * M_PI * x);
        worst = std::max(worst, std::abs((v[i] - u[i]) / dt - rhs));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("burgers: mean is conserved and steps are converged") {
    Rng rng(7, "burgers.sample", 0);
    std::vector<double> u0 = burgers_initial(256, rng);
    std::vector<double> u1 = burgers_solve(u0, 0.1, 1.0);
    double m0 = 0, m1 = 0;
    for (std::size_t i = 0; i < u0.size(); ++i) {
        m0 += u0[i];
        m1 += u1[i];
    }
    CHECK(std::abs(m1 / 256 - m0 / 256) < 1e-8);

    // step-refinement: halving dt changes the answer below 1e-6
    const double t_final = 0.5;
    auto integrate = [&](double dt) {
        std::vector<double> u = u0;
        const std::size_t steps = (std::size_t)std::llround(t_final / dt);
        for (std::size_t s = 0; s < steps; ++s) u = burgers_oracle_step(u, 0.1, dt);
        return u;
    };
    std::vector<double> a = integrate(5e-4);
    std::vector<double> b = integrate(2.5e-4);
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    CHECK(worst < 1e-6);
}

TEST_CASE("burgers generator validation and determinism") {
    CHECK_THROWS_AS(gen_burgers(4, 100, 0.1, 0), ValueError);  // not a power of two
    CHECK_THROWS_AS(gen_burgers(4, 64, -0.1, 0), ValueError);
    DatasetBundle a = gen_burgers(2, 64, 0.1, 3, 1);
    DatasetBundle b = gen_burgers(2, 64, 0.1, 3, 1);
    CHECK(bit_equal(a.inputs, b.inputs));
    CHECK(bit_equal(a.outputs, b.outputs));
    CHECK(all_finite(a.outputs));
}

TEST_CASE("spectral bias target") {
    CHECK(spectral_bias_target(0.0) == 0.0);
    CHECK(spectral_bias_target(M_PI / 4) ==
          Catch::Approx(1.0 - std::sqrt(2.0) / 2.0).margin(1e-12));
    Rng rng(1);
    for (int i = 0; i < 32; ++i) {
        const double x = rng.uniform(-M_PI, M_PI);
        CHECK(std::abs(spectral_bias_target(-x) + spectral_bias_target(x)) < 1e-12);
    }
}

TEST_CASE("fft roundtrip and parseval") {
    Rng rng(3);
    std::vector<std::complex<double>> a(256);
    for (auto& z : a) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto b = a;
    fft(b, false);
    fft(b, true);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
    CHECK_THROWS_AS([] { std::vector<std::complex<double>> v(12); fft(v); }(), ValueError);
}

TEST_CASE("container roundtrip is bit-exact") {
    Container c;
    Rng rng(5);
    Tensor t = random_tensor({3, 4, 2}, rng);
    t.data()[0] = -0.0;
    t.data()[1] = 1e-308;
    t.data()[2] = -1.7976931348623157e308;
    c.put_tensor("a.big", t);
    c.put_i64("counts", {4}, {-1, 0, 42, (std::int64_t)1 << 62});
    c.put_string("name", "hello container");
    c.write("container_roundtrip.uwno");
    Container r = Container::read("container_roundtrip.uwno");
    CHECK(bit_equal(r.get_tensor("a.big"), t));
    CHECK(r.get("counts").i64 == std::vector<std::int64_t>({-1, 0, 42, (std::int64_t)1 << 62}));
    CHECK(r.get_string("name") == "hello container");
    std::remove("container_roundtrip.uwno");
}

TEST_CASE("empty container is exactly 10 bytes") {
    Container c;
    const std::string bytes = c.serialize();
    CHECK(bytes.size() == 10);
    Container r = Container::deserialize(bytes);
    CHECK(r.records().empty());
}

TEST_CASE("container errors carry offsets and record names") {
    Container c;
    c.put_f64("field", {4}, {1, 2, 3, 4});
    std::string bytes = c.serialize();

    // truncated payload
    try {
        Container::deserialize(bytes.substr(0, bytes.size() - 8));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("field") != std::string::npos);
        CHECK(msg.find("byte") != std::string::npos);
    }

    // corrupted shape (length field): make the u64 dimension absurd
    std::string bad = bytes;
    const std::size_t shape_off = 10 + 2 + 5 + 1 + 1;  // header, name_len, name, dtype, ndim
    bad[shape_off + 5] = char(0x7f);
    try {
        Container::deserialize(bad);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("field") != std::string::npos);
    }

    // bad magic / version
    std::string magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(Container::deserialize(magic), IoError);
    std::string ver = bytes;
    ver[4] = 9;
    CHECK_THROWS_AS(Container::deserialize(ver), IoError);

    CHECK_THROWS_AS(Container::read("does_not_exist.uwno"), IoError);
    CHECK_THROWS_AS(c.put_f64("field", {1}, {0.0}), ValueError);  // duplicate name
}

TEST_CASE("dataset bundle roundtrip") {
    DatasetBundle b = gen_advection(4, 16, 0.5, 21, 1, 0.0, 3);
    b.save("bundle_roundtrip.uwno");
    DatasetBundle r = DatasetBundle::load("bundle_roundtrip.uwno");
    CHECK(bit_equal(r.inputs, b.inputs));
    CHECK(bit_equal(r.outputs, b.outputs));
    CHECK(bit_equal(r.grid, b.grid));
    CHECK(r.n_train == b.n_train);
    CHECK(r.problem == "advection");
    CHECK(r.seed == 21);
    CHECK(r.gen_params == b.gen_params);
    std::remove("bundle_roundtrip.uwno");
}

TEST_CASE("csv roundtrip is bit-exact and rejects malformed input") {
    CsvTable t;
    t.header = {"x", "y"};
    t.rows = {{0.1, -1.0 / 3.0}, {1e-17, 2.5}};
    write_csv("csv_roundtrip_test.csv", t);
    CsvTable r = read_csv("csv_roundtrip_test.csv");
    REQUIRE(r.rows.size() == 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(r.rows[i][j] == t.rows[i][j]);
    std::remove("csv_roundtrip_test.csv");

    std::ofstream f("csv_bad_test.csv");
    f << "a,b\n1,banana\n";
    f.close();
    CHECK_THROWS_AS(read_csv("csv_bad_test.csv"), ValueError);
    std::remove("csv_bad_test.csv");
}
