#pragma once

// Frequency-convergence experiment: a small tanh network fits
// f(x) = sin(2x) + sin(7x) + sin(16x) on a uniform grid over [-pi, pi), and
// the DFT magnitude of the residual is probed at frequencies 2, 7 and 16
// every `record_every` epochs. With `adaptive` on, every hidden activation
// becomes tanh(n a z) with one trainable slope a per layer (initialized 1/n,
// so epoch 0 matches the plain network exactly); `freeze_slopes` keeps the
// slopes out of the optimizer, reproducing the plain run bit for bit.

#include <complex>
#include <string>
#include <vector>

#include "uwno/data.hpp"
#include "uwno/rng.hpp"
#include "uwno/tensor.hpp"
#include "uwno/training.hpp"

namespace uwno {

struct BiasDemoConfig {
    bool adaptive = true;
    bool freeze_slopes = false;
    int epochs = 4000;
    int record_every = 100;
    std::uint64_t seed = 1;
    int n_points = 256;
    int hidden = 64;
    int depth = 4;
    int slope_scale = 10;
    double lr = 1e-3;
};

struct BiasDemoRecord {
    int epoch;
    double mse;
    double mag2, mag7, mag16;
};

struct BiasDemoResult {
    std::vector<BiasDemoRecord> trajectory;
    std::vector<double> xs, target, prediction;  // final spatial fit

    /// First recorded epoch with residual magnitude at frequency 16 below
    /// `threshold`, or -1 when never reached.
    int epochs_to_f16_below(double threshold) const {
        for (const auto& r : trajectory)
            if (r.mag16 < threshold) return r.epoch;
        return -1;
    }
};

namespace detail {

/// Residual DFT magnitude at integer frequency k on the uniform grid
/// x_j = -pi + 2 pi j / N: (2/N) |sum_j r_j e^{-i k x_j}|. A pure sin(kx) of
/// unit amplitude probes to 1.
inline double dft_magnitude(const std::vector<double>& xs, const std::vector<double>& r,
                            int k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j)
        acc += r[j] * std::exp(std::complex<double>(0.0, -double(k) * xs[j]));
    return 2.0 * std::abs(acc) / double(xs.size());
}

}  // namespace detail

inline BiasDemoResult run_bias_demo(const BiasDemoConfig& cfg) {
    if (cfg.epochs < 0 || cfg.record_every < 1 || cfg.n_points < 8 || cfg.depth < 1)
        throw ValueError("bias demo: bad configuration");

    const std::size_t n = (std::size_t)cfg.n_points;
    std::vector<double> xs(n);
    for (std::size_t j = 0; j < n; ++j) xs[j] = -M_PI + 2.0 * M_PI * double(j) / double(n);
    Tensor x = Tensor::from_data({n, 1}, xs);
    Tensor y = spectral_bias_target(x);

    // weights drawn from the same substreams regardless of adaptive mode
    auto init = [&](Shape s, double bound, const std::string& name) {
        Rng rng(cfg.seed, "bias." + name);
        std::vector<double> d(shape_numel(s));
        for (auto& v : d) v = rng.uniform(-bound, bound);
        return Tensor::from_data(std::move(s), std::move(d), true);
    };
    std::vector<Tensor> ws, bs, slopes;
    const std::size_t h = (std::size_t)cfg.hidden;
    for (int l = 0; l < cfg.depth; ++l) {
        const std::size_t fan_in = (l == 0) ? 1 : h;
        ws.push_back(init({h, fan_in}, 1.0 / std::sqrt(double(fan_in)),
                          "fc" + std::to_string(l) + ".weight"));
        bs.push_back(init({h}, 1.0 / std::sqrt(double(fan_in)),
                          "fc" + std::to_string(l) + ".bias"));
        slopes.push_back(Tensor::from_data({1}, {1.0 / double(cfg.slope_scale)}, true));
    }
    Tensor wo = init({1, h}, 1.0 / std::sqrt(double(h)), "out.weight");
    Tensor bo = init({1}, 1.0 / std::sqrt(double(h)), "out.bias");

    std::vector<std::pair<std::string, Tensor>> params;
    for (int l = 0; l < cfg.depth; ++l) {
        params.emplace_back("fc" + std::to_string(l) + ".weight", ws[l]);
        params.emplace_back("fc" + std::to_string(l) + ".bias", bs[l]);
        if (cfg.adaptive && !cfg.freeze_slopes)
            params.emplace_back("fc" + std::to_string(l) + ".slope", slopes[l]);
    }
    params.emplace_back("out.weight", wo);
    params.emplace_back("out.bias", bo);
    AdamOptimizer opt(params);

    auto forward = [&]() {
        Tensor v = x;
        for (int l = 0; l < cfg.depth; ++l) {
            Tensor z = linear(v, ws[l], bs[l]);
            if (cfg.adaptive) z = mul(z, mul(slopes[l], double(cfg.slope_scale)));
            v = tanh(z);
        }
        return linear(v, wo, bo);
    };
    auto record = [&](int epoch, double mse_val, BiasDemoResult& out) {
        NoGradGuard ng;
        Tensor pred = forward();
        std::vector<double> r(n);
        for (std::size_t j = 0; j < n; ++j) r[j] = y.data()[j] - pred.data()[j];
        BiasDemoRecord rec;
        rec.epoch = epoch;
        rec.mse = mse_val;
        rec.mag2 = detail::dft_magnitude(xs, r, 2);
        rec.mag7 = detail::dft_magnitude(xs, r, 7);
        rec.mag16 = detail::dft_magnitude(xs, r, 16);
        out.trajectory.push_back(rec);
    };

    BiasDemoResult out;
    out.xs = xs;
    out.target = y.data();
    {
        NoGradGuard ng;
        Tensor pred0 = forward();
        double mse0 = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = pred0.data()[j] - y.data()[j];
            mse0 += d * d;
        }
        record(0, mse0 / double(n), out);
    }
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Tensor pred = forward();
        Tensor d = sub(pred, y);
        Tensor loss = mean(mul(d, d));
        for (auto& [name, t] : params) t.zero_grad();
        for (auto& s : slopes) s.zero_grad();
        loss.backward();
        opt.step(cfg.lr);
        if (epoch % cfg.record_every == 0) record(epoch, loss.item(), out);
    }
    {
        NoGradGuard ng;
        out.prediction = forward().data();
    }
    return out;
}

inline CsvTable bias_trajectory_csv(const BiasDemoResult& r) {
    CsvTable t;
    t.header = {"epoch", "mse", "mag_f2", "mag_f7", "mag_f16"};
    for (const auto& rec : r.trajectory)
        t.rows.push_back({double(rec.epoch), rec.mse, rec.mag2, rec.mag7, rec.mag16});
    return t;
}

}  // namespace uwno
