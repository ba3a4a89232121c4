#pragma once

// Loss, optimizer, schedule, and the training/evaluation loops. Everything is
// deterministic given the seed: shuffling draws from a per-epoch substream,
// evaluation runs without gradient tracking, and per-epoch metrics land in a
// CSV with a fixed header.

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "uwno/csv.hpp"
#include "uwno/data.hpp"
#include "uwno/model.hpp"
#include "uwno/rng.hpp"
#include "uwno/tensor.hpp"

namespace uwno {

struct TrainConfig {
    int epochs = 500;
    int batch_size = 20;
    double lr0 = 1e-3;
    double decay_factor = 0.5;
    int decay_every = 50;
    std::uint64_t seed = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int checkpoint_every = 0;      // extra periodic checkpoints; 0 = final only
    std::string checkpoint_path;   // empty = never write checkpoints

    void validate() const {
        if (epochs < 0 || batch_size < 1) throw ValueError("train config: epochs >= 0, batch_size >= 1");
        if (!(decay_factor > 0.0 && decay_factor <= 1.0))
            throw ValueError("train config: decay_factor must be in (0, 1]");
        if (decay_every < 1) throw ValueError("train config: decay_every must be >= 1");
    }
};

struct EpochRecord {
    int epoch;
    double train_rel_l2;
    double test_rel_l2;
    double lr;
    double seconds;
};
using MetricHistory = std::vector<EpochRecord>;

/// Stepwise-decayed learning rate: lr0 * decay^floor(epoch / decay_every).
inline double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw ValueError("lr_at: epoch must be >= 0");
    return cfg.lr0 * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
}

/// Mean over the batch of per-sample relative L2 errors,
/// (1/N) sum_i |u_i - uhat_i|_2 / |u_i|_2. Differentiable.
inline Tensor relative_l2(const Tensor& u_hat, const Tensor& u) {
    if (u_hat.shape() != u.shape())
        throw ShapeError("relative_l2: " + shape_str(u_hat.shape()) + " vs " +
                         shape_str(u.shape()));
    Tensor diff = sub(u_hat, u);
    Tensor num2 = sum_samplewise(mul(diff, diff));
    Tensor den2 = sum_samplewise(mul(u, u));
    for (std::size_t i = 0; i < den2.numel(); ++i)
        if (den2.data()[i] <= 0.0)
            throw NumericError("relative_l2: sample " + std::to_string(i) +
                               " has zero-norm target");
    return mean(div(sqrt(num2), sqrt(den2)));
}

/// Standard bias-corrected Adam over a fixed parameter order. A NaN gradient
/// aborts with the parameter name.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<std::pair<std::string, Tensor>> params, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& [name, t] : params_) {
            m_.emplace_back(t.numel(), 0.0);
            v_.emplace_back(t.numel(), 0.0);
        }
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            Tensor& p = params_[pi].second;
            const bool has_grad = p.has_grad();
            auto& m = m_[pi];
            auto& v = v_[pi];
            auto& w = p.data();
            const double* g = has_grad ? p.grad().data() : nullptr;
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = g ? g[i] : 0.0;
                if (std::isnan(gi))
                    throw NumericError("adam: NaN gradient in parameter '" + params_[pi].first +
                                       "'");
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
                w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            }
        }
    }

    void zero_grad() {
        for (auto& [name, t] : params_) t.zero_grad();
    }

    int steps_taken() const { return t_; }

private:
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    int t_ = 0;
};

namespace detail {

/// Copy selected samples (axis 0) into a fresh, gradient-free tensor.
inline Tensor gather_samples(const Tensor& t, const std::vector<std::size_t>& idx) {
    const std::size_t inner = t.numel() / t.dim(0);
    Shape s(t.shape());
    s[0] = idx.size();
    std::vector<double> d(idx.size() * inner);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::memcpy(d.data() + i * inner, t.data().data() + idx[i] * inner,
                    inner * sizeof(double));
    return Tensor::from_data(std::move(s), std::move(d));
}

}  // namespace detail

/// Mean relative-L2 over a split, computed without gradient tracking. The
/// result is a pure function of (model parameters, split) and is invariant to
/// the batch size: per-sample errors are accumulated in sample order.
inline double evaluate(const UwnoModel& model, const Tensor& inputs, const Tensor& outputs,
                       const Tensor& grid, int batch_size = 20) {
    if (!inputs.defined() || inputs.dim(0) == 0) throw ValueError("evaluate: empty split");
    NoGradGuard ng;
    const std::size_t n = inputs.dim(0);
    const std::size_t inner = outputs.numel() / outputs.dim(0);
    double acc = 0.0;
    for (std::size_t start = 0; start < n; start += (std::size_t)batch_size) {
        const std::size_t bs = std::min<std::size_t>(batch_size, n - start);
        std::vector<std::size_t> idx(bs);
        for (std::size_t i = 0; i < bs; ++i) idx[i] = start + i;
        Tensor bx = detail::gather_samples(inputs, idx);
        Tensor by = detail::gather_samples(outputs, idx);
        Tensor uhat = model.forward(bx, grid);
        for (std::size_t i = 0; i < bs; ++i) {
            double num = 0.0, den = 0.0;
            const double* ph = uhat.data().data() + i * inner;
            const double* pt = by.data().data() + i * inner;
            for (std::size_t k = 0; k < inner; ++k) {
                num += (ph[k] - pt[k]) * (ph[k] - pt[k]);
                den += pt[k] * pt[k];
            }
            if (den <= 0.0)
                throw NumericError("evaluate: sample " + std::to_string(start + i) +
                                   " has zero-norm target");
            acc += std::sqrt(num) / std::sqrt(den);
        }
    }
    return acc / double(n);
}

struct TrainResult {
    MetricHistory history;
    bool aborted = false;
    std::string abort_reason;
};

/// Seeded mini-batch training with per-epoch test evaluation. Aborts (keeping
/// the partial history and the last successfully written checkpoint) when the
/// loss stops being finite.
inline TrainResult train(UwnoModel& model, const DatasetBundle& data, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    cfg.validate();
    data.validate();
    const std::size_t n_train = (std::size_t)data.n_train;
    Tensor train_in, train_out, test_in, test_out;
    {
        NoGradGuard ng;
        train_in = slice(data.inputs, 0, 0, n_train);
        train_out = slice(data.outputs, 0, 0, n_train);
        test_in = slice(data.inputs, 0, n_train, (std::size_t)data.n_test());
        test_out = slice(data.outputs, 0, n_train, (std::size_t)data.n_test());
    }

    AdamOptimizer opt(model.named_parameters(), cfg.beta1, cfg.beta2, cfg.eps);
    TrainResult res;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at(epoch, cfg);

        std::vector<std::size_t> order(n_train);
        for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
        Rng shuffle_rng(cfg.seed, "train.shuffle", (std::uint64_t)epoch);
        shuffle_rng.shuffle(order.begin(), order.end());

        double loss_acc = 0.0;
        bool bad = false;
        std::string reason;
        for (std::size_t start = 0; start < n_train && !bad;
             start += (std::size_t)cfg.batch_size) {
            const std::size_t bs = std::min<std::size_t>(cfg.batch_size, n_train - start);
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + bs);
            Tensor bx = detail::gather_samples(train_in, idx);
            Tensor by = detail::gather_samples(train_out, idx);
            Tensor uhat = model.forward(bx, data.grid);
            Tensor loss = relative_l2(uhat, by);
            const double lv = loss.item();
            if (!std::isfinite(lv)) {
                bad = true;
                reason = "loss is not finite at epoch " + std::to_string(epoch);
                break;
            }
            model.zero_grad();
            loss.backward();
            try {
                opt.step(lr);
            } catch (const NumericError& e) {
                bad = true;
                reason = e.what();
                break;
            }
            loss_acc += lv * double(bs);
        }
        if (bad) {
            res.aborted = true;
            res.abort_reason = reason;
            return res;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_rel_l2 = loss_acc / double(n_train);
        rec.test_rel_l2 = evaluate(model, test_in, test_out, data.grid, cfg.batch_size);
        rec.lr = lr;
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0)
            model.save(cfg.checkpoint_path);
    }
    if (!cfg.checkpoint_path.empty()) model.save(cfg.checkpoint_path);
    return res;
}

inline CsvTable metrics_to_csv(const MetricHistory& h) {
    CsvTable t;
    t.header = {"epoch", "train_rel_l2", "test_rel_l2", "lr", "seconds"};
    for (const auto& r : h)
        t.rows.push_back({double(r.epoch), r.train_rel_l2, r.test_rel_l2, r.lr, r.seconds});
    return t;
}

}  // namespace uwno
