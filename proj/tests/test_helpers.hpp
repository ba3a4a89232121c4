#pragma once

// Shared test utilities: the central finite-difference gradient oracle and
// random tensor builders. The oracle is independent of the autodiff path: it
// re-runs the forward closure at perturbed parameter values.

#include <functional>
#include <vector>

#include "uwno/rng.hpp"
#include "uwno/tensor.hpp"

namespace uwno::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
    std::vector<double> d(shape_numel(shape));
    for (auto& v : d) v = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

/// Central finite differences of a scalar-valued closure with respect to
/// every element of x, h = 1e-6.
inline std::vector<double> fd_gradient(Tensor& x, const std::function<double()>& f,
                                       double h = 1e-6) {
    NoGradGuard ng;
    std::vector<double> g(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = x.data()[i];
        x.data()[i] = orig + h;
        const double fp = f();
        x.data()[i] = orig - h;
        const double fm = f();
        x.data()[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Worst relative disagreement between autodiff and finite differences.
/// The denominator is floored at 1e-6 so that near-zero entries compare at
/// an equivalent absolute tolerance.
inline double max_rel_err(const std::vector<double>& ad, const std::vector<double>& fd) {
    double worst = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i) {
        const double denom = std::max({std::abs(ad[i]), std::abs(fd[i]), 1e-6});
        worst = std::max(worst, std::abs(ad[i] - fd[i]) / denom);
    }
    return worst;
}

/// FD-vs-autodiff check of `loss_fn` (fresh graph per call) for one
/// parameter tensor. Returns the worst relative error.
inline double grad_check(Tensor& param, const std::function<Tensor()>& loss_fn,
                         double h = 1e-6) {
    Tensor loss = loss_fn();
    param.zero_grad();
    loss.backward();
    std::vector<double> ad =
        param.has_grad() ? param.grad() : std::vector<double>(param.numel(), 0.0);
    std::vector<double> fd = fd_gradient(param, [&] { return loss_fn().item(); }, h);
    return max_rel_err(ad, fd);
}

}  // namespace uwno::test
