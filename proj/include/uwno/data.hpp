#pragma once

// Synthetic datasets with analytic or oracle-solver ground truth, plus the
// spectral-bias demo target. Every generator is a pure function of
// (parameters, seed): per-sample substreams keep bundles bit-reproducible.

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "uwno/container.hpp"
#include "uwno/fft.hpp"
#include "uwno/rng.hpp"
#include "uwno/tensor.hpp"

namespace uwno {

// ---------------------------------------------------------------------------
// Dataset bundle
// ---------------------------------------------------------------------------

/// Paired input/output samples on a fixed grid. inputs are
/// (N, res[, res], d_a), outputs (N, res[, res], d_u), grid (res[, res], dims).
/// The first n_train samples are the training split, the remainder the test
/// split.
struct DatasetBundle {
    Tensor inputs;
    Tensor outputs;
    Tensor grid;
    std::int64_t n_train = 0;
    std::string problem;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, double>> gen_params;

    std::int64_t n_samples() const { return (std::int64_t)inputs.dim(0); }
    std::int64_t n_test() const { return n_samples() - n_train; }
    int spatial_dims() const { return (int)grid.ndim() - 1; }

    void validate() const {
        if (!inputs.defined() || !outputs.defined() || !grid.defined())
            throw ValueError("dataset bundle: missing arrays");
        if (inputs.dim(0) != outputs.dim(0))
            throw ShapeError("dataset bundle: inputs " + shape_str(inputs.shape()) +
                             " vs outputs " + shape_str(outputs.shape()));
        if (n_train < 1 || n_test() < 1)
            throw ValueError("dataset bundle: split " + std::to_string(n_train) + "/" +
                             std::to_string(n_test()) + " needs at least one sample per side");
    }

    void save(const std::string& path) const {
        Container c;
        c.put_tensor("inputs", inputs);
        c.put_tensor("outputs", outputs);
        c.put_tensor("grid", grid);
        c.put_scalar_i64("n_train", n_train);
        c.put_scalar_i64("seed", (std::int64_t)seed);
        c.put_string("problem", problem);
        for (const auto& [k, v] : gen_params) c.put_scalar_f64("param." + k, v);
        c.write(path);
    }

    static DatasetBundle load(const std::string& path) {
        Container c = Container::read(path);
        DatasetBundle b;
        b.inputs = c.get_tensor("inputs");
        b.outputs = c.get_tensor("outputs");
        b.grid = c.get_tensor("grid");
        b.n_train = c.get_scalar_i64("n_train");
        b.seed = (std::uint64_t)c.get_scalar_i64("seed");
        b.problem = c.get_string("problem");
        for (const auto& r : c.records())
            if (r.name.rfind("param.", 0) == 0)
                b.gen_params.emplace_back(r.name.substr(6), r.f64.at(0));
        b.validate();
        return b;
    }
};

inline std::int64_t default_n_train(std::int64_t n) { return n - std::max<std::int64_t>(1, n / 5); }

// ---------------------------------------------------------------------------
// Poisson (2D, analytic)
// ---------------------------------------------------------------------------

// Solution family u(x,y) = alpha sin(pi x)(1 + cos(pi y))
//                        + beta  sin(2 pi x)(1 - cos(2 pi y)),
// zero on the boundary of [-1,1]^2. The source is its Laplacian,
//   f = -alpha pi^2 sin(pi x)(1 + 2 cos(pi y))
//       + 4 beta pi^2 sin(2 pi x)(2 cos(2 pi y) - 1),
// so generated pairs satisfy u_xx + u_yy = f exactly.
inline double poisson_solution(double alpha, double beta, double x, double y) {
    return alpha * std::sin(M_PI * x) * (1.0 + std::cos(M_PI * y)) +
           beta * std::sin(2.0 * M_PI * x) * (1.0 - std::cos(2.0 * M_PI * y));
}

inline double poisson_source(double alpha, double beta, double x, double y) {
    return -alpha * M_PI * M_PI * std::sin(M_PI * x) * (1.0 + 2.0 * std::cos(M_PI * y)) +
           4.0 * beta * M_PI * M_PI * std::sin(2.0 * M_PI * x) *
               (2.0 * std::cos(2.0 * M_PI * y) - 1.0);
}

/// Source -> solution pairs on [-1,1]^2 with alpha, beta ~ U[-2,2].
/// Grid index [i][j] is the point (x_i, y_j), endpoints included.
inline DatasetBundle gen_poisson(std::int64_t n_samples, std::size_t resolution,
                                 std::uint64_t seed, std::int64_t n_train = 0) {
    if (resolution < 8) throw ValueError("gen_poisson: resolution must be >= 8");
    if (n_samples < 2) throw ValueError("gen_poisson: need at least 2 samples");
    if (n_train <= 0) n_train = default_n_train(n_samples);
    if (n_train >= n_samples)
        throw ValueError("gen_poisson: n_train must leave at least one test sample");

    const std::size_t r = resolution;
    std::vector<double> coords(r);
    for (std::size_t i = 0; i < r; ++i) coords[i] = -1.0 + 2.0 * double(i) / double(r - 1);

    std::vector<double> fs((std::size_t)n_samples * r * r), us(fs.size()), gs(r * r * 2);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
            gs[(i * r + j) * 2 + 0] = coords[i];
            gs[(i * r + j) * 2 + 1] = coords[j];
        }
    for (std::int64_t s = 0; s < n_samples; ++s) {
        Rng rng(seed, "poisson.sample", (std::uint64_t)s);
        const double alpha = rng.uniform(-2.0, 2.0);
        const double beta = rng.uniform(-2.0, 2.0);
        double* f = fs.data() + (std::size_t)s * r * r;
        double* u = us.data() + (std::size_t)s * r * r;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) {
                f[i * r + j] = poisson_source(alpha, beta, coords[i], coords[j]);
                u[i * r + j] = poisson_solution(alpha, beta, coords[i], coords[j]);
            }
    }
    DatasetBundle b;
    b.inputs = Tensor::from_data({(std::size_t)n_samples, r, r, 1}, std::move(fs));
    b.outputs = Tensor::from_data({(std::size_t)n_samples, r, r, 1}, std::move(us));
    b.grid = Tensor::from_data({r, r, 2}, std::move(gs));
    b.n_train = n_train;
    b.problem = "poisson";
    b.seed = seed;
    return b;
}

// ---------------------------------------------------------------------------
// Advection (1D transport, analytic)
// ---------------------------------------------------------------------------

/// Initial bump profile: square wave of height h on [c - w/2, c + w/2] plus
/// the half-ellipse sqrt(max(h^2 - (a (x-c))^2, 0)). `sharpness` is the
/// constant a; pass 0 for the default 2/w (ellipse support matches the bump
/// width when h = 1).
inline double advection_initial(double x, double c, double w, double h, double sharpness) {
    const double a = (sharpness > 0) ? sharpness : 2.0 / w;
    double v = 0.0;
    if (x >= c - w / 2 && x <= c + w / 2) v += h;
    const double q = h * h - a * (x - c) * a * (x - c);
    if (q > 0) v += std::sqrt(q);
    return v;
}

/// Pure transport at unit speed on the periodic unit interval. Case 1 maps
/// u0 to u(., t_final) = u0((x - t_final) mod 1) on `resolution` points
/// x_i = i/res. Case 2 emits the full space-time field on the fixed 40x40
/// grid (rows = time steps of 0.025, columns = space); inputs are u0 tiled
/// over the time axis and grid channels are (x, t).
inline DatasetBundle gen_advection(std::int64_t n_samples, std::size_t resolution,
                                   double t_final, std::uint64_t seed, int case_id = 1,
                                   double sharpness = 0.0, std::int64_t n_train = 0) {
    if (n_samples < 2) throw ValueError("gen_advection: need at least 2 samples");
    if (case_id != 1 && case_id != 2) throw ValueError("gen_advection: case must be 1 or 2");
    if (case_id == 1 && resolution < 16)
        throw ValueError("gen_advection: resolution must be >= 16");
    if (case_id == 2 && resolution != 40)
        throw ValueError("gen_advection: case 2 is defined on the 40x40 grid");
    if (!(t_final > 0.0 && t_final <= 1.0))
        throw ValueError("gen_advection: t_final must be in (0, 1]");
    if (n_train <= 0) n_train = default_n_train(n_samples);
    if (n_train >= n_samples)
        throw ValueError("gen_advection: n_train must leave at least one test sample");

    const std::size_t r = resolution;
    auto wrap01 = [](double x) { return x - std::floor(x); };

    DatasetBundle b;
    b.problem = "advection";
    b.seed = seed;
    b.n_train = n_train;
    b.gen_params = {{"t_final", t_final}, {"case", (double)case_id}, {"sharpness", sharpness}};

    if (case_id == 1) {
        std::vector<double> in((std::size_t)n_samples * r), out(in.size()), gs(r);
        for (std::size_t i = 0; i < r; ++i) gs[i] = double(i) / double(r);
        for (std::int64_t s = 0; s < n_samples; ++s) {
            Rng rng(seed, "advection.sample", (std::uint64_t)s);
            const double c = rng.uniform(0.3, 0.7);
            const double w = rng.uniform(0.3, 0.6);
            const double h = rng.uniform(1.0, 2.0);
            for (std::size_t i = 0; i < r; ++i) {
                in[(std::size_t)s * r + i] = advection_initial(gs[i], c, w, h, sharpness);
                out[(std::size_t)s * r + i] =
                    advection_initial(wrap01(gs[i] - t_final), c, w, h, sharpness);
            }
        }
        b.inputs = Tensor::from_data({(std::size_t)n_samples, r, 1}, std::move(in));
        b.outputs = Tensor::from_data({(std::size_t)n_samples, r, 1}, std::move(out));
        b.grid = Tensor::from_data({r, 1}, std::move(gs));
    } else {
        const std::size_t nt = 40;
        const double dt = 0.025;
        std::vector<double> in((std::size_t)n_samples * nt * r), out(in.size()),
            gs(nt * r * 2);
        for (std::size_t ti = 0; ti < nt; ++ti)
            for (std::size_t xi = 0; xi < r; ++xi) {
                gs[(ti * r + xi) * 2 + 0] = double(xi) / double(r);
                gs[(ti * r + xi) * 2 + 1] = dt * double(ti);
            }
        for (std::int64_t s = 0; s < n_samples; ++s) {
            Rng rng(seed, "advection.sample", (std::uint64_t)s);
            const double c = rng.uniform(0.3, 0.7);
            const double w = rng.uniform(0.3, 0.6);
            const double h = rng.uniform(1.0, 2.0);
            double* ip = in.data() + (std::size_t)s * nt * r;
            double* op = out.data() + (std::size_t)s * nt * r;
            for (std::size_t ti = 0; ti < nt; ++ti)
                for (std::size_t xi = 0; xi < r; ++xi) {
                    const double x = double(xi) / double(r);
                    ip[ti * r + xi] = advection_initial(x, c, w, h, sharpness);
                    op[ti * r + xi] =
                        advection_initial(wrap01(x - dt * double(ti)), c, w, h, sharpness);
                }
        }
        b.inputs = Tensor::from_data({(std::size_t)n_samples, nt, r, 1}, std::move(in));
        b.outputs = Tensor::from_data({(std::size_t)n_samples, nt, r, 1}, std::move(out));
        b.grid = Tensor::from_data({nt, r, 2}, std::move(gs));
    }
    return b;
}

// ---------------------------------------------------------------------------
// Burgers (1D, pseudo-spectral oracle solver)
// ---------------------------------------------------------------------------

namespace detail {

/// One integrating-factor RK4 step for u_t + (u^2/2)_x = nu u_xx on the
/// periodic unit interval. Diffusion is applied exactly through the
/// exponential factor; the dealiased (2/3 rule) advection term is advanced
/// with classical RK4.
class BurgersStepper {
public:
    BurgersStepper(std::size_t n, double nu, double dt) : n_(n), nu_(nu) { set_dt(dt); }

    void set_dt(double dt) {
        dt_ = dt;
        e_half_.resize(n_);
        e_full_.resize(n_);
        ik_.resize(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            const double m = (double)fft_freq(k, n_);
            const double lam = -nu_ * (2.0 * M_PI * m) * (2.0 * M_PI * m);
            e_half_[k] = std::exp(lam * dt / 2.0);
            e_full_[k] = std::exp(lam * dt);
            const bool keep = std::abs(m) <= double(n_) / 3.0;
            ik_[k] = keep ? std::complex<double>(0.0, 2.0 * M_PI * m) : 0.0;
        }
    }

    double dt() const { return dt_; }

    void step(std::vector<std::complex<double>>& v, bool nonlinear = true) const {
        if (!nonlinear) {
            for (std::size_t k = 0; k < n_; ++k) v[k] *= e_full_[k];
            return;
        }
        std::vector<std::complex<double>> a = rhs(v);
        std::vector<std::complex<double>> tmp(n_), b, c, d;
        for (std::size_t k = 0; k < n_; ++k) tmp[k] = e_half_[k] * (v[k] + 0.5 * a[k]);
        b = rhs(tmp);
        for (std::size_t k = 0; k < n_; ++k) tmp[k] = e_half_[k] * v[k] + 0.5 * b[k];
        c = rhs(tmp);
        for (std::size_t k = 0; k < n_; ++k) tmp[k] = e_full_[k] * v[k] + e_half_[k] * c[k];
        d = rhs(tmp);
        for (std::size_t k = 0; k < n_; ++k)
            v[k] = e_full_[k] * v[k] +
                   (e_full_[k] * a[k] + 2.0 * e_half_[k] * (b[k] + c[k]) + d[k]) / 6.0;
    }

private:
    // dt * N(v) with N(v) = -1/2 ik dealias((u^2)^hat)
    std::vector<std::complex<double>> rhs(const std::vector<std::complex<double>>& v) const {
        std::vector<std::complex<double>> u(v);
        fft(u, true);
        for (auto& z : u) z = std::complex<double>(z.real() * z.real(), 0.0);
        fft(u, false);
        for (std::size_t k = 0; k < n_; ++k) u[k] *= -0.5 * dt_ * ik_[k];
        return u;
    }

    std::size_t n_;
    double nu_;
    double dt_ = 0.0;
    std::vector<std::complex<double>> e_half_, e_full_;
    std::vector<std::complex<double>> ik_;
};

}  // namespace detail

/// Advance u by one step of the pseudo-spectral scheme. Data generation only,
/// not differentiable. `nonlinear = false` drops the advection term, leaving
/// the exact per-mode diffusion factor exp(-nu (2 pi k)^2 dt).
inline std::vector<double> burgers_oracle_step(const std::vector<double>& u, double nu,
                                               double dt, bool nonlinear = true) {
    const std::size_t n = u.size();
    detail::BurgersStepper st(n, nu, dt);
    std::vector<std::complex<double>> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = u[i];
    fft(v, false);
    st.step(v, nonlinear);
    fft(v, true);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = v[i].real();
        if (!std::isfinite(out[i])) throw NumericError("burgers_oracle_step: NaN in solution");
    }
    return out;
}

/// Integrate to t_final with an advective CFL bound; the step size halves on
/// violation and errors out if it underflows.
inline std::vector<double> burgers_solve(const std::vector<double>& u0, double nu,
                                         double t_final, double* dt_used = nullptr) {
    const std::size_t n = u0.size();
    if (nu <= 0) throw ValueError("burgers_solve: nu must be positive");
    const double dx = 1.0 / double(n);
    auto max_abs = [](const std::vector<double>& v) {
        double m = 0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };
    const double cfl = 0.5;
    double dt = std::min(1e-3, cfl * dx / std::max(max_abs(u0), 1e-9));
    std::size_t steps = (std::size_t)std::ceil(t_final / dt);
    dt = t_final / double(steps);

    std::vector<std::complex<double>> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = u0[i];
    fft(v, false);
    detail::BurgersStepper st(n, nu, dt);

    double t = 0.0;
    std::vector<double> u(u0);
    while (t < t_final - 1e-14) {
        if (dt > cfl * dx / std::max(max_abs(u), 1e-9)) {
            dt *= 0.5;
            if (dt < 1e-12) throw NumericError("burgers_solve: time step underflow");
            st.set_dt(dt);
        }
        if (t + dt > t_final) {
            dt = t_final - t;
            st.set_dt(dt);
        }
        st.step(v);
        t += dt;
        std::vector<std::complex<double>> w(v);
        fft(w, true);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = w[i].real();
            if (!std::isfinite(u[i])) throw NumericError("burgers_solve: NaN in solution");
        }
    }
    if (dt_used) *dt_used = dt;
    return u;
}

/// Gaussian-random-field initial condition: truncated Fourier series with
/// per-mode standard deviation 25 / (4 pi^2 k^2 + 25) (the k = 0 mode has
/// std 1), orthonormal sqrt(2) sin/cos basis on the unit interval.
inline std::vector<double> burgers_initial(std::size_t resolution, Rng& rng,
                                           std::size_t modes = 128) {
    modes = std::min(modes, resolution / 2 - 1);
    const double s0 = 25.0 / 25.0;
    std::vector<double> u(resolution, s0 * rng.normal());
    std::vector<double> xc(modes), xs(modes);
    for (std::size_t k = 1; k <= modes; ++k) {
        const double sk = 25.0 / (4.0 * M_PI * M_PI * double(k) * double(k) + 25.0);
        xc[k - 1] = sk * rng.normal();
        xs[k - 1] = sk * rng.normal();
    }
    for (std::size_t i = 0; i < resolution; ++i) {
        const double x = double(i) / double(resolution);
        double acc = 0.0;
        for (std::size_t k = 1; k <= modes; ++k)
            acc += std::sqrt(2.0) * (xc[k - 1] * std::cos(2.0 * M_PI * double(k) * x) +
                                     xs[k - 1] * std::sin(2.0 * M_PI * double(k) * x));
        u[i] += acc;
    }
    return u;
}

/// u0 -> u(., 1) pairs for periodic viscous Burgers on (0,1).
inline DatasetBundle gen_burgers(std::int64_t n_samples, std::size_t resolution, double nu,
                                 std::uint64_t seed, std::int64_t n_train = 0) {
    if (n_samples < 2) throw ValueError("gen_burgers: need at least 2 samples");
    if (nu <= 0) throw ValueError("gen_burgers: nu must be positive");
    if (resolution < 16 || (resolution & (resolution - 1)))
        throw ValueError("gen_burgers: resolution must be a power of two >= 16 "
                         "(spectral solver), got " + std::to_string(resolution));
    if (n_train <= 0) n_train = default_n_train(n_samples);
    if (n_train >= n_samples)
        throw ValueError("gen_burgers: n_train must leave at least one test sample");

    const std::size_t r = resolution;
    std::vector<double> in((std::size_t)n_samples * r), out(in.size()), gs(r);
    for (std::size_t i = 0; i < r; ++i) gs[i] = double(i) / double(r);
    for (std::int64_t s = 0; s < n_samples; ++s) {
        Rng rng(seed, "burgers.sample", (std::uint64_t)s);
        std::vector<double> u0 = burgers_initial(r, rng);
        std::vector<double> u1 = burgers_solve(u0, nu, 1.0);
        std::copy(u0.begin(), u0.end(), in.begin() + (std::size_t)s * r);
        std::copy(u1.begin(), u1.end(), out.begin() + (std::size_t)s * r);
    }
    DatasetBundle b;
    b.inputs = Tensor::from_data({(std::size_t)n_samples, r, 1}, std::move(in));
    b.outputs = Tensor::from_data({(std::size_t)n_samples, r, 1}, std::move(out));
    b.grid = Tensor::from_data({r, 1}, std::move(gs));
    b.n_train = n_train;
    b.problem = "burgers";
    b.seed = seed;
    b.gen_params = {{"nu", nu}};
    return b;
}

// ---------------------------------------------------------------------------
// Spectral-bias demo target
// ---------------------------------------------------------------------------

/// f(x) = sin(2x) + sin(7x) + sin(16x), intended for x in [-pi, pi].
inline double spectral_bias_target(double x) {
    return std::sin(2.0 * x) + std::sin(7.0 * x) + std::sin(16.0 * x);
}

inline Tensor spectral_bias_target(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = spectral_bias_target(x.data()[i]);
    return Tensor::from_data(x.shape(), std::move(out));
}

}  // namespace uwno
