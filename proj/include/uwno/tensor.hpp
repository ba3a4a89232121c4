#pragma once

// Dense n-dimensional tensors of 64-bit floats with reverse-mode automatic
// differentiation. Operations record themselves on an implicit tape (one node
// per tensor, creation-ordered ids); backward() replays the reachable
// subgraph once in reverse topological order. Repeated backward() calls
// accumulate into leaf gradients; gradients of interior nodes are released
// as soon as they have been propagated.
//
// Broadcast rule for elementwise binaries: shapes must be equal, or one
// operand has a single element (scalar), or both have the same rank with
// each axis equal or 1 on one side. Anything fancier must be written with
// explicit reshape/expand.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "uwno/blas.hpp"
#include "uwno/errors.hpp"
#include "uwno/parallel.hpp"

namespace uwno {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

/// Global switch for gradient recording (RAII via NoGradGuard).
struct GradMode {
    static bool& enabled() {
        thread_local bool on = true;
        return on;
    }
};

struct NoGradGuard {
    NoGradGuard() : prev_(GradMode::enabled()) { GradMode::enabled() = false; }
    ~NoGradGuard() { GradMode::enabled() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on demand during backward
    bool requires_grad = false;
    bool leaf = true;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
};

inline std::uint64_t next_node_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

/// Returns the gradient buffer of `p`, zero-initialized on first use, or
/// nullptr when `p` does not require gradients.
inline double* grad_buf(Node* p) {
    if (!p->requires_grad) return nullptr;
    if (p->grad.empty()) p->grad.assign(shape_numel(p->shape), 0.0);
    return p->grad.data();
}

}  // namespace detail

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

    static Tensor from_data(Shape shape, std::vector<double> data,
                            bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw ShapeError("from_data: shape " + shape_str(shape) + " wants " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(data.size()));
        auto n = std::make_shared<detail::Node>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        n->id = detail::next_node_id();
        return Tensor(std::move(n));
    }

    static Tensor full(Shape shape, double v, bool requires_grad = false) {
        std::vector<double> d(shape_numel(shape), v);
        return from_data(std::move(shape), std::move(d), requires_grad);
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), 0.0, requires_grad);
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const std::shared_ptr<detail::Node>& node() const { return node_; }

    const Shape& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->value.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }

    const std::vector<double>& data() const { return node_->value; }
    std::vector<double>& data() { return node_->value; }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const { return node_->grad; }

    /// Scalar value of a one-element tensor.
    double item() const {
        if (numel() != 1)
            throw ShapeError("item() requires a one-element tensor, shape is " +
                             shape_str(shape()));
        return node_->value[0];
    }

    void zero_grad() { node_->grad.clear(); }

    /// Copy of the value as a gradient-free leaf.
    Tensor detach() const { return from_data(shape(), data(), false); }

    /// Reverse sweep from a scalar. Every reachable recorded operation runs
    /// exactly once, in reverse creation order (a valid reverse topological
    /// order for a define-by-run tape). Leaf gradients accumulate across
    /// calls; interior gradients are released after propagation.
    void backward() const {
        if (numel() != 1)
            throw ShapeError("backward() requires a scalar loss, shape is " +
                             shape_str(shape()));
        if (!node_->requires_grad) return;  // nothing tracked: grads stay absent

        std::vector<detail::Node*> order;
        std::unordered_set<detail::Node*> seen;
        std::vector<detail::Node*> stack{node_.get()};
        seen.insert(node_.get());
        while (!stack.empty()) {
            detail::Node* n = stack.back();
            stack.pop_back();
            order.push_back(n);
            for (auto& p : n->parents) {
                if (p->requires_grad && seen.insert(p.get()).second)
                    stack.push_back(p.get());
            }
        }
        std::sort(order.begin(), order.end(),
                  [](const detail::Node* a, const detail::Node* b) { return a->id > b->id; });

        if (node_->grad.empty()) node_->grad.assign(1, 0.0);
        node_->grad[0] += 1.0;

        for (detail::Node* n : order) {
            if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
            if (!n->leaf) n->grad = std::vector<double>();  // release interior grad
        }
    }

private:
    std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline Tensor make_op(Shape shape, std::vector<double> value,
                      std::initializer_list<Tensor> parents,
                      std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->id = next_node_id();
    bool track = GradMode::enabled();
    if (track) {
        track = false;
        for (const auto& p : parents)
            if (p.node()->requires_grad) track = true;
    }
    if (track) {
        n->requires_grad = true;
        n->leaf = false;
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(n));
}

// ---------------------------------------------------------------------------
// Broadcast machinery
// ---------------------------------------------------------------------------

enum class BCast { Equal, AScalar, BScalar, General };

struct BroadcastPlan {
    BCast kind = BCast::Equal;
    Shape out_shape;
    std::vector<std::size_t> a_strides, b_strides;  // 0 on broadcast axes
};

inline BroadcastPlan make_broadcast_plan(const Shape& a, const Shape& b,
                                         const char* opname) {
    BroadcastPlan p;
    if (a == b) {
        p.kind = BCast::Equal;
        p.out_shape = a;
        return p;
    }
    if (shape_numel(b) == 1) {
        p.kind = BCast::BScalar;
        p.out_shape = a;
        return p;
    }
    if (shape_numel(a) == 1) {
        p.kind = BCast::AScalar;
        p.out_shape = b;
        return p;
    }
    if (a.size() != b.size())
        throw ShapeError(std::string(opname) + ": shapes " + shape_str(a) + " and " +
                         shape_str(b) + " are not broadcast-compatible");
    const std::size_t r = a.size();
    p.kind = BCast::General;
    p.out_shape.resize(r);
    for (std::size_t i = 0; i < r; ++i) {
        if (a[i] == b[i])
            p.out_shape[i] = a[i];
        else if (a[i] == 1 || b[i] == 1)
            p.out_shape[i] = std::max(a[i], b[i]);
        else
            throw ShapeError(std::string(opname) + ": shapes " + shape_str(a) + " and " +
                             shape_str(b) + " are not broadcast-compatible");
    }
    auto strides_of = [&](const Shape& s) {
        std::vector<std::size_t> st(r, 0);
        std::size_t acc = 1;
        for (std::size_t i = r; i-- > 0;) {
            st[i] = (s[i] == 1) ? 0 : acc;
            acc *= s[i];
        }
        return st;
    };
    p.a_strides = strides_of(a);
    p.b_strides = strides_of(b);
    return p;
}

/// Calls f(out_index, a_index, b_index) over the broadcast output space.
template <class F>
inline void for_each_broadcast(const BroadcastPlan& p, F&& f) {
    const auto& dims = p.out_shape;
    const std::size_t r = dims.size();
    const std::size_t n = shape_numel(dims);
    std::vector<std::size_t> idx(r, 0);
    std::size_t ai = 0, bi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        f(i, ai, bi);
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            ai += p.a_strides[d];
            bi += p.b_strides[d];
            if (idx[d] < dims[d]) break;
            ai -= p.a_strides[d] * dims[d];
            bi -= p.b_strides[d] * dims[d];
            idx[d] = 0;
        }
    }
}

// Binary op functors: f(a, b), da = d out/da, db = d out/db (given inputs and out).
struct OpAdd {
    static double f(double a, double b) { return a + b; }
    static double da(double, double, double) { return 1.0; }
    static double db(double, double, double) { return 1.0; }
};
struct OpSub {
    static double f(double a, double b) { return a - b; }
    static double da(double, double, double) { return 1.0; }
    static double db(double, double, double) { return -1.0; }
};
struct OpMul {
    static double f(double a, double b) { return a * b; }
    static double da(double, double b, double) { return b; }
    static double db(double a, double, double) { return a; }
};
struct OpDiv {
    static double f(double a, double b) { return a / b; }
    static double da(double, double b, double) { return 1.0 / b; }
    static double db(double a, double b, double) { return -a / (b * b); }
};

template <class Op>
inline Tensor ew_binary(const Tensor& a, const Tensor& b, const char* name) {
    auto plan = make_broadcast_plan(a.shape(), b.shape(), name);
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<double> out(shape_numel(plan.out_shape));
    switch (plan.kind) {
        case BCast::Equal:
            parallel_chunks(out.size(), [&](std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) out[i] = Op::f(av[i], bv[i]);
            });
            break;
        case BCast::BScalar: {
            const double s = bv[0];
            parallel_chunks(out.size(), [&](std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) out[i] = Op::f(av[i], s);
            });
            break;
        }
        case BCast::AScalar: {
            const double s = av[0];
            parallel_chunks(out.size(), [&](std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) out[i] = Op::f(s, bv[i]);
            });
            break;
        }
        case BCast::General:
            for_each_broadcast(plan, [&](std::size_t i, std::size_t ai, std::size_t bi) {
                out[i] = Op::f(av[ai], bv[bi]);
            });
            break;
    }
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(plan.out_shape, std::move(out), {a, b},
                   [plan, pa, pb](Node& o) {
                       const double* g = o.grad.data();
                       const double* av_ = pa->value.data();
                       const double* bv_ = pb->value.data();
                       const double* ov = o.value.data();
                       double* ga = grad_buf(pa);
                       double* gb = grad_buf(pb);
                       switch (plan.kind) {
                           case BCast::Equal:
                               if (ga)
                                   parallel_chunks(o.value.size(), [&](std::size_t lo,
                                                                       std::size_t hi) {
                                       for (std::size_t i = lo; i < hi; ++i)
                                           ga[i] += g[i] * Op::da(av_[i], bv_[i], ov[i]);
                                   });
                               if (gb)
                                   parallel_chunks(o.value.size(), [&](std::size_t lo,
                                                                       std::size_t hi) {
                                       for (std::size_t i = lo; i < hi; ++i)
                                           gb[i] += g[i] * Op::db(av_[i], bv_[i], ov[i]);
                                   });
                               break;
                           case BCast::BScalar: {
                               const double s = bv_[0];
                               if (ga)
                                   parallel_chunks(o.value.size(), [&](std::size_t lo,
                                                                       std::size_t hi) {
                                       for (std::size_t i = lo; i < hi; ++i)
                                           ga[i] += g[i] * Op::da(av_[i], s, ov[i]);
                                   });
                               if (gb) {
                                   double acc = 0.0;
                                   for (std::size_t i = 0; i < o.value.size(); ++i)
                                       acc += g[i] * Op::db(av_[i], s, ov[i]);
                                   gb[0] += acc;
                               }
                               break;
                           }
                           case BCast::AScalar: {
                               const double s = av_[0];
                               if (ga) {
                                   double acc = 0.0;
                                   for (std::size_t i = 0; i < o.value.size(); ++i)
                                       acc += g[i] * Op::da(s, bv_[i], ov[i]);
                                   ga[0] += acc;
                               }
                               if (gb)
                                   for (std::size_t i = 0; i < o.value.size(); ++i)
                                       gb[i] += g[i] * Op::db(s, bv_[i], ov[i]);
                               break;
                           }
                           case BCast::General:
                               for_each_broadcast(plan, [&](std::size_t i, std::size_t ai,
                                                            std::size_t bi) {
                                   if (ga) ga[ai] += g[i] * Op::da(av_[ai], bv_[bi], ov[i]);
                                   if (gb) gb[bi] += g[i] * Op::db(av_[ai], bv_[bi], ov[i]);
                               });
                               break;
                       }
                   });
}

// Unary op functors: f(x), df(x, fx).
struct OpNeg {
    static double f(double x) { return -x; }
    static double df(double, double) { return -1.0; }
};
struct OpExp {
    static double f(double x) { return std::exp(x); }
    static double df(double, double fx) { return fx; }
};
struct OpLog {
    static double f(double x) { return std::log(x); }
    static double df(double x, double) { return 1.0 / x; }
};
struct OpSqrt {
    static double f(double x) { return std::sqrt(x); }
    static double df(double, double fx) { return 0.5 / fx; }
};
struct OpTanh {
    static double f(double x) { return std::tanh(x); }
    static double df(double, double fx) { return 1.0 - fx * fx; }
};
struct OpErf {
    static double f(double x) { return std::erf(x); }
    static double df(double x, double) { return M_2_SQRTPI * std::exp(-x * x); }
};
// GELU, tanh approximation: 0.5 x (1 + tanh(c (x + 0.044715 x^3))).
struct OpGelu {
    static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    static double f(double x) {
        return 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
    }
    static double df(double x, double) {
        double t = std::tanh(kC * (x + 0.044715 * x * x * x));
        double du = kC * (1.0 + 3.0 * 0.044715 * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
    }
};
// Mish: x tanh(softplus(x)).
struct OpMish {
    static double softplus(double x) {
        return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }
    static double f(double x) { return x * std::tanh(softplus(x)); }
    static double df(double x, double) {
        double t = std::tanh(softplus(x));
        double sig = 1.0 / (1.0 + std::exp(-x));
        return t + x * (1.0 - t * t) * sig;
    }
};

template <class Op>
inline Tensor ew_unary(const Tensor& x) {
    const auto& xv = x.data();
    std::vector<double> out(xv.size());
    parallel_chunks(out.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) out[i] = Op::f(xv[i]);
    });
    Node* px = x.node().get();
    return make_op(x.shape(), std::move(out), {x}, [px](Node& o) {
        double* gx = grad_buf(px);
        if (!gx) return;
        const double* g = o.grad.data();
        const double* xv_ = px->value.data();
        const double* ov = o.value.data();
        parallel_chunks(o.value.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) gx[i] += g[i] * Op::df(xv_[i], ov[i]);
        });
    });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise API
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::ew_binary<detail::OpAdd>(a, b, "add"); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::ew_binary<detail::OpSub>(a, b, "sub"); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::ew_binary<detail::OpMul>(a, b, "mul"); }
inline Tensor div(const Tensor& a, const Tensor& b) { return detail::ew_binary<detail::OpDiv>(a, b, "div"); }

inline Tensor add(const Tensor& a, double c) {
    const auto& av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
    detail::Node* pa = a.node().get();
    return detail::make_op(a.shape(), std::move(out), {a}, [pa](detail::Node& o) {
        if (double* ga = detail::grad_buf(pa))
            for (std::size_t i = 0; i < o.value.size(); ++i) ga[i] += o.grad[i];
    });
}

inline Tensor mul(const Tensor& a, double c) {
    const auto& av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    detail::Node* pa = a.node().get();
    return detail::make_op(a.shape(), std::move(out), {a}, [pa, c](detail::Node& o) {
        if (double* ga = detail::grad_buf(pa))
            for (std::size_t i = 0; i < o.value.size(); ++i) ga[i] += o.grad[i] * c;
    });
}

inline Tensor sub(const Tensor& a, double c) { return add(a, -c); }
inline Tensor div(const Tensor& a, double c) { return mul(a, 1.0 / c); }

/// x^p for constant exponent p.
inline Tensor pow(const Tensor& x, double p) {
    const auto& xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::pow(xv[i], p);
    detail::Node* px = x.node().get();
    return detail::make_op(x.shape(), std::move(out), {x}, [px, p](detail::Node& o) {
        if (double* gx = detail::grad_buf(px))
            for (std::size_t i = 0; i < o.value.size(); ++i)
                gx[i] += o.grad[i] * p * std::pow(px->value[i], p - 1.0);
    });
}

inline Tensor neg(const Tensor& x) { return detail::ew_unary<detail::OpNeg>(x); }
inline Tensor exp(const Tensor& x) { return detail::ew_unary<detail::OpExp>(x); }
inline Tensor log(const Tensor& x) { return detail::ew_unary<detail::OpLog>(x); }
inline Tensor sqrt(const Tensor& x) { return detail::ew_unary<detail::OpSqrt>(x); }
inline Tensor tanh(const Tensor& x) { return detail::ew_unary<detail::OpTanh>(x); }
inline Tensor erf(const Tensor& x) { return detail::ew_unary<detail::OpErf>(x); }

/// GELU and Mish keep the inner tanh from the forward pass so the backward
/// pass is pure arithmetic.
inline Tensor gelu(const Tensor& x) {
    const auto& xv = x.data();
    const std::size_t n = xv.size();
    std::vector<double> out(n);
    const bool track = GradMode::enabled() && x.requires_grad();
    auto cache = track ? std::make_shared<std::vector<double>>(n) : nullptr;
    double* tp = cache ? cache->data() : nullptr;
    detail::parallel_chunks(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double v = xv[i];
            const double t = std::tanh(detail::OpGelu::kC * (v + 0.044715 * v * v * v));
            out[i] = 0.5 * v * (1.0 + t);
            if (tp) tp[i] = t;
        }
    });
    detail::Node* px = x.node().get();
    return detail::make_op(x.shape(), std::move(out), {x}, [px, cache](detail::Node& o) {
        double* gx = detail::grad_buf(px);
        if (!gx) return;
        const double* g = o.grad.data();
        const double* xv_ = px->value.data();
        const double* t = cache->data();
        detail::parallel_chunks(o.value.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const double v = xv_[i];
                const double du = detail::OpGelu::kC * (1.0 + 3.0 * 0.044715 * v * v);
                gx[i] += g[i] * (0.5 * (1.0 + t[i]) + 0.5 * v * (1.0 - t[i] * t[i]) * du);
            }
        });
    });
}

inline Tensor mish(const Tensor& x) {
    const auto& xv = x.data();
    const std::size_t n = xv.size();
    std::vector<double> out(n);
    const bool track = GradMode::enabled() && x.requires_grad();
    auto cache = track ? std::make_shared<std::vector<double>>(n) : nullptr;
    double* tp = cache ? cache->data() : nullptr;
    detail::parallel_chunks(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double v = xv[i];
            const double t = std::tanh(detail::OpMish::softplus(v));
            out[i] = v * t;
            if (tp) tp[i] = t;
        }
    });
    detail::Node* px = x.node().get();
    return detail::make_op(x.shape(), std::move(out), {x}, [px, cache](detail::Node& o) {
        double* gx = detail::grad_buf(px);
        if (!gx) return;
        const double* g = o.grad.data();
        const double* xv_ = px->value.data();
        const double* t = cache->data();
        detail::parallel_chunks(o.value.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const double v = xv_[i];
                const double sig = 1.0 / (1.0 + std::exp(-v));
                gx[i] += g[i] * (t[i] + v * (1.0 - t[i] * t[i]) * sig);
            }
        });
    });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return add(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return sub(a, c); }
inline Tensor operator*(const Tensor& a, double c) { return mul(a, c); }
inline Tensor operator/(const Tensor& a, double c) { return div(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    detail::Node* px = x.node().get();
    return detail::make_op({1}, {acc}, {x}, [px](detail::Node& o) {
        if (double* gx = detail::grad_buf(px)) {
            const double g = o.grad[0];
            for (std::size_t i = 0; i < px->value.size(); ++i) gx[i] += g;
        }
    });
}

inline Tensor mean(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.numel());
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    detail::Node* px = x.node().get();
    return detail::make_op({1}, {acc * inv}, {x}, [px, inv](detail::Node& o) {
        if (double* gx = detail::grad_buf(px)) {
            const double g = o.grad[0] * inv;
            for (std::size_t i = 0; i < px->value.size(); ++i) gx[i] += g;
        }
    });
}

/// Sums over all axes except the first: (B, ...) -> (B).
inline Tensor sum_samplewise(const Tensor& x) {
    if (x.ndim() < 1) throw ShapeError("sum_samplewise: rank-0 tensor");
    const std::size_t b = x.dim(0);
    const std::size_t inner = x.numel() / b;
    const auto& xv = x.data();
    std::vector<double> out(b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        double acc = 0.0;
        const double* row = xv.data() + i * inner;
        for (std::size_t j = 0; j < inner; ++j) acc += row[j];
        out[i] = acc;
    }
    detail::Node* px = x.node().get();
    return detail::make_op({b}, std::move(out), {x}, [px, b, inner](detail::Node& o) {
        if (double* gx = detail::grad_buf(px)) {
            for (std::size_t i = 0; i < b; ++i) {
                const double g = o.grad[i];
                double* row = gx + i * inner;
                for (std::size_t j = 0; j < inner; ++j) row[j] += g;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Matrix multiply and dense (pointwise) linear layer
// ---------------------------------------------------------------------------

/// matmul(a, b): a is (..., m, k); b is (k, n), or has the same leading batch
/// axes as a. Gradients flow to both operands.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() < 2 || b.ndim() < 2)
        throw ShapeError("matmul: operands must have rank >= 2, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const std::size_t k = a.dim(a.ndim() - 1);
    if (b.ndim() == 2) {
        if (b.dim(0) != k)
            throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                             " x " + shape_str(b.shape()));
        const std::size_t n = b.dim(1);
        const std::size_t m = a.numel() / k;  // all leading axes flattened
        Shape out_shape(a.shape().begin(), a.shape().end() - 1);
        out_shape.push_back(n);
        std::vector<double> out(m * n);
        detail::gemm(false, false, (int)m, (int)n, (int)k, 1.0, a.data().data(), (int)k,
                     b.data().data(), (int)n, 0.0, out.data(), (int)n);
        detail::Node* pa = a.node().get();
        detail::Node* pb = b.node().get();
        return detail::make_op(out_shape, std::move(out), {a, b},
                               [pa, pb, m, n, k](detail::Node& o) {
                                   const double* g = o.grad.data();
                                   if (double* ga = detail::grad_buf(pa))
                                       detail::gemm(false, true, (int)m, (int)k, (int)n, 1.0, g,
                                                    (int)n, pb->value.data(), (int)n, 1.0, ga,
                                                    (int)k);
                                   if (double* gb = detail::grad_buf(pb))
                                       detail::gemm(true, false, (int)k, (int)n, (int)m, 1.0,
                                                    pa->value.data(), (int)k, g, (int)n, 1.0, gb,
                                                    (int)n);
                               });
    }
    // batched: identical leading axes
    if (a.ndim() != b.ndim())
        throw ShapeError("matmul: rank mismatch " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    for (std::size_t i = 0; i + 2 < a.ndim(); ++i)
        if (a.dim(i) != b.dim(i))
            throw ShapeError("matmul: batch axes disagree, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    if (b.dim(b.ndim() - 2) != k)
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const std::size_t m = a.dim(a.ndim() - 2);
    const std::size_t n = b.dim(b.ndim() - 1);
    std::size_t batch = 1;
    for (std::size_t i = 0; i + 2 < a.ndim(); ++i) batch *= a.dim(i);
    Shape out_shape(a.shape());
    out_shape[out_shape.size() - 1] = n;
    std::vector<double> out(batch * m * n);
    for (std::size_t t = 0; t < batch; ++t)
        detail::gemm(false, false, (int)m, (int)n, (int)k, 1.0, a.data().data() + t * m * k,
                     (int)k, b.data().data() + t * k * n, (int)n, 0.0, out.data() + t * m * n,
                     (int)n);
    detail::Node* pa = a.node().get();
    detail::Node* pb = b.node().get();
    return detail::make_op(out_shape, std::move(out), {a, b},
                           [pa, pb, batch, m, n, k](detail::Node& o) {
                               const double* g = o.grad.data();
                               double* ga = detail::grad_buf(pa);
                               double* gb = detail::grad_buf(pb);
                               for (std::size_t t = 0; t < batch; ++t) {
                                   if (ga)
                                       detail::gemm(false, true, (int)m, (int)k, (int)n, 1.0,
                                                    g + t * m * n, (int)n,
                                                    pb->value.data() + t * k * n, (int)n, 1.0,
                                                    ga + t * m * k, (int)k);
                                   if (gb)
                                       detail::gemm(true, false, (int)k, (int)n, (int)m, 1.0,
                                                    pa->value.data() + t * m * k, (int)k,
                                                    g + t * m * n, (int)n, 1.0, gb + t * k * n,
                                                    (int)n);
                               }
                           });
}

/// Pointwise dense layer over the trailing channel axis:
/// x (..., c_in) -> (..., c_out) via x w^T (+ b). Equivalent to a 1x1
/// convolution in any spatial rank. w is (c_out, c_in), b is (c_out).
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = Tensor()) {
    if (x.ndim() < 1 || w.ndim() != 2)
        throw ShapeError("linear: x " + shape_str(x.shape()) + ", w " + shape_str(w.shape()));
    const std::size_t cin = x.dim(x.ndim() - 1);
    if (w.dim(1) != cin)
        throw ShapeError("linear: input channels " + std::to_string(cin) +
                         " do not match weight " + shape_str(w.shape()));
    const std::size_t cout = w.dim(0);
    const std::size_t m = x.numel() / cin;
    if (b.defined() && b.numel() != cout)
        throw ShapeError("linear: bias size " + std::to_string(b.numel()) + " != c_out " +
                         std::to_string(cout));
    Shape out_shape(x.shape());
    out_shape.back() = cout;
    std::vector<double> out(m * cout);
    detail::gemm(false, true, (int)m, (int)cout, (int)cin, 1.0, x.data().data(), (int)cin,
                 w.data().data(), (int)cin, 0.0, out.data(), (int)cout);
    if (b.defined()) {
        const double* bv = b.data().data();
        for (std::size_t i = 0; i < m; ++i) {
            double* row = out.data() + i * cout;
            for (std::size_t j = 0; j < cout; ++j) row[j] += bv[j];
        }
    }
    detail::Node* px = x.node().get();
    detail::Node* pw = w.node().get();
    detail::Node* pbias = b.defined() ? b.node().get() : nullptr;
    auto backward = [px, pw, pbias, m, cin, cout](detail::Node& o) {
        const double* g = o.grad.data();
        if (double* gx = detail::grad_buf(px))
            detail::gemm(false, false, (int)m, (int)cin, (int)cout, 1.0, g, (int)cout,
                         pw->value.data(), (int)cin, 1.0, gx, (int)cin);
        if (double* gw = detail::grad_buf(pw))
            detail::gemm(true, false, (int)cout, (int)cin, (int)m, 1.0, g, (int)cout,
                         px->value.data(), (int)cin, 1.0, gw, (int)cin);
        if (pbias) {
            if (double* gb = detail::grad_buf(pbias)) {
                for (std::size_t i = 0; i < m; ++i) {
                    const double* row = g + i * cout;
                    for (std::size_t j = 0; j < cout; ++j) gb[j] += row[j];
                }
            }
        }
    };
    if (b.defined())
        return detail::make_op(out_shape, std::move(out), {x, w, b}, backward);
    return detail::make_op(out_shape, std::move(out), {x, w}, backward);
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
    detail::Node* px = x.node().get();
    std::vector<double> out(x.data());
    return detail::make_op(std::move(new_shape), std::move(out), {x}, [px](detail::Node& o) {
        if (double* gx = detail::grad_buf(px))
            for (std::size_t i = 0; i < o.value.size(); ++i) gx[i] += o.grad[i];
    });
}

/// Axis permutation: out[i_perm[0], ..] = x[i_0, ..].
inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
    const std::size_t r = x.ndim();
    if (perm.size() != r) throw ShapeError("permute: rank mismatch");
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.dim(perm[i]);
    // strides of x, rearranged into output axis order
    std::vector<std::size_t> xstr(r, 1);
    for (std::size_t i = r - 1; i-- > 0;) xstr[i] = xstr[i + 1] * x.dim(i + 1);
    std::vector<std::size_t> src_stride(r);
    for (std::size_t i = 0; i < r; ++i) src_stride[i] = xstr[perm[i]];

    const auto& xv = x.data();
    std::vector<double> out(x.numel());
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = xv[src];
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            src += src_stride[d];
            if (idx[d] < out_shape[d]) break;
            src -= src_stride[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    detail::Node* px = x.node().get();
    return detail::make_op(out_shape, std::move(out), {x},
                           [px, out_shape, src_stride, r](detail::Node& o) {
                               double* gx = detail::grad_buf(px);
                               if (!gx) return;
                               std::vector<std::size_t> idx2(r, 0);
                               std::size_t src = 0;
                               for (std::size_t i = 0; i < o.value.size(); ++i) {
                                   gx[src] += o.grad[i];
                                   for (std::size_t d = r; d-- > 0;) {
                                       ++idx2[d];
                                       src += src_stride[d];
                                       if (idx2[d] < out_shape[d]) break;
                                       src -= src_stride[d] * out_shape[d];
                                       idx2[d] = 0;
                                   }
                               }
                           });
}

/// Contiguous slice along one axis.
inline Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t len) {
    if (axis >= x.ndim() || start + len > x.dim(axis))
        throw ShapeError("slice: axis " + std::to_string(axis) + " [" + std::to_string(start) +
                         ", " + std::to_string(start + len) + ") out of range for " +
                         shape_str(x.shape()));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
    const std::size_t full = x.dim(axis);
    Shape out_shape(x.shape());
    out_shape[axis] = len;
    std::vector<double> out(outer * len * inner);
    const auto& xv = x.data();
    for (std::size_t o = 0; o < outer; ++o)
        std::memcpy(out.data() + o * len * inner, xv.data() + (o * full + start) * inner,
                    len * inner * sizeof(double));
    detail::Node* px = x.node().get();
    return detail::make_op(out_shape, std::move(out), {x},
                           [px, outer, inner, full, start, len](detail::Node& o) {
                               double* gx = detail::grad_buf(px);
                               if (!gx) return;
                               const double* g = o.grad.data();
                               for (std::size_t ot = 0; ot < outer; ++ot) {
                                   double* dst = gx + (ot * full + start) * inner;
                                   const double* src = g + ot * len * inner;
                                   for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                               }
                           });
}

/// Concatenate along an axis; all other axes must agree.
inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const std::size_t r = parts[0].ndim();
    if (axis >= r) throw ShapeError("concat: axis out of range");
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != r) throw ShapeError("concat: rank mismatch");
        for (std::size_t i = 0; i < r; ++i)
            if (i != axis && p.dim(i) != parts[0].dim(i))
                throw ShapeError("concat: shape mismatch on axis " + std::to_string(i) + ": " +
                                 shape_str(p.shape()) + " vs " + shape_str(parts[0].shape()));
        total += p.dim(axis);
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= parts[0].dim(i);
    for (std::size_t i = axis + 1; i < r; ++i) inner *= parts[0].dim(i);
    Shape out_shape(parts[0].shape());
    out_shape[axis] = total;
    std::vector<double> out(outer * total * inner);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t len = p.dim(axis);
        const auto& pv = p.data();
        for (std::size_t o = 0; o < outer; ++o)
            std::memcpy(out.data() + (o * total + off) * inner, pv.data() + o * len * inner,
                        len * inner * sizeof(double));
        off += len;
    }
    // build node with n parents
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(out_shape);
    n->value = std::move(out);
    n->id = detail::next_node_id();
    bool track = GradMode::enabled();
    if (track) {
        track = false;
        for (const auto& p : parts)
            if (p.node()->requires_grad) track = true;
    }
    if (track) {
        n->requires_grad = true;
        n->leaf = false;
        for (const auto& p : parts) n->parents.push_back(p.node());
        std::vector<std::size_t> lens;
        for (const auto& p : parts) lens.push_back(p.dim(axis));
        n->backward_fn = [outer, inner, total, lens](detail::Node& o) {
            const double* g = o.grad.data();
            std::size_t off2 = 0;
            for (std::size_t pi = 0; pi < lens.size(); ++pi) {
                const std::size_t len = lens[pi];
                if (double* gp = detail::grad_buf(o.parents[pi].get())) {
                    for (std::size_t ot = 0; ot < outer; ++ot) {
                        const double* src = g + (ot * total + off2) * inner;
                        double* dst = gp + ot * len * inner;
                        for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                    }
                }
                off2 += len;
            }
        };
    }
    return Tensor(std::move(n));
}

/// True when two tensors hold bit-identical values.
inline bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    return std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

/// Max |a - b| over all elements.
inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline bool all_finite(const Tensor& t) {
    for (double v : t.data())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace uwno
