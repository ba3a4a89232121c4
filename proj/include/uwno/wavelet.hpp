#pragma once

// Multilevel discrete wavelet transforms for the Daubechies family (db1-db8),
// differentiable end to end.
//
// Boundary handling is periodization: the signal is zero-padded to the next
// multiple of 2^level, every analysis step uses circular indexing, and the
// inverse truncates back to the original length. Each step is an orthogonal
// map, so reconstruction is exact and coefficient energy equals signal
// energy.
//
// Conventions:
//   analysis    a[n] = sum_k dec_lo[k] x[(2n+k) mod L],  d[n] likewise with
//               dec_hi (correlation form)
//   synthesis   x[(2n+k) mod L] += dec_lo[k] a[n] + dec_hi[k] d[n]
//               (the exact adjoint, equivalently convolution with rec_*)
//   in-place coefficient layout along the transformed axis:
//               [a_m | d_m | d_{m-1} | ... | d_1]
//   2D levels split rows first, then columns, giving quadrants
//               [LL LH; HL HH] with L/H = low/high-pass along rows/columns.

#include <cmath>
#include <string>
#include <vector>

#include "uwno/tensor.hpp"

namespace uwno {

// ---------------------------------------------------------------------------
// Filters
// ---------------------------------------------------------------------------

/// Orthonormal Daubechies analysis/synthesis filter quadruple.
/// Invariants (validated on first use): sum(dec_lo) = sqrt(2),
/// sum(dec_lo^2) = 1, dec_hi[k] = (-1)^k dec_lo[len-1-k], rec filters are the
/// time-reverse of the dec filters.
struct WaveletFilter {
    std::string name;
    std::vector<double> dec_lo, dec_hi, rec_lo, rec_hi;

    std::size_t length() const { return dec_lo.size(); }

    static const WaveletFilter& get(const std::string& name);
};

namespace detail {

// Daubechies scaling filters, ascending index, computed by spectral
// factorization of the halfband polynomial at 60-digit precision.
inline const std::vector<std::vector<double>>& daubechies_tables() {
    static const std::vector<std::vector<double>> tables = {
        {0.7071067811865475244, 0.7071067811865475244},
        {-0.1294095225512603812, 0.2241438680420133810, 0.8365163037378079056,
         0.4829629131445341434},
        {0.03522629188570953660, -0.08544127388202666169, -0.1350110200102545887,
         0.4598775021184915701, 0.8068915093110925765, 0.3326705529500826160},
        {-0.01059740178506903210, 0.03288301166688519974, 0.03084138183556076363,
         -0.1870348117190930841, -0.02798376941685985421, 0.6308807679298589079,
         0.7148465705529156471, 0.2303778133088965009},
        {0.003335725285473771278, -0.01258075199908199947, -0.006241490212798274274,
         0.07757149384004571352, -0.03224486958463837465, -0.2422948870663820319,
         0.1384281459013207315, 0.7243085284377729277, 0.6038292697971896705,
         0.1601023979741929145},
        {-0.001077301085308479565, 0.004777257510945510640, 0.0005538422011614961393,
         -0.03158203931748602957, 0.02752286553030572863, 0.09750160558732304910,
         -0.1297668675672619356, -0.2262646939654398201, 0.3152503517091976291,
         0.7511339080210953507, 0.4946238903984530857, 0.1115407433501094636},
        {0.0003537137999745202484, -0.001801640704047490915, 0.0004295779729213665211,
         0.01255099855609984061, -0.01657454163066688065, -0.03802993693501441358,
         0.08061260915108307191, 0.07130921926683026475, -0.2240361849938749826,
         -0.1439060039285649754, 0.4697822874051931225, 0.7291320908462351199,
         0.3965393194819173065, 0.07785205408500917902},
        {-0.0001174767841247695337, 0.0006754494064505693664, -0.0003917403733769470463,
         -0.004870352993451574310, 0.008746094047405776716, 0.01398102791739828165,
         -0.04408825393079475151, -0.01736930100180754617, 0.1287474266204784589,
         0.0004724845739132827704, -0.2840155429615469265, -0.01582910525634930567,
         0.5853546836542067128, 0.6756307362972898068, 0.3128715909142999707,
         0.05441584224310400996},
    };
    return tables;
}

inline WaveletFilter build_filter(int order) {
    WaveletFilter f;
    f.name = "db" + std::to_string(order);
    f.dec_lo = daubechies_tables()[order - 1];
    const std::size_t n = f.dec_lo.size();
    f.dec_hi.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        f.dec_hi[k] = ((k % 2) ? -1.0 : 1.0) * f.dec_lo[n - 1 - k];
    f.rec_lo.assign(f.dec_lo.rbegin(), f.dec_lo.rend());
    f.rec_hi.assign(f.dec_hi.rbegin(), f.dec_hi.rend());

    double s_lo = 0, s_hi = 0, norm = 0;
    for (std::size_t k = 0; k < n; ++k) {
        s_lo += f.dec_lo[k];
        s_hi += f.dec_hi[k];
        norm += f.dec_lo[k] * f.dec_lo[k];
    }
    if (std::abs(s_lo - std::sqrt(2.0)) > 1e-12 || std::abs(s_hi) > 1e-12 ||
        std::abs(norm - 1.0) > 1e-12)
        throw PropertyError(f.name + ": filter table violates orthonormality invariants");
    return f;
}

}  // namespace detail

inline const WaveletFilter& WaveletFilter::get(const std::string& name) {
    static const std::vector<WaveletFilter> all = [] {
        std::vector<WaveletFilter> v;
        for (int o = 1; o <= 8; ++o) v.push_back(detail::build_filter(o));
        return v;
    }();
    for (const auto& f : all)
        if (f.name == name) return f;
    throw ValueError("unknown wavelet '" + name + "' (supported: db1..db8)");
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Smallest multiple of 2^level that is >= n.
inline std::size_t dwt_padded_len(std::size_t n, int level) {
    const std::size_t block = std::size_t(1) << level;
    return ((n + block - 1) / block) * block;
}

/// Deepest level this implementation accepts for length n. Every level is
/// exactly invertible; the cap only stops the internal zero-padding from
/// growing beyond 4x the signal.
inline int max_dwt_level(std::size_t n) {
    int m = 1;
    while (m < 62 && dwt_padded_len(n, m + 1) <= 4 * n) ++m;
    return m;
}

namespace detail {

inline void check_dwt_args(std::size_t n, const WaveletFilter& f, int level) {
    if (n < f.length())
        throw ValueError("dwt: signal length " + std::to_string(n) + " shorter than " +
                         f.name + " filter (" + std::to_string(f.length()) + " taps)");
    if (level < 1) throw ValueError("dwt: level must be >= 1");
    if (level > max_dwt_level(n))
        throw ValueError("dwt: level " + std::to_string(level) + " too deep for length " +
                         std::to_string(n) + "; maximum level is " +
                         std::to_string(max_dwt_level(n)));
}

// One analysis step over a compact (outer, L, inner) block; dst gets
// [approx | detail] halves along the L axis. src and dst must not alias.
inline void analysis_step(const double* src, double* dst, std::size_t outer, std::size_t L,
                          std::size_t inner, const std::vector<double>& lo,
                          const std::vector<double>& hi) {
    const std::size_t half = L / 2, K = lo.size();
    UWNO_OMP_FOR
    for (std::size_t o = 0; o < outer; ++o) {
        const double* s = src + o * L * inner;
        double* d = dst + o * L * inner;
        std::fill(d, d + L * inner, 0.0);
        for (std::size_t n = 0; n < half; ++n) {
            double* da = d + n * inner;
            double* dd = d + (half + n) * inner;
            for (std::size_t k = 0; k < K; ++k) {
                const double* row = s + ((2 * n + k) % L) * inner;
                const double lk = lo[k], hk = hi[k];
                for (std::size_t t = 0; t < inner; ++t) {
                    da[t] += lk * row[t];
                    dd[t] += hk * row[t];
                }
            }
        }
    }
}

// Exact adjoint (and inverse) of analysis_step.
inline void synthesis_step(const double* src, double* dst, std::size_t outer, std::size_t L,
                           std::size_t inner, const std::vector<double>& lo,
                           const std::vector<double>& hi) {
    const std::size_t half = L / 2, K = lo.size();
    UWNO_OMP_FOR
    for (std::size_t o = 0; o < outer; ++o) {
        const double* s = src + o * L * inner;
        double* d = dst + o * L * inner;
        std::fill(d, d + L * inner, 0.0);
        for (std::size_t n = 0; n < half; ++n) {
            const double* sa = s + n * inner;
            const double* sd = s + (half + n) * inner;
            for (std::size_t k = 0; k < K; ++k) {
                double* row = d + ((2 * n + k) % L) * inner;
                const double lk = lo[k], hk = hi[k];
                for (std::size_t t = 0; t < inner; ++t) row[t] += lk * sa[t] + hk * sd[t];
            }
        }
    }
}

// (pre, P, post) buffer: run the m-level cascade in place along the middle
// axis. Scratch vectors are caller-provided and resized as needed.
inline void analysis_cascade_1d(double* buf, std::size_t pre, std::size_t P, std::size_t post,
                                int m, const WaveletFilter& f, std::vector<double>& s0,
                                std::vector<double>& s1) {
    for (int j = 1; j <= m; ++j) {
        const std::size_t L = P >> (j - 1);
        s0.resize(pre * L * post);
        s1.resize(pre * L * post);
        for (std::size_t o = 0; o < pre; ++o)
            std::memcpy(s0.data() + o * L * post, buf + o * P * post, L * post * sizeof(double));
        analysis_step(s0.data(), s1.data(), pre, L, post, f.dec_lo, f.dec_hi);
        for (std::size_t o = 0; o < pre; ++o)
            std::memcpy(buf + o * P * post, s1.data() + o * L * post, L * post * sizeof(double));
    }
}

inline void synthesis_cascade_1d(double* buf, std::size_t pre, std::size_t P, std::size_t post,
                                 int m, const WaveletFilter& f, std::vector<double>& s0,
                                 std::vector<double>& s1) {
    for (int j = m; j >= 1; --j) {
        const std::size_t L = P >> (j - 1);
        s0.resize(pre * L * post);
        s1.resize(pre * L * post);
        for (std::size_t o = 0; o < pre; ++o)
            std::memcpy(s0.data() + o * L * post, buf + o * P * post, L * post * sizeof(double));
        synthesis_step(s0.data(), s1.data(), pre, L, post, f.dec_lo, f.dec_hi);
        for (std::size_t o = 0; o < pre; ++o)
            std::memcpy(buf + o * P * post, s1.data() + o * L * post, L * post * sizeof(double));
    }
}

// 2D cascade on a (pre, Hp, Wp, post) buffer: rows then columns per level,
// recursing on the top-left block.
inline void analysis_cascade_2d(double* buf, std::size_t pre, std::size_t Hp, std::size_t Wp,
                                std::size_t post, int m, const WaveletFilter& f,
                                std::vector<double>& s0, std::vector<double>& s1) {
    for (int j = 1; j <= m; ++j) {
        const std::size_t H = Hp >> (j - 1), W = Wp >> (j - 1);
        s0.resize(pre * H * W * post);
        s1.resize(pre * H * W * post);
        for (std::size_t o = 0; o < pre; ++o)
            for (std::size_t r = 0; r < H; ++r)
                std::memcpy(s0.data() + (o * H + r) * W * post,
                            buf + (o * Hp + r) * Wp * post, W * post * sizeof(double));
        analysis_step(s0.data(), s1.data(), pre, H, W * post, f.dec_lo, f.dec_hi);  // rows
        analysis_step(s1.data(), s0.data(), pre * H, W, post, f.dec_lo, f.dec_hi);  // columns
        for (std::size_t o = 0; o < pre; ++o)
            for (std::size_t r = 0; r < H; ++r)
                std::memcpy(buf + (o * Hp + r) * Wp * post,
                            s0.data() + (o * H + r) * W * post, W * post * sizeof(double));
    }
}

inline void synthesis_cascade_2d(double* buf, std::size_t pre, std::size_t Hp, std::size_t Wp,
                                 std::size_t post, int m, const WaveletFilter& f,
                                 std::vector<double>& s0, std::vector<double>& s1) {
    for (int j = m; j >= 1; --j) {
        const std::size_t H = Hp >> (j - 1), W = Wp >> (j - 1);
        s0.resize(pre * H * W * post);
        s1.resize(pre * H * W * post);
        for (std::size_t o = 0; o < pre; ++o)
            for (std::size_t r = 0; r < H; ++r)
                std::memcpy(s0.data() + (o * H + r) * W * post,
                            buf + (o * Hp + r) * Wp * post, W * post * sizeof(double));
        synthesis_step(s0.data(), s1.data(), pre * H, W, post, f.dec_lo, f.dec_hi);  // columns
        synthesis_step(s1.data(), s0.data(), pre, H, W * post, f.dec_lo, f.dec_hi);  // rows
        for (std::size_t o = 0; o < pre; ++o)
            for (std::size_t r = 0; r < H; ++r)
                std::memcpy(buf + (o * Hp + r) * Wp * post,
                            s0.data() + (o * H + r) * W * post, W * post * sizeof(double));
    }
}

struct AxisGeom {
    std::size_t pre = 1, len = 0, post = 1;
};

inline AxisGeom axis_geom(const Shape& s, std::size_t axis) {
    AxisGeom g;
    g.len = s[axis];
    for (std::size_t i = 0; i < axis; ++i) g.pre *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) g.post *= s[i];
    return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Flat multilevel primitives (single tape node each; linear, exact adjoints)
// ---------------------------------------------------------------------------

/// Forward 1D cascade along `axis`: output has the padded length along that
/// axis with bands laid out [a_m | d_m | ... | d_1].
inline Tensor dwt1d_flat(const Tensor& x, const WaveletFilter& f, int level, std::size_t axis) {
    if (axis >= x.ndim()) throw ShapeError("dwt1d: axis out of range");
    detail::check_dwt_args(x.dim(axis), f, level);
    const auto g = detail::axis_geom(x.shape(), axis);
    const std::size_t P = dwt_padded_len(g.len, level);

    Shape out_shape(x.shape());
    out_shape[axis] = P;
    std::vector<double> out(g.pre * P * g.post, 0.0);
    const auto& xv = x.data();
    for (std::size_t o = 0; o < g.pre; ++o)
        std::memcpy(out.data() + o * P * g.post, xv.data() + o * g.len * g.post,
                    g.len * g.post * sizeof(double));
    std::vector<double> s0, s1;
    detail::analysis_cascade_1d(out.data(), g.pre, P, g.post, level, f, s0, s1);

    const WaveletFilter* fp = &WaveletFilter::get(f.name);
    detail::Node* px = x.node().get();
    return detail::make_op(out_shape, std::move(out), {x},
                           [px, fp, level, g, P](detail::Node& o) {
                               double* gx = detail::grad_buf(px);
                               if (!gx) return;
                               std::vector<double> tmp(o.grad);
                               std::vector<double> t0, t1;
                               detail::synthesis_cascade_1d(tmp.data(), g.pre, P, g.post, level,
                                                            *fp, t0, t1);
                               for (std::size_t oo = 0; oo < g.pre; ++oo) {
                                   const double* src = tmp.data() + oo * P * g.post;
                                   double* dst = gx + oo * g.len * g.post;
                                   for (std::size_t i = 0; i < g.len * g.post; ++i)
                                       dst[i] += src[i];
                               }
                           });
}

/// Inverse of dwt1d_flat: reconstruct and truncate to original_len.
inline Tensor idwt1d_flat(const Tensor& flat, const WaveletFilter& f, int level,
                          std::size_t axis, std::size_t original_len) {
    if (axis >= flat.ndim()) throw ShapeError("idwt1d: axis out of range");
    const auto g = detail::axis_geom(flat.shape(), axis);
    if (g.len != dwt_padded_len(original_len, level))
        throw ShapeError("idwt1d: coefficient length " + std::to_string(g.len) +
                         " inconsistent with original length " + std::to_string(original_len) +
                         " at level " + std::to_string(level));
    const std::size_t P = g.len;
    std::vector<double> buf(flat.data());
    std::vector<double> s0, s1;
    detail::synthesis_cascade_1d(buf.data(), g.pre, P, g.post, level, f, s0, s1);

    Shape out_shape(flat.shape());
    out_shape[axis] = original_len;
    std::vector<double> out(g.pre * original_len * g.post);
    for (std::size_t o = 0; o < g.pre; ++o)
        std::memcpy(out.data() + o * original_len * g.post, buf.data() + o * P * g.post,
                    original_len * g.post * sizeof(double));

    const WaveletFilter* fp = &WaveletFilter::get(f.name);
    detail::Node* px = flat.node().get();
    return detail::make_op(out_shape, std::move(out), {flat},
                           [px, fp, level, g, P, original_len](detail::Node& o) {
                               double* gx = detail::grad_buf(px);
                               if (!gx) return;
                               std::vector<double> tmp(g.pre * P * g.post, 0.0);
                               for (std::size_t oo = 0; oo < g.pre; ++oo)
                                   std::memcpy(tmp.data() + oo * P * g.post,
                                               o.grad.data() + oo * original_len * g.post,
                                               original_len * g.post * sizeof(double));
                               std::vector<double> t0, t1;
                               detail::analysis_cascade_1d(tmp.data(), g.pre, P, g.post, level,
                                                           *fp, t0, t1);
                               for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
                           });
}

/// Forward separable 2D cascade along axes (axis_h, axis_h + 1), quadrant
/// layout per level.
inline Tensor dwt2d_flat(const Tensor& x, const WaveletFilter& f, int level,
                         std::size_t axis_h) {
    if (axis_h + 1 >= x.ndim()) throw ShapeError("dwt2d: axes out of range");
    const std::size_t H = x.dim(axis_h), W = x.dim(axis_h + 1);
    detail::check_dwt_args(H, f, level);
    detail::check_dwt_args(W, f, level);
    const std::size_t Hp = dwt_padded_len(H, level), Wp = dwt_padded_len(W, level);
    std::size_t pre = 1, post = 1;
    for (std::size_t i = 0; i < axis_h; ++i) pre *= x.dim(i);
    for (std::size_t i = axis_h + 2; i < x.ndim(); ++i) post *= x.dim(i);

    Shape out_shape(x.shape());
    out_shape[axis_h] = Hp;
    out_shape[axis_h + 1] = Wp;
    std::vector<double> out(pre * Hp * Wp * post, 0.0);
    const auto& xv = x.data();
    for (std::size_t o = 0; o < pre; ++o)
        for (std::size_t r = 0; r < H; ++r)
            std::memcpy(out.data() + (o * Hp + r) * Wp * post,
                        xv.data() + (o * H + r) * W * post, W * post * sizeof(double));
    std::vector<double> s0, s1;
    detail::analysis_cascade_2d(out.data(), pre, Hp, Wp, post, level, f, s0, s1);

    const WaveletFilter* fp = &WaveletFilter::get(f.name);
    detail::Node* px = x.node().get();
    return detail::make_op(out_shape, std::move(out), {x},
                           [px, fp, level, pre, post, H, W, Hp, Wp](detail::Node& o) {
                               double* gx = detail::grad_buf(px);
                               if (!gx) return;
                               std::vector<double> tmp(o.grad);
                               std::vector<double> t0, t1;
                               detail::synthesis_cascade_2d(tmp.data(), pre, Hp, Wp, post, level,
                                                            *fp, t0, t1);
                               for (std::size_t oo = 0; oo < pre; ++oo)
                                   for (std::size_t r = 0; r < H; ++r) {
                                       const double* src = tmp.data() + (oo * Hp + r) * Wp * post;
                                       double* dst = gx + (oo * H + r) * W * post;
                                       for (std::size_t i = 0; i < W * post; ++i) dst[i] += src[i];
                                   }
                           });
}

inline Tensor idwt2d_flat(const Tensor& flat, const WaveletFilter& f, int level,
                          std::size_t axis_h, std::size_t original_h, std::size_t original_w) {
    if (axis_h + 1 >= flat.ndim()) throw ShapeError("idwt2d: axes out of range");
    const std::size_t Hp = flat.dim(axis_h), Wp = flat.dim(axis_h + 1);
    if (Hp != dwt_padded_len(original_h, level) || Wp != dwt_padded_len(original_w, level))
        throw ShapeError("idwt2d: coefficient extents " + std::to_string(Hp) + "x" +
                         std::to_string(Wp) + " inconsistent with original " +
                         std::to_string(original_h) + "x" + std::to_string(original_w));
    std::size_t pre = 1, post = 1;
    for (std::size_t i = 0; i < axis_h; ++i) pre *= flat.dim(i);
    for (std::size_t i = axis_h + 2; i < flat.ndim(); ++i) post *= flat.dim(i);

    std::vector<double> buf(flat.data());
    std::vector<double> s0, s1;
    detail::synthesis_cascade_2d(buf.data(), pre, Hp, Wp, post, level, f, s0, s1);

    Shape out_shape(flat.shape());
    out_shape[axis_h] = original_h;
    out_shape[axis_h + 1] = original_w;
    std::vector<double> out(pre * original_h * original_w * post);
    for (std::size_t o = 0; o < pre; ++o)
        for (std::size_t r = 0; r < original_h; ++r)
            std::memcpy(out.data() + (o * original_h + r) * original_w * post,
                        buf.data() + (o * Hp + r) * Wp * post,
                        original_w * post * sizeof(double));

    const WaveletFilter* fp = &WaveletFilter::get(f.name);
    detail::Node* px = flat.node().get();
    return detail::make_op(
        out_shape, std::move(out), {flat},
        [px, fp, level, pre, post, Hp, Wp, original_h, original_w](detail::Node& o) {
            double* gx = detail::grad_buf(px);
            if (!gx) return;
            std::vector<double> tmp(pre * Hp * Wp * post, 0.0);
            for (std::size_t oo = 0; oo < pre; ++oo)
                for (std::size_t r = 0; r < original_h; ++r)
                    std::memcpy(tmp.data() + (oo * Hp + r) * Wp * post,
                                o.grad.data() + (oo * original_h + r) * original_w * post,
                                original_w * post * sizeof(double));
            std::vector<double> t0, t1;
            detail::analysis_cascade_2d(tmp.data(), pre, Hp, Wp, post, level, *fp, t0, t1);
            for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
        });
}

// ---------------------------------------------------------------------------
// Banded coefficient API
// ---------------------------------------------------------------------------

/// Multilevel 1D decomposition: level-m approximation plus detail bands from
/// level m (coarsest) down to 1 (finest).
struct DwtCoeffs {
    Tensor approx;
    std::vector<Tensor> details;  // index 0 = level m
    std::size_t original_len = 0;
    int level = 0;
    std::string filter_name;
    std::size_t axis = 0;  // transformed axis of the source tensor
};

/// 2D analogue; details are (lh, hl, hh) triples with L/H = low/high-pass
/// along (rows, columns).
struct DwtCoeffs2d {
    struct Bands {
        Tensor lh, hl, hh;
    };
    Tensor approx;
    std::vector<Bands> details;  // index 0 = level m
    std::size_t original_h = 0, original_w = 0;
    int level = 0;
    std::string filter_name;
    std::size_t axis_h = 0;
};

/// Multilevel 1D DWT along `axis` (default: trailing axis).
inline DwtCoeffs dwt1d(const Tensor& x, const WaveletFilter& f, int level,
                       std::size_t axis = static_cast<std::size_t>(-1)) {
    if (axis == static_cast<std::size_t>(-1)) axis = x.ndim() - 1;
    Tensor flat = dwt1d_flat(x, f, level, axis);
    const std::size_t P = flat.dim(axis);
    DwtCoeffs c;
    c.original_len = x.dim(axis);
    c.level = level;
    c.filter_name = f.name;
    c.axis = axis;
    c.approx = slice(flat, axis, 0, P >> level);
    for (int j = level; j >= 1; --j)
        c.details.push_back(slice(flat, axis, P >> j, P >> j));
    return c;
}

/// Inverse multilevel 1D DWT; exact inverse of dwt1d for the same filter.
inline Tensor idwt1d(const DwtCoeffs& c, const WaveletFilter& f) {
    if (c.filter_name != f.name)
        throw ValueError("idwt1d: coefficients were produced with " + c.filter_name +
                         ", not " + f.name);
    if (c.details.size() != static_cast<std::size_t>(c.level))
        throw ShapeError("idwt1d: expected " + std::to_string(c.level) + " detail bands, got " +
                         std::to_string(c.details.size()));
    std::vector<Tensor> parts{c.approx};
    for (const auto& d : c.details) parts.push_back(d);
    Tensor flat = concat(parts, c.axis);
    return idwt1d_flat(flat, f, c.level, c.axis, c.original_len);
}

/// Multilevel separable 2D DWT along axes (axis_h, axis_h+1)
/// (default: the two trailing axes).
inline DwtCoeffs2d dwt2d(const Tensor& x, const WaveletFilter& f, int level,
                         std::size_t axis_h = static_cast<std::size_t>(-1)) {
    if (axis_h == static_cast<std::size_t>(-1)) axis_h = x.ndim() - 2;
    Tensor flat = dwt2d_flat(x, f, level, axis_h);
    const std::size_t Hp = flat.dim(axis_h), Wp = flat.dim(axis_h + 1);
    DwtCoeffs2d c;
    c.original_h = x.dim(axis_h);
    c.original_w = x.dim(axis_h + 1);
    c.level = level;
    c.filter_name = f.name;
    c.axis_h = axis_h;
    auto block = [&](std::size_t r0, std::size_t rn, std::size_t c0, std::size_t cn) {
        return slice(slice(flat, axis_h, r0, rn), axis_h + 1, c0, cn);
    };
    c.approx = block(0, Hp >> level, 0, Wp >> level);
    for (int j = level; j >= 1; --j) {
        const std::size_t bh = Hp >> j, bw = Wp >> j;
        DwtCoeffs2d::Bands b;
        b.lh = block(0, bh, bw, bw);
        b.hl = block(bh, bh, 0, bw);
        b.hh = block(bh, bh, bw, bw);
        c.details.push_back(b);
    }
    return c;
}

/// Inverse separable 2D DWT.
inline Tensor idwt2d(const DwtCoeffs2d& c, const WaveletFilter& f) {
    if (c.filter_name != f.name)
        throw ValueError("idwt2d: coefficients were produced with " + c.filter_name +
                         ", not " + f.name);
    if (c.details.size() != static_cast<std::size_t>(c.level))
        throw ShapeError("idwt2d: expected " + std::to_string(c.level) + " detail levels, got " +
                         std::to_string(c.details.size()));
    Tensor cur = c.approx;
    for (int j = 0; j < c.level; ++j) {
        const auto& b = c.details[j];
        Tensor top = concat({cur, b.lh}, c.axis_h + 1);
        Tensor bottom = concat({b.hl, b.hh}, c.axis_h + 1);
        cur = concat({top, bottom}, c.axis_h);
    }
    return idwt2d_flat(cur, f, c.level, c.axis_h, c.original_h, c.original_w);
}

}  // namespace uwno
