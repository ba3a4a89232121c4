#pragma once

// Convolution, pooling and resampling in channels-first layout: 1D tensors
// are (B, C, N), 2D tensors are (B, C, H, W). Convolutions use the
// cross-correlation convention (no kernel flip); kernels are learned, so the
// model is agnostic to it.
//
// conv2d is the engine: the input is gathered into a transposed column
// matrix colT of shape (C*KH*KW, B*H'*W') whose row order matches the
// flattened kernel, so the forward pass is one GEMM w . colT and the
// backward passes are GEMMs against the same buffer. The transposed layout
// keeps every gather/scatter a contiguous row run. Loops with disjoint
// writes run under OpenMP; results do not depend on the thread count.

#include <vector>

#include "uwno/tensor.hpp"

namespace uwno {

enum class PaddingMode { Zero, Periodic, None };

namespace detail {

inline std::vector<double>& conv_scratch(int which) {
    thread_local std::vector<double> bufs[3];
    return bufs[which];
}

struct Conv2dPlan {
    std::size_t b, c, h, w;        // input
    std::size_t o, kh, kw;         // kernel
    std::size_t stride;
    PaddingMode pad;
    std::size_t pl_h, pl_w;        // left pads
    std::size_t ho, wo;            // output spatial
    std::size_t cols() const { return b * ho * wo; }   // M
    std::size_t rows() const { return c * kh * kw; }   // C*KH*KW
};

inline Conv2dPlan make_conv2d_plan(const Shape& xs, const Shape& ws, std::size_t stride,
                                   PaddingMode pad) {
    if (xs.size() != 4 || ws.size() != 4)
        throw ShapeError("conv2d: expected x (B,C,H,W) and w (O,C,KH,KW), got " +
                         shape_str(xs) + " and " + shape_str(ws));
    if (xs[1] != ws[1])
        throw ShapeError("conv2d: input channels " + std::to_string(xs[1]) +
                         " != kernel channels " + std::to_string(ws[1]));
    if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
    Conv2dPlan p;
    p.b = xs[0]; p.c = xs[1]; p.h = xs[2]; p.w = xs[3];
    p.o = ws[0]; p.kh = ws[2]; p.kw = ws[3];
    p.stride = stride;
    p.pad = pad;
    const std::size_t pad_h = (pad == PaddingMode::None) ? 0 : p.kh - 1;
    const std::size_t pad_w = (pad == PaddingMode::None) ? 0 : p.kw - 1;
    p.pl_h = pad_h / 2;
    p.pl_w = pad_w / 2;
    if (p.h + pad_h < p.kh || p.w + pad_w < p.kw)
        throw ShapeError("conv2d: kernel " + std::to_string(p.kh) + "x" + std::to_string(p.kw) +
                         " larger than padded input " + std::to_string(p.h + pad_h) + "x" +
                         std::to_string(p.w + pad_w));
    p.ho = (p.h + pad_h - p.kh) / stride + 1;
    p.wo = (p.w + pad_w - p.kw) / stride + 1;
    return p;
}

inline long wrap_index(long i, long n) { return ((i % n) + n) % n; }

/// Gather x into colT (rows x cols): row (c, kh, kw), column (b, i, j).
inline void im2col_t(const Conv2dPlan& p, const double* x, double* col) {
    const long H = (long)p.h, W = (long)p.w;
    const std::size_t M = p.cols();
    UWNO_OMP_FOR
    for (std::size_t r = 0; r < p.rows(); ++r) {
        const std::size_t c = r / (p.kh * p.kw);
        const std::size_t kh = (r / p.kw) % p.kh;
        const std::size_t kw = r % p.kw;
        double* row = col + r * M;
        for (std::size_t bb = 0; bb < p.b; ++bb) {
            const double* xc = x + (bb * p.c + c) * p.h * p.w;
            for (std::size_t i = 0; i < p.ho; ++i) {
                double* dst = row + (bb * p.ho + i) * p.wo;
                const long ii = (long)(i * p.stride + kh) - (long)p.pl_h;
                if (ii < 0 || ii >= H) {
                    if (p.pad == PaddingMode::Periodic) {
                        const double* src = xc + wrap_index(ii, H) * W;
                        for (std::size_t j = 0; j < p.wo; ++j)
                            dst[j] = src[wrap_index((long)(j * p.stride + kw) - (long)p.pl_w, W)];
                    } else {
                        std::fill(dst, dst + p.wo, 0.0);
                    }
                    continue;
                }
                const double* src = xc + ii * W;
                if (p.stride == 1) {
                    const long off = (long)kw - (long)p.pl_w;  // jj = j + off
                    const long lo = std::max<long>(0, -off);
                    const long hi = std::min<long>((long)p.wo, W - off);
                    if (p.pad == PaddingMode::Periodic) {
                        for (long j = 0; j < lo; ++j) dst[j] = src[wrap_index(j + off, W)];
                        for (long j = std::max<long>(lo, hi); j < (long)p.wo; ++j)
                            dst[j] = src[wrap_index(j + off, W)];
                    } else {
                        for (long j = 0; j < lo; ++j) dst[j] = 0.0;
                        for (long j = std::max<long>(lo, hi); j < (long)p.wo; ++j) dst[j] = 0.0;
                    }
                    if (hi > lo)
                        std::memcpy(dst + lo, src + lo + off, (hi - lo) * sizeof(double));
                } else {
                    for (std::size_t j = 0; j < p.wo; ++j) {
                        const long jj = (long)(j * p.stride + kw) - (long)p.pl_w;
                        if (jj >= 0 && jj < W)
                            dst[j] = src[jj];
                        else if (p.pad == PaddingMode::Periodic)
                            dst[j] = src[wrap_index(jj, W)];
                        else
                            dst[j] = 0.0;
                    }
                }
            }
        }
    }
}

/// Scatter-add colT gradients back onto the input gradient. Rows overlap in
/// x, so the parallel axis is the batch.
inline void col2im_t_add(const Conv2dPlan& p, const double* col, double* gx) {
    const long H = (long)p.h, W = (long)p.w;
    const std::size_t M = p.cols();
    UWNO_OMP_FOR
    for (std::size_t bb = 0; bb < p.b; ++bb) {
        for (std::size_t r = 0; r < p.rows(); ++r) {
            const std::size_t c = r / (p.kh * p.kw);
            const std::size_t kh = (r / p.kw) % p.kh;
            const std::size_t kw = r % p.kw;
            const double* row = col + r * M;
            double* xc = gx + (bb * p.c + c) * p.h * p.w;
            for (std::size_t i = 0; i < p.ho; ++i) {
                const double* src = row + (bb * p.ho + i) * p.wo;
                const long ii = (long)(i * p.stride + kh) - (long)p.pl_h;
                long iw = ii;
                if (ii < 0 || ii >= H) {
                    if (p.pad != PaddingMode::Periodic) continue;
                    iw = wrap_index(ii, H);
                }
                double* dstrow = xc + iw * W;
                for (std::size_t j = 0; j < p.wo; ++j) {
                    const long jj = (long)(j * p.stride + kw) - (long)p.pl_w;
                    if (jj >= 0 && jj < W)
                        dstrow[jj] += src[j];
                    else if (p.pad == PaddingMode::Periodic)
                        dstrow[wrap_index(jj, W)] += src[j];
                }
            }
        }
    }
}

inline Tensor conv2d_impl(const Tensor& x, const Tensor& w, const Tensor& bias,
                          std::size_t stride, PaddingMode pad) {
    const Conv2dPlan p = make_conv2d_plan(x.shape(), w.shape(), stride, pad);
    const std::size_t M = p.cols(), Kd = p.rows(), O = p.o;
    if (bias.defined() && bias.numel() != O)
        throw ShapeError("conv2d: bias size " + std::to_string(bias.numel()) +
                         " != output channels " + std::to_string(O));

    auto& col = conv_scratch(0);
    col.resize(Kd * M);
    im2col_t(p, x.data().data(), col.data());

    auto& out_t = conv_scratch(1);
    out_t.resize(O * M);
    gemm(false, false, (int)O, (int)M, (int)Kd, 1.0, w.data().data(), (int)Kd, col.data(),
         (int)M, 0.0, out_t.data(), (int)M);
    if (bias.defined()) {
        const double* bv = bias.data().data();
        UWNO_OMP_FOR
        for (std::size_t oo = 0; oo < O; ++oo) {
            double* row = out_t.data() + oo * M;
            const double bo = bv[oo];
            for (std::size_t i = 0; i < M; ++i) row[i] += bo;
        }
    }
    // (O, B*Ho*Wo) -> (B, O, Ho, Wo): contiguous run per (b, o)
    std::vector<double> out(p.b * O * p.ho * p.wo);
    const std::size_t hw = p.ho * p.wo;
    UWNO_OMP_FOR
    for (std::size_t bo = 0; bo < p.b * O; ++bo) {
        const std::size_t bb = bo / O, oo = bo % O;
        std::memcpy(out.data() + bo * hw, out_t.data() + oo * M + bb * hw,
                    hw * sizeof(double));
    }

    Node* px = x.node().get();
    Node* pw = w.node().get();
    Node* pb = bias.defined() ? bias.node().get() : nullptr;
    auto backward = [p, px, pw, pb](Node& o) {
        const std::size_t M2 = p.cols(), Kd2 = p.rows(), O2 = p.o;
        const std::size_t hw2 = p.ho * p.wo;
        auto& g_t = conv_scratch(1);
        g_t.resize(O2 * M2);
        UWNO_OMP_FOR
        for (std::size_t bo = 0; bo < p.b * O2; ++bo) {
            const std::size_t bb = bo / O2, oo = bo % O2;
            std::memcpy(g_t.data() + oo * M2 + bb * hw2, o.grad.data() + bo * hw2,
                        hw2 * sizeof(double));
        }
        if (pb) {
            if (double* gb = grad_buf(pb)) {
                for (std::size_t oo = 0; oo < O2; ++oo) {
                    const double* row = g_t.data() + oo * M2;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < M2; ++i) acc += row[i];
                    gb[oo] += acc;
                }
            }
        }
        if (double* gx = grad_buf(px)) {
            auto& dcol = conv_scratch(2);
            dcol.resize(Kd2 * M2);
            gemm(true, false, (int)Kd2, (int)M2, (int)O2, 1.0, pw->value.data(), (int)Kd2,
                 g_t.data(), (int)M2, 0.0, dcol.data(), (int)M2);
            col2im_t_add(p, dcol.data(), gx);
        }
        if (double* gw = grad_buf(pw)) {
            auto& col2 = conv_scratch(0);
            col2.resize(Kd2 * M2);
            im2col_t(p, px->value.data(), col2.data());
            gemm(false, true, (int)O2, (int)Kd2, (int)M2, 1.0, g_t.data(), (int)M2,
                 col2.data(), (int)M2, 1.0, gw, (int)Kd2);
        }
    };
    if (bias.defined())
        return make_op({p.b, O, p.ho, p.wo}, std::move(out), {x, w, bias}, backward);
    return make_op({p.b, O, p.ho, p.wo}, std::move(out), {x, w}, backward);
}

}  // namespace detail

/// 2D cross-correlation: x (B,C,H,W) * w (O,C,KH,KW) -> (B,O,H',W').
inline Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride = 1,
                     PaddingMode pad = PaddingMode::None) {
    return detail::conv2d_impl(x, w, Tensor(), stride, pad);
}

/// conv2d with a per-output-channel bias.
inline Tensor conv2d_bias(const Tensor& x, const Tensor& w, const Tensor& bias,
                          std::size_t stride = 1, PaddingMode pad = PaddingMode::None) {
    return detail::conv2d_impl(x, w, bias, stride, pad);
}

/// Pointwise (1x1) 2D convolution.
inline Tensor conv2d_pointwise(const Tensor& x, const Tensor& w) {
    return conv2d(x, w, 1, PaddingMode::None);
}

/// 1D cross-correlation: x (B,C,N) * w (O,C,K) -> (B,O,N').
inline Tensor conv1d(const Tensor& x, const Tensor& w, std::size_t stride = 1,
                     PaddingMode pad = PaddingMode::None) {
    if (x.ndim() != 3 || w.ndim() != 3)
        throw ShapeError("conv1d: expected x (B,C,N) and w (O,C,K), got " +
                         shape_str(x.shape()) + " and " + shape_str(w.shape()));
    Tensor x4 = reshape(x, {x.dim(0), x.dim(1), 1, x.dim(2)});
    Tensor w4 = reshape(w, {w.dim(0), w.dim(1), 1, w.dim(2)});
    Tensor y4 = conv2d(x4, w4, stride, pad);
    return reshape(y4, {y4.dim(0), y4.dim(1), y4.dim(3)});
}

inline Tensor conv1d_bias(const Tensor& x, const Tensor& w, const Tensor& bias,
                          std::size_t stride = 1, PaddingMode pad = PaddingMode::None) {
    Tensor x4 = reshape(x, {x.dim(0), x.dim(1), 1, x.dim(2)});
    Tensor w4 = reshape(w, {w.dim(0), w.dim(1), 1, w.dim(2)});
    Tensor y4 = detail::conv2d_impl(x4, w4, bias, stride, pad);
    return reshape(y4, {y4.dim(0), y4.dim(1), y4.dim(3)});
}

/// 2x2 average pooling, stride 2. Spatial extents must be even (callers pad).
inline Tensor avg_pool2d(const Tensor& x) {
    if (x.ndim() != 4) throw ShapeError("avg_pool2d: expected (B,C,H,W)");
    const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 || w % 2)
        throw ShapeError("avg_pool2d: odd spatial size " + std::to_string(h) + "x" +
                         std::to_string(w) + " (pad first)");
    const std::size_t ho = h / 2, wo = w / 2;
    const auto& xv = x.data();
    std::vector<double> out(b * c * ho * wo);
    UWNO_OMP_FOR
    for (std::size_t bc = 0; bc < b * c; ++bc) {
        const double* src = xv.data() + bc * h * w;
        double* dst = out.data() + bc * ho * wo;
        for (std::size_t i = 0; i < ho; ++i)
            for (std::size_t j = 0; j < wo; ++j)
                dst[i * wo + j] = 0.25 * (src[(2 * i) * w + 2 * j] + src[(2 * i) * w + 2 * j + 1] +
                                          src[(2 * i + 1) * w + 2 * j] +
                                          src[(2 * i + 1) * w + 2 * j + 1]);
    }
    detail::Node* px = x.node().get();
    return detail::make_op({b, c, ho, wo}, std::move(out), {x},
                           [px, b, c, h, w, ho, wo](detail::Node& o) {
                               double* gx = detail::grad_buf(px);
                               if (!gx) return;
                               UWNO_OMP_FOR
                               for (std::size_t bc = 0; bc < b * c; ++bc) {
                                   const double* g = o.grad.data() + bc * ho * wo;
                                   double* dst = gx + bc * h * w;
                                   for (std::size_t i = 0; i < ho; ++i)
                                       for (std::size_t j = 0; j < wo; ++j) {
                                           const double v = 0.25 * g[i * wo + j];
                                           dst[(2 * i) * w + 2 * j] += v;
                                           dst[(2 * i) * w + 2 * j + 1] += v;
                                           dst[(2 * i + 1) * w + 2 * j] += v;
                                           dst[(2 * i + 1) * w + 2 * j + 1] += v;
                                       }
                               }
                           });
}

/// Average pooling over pairs along the last axis of (B,C,N); N must be even.
inline Tensor avg_pool1d(const Tensor& x) {
    if (x.ndim() != 3) throw ShapeError("avg_pool1d: expected (B,C,N)");
    const std::size_t n = x.dim(2);
    if (n % 2) throw ShapeError("avg_pool1d: odd length " + std::to_string(n) + " (pad first)");
    Tensor x4 = reshape(x, {x.dim(0), x.dim(1), x.dim(2) / 2, 2});
    // mean over the trailing pair via matmul with [0.5, 0.5]^T
    Tensor half = Tensor::from_data({2, 1}, {0.5, 0.5});
    Tensor y = matmul(x4, half);  // (B, C, N/2, 1)
    return reshape(y, {x.dim(0), x.dim(1), n / 2});
}

/// Nearest-neighbor upsampling that exactly doubles each spatial dimension.
inline Tensor upsample2x_2d(const Tensor& x) {
    if (x.ndim() != 4) throw ShapeError("upsample2x: expected (B,C,H,W)");
    const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    std::vector<double> out(b * c * 4 * h * w);
    const auto& xv = x.data();
    UWNO_OMP_FOR
    for (std::size_t bc = 0; bc < b * c; ++bc) {
        const double* src = xv.data() + bc * h * w;
        double* dst = out.data() + bc * 4 * h * w;
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const double v = src[i * w + j];
                dst[(2 * i) * 2 * w + 2 * j] = v;
                dst[(2 * i) * 2 * w + 2 * j + 1] = v;
                dst[(2 * i + 1) * 2 * w + 2 * j] = v;
                dst[(2 * i + 1) * 2 * w + 2 * j + 1] = v;
            }
    }
    detail::Node* px = x.node().get();
    return detail::make_op({b, c, 2 * h, 2 * w}, std::move(out), {x},
                           [px, b, c, h, w](detail::Node& o) {
                               double* gx = detail::grad_buf(px);
                               if (!gx) return;
                               UWNO_OMP_FOR
                               for (std::size_t bc = 0; bc < b * c; ++bc) {
                                   const double* g = o.grad.data() + bc * 4 * h * w;
                                   double* dst = gx + bc * h * w;
                                   for (std::size_t i = 0; i < h; ++i)
                                       for (std::size_t j = 0; j < w; ++j)
                                           dst[i * w + j] += g[(2 * i) * 2 * w + 2 * j] +
                                                             g[(2 * i) * 2 * w + 2 * j + 1] +
                                                             g[(2 * i + 1) * 2 * w + 2 * j] +
                                                             g[(2 * i + 1) * 2 * w + 2 * j + 1];
                               }
                           });
}

inline Tensor upsample2x_1d(const Tensor& x) {
    if (x.ndim() != 3) throw ShapeError("upsample2x: expected (B,C,N)");
    const std::size_t b = x.dim(0), c = x.dim(1), n = x.dim(2);
    std::vector<double> out(b * c * 2 * n);
    const auto& xv = x.data();
    for (std::size_t bc = 0; bc < b * c; ++bc)
        for (std::size_t i = 0; i < n; ++i) {
            out[bc * 2 * n + 2 * i] = xv[bc * n + i];
            out[bc * 2 * n + 2 * i + 1] = xv[bc * n + i];
        }
    detail::Node* px = x.node().get();
    return detail::make_op({b, c, 2 * n}, std::move(out), {x},
                           [px, b, c, n](detail::Node& o) {
                               double* gx = detail::grad_buf(px);
                               if (!gx) return;
                               for (std::size_t bc = 0; bc < b * c; ++bc)
                                   for (std::size_t i = 0; i < n; ++i)
                                       gx[bc * n + i] += o.grad[bc * 2 * n + 2 * i] +
                                                         o.grad[bc * 2 * n + 2 * i + 1];
                           });
}

/// Zero-pad the trailing spatial axes of a channels-first tensor up to the
/// target extents (padding appended at the high end).
inline Tensor pad_spatial_to(const Tensor& x, const std::vector<std::size_t>& target) {
    if (x.ndim() == 3) {
        if (target.size() != 1 || target[0] < x.dim(2))
            throw ShapeError("pad_spatial_to: bad target for " + shape_str(x.shape()));
        if (target[0] == x.dim(2)) return x;
        Tensor z = Tensor::zeros({x.dim(0), x.dim(1), target[0] - x.dim(2)});
        return concat({x, z}, 2);
    }
    if (x.ndim() == 4) {
        if (target.size() != 2 || target[0] < x.dim(2) || target[1] < x.dim(3))
            throw ShapeError("pad_spatial_to: bad target for " + shape_str(x.shape()));
        Tensor y = x;
        if (target[0] > x.dim(2)) {
            Tensor z = Tensor::zeros({x.dim(0), x.dim(1), target[0] - x.dim(2), x.dim(3)});
            y = concat({y, z}, 2);
        }
        if (target[1] > x.dim(3)) {
            Tensor z = Tensor::zeros({y.dim(0), y.dim(1), y.dim(2), target[1] - x.dim(3)});
            y = concat({y, z}, 3);
        }
        return y;
    }
    throw ShapeError("pad_spatial_to: expected rank 3 or 4, got " + shape_str(x.shape()));
}

/// Crop the trailing spatial axes back to the given extents.
inline Tensor crop_spatial_to(const Tensor& x, const std::vector<std::size_t>& target) {
    if (x.ndim() == 3) {
        if (target[0] == x.dim(2)) return x;
        return slice(x, 2, 0, target[0]);
    }
    if (x.ndim() == 4) {
        Tensor y = x;
        if (target[0] != x.dim(2)) y = slice(y, 2, 0, target[0]);
        if (target[1] != y.dim(3)) y = slice(y, 3, 0, target[1]);
        return y;
    }
    throw ShapeError("crop_spatial_to: expected rank 3 or 4, got " + shape_str(x.shape()));
}

/// (B, ..., C) -> (B, C, ...) and back.
inline Tensor to_channels_first(const Tensor& x) {
    if (x.ndim() == 3) return permute(x, {0, 2, 1});
    if (x.ndim() == 4) return permute(x, {0, 3, 1, 2});
    throw ShapeError("to_channels_first: expected rank 3 or 4, got " + shape_str(x.shape()));
}

inline Tensor to_channels_last(const Tensor& x) {
    if (x.ndim() == 3) return permute(x, {0, 2, 1});
    if (x.ndim() == 4) return permute(x, {0, 2, 3, 1});
    throw ShapeError("to_channels_last: expected rank 3 or 4, got " + shape_str(x.shape()));
}

}  // namespace uwno
