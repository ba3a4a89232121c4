#pragma once

// The operator network: pointwise lifting P, a stack of enhanced wavelet
// layers, and pointwise projection Q1/Q2.
//
// Each layer combines three paths and a residual shortcut:
//   kernel path   K(v) = idwt(R . dwt(v)): forward DWT to level m, a learned
//                 per-position channel-mixing weight applied to the level-m
//                 approximation band and the level-m detail band(s) (each
//                 band has its own slice of R), all finer details zeroed,
//                 inverse DWT. The kernel-path input is v_j for the first
//                 layer and v_j + v_0 afterwards.
//   linear path   W v + b, a pointwise (1x1) convolution.
//   U-Net path    a two-stage encoder/decoder with 3x3 (resp. 3-tap)
//                 kernels and skip concatenations.
// The sum is passed through the adaptive activation sigma(n a s) with a
// trainable scalar slope a per layer (initialized 1/n so the initial
// effective slope is 1); the final layer output stays unactivated.
//
// baseline_wno disables the U-Net path, the residual shortcut and the
// adaptive slope, leaving sigma(K v + W v) layers for ablation runs.

#include <string>
#include <utility>
#include <vector>

#include "uwno/container.hpp"
#include "uwno/conv.hpp"
#include "uwno/rng.hpp"
#include "uwno/tensor.hpp"
#include "uwno/wavelet.hpp"

namespace uwno {

enum class Activation { Gelu, Mish };

inline Tensor activate(const Tensor& x, Activation a) {
    return a == Activation::Gelu ? gelu(x) : mish(x);
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "gelu" || s == "GELU") return Activation::Gelu;
    if (s == "mish" || s == "MISH") return Activation::Mish;
    throw ValueError("unknown activation '" + s + "' (gelu or mish)");
}

inline std::string to_string(Activation a) { return a == Activation::Gelu ? "gelu" : "mish"; }

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct UwnoConfig {
    int spatial_dims = 1;
    std::vector<std::size_t> resolution;  // {N} or {H, W}; fixes the R extents
    int width = 64;                       // d_v
    int proj_dim = 128;                   // d_r
    int layers = 4;                       // L
    std::string wavelet = "db6";
    int level = 3;                        // m
    Activation activation = Activation::Gelu;
    int slope_scale = 10;                 // n of sigma(n a x)
    std::vector<int> unet_channels;       // {c_in, c_stage1, c_stage2}; empty = {d_v, d_v, 2 d_v}
    int in_channels = 1;                  // d_a
    int out_channels = 1;                 // d_u
    bool baseline_wno = false;

    std::vector<int> unet_plan() const {
        if (unet_channels.empty()) return {width, width, 2 * width};
        return unet_channels;
    }

    void validate() const {
        if (spatial_dims != 1 && spatial_dims != 2)
            throw ValueError("config: spatial_dims must be 1 or 2");
        if (resolution.size() != (std::size_t)spatial_dims)
            throw ValueError("config: resolution must list " + std::to_string(spatial_dims) +
                             " extents");
        if (layers < 1 || level < 1 || slope_scale < 1 || width < 1 || proj_dim < 1 ||
            in_channels < 1 || out_channels < 1)
            throw ValueError("config: layers, level, slope_scale, width, proj_dim and channel "
                             "counts must be >= 1");
        if (unet_plan().size() != 3)
            throw ValueError("config: unet_channels must have 3 entries");
        if (unet_plan()[0] != width)
            throw ValueError("config: unet_channels[0] must equal width");
        WaveletFilter::get(wavelet);  // name check
    }

    /// Coefficient extents of the coarsest band for this resolution.
    std::vector<std::size_t> coarse_extents() const {
        std::vector<std::size_t> z;
        for (std::size_t n : resolution) z.push_back(dwt_padded_len(n, level) >> level);
        return z;
    }
};

// ---------------------------------------------------------------------------
// Wavelet-space channel mixing (the R weight)
// ---------------------------------------------------------------------------

/// Per-position channel mixing of one coefficient band:
/// out[b, p, o] = sum_i coeff[b, p, i] * R[band, p, i, o], with p running over
/// the flattened spatial positions of the band. Differentiable in both
/// arguments.
inline Tensor position_mix(const Tensor& coeff, const Tensor& R, std::size_t band) {
    const std::size_t cr = coeff.ndim();
    if (cr < 3) throw ShapeError("position_mix: coefficients must be (B, positions..., C)");
    const std::size_t B = coeff.dim(0);
    const std::size_t C = coeff.dim(cr - 1);
    const std::size_t P = coeff.numel() / (B * C);
    const std::size_t rr = R.ndim();
    if (rr < 4 || R.dim(rr - 2) != C || R.dim(rr - 1) != C)
        throw ShapeError("position_mix: R " + shape_str(R.shape()) +
                         " does not mix " + std::to_string(C) + " channels");
    const std::size_t rp = R.numel() / (R.dim(0) * C * C);
    if (rp != P)
        throw ShapeError("position_mix: R spatial extent " + std::to_string(rp) +
                         " does not match band extent " + std::to_string(P));
    if (band >= R.dim(0))
        throw ShapeError("position_mix: band " + std::to_string(band) + " out of range for R " +
                         shape_str(R.shape()));

    const double* cv = coeff.data().data();
    const double* rv = R.data().data() + band * P * C * C;
    std::vector<double> out(B * P * C, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p = 0; p < P; ++p) {
            const double* crow = cv + (b * P + p) * C;
            double* orow = out.data() + (b * P + p) * C;
            const double* rmat = rv + p * C * C;
            for (std::size_t i = 0; i < C; ++i) {
                const double ci = crow[i];
                const double* rrow = rmat + i * C;
                for (std::size_t o = 0; o < C; ++o) orow[o] += ci * rrow[o];
            }
        }
    detail::Node* pc = coeff.node().get();
    detail::Node* pr = R.node().get();
    const std::size_t roff = band * P * C * C;
    return detail::make_op(coeff.shape(), std::move(out), {coeff, R},
                           [pc, pr, roff, B, P, C](detail::Node& o) {
                               const double* g = o.grad.data();
                               const double* cv_ = pc->value.data();
                               const double* rv_ = pr->value.data() + roff;
                               double* gc = detail::grad_buf(pc);
                               double* gr = detail::grad_buf(pr);
                               if (gr) gr += roff;
                               for (std::size_t b = 0; b < B; ++b)
                                   for (std::size_t p = 0; p < P; ++p) {
                                       const double* grow = g + (b * P + p) * C;
                                       const double* crow = cv_ + (b * P + p) * C;
                                       const double* rmat = rv_ + p * C * C;
                                       if (gc) {
                                           double* gcrow = gc + (b * P + p) * C;
                                           for (std::size_t i = 0; i < C; ++i) {
                                               const double* rrow = rmat + i * C;
                                               double acc = 0.0;
                                               for (std::size_t oo = 0; oo < C; ++oo)
                                                   acc += grow[oo] * rrow[oo];
                                               gcrow[i] += acc;
                                           }
                                       }
                                       if (gr) {
                                           double* grmat = gr + p * C * C;
                                           for (std::size_t i = 0; i < C; ++i) {
                                               const double ci = crow[i];
                                               double* grrow = grmat + i * C;
                                               for (std::size_t oo = 0; oo < C; ++oo)
                                                   grrow[oo] += ci * grow[oo];
                                           }
                                       }
                                   }
                           });
}

/// Wavelet-domain kernel convolution K(v) over channels-last fields
/// (B, N, C) or (B, H, W, C). R bands: 1D {approx, detail}; 2D {LL, LH, HL, HH}.
inline Tensor wavelet_kernel_conv(const Tensor& v, const Tensor& R, const WaveletFilter& f,
                                  int level, int spatial_dims) {
    if (spatial_dims == 1) {
        if (v.ndim() != 3) throw ShapeError("wavelet_kernel_conv: expected (B, N, C)");
        DwtCoeffs c = dwt1d(v, f, level, 1);
        if (R.ndim() != 4 || R.dim(0) != 2 || R.dim(1) != c.approx.dim(1))
            throw ShapeError("wavelet_kernel_conv: R " + shape_str(R.shape()) +
                             " does not match coarsest band extent " +
                             std::to_string(c.approx.dim(1)) + " (expect [2," +
                             std::to_string(c.approx.dim(1)) + ",C,C])");
        DwtCoeffs mixed;
        mixed.original_len = c.original_len;
        mixed.level = c.level;
        mixed.filter_name = c.filter_name;
        mixed.axis = c.axis;
        mixed.approx = position_mix(c.approx, R, 0);
        mixed.details.push_back(position_mix(c.details[0], R, 1));
        for (std::size_t j = 1; j < c.details.size(); ++j)
            mixed.details.push_back(Tensor::zeros(c.details[j].shape()));
        return idwt1d(mixed, f);
    }
    if (v.ndim() != 4) throw ShapeError("wavelet_kernel_conv: expected (B, H, W, C)");
    DwtCoeffs2d c = dwt2d(v, f, level, 1);
    const std::size_t zh = c.approx.dim(1), zw = c.approx.dim(2);
    if (R.ndim() != 5 || R.dim(0) != 4 || R.dim(1) != zh || R.dim(2) != zw)
        throw ShapeError("wavelet_kernel_conv: R " + shape_str(R.shape()) +
                         " does not match coarsest band extents " + std::to_string(zh) + "x" +
                         std::to_string(zw) + " (expect [4," + std::to_string(zh) + "," +
                         std::to_string(zw) + ",C,C])");
    DwtCoeffs2d mixed;
    mixed.original_h = c.original_h;
    mixed.original_w = c.original_w;
    mixed.level = c.level;
    mixed.filter_name = c.filter_name;
    mixed.axis_h = c.axis_h;
    mixed.approx = position_mix(c.approx, R, 0);
    DwtCoeffs2d::Bands mb;
    mb.lh = position_mix(c.details[0].lh, R, 1);
    mb.hl = position_mix(c.details[0].hl, R, 2);
    mb.hh = position_mix(c.details[0].hh, R, 3);
    mixed.details.push_back(mb);
    for (std::size_t j = 1; j < c.details.size(); ++j) {
        DwtCoeffs2d::Bands zb;
        zb.lh = Tensor::zeros(c.details[j].lh.shape());
        zb.hl = Tensor::zeros(c.details[j].hl.shape());
        zb.hh = Tensor::zeros(c.details[j].hh.shape());
        mixed.details.push_back(zb);
    }
    return idwt2d(mixed, f);
}

// ---------------------------------------------------------------------------
// U-Net path
// ---------------------------------------------------------------------------

struct UnetParams {
    Tensor e1_w, e1_b;      // stage-1 encoder conv
    Tensor e2_w, e2_b;      // stage-2 encoder conv
    Tensor bott_w, bott_b;  // bottleneck conv
    Tensor d2_w, d2_b;      // stage-2 decoder conv (after upsample + skip)
    Tensor d1_w, d1_b;      // stage-1 decoder conv (no trailing activation)
};

/// Two-stage encoder/decoder over a channels-last field; output has the input
/// shape. Odd extents are zero-padded to a multiple of 4 and cropped back.
inline Tensor unet_path(const Tensor& v, const UnetParams& p, Activation act,
                        int spatial_dims) {
    const bool two_d = spatial_dims == 2;
    if (v.ndim() != (two_d ? 4u : 3u))
        throw ShapeError("unet_path: expected " + std::string(two_d ? "(B,H,W,C)" : "(B,N,C)"));
    for (std::size_t d = 1; d + 1 < v.ndim(); ++d)
        if (v.dim(d) < 4)
            throw ShapeError("unet_path: spatial extent " + std::to_string(v.dim(d)) +
                             " < 4 (two pooling stages)");
    auto up4 = [](std::size_t n) { return (n + 3) / 4 * 4; };

    Tensor x = to_channels_first(v);
    std::vector<std::size_t> orig, padded;
    for (std::size_t d = 2; d < x.ndim(); ++d) {
        orig.push_back(x.dim(d));
        padded.push_back(up4(x.dim(d)));
    }
    x = pad_spatial_to(x, padded);

    auto conv = [&](const Tensor& t, const Tensor& w, const Tensor& b) {
        return two_d ? conv2d_bias(t, w, b, 1, PaddingMode::Zero)
                     : conv1d_bias(t, w, b, 1, PaddingMode::Zero);
    };
    auto pool = [&](const Tensor& t) { return two_d ? avg_pool2d(t) : avg_pool1d(t); };
    auto up = [&](const Tensor& t) { return two_d ? upsample2x_2d(t) : upsample2x_1d(t); };

    Tensor e1 = activate(conv(x, p.e1_w, p.e1_b), act);
    Tensor e2 = activate(conv(pool(e1), p.e2_w, p.e2_b), act);
    Tensor bt = activate(conv(pool(e2), p.bott_w, p.bott_b), act);
    Tensor d2 = activate(conv(concat({up(bt), e2}, 1), p.d2_w, p.d2_b), act);
    Tensor d1 = conv(concat({up(d2), e1}, 1), p.d1_w, p.d1_b);
    return to_channels_last(crop_spatial_to(d1, orig));
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct UwnoLayerParams {
    Tensor R;            // wavelet-space weight, [bands, zeta..., d_v, d_v]
    Tensor W_w, W_b;     // pointwise linear path
    UnetParams unet;     // absent in baseline mode
    Tensor slope;        // trainable a, initialized 1/n; absent in baseline mode
};

class UwnoModel {
public:
    UwnoModel() = default;

    UwnoModel(UwnoConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const std::size_t dv = (std::size_t)cfg_.width;
        const std::size_t da = (std::size_t)cfg_.in_channels;
        const std::size_t du = (std::size_t)cfg_.out_channels;
        const std::size_t dr = (std::size_t)cfg_.proj_dim;
        const std::size_t dims = (std::size_t)cfg_.spatial_dims;

        p1_w = init_uniform({dv, da + dims}, 1.0 / std::sqrt(double(da + dims)), init_seed,
                            "lift.fc1.weight");
        p1_b = init_uniform({dv}, 1.0 / std::sqrt(double(da + dims)), init_seed, "lift.fc1.bias");
        p2_w = init_uniform({dv, dv}, 1.0 / std::sqrt(double(dv)), init_seed, "lift.fc2.weight");
        p2_b = init_uniform({dv}, 1.0 / std::sqrt(double(dv)), init_seed, "lift.fc2.bias");

        const auto zeta = cfg_.coarse_extents();
        const auto plan = cfg_.unet_plan();
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string key = "layer" + std::to_string(l);
            UwnoLayerParams lp;
            Shape rshape = (dims == 1) ? Shape{2, zeta[0], dv, dv}
                                       : Shape{4, zeta[0], zeta[1], dv, dv};
            lp.R = init_uniform(rshape, 1.0 / (double(dv) * double(dv)), init_seed, key + ".R");
            lp.W_w = init_uniform({dv, dv}, 1.0 / std::sqrt(double(dv)), init_seed,
                                  key + ".W.weight");
            lp.W_b = init_uniform({dv}, 1.0 / std::sqrt(double(dv)), init_seed, key + ".W.bias");
            if (!cfg_.baseline_wno) {
                const std::size_t c1 = (std::size_t)plan[1], c2 = (std::size_t)plan[2];
                auto conv_shape = [&](std::size_t o, std::size_t i) {
                    return (dims == 2) ? Shape{o, i, 3, 3} : Shape{o, i, 3};
                };
                auto cb = [&](std::size_t i) {
                    return 1.0 / std::sqrt(double(i) * (dims == 2 ? 9.0 : 3.0));
                };
                lp.unet.e1_w = init_uniform(conv_shape(c1, dv), cb(dv), init_seed, key + ".unet.e1.weight");
                lp.unet.e1_b = init_uniform({c1}, cb(dv), init_seed, key + ".unet.e1.bias");
                lp.unet.e2_w = init_uniform(conv_shape(c2, c1), cb(c1), init_seed, key + ".unet.e2.weight");
                lp.unet.e2_b = init_uniform({c2}, cb(c1), init_seed, key + ".unet.e2.bias");
                lp.unet.bott_w = init_uniform(conv_shape(c2, c2), cb(c2), init_seed, key + ".unet.bott.weight");
                lp.unet.bott_b = init_uniform({c2}, cb(c2), init_seed, key + ".unet.bott.bias");
                lp.unet.d2_w = init_uniform(conv_shape(c1, 2 * c2), cb(2 * c2), init_seed, key + ".unet.d2.weight");
                lp.unet.d2_b = init_uniform({c1}, cb(2 * c2), init_seed, key + ".unet.d2.bias");
                lp.unet.d1_w = init_uniform(conv_shape(dv, 2 * c1), cb(2 * c1), init_seed, key + ".unet.d1.weight");
                lp.unet.d1_b = init_uniform({dv}, cb(2 * c1), init_seed, key + ".unet.d1.bias");
                lp.slope = Tensor::from_data({1}, {1.0 / double(cfg_.slope_scale)}, true);
            }
            layers_.push_back(std::move(lp));
        }
        q1_w = init_uniform({dr, dv}, 1.0 / std::sqrt(double(dv)), init_seed, "proj.fc1.weight");
        q1_b = init_uniform({dr}, 1.0 / std::sqrt(double(dv)), init_seed, "proj.fc1.bias");
        q2_w = init_uniform({du, dr}, 1.0 / std::sqrt(double(dr)), init_seed, "proj.fc2.weight");
        q2_b = init_uniform({du}, 1.0 / std::sqrt(double(dr)), init_seed, "proj.fc2.bias");
    }

    const UwnoConfig& config() const { return cfg_; }
    std::vector<UwnoLayerParams>& layers() { return layers_; }
    const std::vector<UwnoLayerParams>& layers() const { return layers_; }

    /// Parameters in a fixed, documented order (optimizer and checkpoints
    /// rely on it).
    std::vector<std::pair<std::string, Tensor>> named_parameters() const {
        std::vector<std::pair<std::string, Tensor>> ps;
        ps.emplace_back("lift.fc1.weight", p1_w);
        ps.emplace_back("lift.fc1.bias", p1_b);
        ps.emplace_back("lift.fc2.weight", p2_w);
        ps.emplace_back("lift.fc2.bias", p2_b);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const std::string key = "layer" + std::to_string(l);
            const auto& lp = layers_[l];
            ps.emplace_back(key + ".R", lp.R);
            ps.emplace_back(key + ".W.weight", lp.W_w);
            ps.emplace_back(key + ".W.bias", lp.W_b);
            if (!cfg_.baseline_wno) {
                ps.emplace_back(key + ".unet.e1.weight", lp.unet.e1_w);
                ps.emplace_back(key + ".unet.e1.bias", lp.unet.e1_b);
                ps.emplace_back(key + ".unet.e2.weight", lp.unet.e2_w);
                ps.emplace_back(key + ".unet.e2.bias", lp.unet.e2_b);
                ps.emplace_back(key + ".unet.bott.weight", lp.unet.bott_w);
                ps.emplace_back(key + ".unet.bott.bias", lp.unet.bott_b);
                ps.emplace_back(key + ".unet.d2.weight", lp.unet.d2_w);
                ps.emplace_back(key + ".unet.d2.bias", lp.unet.d2_b);
                ps.emplace_back(key + ".unet.d1.weight", lp.unet.d1_w);
                ps.emplace_back(key + ".unet.d1.bias", lp.unet.d1_b);
                ps.emplace_back(key + ".slope", lp.slope);
            }
        }
        ps.emplace_back("proj.fc1.weight", q1_w);
        ps.emplace_back("proj.fc1.bias", q1_b);
        ps.emplace_back("proj.fc2.weight", q2_w);
        ps.emplace_back("proj.fc2.bias", q2_b);
        return ps;
    }

    std::size_t count_parameters() const {
        std::size_t n = 0;
        for (const auto& [name, t] : named_parameters()) n += t.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [name, t] : named_parameters()) const_cast<Tensor&>(t).zero_grad();
    }

    /// Stack a with the coordinate channels and apply the two-layer lifting
    /// network P.
    Tensor lift(const Tensor& a, const Tensor& grid) const {
        check_input(a, grid);
        Tensor gb = batch_grid(grid, a.dim(0));
        Tensor x = concat({a, gb}, a.ndim() - 1);
        Tensor h = activate(linear(x, p1_w, p1_b), cfg_.activation);
        return linear(h, p2_w, p2_b);
    }

    /// One enhanced wavelet layer, j in [0, L).
    Tensor layer_forward(const Tensor& v_j, const Tensor& v_0, int j) const {
        if (v_j.shape() != v_0.shape())
            throw ShapeError("uwno_layer: v_j " + shape_str(v_j.shape()) + " vs v_0 " +
                             shape_str(v_0.shape()));
        const auto& lp = layers_.at(j);
        const WaveletFilter& f = WaveletFilter::get(cfg_.wavelet);
        const bool residual = (j > 0) && !cfg_.baseline_wno;
        Tensor kin = residual ? add(v_j, v_0) : v_j;
        Tensor s = add(wavelet_kernel_conv(kin, lp.R, f, cfg_.level, cfg_.spatial_dims),
                       linear(v_j, lp.W_w, lp.W_b));
        if (!cfg_.baseline_wno)
            s = add(s, unet_path(v_j, lp.unet, cfg_.activation, cfg_.spatial_dims));
        if (j == cfg_.layers - 1) return s;  // final iteration stays linear
        if (cfg_.baseline_wno) return activate(s, cfg_.activation);
        return activate(mul(s, mul(lp.slope, double(cfg_.slope_scale))), cfg_.activation);
    }

    /// sigma(Q1 .) then Q2, back to d_u output channels.
    Tensor project(const Tensor& v_last) const {
        Tensor r = activate(linear(v_last, q1_w, q1_b), cfg_.activation);
        return linear(r, q2_w, q2_b);
    }

    Tensor forward(const Tensor& a, const Tensor& grid) const {
        Tensor v0 = lift(a, grid);
        Tensor v = v0;
        for (int j = 0; j < cfg_.layers; ++j) v = layer_forward(v, v0, j);
        return project(v);
    }

    void save(const std::string& path) const {
        Container c;
        c.put_scalar_i64("config.spatial_dims", cfg_.spatial_dims);
        c.put_i64("config.resolution", {cfg_.resolution.size()},
                  std::vector<std::int64_t>(cfg_.resolution.begin(), cfg_.resolution.end()));
        c.put_scalar_i64("config.width", cfg_.width);
        c.put_scalar_i64("config.proj_dim", cfg_.proj_dim);
        c.put_scalar_i64("config.layers", cfg_.layers);
        c.put_string("config.wavelet", cfg_.wavelet);
        c.put_scalar_i64("config.level", cfg_.level);
        c.put_string("config.activation", to_string(cfg_.activation));
        c.put_scalar_i64("config.slope_scale", cfg_.slope_scale);
        const auto plan = cfg_.unet_plan();
        c.put_i64("config.unet_channels", {3},
                  {(std::int64_t)plan[0], (std::int64_t)plan[1], (std::int64_t)plan[2]});
        c.put_scalar_i64("config.in_channels", cfg_.in_channels);
        c.put_scalar_i64("config.out_channels", cfg_.out_channels);
        c.put_scalar_i64("config.baseline_wno", cfg_.baseline_wno ? 1 : 0);
        for (const auto& [name, t] : named_parameters()) c.put_tensor("param." + name, t);
        c.write(path);
    }

    static UwnoModel load(const std::string& path) {
        Container c = Container::read(path);
        UwnoConfig cfg;
        cfg.spatial_dims = (int)c.get_scalar_i64("config.spatial_dims");
        for (auto v : c.get("config.resolution").i64) cfg.resolution.push_back((std::size_t)v);
        cfg.width = (int)c.get_scalar_i64("config.width");
        cfg.proj_dim = (int)c.get_scalar_i64("config.proj_dim");
        cfg.layers = (int)c.get_scalar_i64("config.layers");
        cfg.wavelet = c.get_string("config.wavelet");
        cfg.level = (int)c.get_scalar_i64("config.level");
        cfg.activation = activation_from_string(c.get_string("config.activation"));
        cfg.slope_scale = (int)c.get_scalar_i64("config.slope_scale");
        for (auto v : c.get("config.unet_channels").i64) cfg.unet_channels.push_back((int)v);
        cfg.in_channels = (int)c.get_scalar_i64("config.in_channels");
        cfg.out_channels = (int)c.get_scalar_i64("config.out_channels");
        cfg.baseline_wno = c.get_scalar_i64("config.baseline_wno") != 0;
        UwnoModel m(cfg, 0);
        for (auto& [name, t] : m.named_parameters()) {
            const auto& r = c.get("param." + name);
            if (r.shape != t.shape())
                throw ShapeError("checkpoint param '" + name + "': shape " + shape_str(r.shape) +
                                 " does not match model " + shape_str(t.shape()));
            const_cast<Tensor&>(t).data() = r.f64;
        }
        return m;
    }

    Tensor p1_w, p1_b, p2_w, p2_b;
    Tensor q1_w, q1_b, q2_w, q2_b;

private:
    static Tensor init_uniform(Shape shape, double bound, std::uint64_t seed,
                               const std::string& name) {
        Rng rng(seed, "init." + name);
        std::vector<double> d(shape_numel(shape));
        for (auto& v : d) v = rng.uniform(-bound, bound);
        return Tensor::from_data(std::move(shape), std::move(d), true);
    }

    void check_input(const Tensor& a, const Tensor& grid) const {
        const std::size_t dims = (std::size_t)cfg_.spatial_dims;
        if (a.ndim() != dims + 2)
            throw ShapeError("forward: input " + shape_str(a.shape()) + " must be (B, res" +
                             std::string(dims == 2 ? ", res" : "") + ", d_a)");
        if (grid.ndim() != dims + 1 || grid.dim(dims) != dims)
            throw ShapeError("forward: grid " + shape_str(grid.shape()) + " must be (res" +
                             std::string(dims == 2 ? ", res" : "") + ", " +
                             std::to_string(dims) + ")");
        for (std::size_t d = 0; d < dims; ++d) {
            if (a.dim(d + 1) != cfg_.resolution[d])
                throw ShapeError("forward: input resolution " + std::to_string(a.dim(d + 1)) +
                                 " does not match the configured resolution " +
                                 std::to_string(cfg_.resolution[d]));
            if (grid.dim(d) != cfg_.resolution[d])
                throw ShapeError("forward: grid resolution " + std::to_string(grid.dim(d)) +
                                 " does not match the configured resolution " +
                                 std::to_string(cfg_.resolution[d]));
        }
        if (a.dim(a.ndim() - 1) != (std::size_t)cfg_.in_channels)
            throw ShapeError("forward: input has " + std::to_string(a.dim(a.ndim() - 1)) +
                             " channels, config expects " + std::to_string(cfg_.in_channels));
    }

    static Tensor batch_grid(const Tensor& grid, std::size_t batch) {
        Shape s(grid.shape());
        s.insert(s.begin(), batch);
        std::vector<double> d(batch * grid.numel());
        for (std::size_t b = 0; b < batch; ++b)
            std::memcpy(d.data() + b * grid.numel(), grid.data().data(),
                        grid.numel() * sizeof(double));
        return Tensor::from_data(std::move(s), std::move(d));
    }

    UwnoConfig cfg_;
    std::vector<UwnoLayerParams> layers_;
};

}  // namespace uwno
