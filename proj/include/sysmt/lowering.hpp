// lowering.hpp — workload preparation: min-max symmetric quantization,
// convolution-to-matmul lowering, and synthetic tile generators with
// controlled sparsity / data-width mixtures.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sysmt/tile.hpp"

namespace sysmt {

// Row-major real-valued matrix (pre-quantization tensors).
struct RealMat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    RealMat() = default;
    RealMat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
};

// Symmetric unsigned quantization for activations (post-ReLU domain):
// level = clamp(round(v / scale), 0, 255), scale = max / 255 per tile when
// not supplied. An all-zero tensor gets scale 1. Negative inputs throw.
QTile quantize_acts(const RealMat& m, std::optional<double> scale = std::nullopt);

// Symmetric signed quantization for weights, one scale per output column
// (per kernel): scale_c = max|w_c| / 127, level = clamp(round(w / scale_c),
// -127, 127). An all-zero column gets scale 1.
QTile quantize_wgts(const RealMat& m);

RealMat dequantize(const QTile& t);

struct ConvSpec {
    int in_c = 1, in_h = 1, in_w = 1;  // input dims  (C, H, W)
    int out_c = 1, kh = 1, kw = 1;     // kernel dims (F, C, kh, kw)
    int stride = 1, pad = 0;

    int out_h() const { return (in_h + 2 * pad - kh) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kw) / stride + 1; }
    size_t act_size() const { return static_cast<size_t>(in_c) * in_h * in_w; }
    size_t wgt_size() const { return static_cast<size_t>(out_c) * in_c * kh * kw; }
};

// Unroll sliding windows into matrix rows: result is (out_h*out_w) x
// (C*kh*kw). Out-of-bounds taps read the zero level.
QTile im2col(std::span<const act_t> act, const ConvSpec& spec, double scale = 1.0);

// Kernel matrix (C*kh*kw) x F matching the im2col column order; column f is
// kernel f. Per-kernel scales are carried onto the columns when provided.
QTile weights_to_matrix(std::span<const wgt_t> w, const ConvSpec& spec,
                        std::span<const double> kernel_scales = {});

// Direct integer convolution (F x out_h*out_w result, row f = kernel f).
// Second route of the lowering check: im2col matmul must equal it exactly.
Mat32 direct_conv(std::span<const act_t> act, std::span<const wgt_t> w, const ConvSpec& spec);

// Synthetic workload generator. Activation entries follow the mixture
// {zero: p_zero, 4-bit: p_fits4, wide: rest}; `correlation` blends between
// i.i.d. entries (0) and width-homogeneous columns (1). Weights are nonzero
// uniform signed unless w_p_zero models a pruned tensor.
struct SynthSpec {
    int m = 16, k = 64, n = 16;
    double p_zero = 0.0;
    double p_fits4 = 0.0;
    double correlation = 0.0;
    double w_p_zero = 0.0;
    std::uint64_t seed = 1;
};

struct SynthTiles {
    QTile x;  // M x K activations
    QTile w;  // K x N weights
};

SynthTiles gen_synthetic(const SynthSpec& spec);

}  // namespace sysmt
