#include "sysmt/lowering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sysmt {

QTile quantize_acts(const RealMat& m, std::optional<double> scale) {
    if (m.rows <= 0 || m.cols <= 0) throw std::invalid_argument("quantize_acts: empty tensor");
    double maxv = 0.0;
    for (double v : m.v) {
        if (v < 0.0) throw std::invalid_argument("quantize_acts: negative input (post-ReLU domain)");
        maxv = std::max(maxv, v);
    }
    const double s = scale.value_or(maxv > 0.0 ? maxv / 255.0 : 1.0);
    if (!(s > 0.0)) throw std::invalid_argument("quantize_acts: scale must be positive");

    QTile t = QTile::activations(m.rows, m.cols, s);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) {
            const long level = std::lround(m.at(r, c) / s);
            t.set(r, c, static_cast<int>(std::clamp(level, 0l, 255l)));
        }
    return t;
}

QTile quantize_wgts(const RealMat& m) {
    if (m.rows <= 0 || m.cols <= 0) throw std::invalid_argument("quantize_wgts: empty tensor");
    QTile t = QTile::weights(m.rows, m.cols);
    std::vector<double> scales(m.cols, 1.0);
    for (int c = 0; c < m.cols; ++c) {
        double amax = 0.0;
        for (int r = 0; r < m.rows; ++r) amax = std::max(amax, std::abs(m.at(r, c)));
        scales[c] = amax > 0.0 ? amax / 127.0 : 1.0;
        for (int r = 0; r < m.rows; ++r) {
            const long level = std::lround(m.at(r, c) / scales[c]);
            t.set(r, c, static_cast<int>(std::clamp(level, -127l, 127l)));
        }
    }
    t.set_scales(std::move(scales));
    return t;
}

RealMat dequantize(const QTile& t) {
    RealMat m(t.rows(), t.cols());
    for (int r = 0; r < t.rows(); ++r)
        for (int c = 0; c < t.cols(); ++c) m.at(r, c) = t.dequant(r, c);
    return m;
}

// ---------------------------------------------------------------------------
// Convolution lowering
// ---------------------------------------------------------------------------

namespace {

void validate_spec(const ConvSpec& s) {
    if (s.in_c <= 0 || s.in_h <= 0 || s.in_w <= 0 || s.out_c <= 0 || s.kh <= 0 || s.kw <= 0 ||
        s.stride <= 0 || s.pad < 0)
        throw std::invalid_argument("conv: bad spec");
    if (s.out_h() <= 0 || s.out_w() <= 0)
        throw std::invalid_argument("conv: non-positive output dims");
}

inline act_t act_at(std::span<const act_t> act, const ConvSpec& s, int c, int y, int x) {
    if (y < 0 || y >= s.in_h || x < 0 || x >= s.in_w) return 0;  // zero padding
    return act[(static_cast<size_t>(c) * s.in_h + y) * s.in_w + x];
}

}  // namespace

QTile im2col(std::span<const act_t> act, const ConvSpec& spec, double scale) {
    validate_spec(spec);
    if (act.size() != spec.act_size()) throw std::invalid_argument("im2col: activation size mismatch");

    const int oh = spec.out_h(), ow = spec.out_w();
    QTile t = QTile::activations(oh * ow, spec.in_c * spec.kh * spec.kw, scale);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            const int row = oy * ow + ox;
            int col = 0;
            for (int c = 0; c < spec.in_c; ++c)
                for (int ky = 0; ky < spec.kh; ++ky)
                    for (int kx = 0; kx < spec.kw; ++kx, ++col) {
                        const int iy = oy * spec.stride - spec.pad + ky;
                        const int ix = ox * spec.stride - spec.pad + kx;
                        t.set(row, col, act_at(act, spec, c, iy, ix));
                    }
        }
    return t;
}

QTile weights_to_matrix(std::span<const wgt_t> w, const ConvSpec& spec,
                        std::span<const double> kernel_scales) {
    validate_spec(spec);
    if (w.size() != spec.wgt_size()) throw std::invalid_argument("weights_to_matrix: size mismatch");
    if (!kernel_scales.empty() && kernel_scales.size() != static_cast<size_t>(spec.out_c))
        throw std::invalid_argument("weights_to_matrix: one scale per kernel expected");

    QTile t = QTile::weights(spec.in_c * spec.kh * spec.kw, spec.out_c);
    for (int f = 0; f < spec.out_c; ++f) {
        int row = 0;
        for (int c = 0; c < spec.in_c; ++c)
            for (int ky = 0; ky < spec.kh; ++ky)
                for (int kx = 0; kx < spec.kw; ++kx, ++row)
                    t.set(row, f,
                          w[((static_cast<size_t>(f) * spec.in_c + c) * spec.kh + ky) * spec.kw + kx]);
    }
    if (!kernel_scales.empty())
        t.set_scales(std::vector<double>(kernel_scales.begin(), kernel_scales.end()));
    return t;
}

Mat32 direct_conv(std::span<const act_t> act, std::span<const wgt_t> w, const ConvSpec& spec) {
    validate_spec(spec);
    if (act.size() != spec.act_size() || w.size() != spec.wgt_size())
        throw std::invalid_argument("direct_conv: tensor size mismatch");

    const int oh = spec.out_h(), ow = spec.out_w();
    // Matmul layout: row = output position, column = kernel.
    Mat32 out(oh * ow, spec.out_c);
    for (int f = 0; f < spec.out_c; ++f)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                acc_t acc = 0;
                for (int c = 0; c < spec.in_c; ++c)
                    for (int ky = 0; ky < spec.kh; ++ky)
                        for (int kx = 0; kx < spec.kw; ++kx) {
                            const int iy = oy * spec.stride - spec.pad + ky;
                            const int ix = ox * spec.stride - spec.pad + kx;
                            const wgt_t wv =
                                w[((static_cast<size_t>(f) * spec.in_c + c) * spec.kh + ky) *
                                      spec.kw + kx];
                            acc += static_cast<acc_t>(act_at(act, spec, c, iy, ix)) * wv;
                        }
                out.at(oy * ow + ox, f) = acc;
            }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic workloads
// ---------------------------------------------------------------------------

SynthTiles gen_synthetic(const SynthSpec& spec) {
    if (spec.m <= 0 || spec.k <= 0 || spec.n <= 0)
        throw std::invalid_argument("gen_synthetic: dims must be positive");
    if (spec.p_zero < 0 || spec.p_fits4 < 0 || spec.p_zero + spec.p_fits4 > 1.0 + 1e-12)
        throw std::invalid_argument("gen_synthetic: activation mixture must sum to at most 1");
    if (spec.correlation < 0 || spec.correlation > 1)
        throw std::invalid_argument("gen_synthetic: correlation must be in [0,1]");
    if (spec.w_p_zero < 0 || spec.w_p_zero > 1)
        throw std::invalid_argument("gen_synthetic: w_p_zero must be in [0,1]");

    Rng rng(spec.seed);
    Rng col_rng = rng.fork(1);
    Rng x_rng = rng.fork(2);
    Rng w_rng = rng.fork(3);

    enum Cls { Zero, Fits4, Wide };
    auto draw_class = [&](Rng& r) {
        const double u = r.unit();
        if (u < spec.p_zero) return Zero;
        if (u < spec.p_zero + spec.p_fits4) return Fits4;
        return Wide;
    };
    auto draw_value = [&](Cls c, Rng& r) -> int {
        switch (c) {
            case Zero: return 0;
            case Fits4: return r.range(1, 15);
            default: return r.range(16, 255);
        }
    };

    // Column classes drive the correlated share of each entry.
    std::vector<Cls> col_class(spec.k);
    for (auto& c : col_class) c = draw_class(col_rng);

    SynthTiles tiles{QTile::activations(spec.m, spec.k), QTile::weights(spec.k, spec.n)};
    for (int r = 0; r < spec.m; ++r)
        for (int c = 0; c < spec.k; ++c) {
            const Cls cls =
                x_rng.unit() < spec.correlation ? col_class[c] : draw_class(x_rng);
            tiles.x.set(r, c, draw_value(cls, x_rng));
        }

    for (int r = 0; r < spec.k; ++r)
        for (int c = 0; c < spec.n; ++c) {
            if (spec.w_p_zero > 0 && w_rng.unit() < spec.w_p_zero) {
                tiles.w.set(r, c, 0);
            } else {
                const int mag = w_rng.range(1, 127);
                tiles.w.set(r, c, w_rng.below(2) ? mag : -mag);
            }
        }
    return tiles;
}

}  // namespace sysmt
