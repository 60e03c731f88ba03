// oracles.hpp — test-only reference implementations, kept independent of the
// library paths they check.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sysmt/lowering.hpp"
#include "sysmt/tile.hpp"

namespace oracle {

// Widened integer product.
inline std::int64_t widened_mul(int x, int w) {
    return static_cast<std::int64_t>(x) * static_cast<std::int64_t>(w);
}

// An 8-bit signed value fits in a signed nibble iff sign-extending its low
// nibble reproduces it.
inline bool fits4_signed(int v) {
    const std::int8_t low = static_cast<std::int8_t>(static_cast<std::uint8_t>(v) << 4) >> 4;
    return low == v;
}

// Naive matmul written column-major on purpose, as a second route distinct
// from the library's row-major reference.
inline sysmt::Mat32 naive_matmul(const sysmt::QTile& x, const sysmt::QTile& w) {
    sysmt::Mat32 out(x.rows(), w.cols());
    for (int c = 0; c < w.cols(); ++c)
        for (int i = 0; i < x.cols(); ++i)
            for (int r = 0; r < x.rows(); ++r)
                out.at(r, c) += static_cast<sysmt::acc_t>(x.get(r, i)) * w.get(i, c);
    return out;
}

// Exact dot product of two level streams.
inline std::int64_t dot(std::span<const int> xs, std::span<const int> ws) {
    std::int64_t acc = 0;
    for (size_t i = 0; i < xs.size(); ++i) acc += widened_mul(xs[i], ws[i]);
    return acc;
}

// Direct convolution with an explicitly padded input buffer, structured
// differently from the library's bounds-checked taps. Output matches the
// matmul layout: row = output position, column = kernel.
inline sysmt::Mat32 naive_conv(std::span<const sysmt::act_t> act,
                               std::span<const sysmt::wgt_t> w, const sysmt::ConvSpec& s) {
    const int ph = s.in_h + 2 * s.pad, pw = s.in_w + 2 * s.pad;
    std::vector<int> padded(static_cast<size_t>(s.in_c) * ph * pw, 0);
    for (int c = 0; c < s.in_c; ++c)
        for (int y = 0; y < s.in_h; ++y)
            for (int x = 0; x < s.in_w; ++x)
                padded[(static_cast<size_t>(c) * ph + y + s.pad) * pw + x + s.pad] =
                    act[(static_cast<size_t>(c) * s.in_h + y) * s.in_w + x];

    const int oh = s.out_h(), ow = s.out_w();
    sysmt::Mat32 out(oh * ow, s.out_c);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int f = 0; f < s.out_c; ++f) {
                std::int64_t acc = 0;
                for (int c = 0; c < s.in_c; ++c)
                    for (int ky = 0; ky < s.kh; ++ky)
                        for (int kx = 0; kx < s.kw; ++kx)
                            acc += widened_mul(
                                padded[(static_cast<size_t>(c) * ph + oy * s.stride + ky) * pw +
                                       ox * s.stride + kx],
                                w[((static_cast<size_t>(f) * s.in_c + c) * s.kh + ky) * s.kw +
                                  kx]);
                out.at(oy * ow + ox, f) = static_cast<sysmt::acc_t>(acc);
            }
    return out;
}

}  // namespace oracle
