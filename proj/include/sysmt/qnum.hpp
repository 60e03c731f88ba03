// qnum.hpp — bit-exact fixed-width numerics: effective data-width detection,
// round-to-multiple-of-16 precision reduction, and the flexible multiplier
// (fMUL) in its two-lane (4b-8b) and four-lane (4b-4b) decompositions.
//
// Conventions: activations are unsigned 8-bit levels, weights signed 8-bit
// two's complement. Lane products are exact integers; a "shifted" nibble
// stands for the operand's MSBs and its product is shifted left by 4.
#pragma once

#include <array>
#include <cstdint>

#include "sysmt/tile.hpp"

namespace sysmt {

enum class Width : std::uint8_t { Fits4, Needs8 };

enum class FMulMode : std::uint8_t { One8x8, Two4x8, Four4x4 };

const char* to_string(FMulMode mode);

// One 4-bit multiplier-port operand. `shifted` mirrors the s_i control
// line: the lane product is shifted left by 4 after multiplication.
struct Nibble {
    std::uint8_t bits = 0;   // raw 4-bit field
    bool shifted = false;
    bool is_signed = false;  // two's-complement interpretation of `bits`
    bool saturated = false;  // rounding clipped at the nibble boundary

    int value() const {
        return is_signed && (bits & 0x8) ? static_cast<int>(bits) - 16
                                         : static_cast<int>(bits);
    }
    // The operand this nibble stands for (value << 4 when it holds MSBs).
    int reconstruct() const { return shifted ? value() << 4 : value(); }

    bool operator==(const Nibble&) const = default;
};

// Unsigned values fit in 4 bits iff the MSB nibble is zero; signed values
// iff the MSB nibble is pure sign extension, i.e. value in [-8, 7].
Width effective_width(int value, bool is_signed);

// On-the-fly precision reduction: round to the nearest multiple of 16 and
// keep the 4-bit MSB field, computed as x[7:4] + x[3]. The sum saturates
// at the nibble boundary (inputs 0xF8..0xFF unsigned, 0x78..0x7F signed)
// instead of wrapping; `saturated` is set on the result.
Nibble reduce_to_msb_nibble(int value, bool is_signed);

// Nibble carrying a whole Fits4 operand: low bits, unshifted, keeping the
// operand's signedness.
Nibble low_nibble_operand(int value, bool is_signed);

// Exact decomposition of an 8-bit value into place-value nibbles:
// value == msb.value() * 16 + lsb.value(). The low half is always an
// unsigned digit; the high half keeps the operand's signedness.
struct SplitNibbles {
    Nibble lsb;  // unshifted
    Nibble msb;  // shifted
};
SplitNibbles split_exact(int value, bool is_signed);

// ---------------------------------------------------------------------------
// fMUL lanes
// ---------------------------------------------------------------------------

// Lane of the two-lane fMUL: a 4-bit port times a full-width port. The wide
// port carries -128..127 for signed weights and 0..255 for unsigned operands
// (swapped-port configurations and the unsigned-weight golden mode).
struct Lane2 {
    Nibble narrow;
    std::int16_t wide = 0;

    bool operator==(const Lane2&) const = default;
};

// Lane of the four-lane fMUL: both ports are nibbles. The lane product is
// shifted left by 4 once per shifted port (0, 4 or 8 in total).
struct Lane4 {
    Nibble a;  // activation-side nibble
    Nibble b;  // weight-side nibble

    bool operator==(const Lane4&) const = default;
};

// Two-lane fMUL. One8x8 expects the exact LSB/MSB split of one operand on
// lanes (0, 1) with shift flags (0, 1) and reproduces the full 8b-8b
// product as lane[0] + lane[1]; Two4x8 computes two independent 4b-8b
// products. Mode/operand mismatch throws std::invalid_argument.
std::array<acc_t, 2> fmul_2t(const Lane2& lane0, const Lane2& lane1, FMulMode mode);

// Four-lane fMUL. One8x8 expects the four place-value partial products of
// one operand pair with shift pairs (0,0), (0,1), (1,0), (1,1) and sums to
// the exact 8b-8b product; Two4x8 encodes each 4b-8b product on a lane
// pair (narrow x w_lsb, narrow x w_msb); Four4x4 computes four independent
// nibble products.
std::array<acc_t, 4> fmul_4t(const std::array<Lane4, 4>& lanes, FMulMode mode);

// Lane builders for the exact One8x8 paths. `wide_weight` / the unsigned
// flag select between signed weights and the unsigned-pattern golden mode.
std::array<Lane2, 2> one8x8_lanes_2t(act_t x, int wide_weight);
std::array<Lane4, 4> one8x8_lanes_4t(act_t x, wgt_t w, bool unsigned_weight);

// Expand a (narrow x 8-bit) product onto two nibble lanes of the four-lane
// fMUL by splitting the wide operand into place-value digits.
std::array<Lane4, 2> expand_wide_lane(const Lane2& lane, bool wide_is_signed);

}  // namespace sysmt
