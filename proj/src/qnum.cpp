#include "sysmt/qnum.hpp"

#include <stdexcept>

namespace sysmt {

const char* to_string(FMulMode mode) {
    switch (mode) {
        case FMulMode::One8x8: return "1x8b8b";
        case FMulMode::Two4x8: return "2x4b8b";
        case FMulMode::Four4x4: return "4x4b4b";
    }
    return "?";
}

namespace {

void check_range(int value, bool is_signed) {
    const bool ok = is_signed ? (value >= -128 && value <= 127) : (value >= 0 && value <= 255);
    if (!ok) throw std::invalid_argument("qnum: operand out of 8-bit range");
}

}  // namespace

Width effective_width(int value, bool is_signed) {
    check_range(value, is_signed);
    if (is_signed) return (value >= -8 && value <= 7) ? Width::Fits4 : Width::Needs8;
    return value <= 15 ? Width::Fits4 : Width::Needs8;
}

Nibble reduce_to_msb_nibble(int value, bool is_signed) {
    check_range(value, is_signed);
    const std::uint8_t bits8 = static_cast<std::uint8_t>(value);
    const int round_bit = (bits8 >> 3) & 1;

    Nibble n;
    n.shifted = true;
    n.is_signed = is_signed;
    if (is_signed) {
        // Arithmetic high nibble (-8..7) plus bit 3; only +8 can overflow.
        const int high = (value >> 4);  // arithmetic shift keeps the sign
        int rounded = high + round_bit;
        if (rounded > 7) {
            rounded = 7;
            n.saturated = true;
        }
        n.bits = static_cast<std::uint8_t>(rounded & 0xF);
    } else {
        int rounded = (value >> 4) + round_bit;
        if (rounded > 15) {
            rounded = 15;
            n.saturated = true;
        }
        n.bits = static_cast<std::uint8_t>(rounded);
    }
    return n;
}

Nibble low_nibble_operand(int value, bool is_signed) {
    if (effective_width(value, is_signed) != Width::Fits4)
        throw std::invalid_argument("qnum: low_nibble_operand requires a Fits4 value");
    Nibble n;
    n.bits = static_cast<std::uint8_t>(value & 0xF);
    n.shifted = false;
    n.is_signed = is_signed;
    return n;
}

SplitNibbles split_exact(int value, bool is_signed) {
    check_range(value, is_signed);
    SplitNibbles s;
    s.lsb.bits = static_cast<std::uint8_t>(value & 0xF);
    s.lsb.shifted = false;
    s.lsb.is_signed = false;  // place-value digit
    s.msb.bits = static_cast<std::uint8_t>((value >> 4) & 0xF);
    s.msb.shifted = true;
    s.msb.is_signed = is_signed;
    return s;
}

// ---------------------------------------------------------------------------
// fMUL
// ---------------------------------------------------------------------------

namespace {

acc_t lane2_product(const Lane2& lane) {
    acc_t p = static_cast<acc_t>(lane.narrow.value()) * lane.wide;
    return lane.narrow.shifted ? p << 4 : p;
}

acc_t lane4_product(const Lane4& lane) {
    acc_t p = static_cast<acc_t>(lane.a.value()) * lane.b.value();
    const int shift = 4 * (static_cast<int>(lane.a.shifted) + static_cast<int>(lane.b.shifted));
    return p << shift;
}

}  // namespace

std::array<acc_t, 2> fmul_2t(const Lane2& lane0, const Lane2& lane1, FMulMode mode) {
    if (mode == FMulMode::Four4x4)
        throw std::invalid_argument("fmul_2t: Four4x4 needs the 4-lane unit");
    if (mode == FMulMode::One8x8) {
        // Exact split: lane 0 carries the LSBs unshifted, lane 1 the MSBs
        // shifted, both against the same wide operand.
        if (lane0.narrow.shifted || !lane1.narrow.shifted || lane0.wide != lane1.wide)
            throw std::invalid_argument("fmul_2t: One8x8 expects shift flags (0,1) on one operand");
    }
    return {lane2_product(lane0), lane2_product(lane1)};
}

std::array<acc_t, 4> fmul_4t(const std::array<Lane4, 4>& lanes, FMulMode mode) {
    if (mode == FMulMode::One8x8) {
        // Place-value shift pattern (0,0), (0,1), (1,0), (1,1).
        for (int i = 0; i < 4; ++i)
            if (lanes[i].a.shifted != ((i >> 1) & 1) || lanes[i].b.shifted != (i & 1))
                throw std::invalid_argument("fmul_4t: One8x8 expects the place-value shift pattern");
    } else if (mode == FMulMode::Two4x8) {
        // Each 4b-8b product spans a lane pair: same narrow operand against
        // the wide operand's low and high digits.
        for (int t = 0; t < 2; ++t) {
            const Lane4& lo = lanes[2 * t];
            const Lane4& hi = lanes[2 * t + 1];
            if (lo.a != hi.a || lo.b.shifted || !hi.b.shifted)
                throw std::invalid_argument("fmul_4t: Two4x8 expects paired wide-operand digits");
        }
    }
    return {lane4_product(lanes[0]), lane4_product(lanes[1]), lane4_product(lanes[2]),
            lane4_product(lanes[3])};
}

std::array<Lane2, 2> one8x8_lanes_2t(act_t x, int wide_weight) {
    const SplitNibbles s = split_exact(x, /*is_signed=*/false);
    Lane2 lo{s.lsb, static_cast<std::int16_t>(wide_weight)};
    Lane2 hi{s.msb, static_cast<std::int16_t>(wide_weight)};
    return {lo, hi};
}

std::array<Lane4, 4> one8x8_lanes_4t(act_t x, wgt_t w, bool unsigned_weight) {
    const SplitNibbles xs = split_exact(x, /*is_signed=*/false);
    const int wv = unsigned_weight ? static_cast<int>(static_cast<std::uint8_t>(w))
                                   : static_cast<int>(w);
    const SplitNibbles ws = split_exact(wv, /*is_signed=*/!unsigned_weight);
    return {Lane4{xs.lsb, ws.lsb}, Lane4{xs.lsb, ws.msb}, Lane4{xs.msb, ws.lsb},
            Lane4{xs.msb, ws.msb}};
}

std::array<Lane4, 2> expand_wide_lane(const Lane2& lane, bool wide_is_signed) {
    const SplitNibbles ws = split_exact(lane.wide, wide_is_signed);
    return {Lane4{lane.narrow, ws.lsb}, Lane4{lane.narrow, ws.msb}};
}

}  // namespace sysmt
