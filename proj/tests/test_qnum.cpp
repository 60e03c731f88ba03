#include "sysmt/qnum.hpp"

#include <cstdlib>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "sysmt/tile.hpp"

using namespace sysmt;

TEST_CASE("rounding reproduces the worked examples") {
    // 59 -> 64, -59 -> -64, and the asymmetric ties 56 -> 64 / -56 -> -48.
    CHECK(reduce_to_msb_nibble(59, false).bits == 0b0100);
    CHECK(reduce_to_msb_nibble(59, false).reconstruct() == 64);
    CHECK(reduce_to_msb_nibble(-59, true).bits == 0b1100);
    CHECK(reduce_to_msb_nibble(-59, true).reconstruct() == -64);
    CHECK(reduce_to_msb_nibble(56, false).reconstruct() == 64);
    CHECK(reduce_to_msb_nibble(-56, true).reconstruct() == -48);

    // 46 -> nibble 0011 (value 3, shifted), the squeezed-collision operand.
    const Nibble n46 = reduce_to_msb_nibble(46, false);
    CHECK(n46.bits == 0b0011);
    CHECK(n46.shifted);
    CHECK(n46.reconstruct() == 48);

    CHECK(reduce_to_msb_nibble(0, false).bits == 0);
    CHECK(reduce_to_msb_nibble(0, true).reconstruct() == 0);
}

TEST_CASE("rounding is exact on multiples of 16 and bounded everywhere") {
    for (int v = 0; v <= 255; ++v) {
        const Nibble n = reduce_to_msb_nibble(v, false);
        if (v % 16 == 0) CHECK(n.reconstruct() == v);
        CHECK(std::abs(n.reconstruct() - v) <= (n.saturated ? 15 : 8));
    }
    for (int v = -128; v <= 127; ++v) {
        const Nibble n = reduce_to_msb_nibble(v, true);
        if (v % 16 == 0) CHECK(n.reconstruct() == v);
        CHECK(std::abs(n.reconstruct() - v) <= (n.saturated ? 15 : 8));
    }
}

TEST_CASE("rounding saturates at the nibble boundary") {
    for (int v = 0xF8; v <= 0xFF; ++v) {
        const Nibble n = reduce_to_msb_nibble(v, false);
        CHECK(n.saturated);
        CHECK(n.bits == 0xF);
        CHECK(n.reconstruct() == 240);
    }
    for (int v = 0x78; v <= 0x7F; ++v) {
        const Nibble n = reduce_to_msb_nibble(v, true);
        CHECK(n.saturated);
        CHECK(n.bits == 0x7);
        CHECK(n.reconstruct() == 112);
    }
    // The negative side never overflows the nibble.
    for (int v = -128; v < 0; ++v) CHECK_FALSE(reduce_to_msb_nibble(v, true).saturated);
    CHECK_FALSE(reduce_to_msb_nibble(247, false).saturated);
    CHECK_FALSE(reduce_to_msb_nibble(0x77, true).saturated);
}

TEST_CASE("effective width matches the sign-extension oracle") {
    CHECK(effective_width(14, false) == Width::Fits4);
    CHECK(effective_width(15, false) == Width::Fits4);
    CHECK(effective_width(16, false) == Width::Needs8);
    CHECK(effective_width(178, false) == Width::Needs8);
    CHECK(effective_width(-8, true) == Width::Fits4);
    CHECK(effective_width(-9, true) == Width::Needs8);

    for (int v = -128; v <= 127; ++v)
        CHECK((effective_width(v, true) == Width::Fits4) == oracle::fits4_signed(v));
    for (int v = 0; v <= 255; ++v)
        CHECK((effective_width(v, false) == Width::Fits4) == ((v >> 4) == 0));
}

TEST_CASE("operand range violations are rejected") {
    CHECK_THROWS_AS(effective_width(256, false), std::invalid_argument);
    CHECK_THROWS_AS(effective_width(-1, false), std::invalid_argument);
    CHECK_THROWS_AS(reduce_to_msb_nibble(128, true), std::invalid_argument);
    CHECK_THROWS_AS(low_nibble_operand(16, false), std::invalid_argument);
    CHECK_THROWS_AS(low_nibble_operand(-9, true), std::invalid_argument);
}

TEST_CASE("fmul_2t one8x8 recomposes the exact product for every pair") {
    for (int x = 0; x <= 255; ++x)
        for (int w = -128; w <= 127; ++w) {
            const auto lanes = one8x8_lanes_2t(static_cast<act_t>(x), w);
            const auto p = fmul_2t(lanes[0], lanes[1], FMulMode::One8x8);
            REQUIRE(p[0] + p[1] == oracle::widened_mul(x, w));
        }
}

TEST_CASE("fmul_4t one8x8 recomposes the exact product for every pair") {
    for (int x = 0; x <= 255; ++x)
        for (int w = -128; w <= 127; ++w) {
            const auto lanes = one8x8_lanes_4t(static_cast<act_t>(x), static_cast<wgt_t>(w), false);
            const auto p = fmul_4t(lanes, FMulMode::One8x8);
            REQUIRE(p[0] + p[1] + p[2] + p[3] == oracle::widened_mul(x, w));
        }
    // Spot value with a negative weight.
    const auto lanes = one8x8_lanes_4t(178, static_cast<wgt_t>(-14), false);
    const auto p = fmul_4t(lanes, FMulMode::One8x8);
    CHECK(p[0] + p[1] + p[2] + p[3] == -2492);
}

TEST_CASE("two 4b-8b lanes reproduce the squeezed collision numbers") {
    // Rounded operands 3 and 11 against 23 and 242 give 1104 and 42592
    // (instead of the exact 1058 and 43076).
    Lane2 l0{reduce_to_msb_nibble(46, false), 23};
    Lane2 l1{reduce_to_msb_nibble(178, false), 242};
    const auto p = fmul_2t(l0, l1, FMulMode::Two4x8);
    CHECK(p[0] == 1104);
    CHECK(p[1] == 42592);

    // Mixed shift flags: (1110b shifted) x 23 and (0010b unshifted) x 242
    // land 5152 and 484; the shared psum sees 5636.
    Lane2 m0{Nibble{0b1110, true, false, false}, 23};
    Lane2 m1{Nibble{0b0010, false, false, false}, 242};
    const auto q = fmul_2t(m0, m1, FMulMode::Two4x8);
    CHECK(q[0] == 5152);
    CHECK(q[1] == 484);
    CHECK(q[0] + q[1] == 5636);
}

TEST_CASE("four4x4 lanes multiply independently") {
    // Zero annihilation.
    std::array<Lane4, 4> zero{};
    for (auto& l : zero) l = {Nibble{0, false, false, false}, Nibble{9, false, false, false}};
    const auto pz = fmul_4t(zero, FMulMode::Four4x4);
    for (int i = 0; i < 4; ++i) CHECK(pz[i] == 0);

    // Per-lane scalar oracle with mixed shifts and signedness.
    const std::array<Lane4, 4> lanes = {
        Lane4{Nibble{3, true, false, false}, Nibble{7, false, false, false}},
        Lane4{Nibble{11, false, false, false}, Nibble{2, false, false, false}},
        Lane4{Nibble{1, false, false, false}, Nibble{1, false, false, false}},
        Lane4{Nibble{15, false, false, false}, Nibble{8, false, true, false}},  // 8 reads as -8
    };
    const auto p = fmul_4t(lanes, FMulMode::Four4x4);
    CHECK(p[0] == (3 * 7) << 4);
    CHECK(p[1] == 11 * 2);
    CHECK(p[2] == 1);
    CHECK(p[3] == 15 * -8);
}

TEST_CASE("lane independence: one lane's operands never affect another") {
    Rng rng(7);
    auto random_nibble = [&](bool can_sign) {
        Nibble n;
        n.is_signed = can_sign && rng.below(2);
        n.bits = static_cast<std::uint8_t>(rng.below(16));
        n.shifted = rng.below(2);
        return n;
    };
    for (int iter = 0; iter < 2000; ++iter) {
        std::array<Lane4, 4> lanes;
        for (auto& l : lanes) l = {random_nibble(false), random_nibble(true)};
        const auto base = fmul_4t(lanes, FMulMode::Four4x4);

        const int victim = static_cast<int>(rng.below(4));
        std::array<Lane4, 4> mutated = lanes;
        mutated[victim] = {random_nibble(false), random_nibble(true)};
        const auto changed = fmul_4t(mutated, FMulMode::Four4x4);
        for (int i = 0; i < 4; ++i)
            if (i != victim) REQUIRE(changed[i] == base[i]);
    }

    // Same property on the two-lane unit.
    for (int iter = 0; iter < 2000; ++iter) {
        Lane2 a{random_nibble(false), static_cast<std::int16_t>(rng.range(-128, 255))};
        const auto base = fmul_2t(a, {random_nibble(false), 17}, FMulMode::Two4x8);
        const auto changed = fmul_2t(a, {random_nibble(false), -90}, FMulMode::Two4x8);
        REQUIRE(changed[0] == base[0]);
    }
}

TEST_CASE("mode/operand mismatches are rejected") {
    const auto ok = one8x8_lanes_2t(178, 242);
    CHECK_THROWS_AS(fmul_2t(ok[0], ok[1], FMulMode::Four4x4), std::invalid_argument);
    // One8x8 with the wrong shift pattern.
    CHECK_THROWS_AS(fmul_2t(ok[1], ok[0], FMulMode::One8x8), std::invalid_argument);
    const Lane2 different{ok[1].narrow, 23};
    CHECK_THROWS_AS(fmul_2t(ok[0], different, FMulMode::One8x8), std::invalid_argument);

    auto l4 = one8x8_lanes_4t(178, 17, false);
    std::swap(l4[0], l4[3]);
    CHECK_THROWS_AS(fmul_4t(l4, FMulMode::One8x8), std::invalid_argument);
}

TEST_CASE("two4x8 on the four-lane unit spans lane pairs") {
    // 11 (shifted) x 242 expands onto two nibble lanes and still sums to
    // the rounded product 42592.
    const Lane2 wide{reduce_to_msb_nibble(178, false), 242};
    const auto hi = expand_wide_lane(wide, false);
    const Lane2 narrow{low_nibble_operand(9, false), 23};
    const auto lo = expand_wide_lane(narrow, false);
    const std::array<Lane4, 4> lanes = {lo[0], lo[1], hi[0], hi[1]};
    const auto p = fmul_4t(lanes, FMulMode::Two4x8);
    CHECK(p[0] + p[1] == 9 * 23);
    CHECK(p[2] + p[3] == 42592);
}

TEST_CASE("exact nibble splits reassemble the operand") {
    for (int v = 0; v <= 255; ++v) {
        const SplitNibbles s = split_exact(v, false);
        CHECK(s.msb.value() * 16 + s.lsb.value() == v);
    }
    for (int v = -128; v <= 127; ++v) {
        const SplitNibbles s = split_exact(v, true);
        CHECK(s.msb.value() * 16 + s.lsb.value() == v);
    }
}
