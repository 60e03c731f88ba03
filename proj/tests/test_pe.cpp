#include "sysmt/pe.hpp"

#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sysmt/tile.hpp"

using namespace sysmt;

namespace {

ThreadInput ti(int x, int w) {
    return {static_cast<act_t>(x), static_cast<wgt_t>(w), true};
}

// Strategy in the unsigned-pattern golden mode used by the worked examples.
Strategy golden(const char* name) {
    Strategy s = Strategy::parse(name);
    s.unsigned_weights = true;
    return s;
}

// Feed a per-cycle stream into one PE and return the drained psum.
template <size_t T>
acc_t run_stream(const std::vector<std::array<ThreadInput, T>>& stream, const Strategy& strat,
                 PEState* out_state = nullptr) {
    PEState pe;
    for (const auto& cycle : stream) pe_step(pe, cycle, strat);
    pe_flush(pe);
    if (out_state) *out_state = pe;
    return pe.psum32();
}

// Exact contribution of a stream, via the widened oracle.
template <size_t T>
std::int64_t exact_sum(const std::vector<std::array<ThreadInput, T>>& stream, bool unsigned_w) {
    std::int64_t acc = 0;
    for (const auto& cycle : stream)
        for (const ThreadInput& t : cycle) {
            if (!t.valid) continue;
            const int w = unsigned_w ? static_cast<std::uint8_t>(t.w) : t.w;
            acc += oracle::widened_mul(t.x, w);
        }
    return acc;
}

}  // namespace

TEST_CASE("classify_cycle counts active threads") {
    const std::array<ThreadInput, 2> one = {ti(0, 23), ti(178, 242)};
    CHECK(classify_cycle(one).occ == Occupancy::OneActive);
    CHECK(classify_cycle(one).first_active == 1);

    const std::array<ThreadInput, 2> coll = {ti(46, 23), ti(178, 242)};
    CHECK(classify_cycle(coll).occ == Occupancy::MultiActive);
    CHECK(classify_cycle(coll).active_count == 2);

    const std::array<ThreadInput, 2> idle = {ti(0, 5), ti(7, 0)};
    CHECK(classify_cycle(idle).occ == Occupancy::AllIdle);

    // Invalid slots never count, whatever their payload.
    std::array<ThreadInput, 2> invalid = {ti(9, 9), ti(8, 8)};
    invalid[0].valid = false;
    invalid[1].valid = false;
    CHECK(classify_cycle(invalid).occ == Occupancy::AllIdle);
}

TEST_CASE("get_active_thread resolves the single user of the multiplier") {
    const std::array<ThreadInput, 2> a = {ti(0, 23), ti(178, 242)};
    CHECK(get_active_thread(a).index == 1);
    CHECK_FALSE(get_active_thread(a).zero_contribution);

    const std::array<ThreadInput, 2> b = {ti(46, 23), ti(0, 9)};
    CHECK(get_active_thread(b).index == 0);

    // Both idle: placeholder thread 0 with the zero-contribution marker.
    const std::array<ThreadInput, 2> c = {ti(0, 1), ti(1, 0)};
    const ActiveThread at = get_active_thread(c);
    CHECK(at.index == 0);
    CHECK(at.zero_contribution);

    const std::array<ThreadInput, 2> d = {ti(3, 3), ti(4, 4)};
    CHECK_THROWS_AS(get_active_thread(d), std::logic_error);
}

TEST_CASE("every all-idle pattern contributes exactly zero") {
    // All (x, w) patterns where each thread has a zero operand.
    for (int x0 : {0, 7})
        for (int w0 : {0, 9}) {
            if (x0 != 0 && w0 != 0) continue;
            for (int x1 : {0, 200})
                for (int w1 : {0, -4}) {
                    if (x1 != 0 && w1 != 0) continue;
                    const std::vector<std::array<ThreadInput, 2>> stream = {
                        {ti(x0, w0), ti(x1, w1)}};
                    for (const char* name : {"S", "S+A", "A", "S+aW", "reduce"})
                        CHECK(run_stream(stream, Strategy::parse(name)) == 0);
                }
        }
}

TEST_CASE("control_2t squeezes a two-thread collision by rounding activations") {
    // (46, 23) and (178, 242): both activations rounded, lane products 1104
    // and 42592 instead of the exact 1058 and 43076.
    const std::array<ThreadInput, 2> threads = {ti(46, 23), ti(178, 242)};
    const Strategy strat = golden("S+A");
    const FMulRequest req = control_2t(threads, strat);
    CHECK(req.mode == FMulMode::Two4x8);
    CHECK(req.rounded_mask == 0b11);

    const FMulResult res = issue_fmul(req, threads, strat);
    CHECK(res.lane[0] == 1104);
    CHECK(res.lane[1] == 42592);
    CHECK_FALSE(res.lossless);
}

TEST_CASE("control_2t gives a lone thread the whole multiplier") {
    const std::array<ThreadInput, 2> threads = {ti(0, 23), ti(178, 242)};
    const Strategy strat = golden("S+A");
    const FMulRequest req = control_2t(threads, strat);
    CHECK(req.mode == FMulMode::One8x8);
    CHECK(req.lane_thread[0] == 1);
    CHECK(req.lane_thread[1] == 1);

    const FMulResult res = issue_fmul(req, threads, strat);
    CHECK(res.sum() == 43076);
    CHECK(res.lossless);
}

TEST_CASE("control_2t passes 4-bit activations through exactly") {
    const std::array<ThreadInput, 2> threads = {ti(14, 23), ti(9, 242)};
    const Strategy strat = golden("S+A");
    const FMulRequest req = control_2t(threads, strat);
    CHECK(req.mode == FMulMode::Two4x8);
    CHECK_FALSE(req.lanes2[0].narrow.shifted);
    CHECK_FALSE(req.lanes2[1].narrow.shifted);
    CHECK(req.rounded_mask == 0);

    const FMulResult res = issue_fmul(req, threads, strat);
    CHECK(res.lane[0] == 14 * 23);
    CHECK(res.lane[1] == 9 * 242);
    CHECK(res.lossless);
}

TEST_CASE("control_2t swaps operands into the 4-bit port under S+Aw") {
    // Thread 0 has a wide activation but a 4-bit weight: the weight takes
    // the narrow port and the multiplication stays exact.
    const std::array<ThreadInput, 2> threads = {ti(23, 14), ti(9, 242)};
    const Strategy strat = golden("S+Aw");
    const FMulRequest req = control_2t(threads, strat);
    CHECK(req.mode == FMulMode::Two4x8);
    CHECK(req.lanes2[0].narrow.value() == 14);
    CHECK(req.lanes2[0].wide == 23);
    CHECK(req.rounded_mask == 0);

    const FMulResult res = issue_fmul(req, threads, strat);
    CHECK(res.lane[0] == 23 * 14);
    CHECK(res.lane[1] == 9 * 242);
    CHECK(res.lossless);
}

TEST_CASE("rounding a wide activation with zero LSBs is effectively exact") {
    const std::array<ThreadInput, 2> threads = {ti(176, 23), ti(9, 242)};
    const Strategy strat = golden("S+A");
    const FMulRequest req = control_2t(threads, strat);
    CHECK(req.rounded_mask == 0b01);  // thread 0 went through the rounder

    const FMulResult res = issue_fmul(req, threads, strat);
    CHECK(res.lane[0] == 176 * 23);  // no precision was lost
    CHECK(res.lossless);
}

TEST_CASE("strategies without sparsity treat a lone thread as a collision") {
    const std::array<ThreadInput, 2> threads = {ti(0, 23), ti(178, 242)};
    const Strategy strat = golden("A");
    const FMulRequest req = control_2t(threads, strat);
    CHECK(req.mode == FMulMode::Two4x8);

    const FMulResult res = issue_fmul(req, threads, strat);
    CHECK(res.lane[1] == 11 * 242 * 16);  // 178 rounded to 176
    CHECK_FALSE(res.lossless);
}

TEST_CASE("width-blind strategies always reduce on a collision") {
    const std::array<ThreadInput, 2> threads = {ti(9, 23), ti(14, 242)};
    const Strategy strat = golden("S");
    const FMulRequest req = control_2t(threads, strat);
    const FMulResult res = issue_fmul(req, threads, strat);
    // Both activations fit in 4 bits, but S has no width detector: 9 rounds
    // to 16 and 14 rounds to 16.
    CHECK(res.lane[0] == 16 * 23);
    CHECK(res.lane[1] == 16 * 242);
    CHECK_FALSE(res.lossless);
}

TEST_CASE("strategy W routes the weight through the narrow port") {
    const Strategy strat = Strategy::parse("S+W");
    const std::array<ThreadInput, 2> threads = {ti(200, 7), ti(100, -77)};
    const FMulRequest req = control_2t(threads, strat);
    CHECK(req.mode == FMulMode::Two4x8);
    // Thread 0's weight fits: exact. Thread 1's weight rounds to -80.
    CHECK(req.lanes2[0].narrow.value() == 7);
    CHECK(req.lanes2[0].wide == 200);
    CHECK(req.rounded_mask == 0b10);

    const FMulResult res = issue_fmul(req, threads, strat);
    CHECK(res.lane[0] == 200 * 7);
    CHECK(res.lane[1] == 100 * -80);
}

TEST_CASE("control_4t squeezes three or four ways through the 4b-4b lanes") {
    const Strategy strat = Strategy::parse("S+A");

    // All four active with every operand in 4 bits: exact.
    const std::array<ThreadInput, 4> small = {ti(3, 7), ti(11, 2), ti(1, 1), ti(15, -8)};
    const FMulRequest req = control_4t(small, strat);
    CHECK(req.mode == FMulMode::Four4x4);
    const FMulResult res = issue_fmul(req, small, strat);
    CHECK(res.lossless);
    CHECK(res.sum() == 3 * 7 + 11 * 2 + 1 * 1 + 15 * -8);

    // Three active with one wide thread: both of its operands are reduced.
    const std::array<ThreadInput, 4> three = {ti(46, 100), ti(3, 2), ti(0, 9), ti(5, 5)};
    const FMulRequest req3 = control_4t(three, strat);
    CHECK(req3.mode == FMulMode::Four4x4);
    CHECK((req3.rounded_mask & 0b0001) != 0);
    const FMulResult res3 = issue_fmul(req3, three, strat);
    // 46 -> 48, 100 -> 96 on thread 0; the small threads stay exact.
    CHECK(res3.thread_sum(0) == 48 * 96);
    CHECK(res3.thread_sum(1) == 6);
    CHECK(res3.thread_sum(3) == 25);
}

TEST_CASE("control_4t hands a two-thread collision to the 2T logic") {
    const Strategy strat = golden("S+A");
    const std::array<ThreadInput, 4> four = {ti(46, 23), ti(178, 242), ti(0, 5), ti(3, 0)};
    const FMulRequest req4 = control_4t(four, strat);

    const std::array<ThreadInput, 2> pair = {ti(46, 23), ti(178, 242)};
    const FMulRequest req2 = control_2t(pair, strat);

    CHECK(req4.mode == req2.mode);
    CHECK(req4.lane_count == 2);
    CHECK(req4.lanes2[0] == req2.lanes2[0]);
    CHECK(req4.lanes2[1] == req2.lanes2[1]);
    // Attribution points back at the original slots.
    CHECK(req4.lane_thread[0] == 0);
    CHECK(req4.lane_thread[1] == 1);

    const FMulResult res = issue_fmul(req4, four, strat);
    CHECK(res.lane[0] == 1104);
    CHECK(res.lane[1] == 42592);
}

TEST_CASE("control_4t single-active path is exact") {
    const Strategy strat = Strategy::parse("S+A");
    const std::array<ThreadInput, 4> one = {ti(0, 5), ti(0, 0), ti(178, -14), ti(9, 0)};
    const FMulRequest req = control_4t(one, strat);
    CHECK(req.mode == FMulMode::One8x8);
    const FMulResult res = issue_fmul(req, one, strat);
    CHECK(res.sum() == -2492);
    CHECK(res.lossless);
}

TEST_CASE("pe_step accumulates an error-free single-thread stream exactly") {
    Rng rng(11);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<std::array<ThreadInput, 1>> stream;
        for (int j = 0; j < 64; ++j)
            stream.push_back({ti(static_cast<int>(rng.below(256)), rng.range(-127, 127))});
        const acc_t got = run_stream(stream, Strategy::parse("S+A"));
        CHECK(got == exact_sum(stream, false));
    }
}

TEST_CASE("pe_step reproduces the one-cycle squeezed psum 5636") {
    // Thread 0 is rounded (MSBs 1110b) but its LSBs are zero, so the squeeze
    // is effectively collision-free: 5152 + 484 is also the exact answer.
    const std::vector<std::array<ThreadInput, 2>> stream = {{ti(224, 23), ti(2, 242)}};
    PEState pe;
    const acc_t got = run_stream(stream, golden("S+A"), &pe);
    CHECK(got == 5636);
    CHECK(pe.class_count[static_cast<int>(CycleClass::SqueezeExact)] == 1);
    CHECK(pe.rounded_terms == 1);
}

TEST_CASE("pe_step is exact when every operand fits 4 bits") {
    Rng rng(13);
    for (const char* name : {"S+A", "S+W", "S+Aw", "S+aW", "A", "W", "Aw", "aW"}) {
        const Strategy strat = Strategy::parse(name);
        std::vector<std::array<ThreadInput, 2>> s2;
        std::vector<std::array<ThreadInput, 4>> s4;
        for (int j = 0; j < 128; ++j) {
            auto draw = [&] { return ti(static_cast<int>(rng.below(16)), rng.range(-8, 7)); };
            s2.push_back({draw(), draw()});
            s4.push_back({draw(), draw(), draw(), draw()});
        }
        CHECK(run_stream(s2, strat) == exact_sum(s2, false));
        CHECK(run_stream(s4, strat) == exact_sum(s4, false));
    }
}

TEST_CASE("collision counters partition the elapsed cycles") {
    Rng rng(17);
    for (const char* name : {"S+A", "A", "S", "reduce", "S+aW"}) {
        const Strategy strat = Strategy::parse(name);
        std::vector<std::array<ThreadInput, 2>> stream;
        for (int j = 0; j < 500; ++j) {
            auto draw = [&] {
                return rng.below(3) == 0 ? ti(0, rng.range(-127, 127))
                                         : ti(static_cast<int>(rng.below(256)),
                                              rng.range(-127, 127));
            };
            stream.push_back({draw(), draw()});
        }
        PEState pe;
        run_stream(stream, strat, &pe);
        std::uint64_t sum = 0;
        for (auto c : pe.class_count) sum += c;
        CHECK(sum == pe.cycles);
        CHECK(pe.cycles == stream.size());
    }
}

TEST_CASE("pipeline retires one cycle behind the multiply stage") {
    PEState pe;
    const Strategy strat = Strategy::parse("S+A");
    const std::array<ThreadInput, 2> c0 = {ti(2, 3), ti(0, 0)};
    const std::array<ThreadInput, 2> c1 = {ti(5, 5), ti(0, 0)};
    pe_step(pe, c0, strat);
    CHECK(pe.psum32() == 0);  // c0 still in the multiply stage
    pe_step(pe, c1, strat);
    CHECK(pe.psum32() == 6);  // c0 retired, c1 in flight
    pe_flush(pe);
    CHECK(pe.psum32() == 31);
}

TEST_CASE("sparsity exploitation never adds rounded terms") {
    // The multiplications that see rounded operands under S+A are a subset
    // of those under A; compare the counts on identical streams.
    Rng rng(19);
    for (int iter = 0; iter < 30; ++iter) {
        std::vector<std::array<ThreadInput, 2>> stream;
        for (int j = 0; j < 256; ++j) {
            auto draw = [&] {
                const int roll = static_cast<int>(rng.below(4));
                if (roll == 0) return ti(0, rng.range(-127, 127));
                if (roll == 1) return ti(static_cast<int>(rng.below(16)), rng.range(-127, 127));
                return ti(static_cast<int>(rng.below(256)), rng.range(-127, 127));
            };
            stream.push_back({draw(), draw()});
        }
        PEState with_s, without_s;
        run_stream(stream, Strategy::parse("S+A"), &with_s);
        run_stream(stream, Strategy::parse("A"), &without_s);
        CHECK(with_s.rounded_terms <= without_s.rounded_terms);
    }
}

TEST_CASE("pe_step consumes every cycle, whatever the values") {
    // Non-blocking by construction: the step function has no stall path,
    // so cycles always equals the inputs fed.
    Rng rng(23);
    std::vector<std::array<ThreadInput, 4>> stream;
    for (int j = 0; j < 300; ++j) {
        auto draw = [&] { return ti(static_cast<int>(rng.below(256)), rng.range(-127, 127)); };
        stream.push_back({draw(), draw(), draw(), draw()});
    }
    PEState pe;
    run_stream(stream, Strategy::parse("S+A"), &pe);
    CHECK(pe.cycles == stream.size());
}

TEST_CASE("accumulator overflow aborts with a diagnostic") {
    PEState pe;
    const Strategy strat = Strategy::parse("S+A");
    const std::array<ThreadInput, 1> max_cycle = {ti(255, -127)};
    CHECK_THROWS_AS(
        [&] {
            for (int i = 0; i < 70000; ++i) pe_step(pe, max_cycle, strat);
        }(),
        std::overflow_error);
}

TEST_CASE("strategy names round-trip") {
    for (const char* name : {"S", "A", "W", "Aw", "aW", "S+A", "S+W", "S+Aw", "S+aW", "reduce"})
        CHECK(Strategy::parse(name).name() == name);
    CHECK_THROWS_AS(Strategy::parse("bogus"), std::invalid_argument);
    CHECK_THROWS_AS(Strategy::parse("s+a"), std::invalid_argument);
}
