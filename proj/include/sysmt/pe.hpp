// pe.hpp — per-PE, per-cycle control: thread-collision detection, fMUL mode
// and operand selection under the configured exploitation strategy, and
// accumulation into the shared psum through the two-stage pipeline.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "sysmt/qnum.hpp"

namespace sysmt {

// One thread slot for one cycle. Invalid slots are stream-drain padding and
// never count as active.
struct ThreadInput {
    act_t x = 0;
    wgt_t w = 0;
    bool valid = false;
};

// Which operand's data-width the PE exploits on a collision.
//   None          - no width detection; collisions always round (strategy S
//                   alone, or the always-reduce floor when sparsity is off)
//   Act / Wgt     - A / W: width-check one operand, round it on demand
//   ActWgtReduceAct - Aw: width-check both, swap ports when only the weight
//                   fits, round the activation as a last resort
//   ActWgtReduceWgt - aW: mirror of Aw, rounds the weight as a last resort
enum class WidthSource : std::uint8_t { None, Act, Wgt, ActWgtReduceAct, ActWgtReduceWgt };

struct Strategy {
    bool exploit_sparsity = true;
    WidthSource width_source = WidthSource::Act;
    // Golden-test mode: interpret weight bit patterns as unsigned, matching
    // worked examples built from unsigned operand pairs. Never set by the
    // production quantization path.
    bool unsigned_weights = false;

    // Names: "S", "A", "W", "Aw", "aW", "S+A", "S+W", "S+Aw", "S+aW",
    // "reduce" (always-reduce floor). Throws std::invalid_argument.
    static Strategy parse(std::string_view name);
    std::string name() const;

    bool operator==(const Strategy&) const = default;
};

enum class Occupancy : std::uint8_t { AllIdle, OneActive, MultiActive };

struct CycleKind {
    Occupancy occ = Occupancy::AllIdle;
    int active_count = 0;
    int first_active = -1;  // lowest active slot, -1 when all idle
};

// A thread is active iff valid and x != 0 and w != 0.
CycleKind classify_cycle(std::span<const ThreadInput> threads);

struct ActiveThread {
    int index = 0;
    bool zero_contribution = false;  // no thread was active; index 0 is a placeholder
};

// Requires at most one active thread; two or more throws std::logic_error.
ActiveThread get_active_thread(std::span<const ThreadInput> threads);

// Per-cycle fMUL configuration produced by the control logic.
struct FMulRequest {
    FMulMode mode = FMulMode::One8x8;
    int lane_count = 2;  // 2 -> lanes2 in use, 4 -> lanes4
    std::array<Lane2, 2> lanes2{};
    std::array<Lane4, 4> lanes4{};
    std::array<std::int8_t, 4> lane_thread{-1, -1, -1, -1};
    std::uint8_t active_mask = 0;
    std::uint8_t rounded_mask = 0;  // active threads fed a rounded operand
};

FMulRequest control_2t(const std::array<ThreadInput, 2>& threads, const Strategy& strat);
FMulRequest control_4t(const std::array<ThreadInput, 4>& threads, const Strategy& strat);

struct FMulResult {
    std::array<acc_t, 4> lane{};
    int lane_count = 0;
    std::array<std::int8_t, 4> lane_thread{-1, -1, -1, -1};
    std::uint8_t active_mask = 0;
    std::uint8_t rounded_mask = 0;
    bool lossless = true;  // every thread's lane sum equals its exact product
    FMulMode mode = FMulMode::One8x8;

    acc_t sum() const;
    acc_t thread_sum(int thread) const;
};

// Execute a request on the flexible multiplier and attribute lane products.
FMulResult issue_fmul(const FMulRequest& req, std::span<const ThreadInput> threads,
                      const Strategy& strat);

// Cycle classes for the collision counters. SingleActive covers exactly one
// active thread; Squeeze* cover two or more, split by whether the squeezed
// configuration lost precision this cycle.
enum class CycleClass : std::uint8_t { NoOp = 0, SingleActive = 1, SqueezeExact = 2, SqueezeLossy = 3 };

struct PEState {
    std::int64_t psum = 0;  // retired value is guarded to acc_t range
    FMulResult inflight{};
    bool inflight_valid = false;

    std::uint64_t cycles = 0;
    std::array<std::uint64_t, 4> class_count{};  // indexed by CycleClass
    std::uint64_t utilized_cycles = 0;           // cycles with >= 1 active thread
    std::uint64_t rounded_terms = 0;             // active thread-slots fed a rounded operand
    std::uint64_t lossy_cycles = 0;              // cycles whose contribution != exact

    acc_t psum32() const;
};

// Advance one cycle: multiply stage issues this cycle's request, accumulate
// stage retires the previous one. Thread count is threads.size() (1, 2, 4).
// The result of the final cycle lands in psum only after pe_flush.
FMulResult pe_step(PEState& state, std::span<const ThreadInput> threads, const Strategy& strat);

// Drain the accumulate stage (the fixed one-cycle pipeline latency).
void pe_flush(PEState& state);

}  // namespace sysmt
