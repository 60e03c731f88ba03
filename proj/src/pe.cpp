#include "sysmt/pe.hpp"

#include <bit>
#include <limits>
#include <stdexcept>

namespace sysmt {

// ---------------------------------------------------------------------------
// Strategy names
// ---------------------------------------------------------------------------

Strategy Strategy::parse(std::string_view name) {
    Strategy s;
    s.exploit_sparsity = false;
    if (name == "S") {
        s.exploit_sparsity = true;
        s.width_source = WidthSource::None;
        return s;
    }
    if (name == "reduce") {
        s.width_source = WidthSource::None;
        return s;
    }
    std::string_view rest = name;
    if (rest.size() > 2 && rest.substr(0, 2) == "S+") {
        s.exploit_sparsity = true;
        rest = rest.substr(2);
    }
    if (rest == "A") s.width_source = WidthSource::Act;
    else if (rest == "W") s.width_source = WidthSource::Wgt;
    else if (rest == "Aw") s.width_source = WidthSource::ActWgtReduceAct;
    else if (rest == "aW") s.width_source = WidthSource::ActWgtReduceWgt;
    else throw std::invalid_argument("unknown strategy: " + std::string(name));
    return s;
}

std::string Strategy::name() const {
    if (width_source == WidthSource::None) return exploit_sparsity ? "S" : "reduce";
    std::string n = exploit_sparsity ? "S+" : "";
    switch (width_source) {
        case WidthSource::Act: n += "A"; break;
        case WidthSource::Wgt: n += "W"; break;
        case WidthSource::ActWgtReduceAct: n += "Aw"; break;
        case WidthSource::ActWgtReduceWgt: n += "aW"; break;
        case WidthSource::None: break;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Cycle classification
// ---------------------------------------------------------------------------

namespace {

inline bool is_active(const ThreadInput& t) { return t.valid && t.x != 0 && t.w != 0; }

// Weight value on the PE's ports, honoring the unsigned-pattern golden mode.
inline int weight_value(const ThreadInput& t, const Strategy& s) {
    return s.unsigned_weights ? static_cast<int>(static_cast<std::uint8_t>(t.w))
                              : static_cast<int>(t.w);
}

}  // namespace

CycleKind classify_cycle(std::span<const ThreadInput> threads) {
    CycleKind k;
    for (size_t i = 0; i < threads.size(); ++i) {
        if (is_active(threads[i])) {
            if (k.first_active < 0) k.first_active = static_cast<int>(i);
            ++k.active_count;
        }
    }
    k.occ = k.active_count == 0  ? Occupancy::AllIdle
            : k.active_count == 1 ? Occupancy::OneActive
                                  : Occupancy::MultiActive;
    return k;
}

ActiveThread get_active_thread(std::span<const ThreadInput> threads) {
    const CycleKind k = classify_cycle(threads);
    if (k.active_count > 1) throw std::logic_error("get_active_thread: more than one active thread");
    if (k.active_count == 0) return {0, true};
    return {k.first_active, false};
}

// ---------------------------------------------------------------------------
// Squeeze logic
// ---------------------------------------------------------------------------

namespace {

// Port assignment for one thread under a two-way squeeze (one 4b port, one
// 8b port per thread).
struct PortAssign {
    Nibble narrow;
    int wide = 0;
    bool rounded = false;
};

PortAssign squeeze_thread_2t(const ThreadInput& t, const Strategy& s) {
    const int xv = t.valid ? t.x : 0;
    const int wv = t.valid ? weight_value(t, s) : 0;
    const bool wsigned = !s.unsigned_weights;
    const bool x_fits = effective_width(xv, false) == Width::Fits4;
    const bool w_fits = effective_width(wv, wsigned) == Width::Fits4;

    switch (s.width_source) {
        case WidthSource::None:
            return {reduce_to_msb_nibble(xv, false), wv, true};
        case WidthSource::Act:
            if (x_fits) return {low_nibble_operand(xv, false), wv, false};
            return {reduce_to_msb_nibble(xv, false), wv, true};
        case WidthSource::Wgt:
            if (w_fits) return {low_nibble_operand(wv, wsigned), xv, false};
            return {reduce_to_msb_nibble(wv, wsigned), xv, true};
        case WidthSource::ActWgtReduceAct:  // Aw: swap only when the swap avoids rounding
            if (x_fits) return {low_nibble_operand(xv, false), wv, false};
            if (w_fits) return {low_nibble_operand(wv, wsigned), xv, false};
            return {reduce_to_msb_nibble(xv, false), wv, true};
        case WidthSource::ActWgtReduceWgt:  // aW
            if (w_fits) return {low_nibble_operand(wv, wsigned), xv, false};
            if (x_fits) return {low_nibble_operand(xv, false), wv, false};
            return {reduce_to_msb_nibble(wv, wsigned), xv, true};
    }
    throw std::logic_error("unreachable");
}

// Both-operand nibble assignment for a three- or four-way squeeze. Width
// strategies pick LSBs when the operand fits, rounded MSBs otherwise; the
// width-blind strategies (width_source None) always round.
struct NibbleAssign {
    Nibble a, b;
    bool rounded = false;
};

NibbleAssign squeeze_thread_4t(const ThreadInput& t, const Strategy& s) {
    const int xv = t.valid ? t.x : 0;
    const int wv = t.valid ? weight_value(t, s) : 0;
    const bool wsigned = !s.unsigned_weights;

    NibbleAssign out;
    if (s.width_source == WidthSource::None) {
        out.a = reduce_to_msb_nibble(xv, false);
        out.b = reduce_to_msb_nibble(wv, wsigned);
        out.rounded = true;
        return out;
    }
    if (effective_width(xv, false) == Width::Fits4) {
        out.a = low_nibble_operand(xv, false);
    } else {
        out.a = reduce_to_msb_nibble(xv, false);
        out.rounded = true;
    }
    if (effective_width(wv, wsigned) == Width::Fits4) {
        out.b = low_nibble_operand(wv, wsigned);
    } else {
        out.b = reduce_to_msb_nibble(wv, wsigned);
        out.rounded = true;
    }
    return out;
}

std::uint8_t active_mask_of(std::span<const ThreadInput> threads) {
    std::uint8_t m = 0;
    for (size_t i = 0; i < threads.size(); ++i)
        if (is_active(threads[i])) m |= static_cast<std::uint8_t>(1u << i);
    return m;
}

// Exact One8x8 request for a single thread (or a quiet zero-contribution
// slot), on the two 4b-8b lanes.
FMulRequest one_active_request(const ThreadInput& t, int index, const Strategy& s,
                               std::uint8_t active_mask) {
    const act_t x = t.valid ? t.x : act_t{0};
    const int wv = t.valid ? weight_value(t, s) : 0;
    FMulRequest req;
    req.mode = FMulMode::One8x8;
    req.lane_count = 2;
    req.lanes2 = one8x8_lanes_2t(x, wv);
    req.lane_thread = {static_cast<std::int8_t>(index), static_cast<std::int8_t>(index), -1, -1};
    req.active_mask = active_mask;
    return req;
}

// Two-way squeeze of a thread pair onto the two 4b-8b lanes.
FMulRequest pair_squeeze_request(const ThreadInput& t0, int i0, const ThreadInput& t1, int i1,
                                 const Strategy& s, std::uint8_t active_mask) {
    FMulRequest req;
    req.mode = FMulMode::Two4x8;
    req.lane_count = 2;
    const PortAssign a0 = squeeze_thread_2t(t0, s);
    const PortAssign a1 = squeeze_thread_2t(t1, s);
    req.lanes2[0] = {a0.narrow, static_cast<std::int16_t>(a0.wide)};
    req.lanes2[1] = {a1.narrow, static_cast<std::int16_t>(a1.wide)};
    req.lane_thread = {static_cast<std::int8_t>(i0), static_cast<std::int8_t>(i1), -1, -1};
    req.active_mask = active_mask;
    if (a0.rounded && (active_mask >> i0 & 1)) req.rounded_mask |= 1u << i0;
    if (a1.rounded && (active_mask >> i1 & 1)) req.rounded_mask |= 1u << i1;
    return req;
}

}  // namespace

FMulRequest control_2t(const std::array<ThreadInput, 2>& threads, const Strategy& strat) {
    const CycleKind kind = classify_cycle(threads);
    const std::uint8_t amask = active_mask_of(threads);

    // Without sparsity detection every cycle is treated as a collision.
    if (strat.exploit_sparsity && kind.active_count <= 1) {
        const ActiveThread at = get_active_thread(threads);
        return one_active_request(threads[at.index], at.index, strat, amask);
    }
    return pair_squeeze_request(threads[0], 0, threads[1], 1, strat, amask);
}

FMulRequest control_4t(const std::array<ThreadInput, 4>& threads, const Strategy& strat) {
    const CycleKind kind = classify_cycle(threads);
    const std::uint8_t amask = active_mask_of(threads);

    if (strat.exploit_sparsity) {
        if (kind.active_count <= 1) {
            const ActiveThread at = get_active_thread(threads);
            return one_active_request(threads[at.index], at.index, strat, amask);
        }
        if (kind.active_count == 2) {
            int i0 = -1, i1 = -1;
            for (int i = 0; i < 4; ++i)
                if (amask >> i & 1) (i0 < 0 ? i0 : i1) = i;
            return pair_squeeze_request(threads[i0], i0, threads[i1], i1, strat, amask);
        }
    }

    // Three- or four-way collision (or a width-blind PE): reduce both
    // operands of every slot to nibbles. Idle slots contribute zero lanes.
    FMulRequest req;
    req.mode = FMulMode::Four4x4;
    req.lane_count = 4;
    req.active_mask = amask;
    for (int i = 0; i < 4; ++i) {
        const NibbleAssign na = squeeze_thread_4t(threads[i], strat);
        req.lanes4[i] = {na.a, na.b};
        req.lane_thread[i] = static_cast<std::int8_t>(i);
        if (na.rounded && (amask >> i & 1)) req.rounded_mask |= 1u << i;
    }
    return req;
}

// ---------------------------------------------------------------------------
// Execution and accumulation
// ---------------------------------------------------------------------------

acc_t FMulResult::sum() const {
    acc_t s = 0;
    for (int i = 0; i < lane_count; ++i) s += lane[i];
    return s;
}

acc_t FMulResult::thread_sum(int thread) const {
    acc_t s = 0;
    for (int i = 0; i < lane_count; ++i)
        if (lane_thread[i] == thread) s += lane[i];
    return s;
}

FMulResult issue_fmul(const FMulRequest& req, std::span<const ThreadInput> threads,
                      const Strategy& strat) {
    FMulResult r;
    r.lane_count = req.lane_count;
    r.lane_thread = req.lane_thread;
    r.active_mask = req.active_mask;
    r.rounded_mask = req.rounded_mask;
    r.mode = req.mode;

    if (req.lane_count == 2) {
        const auto p = fmul_2t(req.lanes2[0], req.lanes2[1], req.mode);
        r.lane = {p[0], p[1], 0, 0};
    } else {
        r.lane = fmul_4t(req.lanes4, req.mode);
    }

    for (size_t t = 0; t < threads.size(); ++t) {
        const acc_t exact =
            is_active(threads[t])
                ? static_cast<acc_t>(threads[t].x) * weight_value(threads[t], strat)
                : 0;
        if (r.thread_sum(static_cast<int>(t)) != exact) r.lossless = false;
    }
    return r;
}

namespace {

void retire(PEState& state, const FMulResult& res) {
    state.psum += res.sum();
    if (state.psum > std::numeric_limits<acc_t>::max() ||
        state.psum < std::numeric_limits<acc_t>::min())
        throw std::overflow_error("pe: psum overflowed the 32-bit accumulator");
}

}  // namespace

acc_t PEState::psum32() const { return static_cast<acc_t>(psum); }

FMulResult pe_step(PEState& state, std::span<const ThreadInput> threads, const Strategy& strat) {
    ++state.cycles;

    FMulResult res;
    const CycleKind kind = classify_cycle(threads);
    if (threads.size() == 1) {
        // Conventional PE: one exact 8b-8b MAC per cycle, no squeeze logic.
        res.lane_count = 1;
        res.lane_thread = {0, -1, -1, -1};
        res.active_mask = active_mask_of(threads);
        res.lane[0] = kind.active_count
                          ? static_cast<acc_t>(threads[0].x) * weight_value(threads[0], strat)
                          : 0;
        res.mode = FMulMode::One8x8;
    } else if (threads.size() == 2) {
        res = issue_fmul(control_2t({threads[0], threads[1]}, strat), threads, strat);
    } else if (threads.size() == 4) {
        res = issue_fmul(control_4t({threads[0], threads[1], threads[2], threads[3]}, strat),
                         threads, strat);
    } else {
        throw std::invalid_argument("pe_step: thread count must be 1, 2 or 4");
    }

    CycleClass cls;
    if (kind.active_count == 0) cls = CycleClass::NoOp;
    else if (kind.active_count == 1) cls = CycleClass::SingleActive;
    else cls = res.lossless ? CycleClass::SqueezeExact : CycleClass::SqueezeLossy;
    ++state.class_count[static_cast<size_t>(cls)];
    if (kind.active_count > 0) ++state.utilized_cycles;
    state.rounded_terms += std::popcount(res.rounded_mask);
    if (!res.lossless) ++state.lossy_cycles;

    if (state.inflight_valid) retire(state, state.inflight);
    state.inflight = res;
    state.inflight_valid = true;
    return res;
}

void pe_flush(PEState& state) {
    if (state.inflight_valid) {
        retire(state, state.inflight);
        state.inflight_valid = false;
        state.inflight = FMulResult{};
    }
}

}  // namespace sysmt
