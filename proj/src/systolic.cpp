#include "sysmt/systolic.hpp"

#include <limits>
#include <stdexcept>

namespace sysmt {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

void validate(const QTile& x, const QTile& w, const GridConfig& cfg) {
    if (x.kind() != TileKind::Activation || w.kind() != TileKind::Weight)
        throw std::invalid_argument("simulate: expected an activation tile and a weight tile");
    if (x.cols() != w.rows()) throw std::invalid_argument("simulate: dimension mismatch (K)");
    if (cfg.rows <= 0 || cfg.cols <= 0) throw std::invalid_argument("simulate: bad grid dims");
    if (cfg.threads != 1 && cfg.threads != 2 && cfg.threads != 4)
        throw std::invalid_argument("simulate: thread count must be 1, 2 or 4");
}

}  // namespace

std::vector<std::vector<ThreadInput>> split_threads(std::span<const act_t> x_row,
                                                    std::span<const wgt_t> w_col, int threads) {
    if (x_row.size() != w_col.size())
        throw std::invalid_argument("split_threads: stream length mismatch");
    if (threads != 1 && threads != 2 && threads != 4)
        throw std::invalid_argument("split_threads: thread count must be 1, 2 or 4");

    const int k = static_cast<int>(x_row.size());
    const int per_thread = ceil_div(k, threads);
    std::vector<std::vector<ThreadInput>> streams(threads);
    for (int t = 0; t < threads; ++t) {
        streams[t].resize(per_thread);
        for (int j = 0; j < per_thread; ++j) {
            const int idx = t * per_thread + j;
            ThreadInput& in = streams[t][j];
            if (idx < k) {
                in.x = x_row[idx];
                in.w = w_col[idx];
                in.valid = true;
            }
        }
    }
    return streams;
}

SimResult simulate(const QTile& x, const QTile& w, const GridConfig& cfg) {
    validate(x, w, cfg);
    const int m = x.rows(), k = x.cols(), n = w.cols();
    const int threads = cfg.threads;
    const int per_thread = ceil_div(k, threads);

    SimResult result;
    result.out = Mat32(m, n);
    CycleTrace& trace = result.trace;

    std::array<ThreadInput, 4> slots{};
    const std::span<ThreadInput> slot_view(slots.data(), static_cast<size_t>(threads));

    // Output blocks are processed sequentially; within a block every PE
    // consumes the same stream length, so per-PE iteration is cycle-exact.
    for (int bm = 0; bm < m; bm += cfg.rows) {
        for (int bn = 0; bn < n; bn += cfg.cols) {
            const int mb = std::min(cfg.rows, m - bm);
            const int nb = std::min(cfg.cols, n - bn);
            trace.steady_cycles += per_thread;
            trace.total_cycles += static_cast<std::uint64_t>(per_thread) + (mb - 1) + (nb - 1) + 1;
            trace.pe_window_cycles +=
                static_cast<std::uint64_t>(mb) * nb * static_cast<std::uint64_t>(per_thread);

            for (int pr = 0; pr < mb; ++pr) {
                for (int pc = 0; pc < nb; ++pc) {
                    const int row = bm + pr, col = bn + pc;
                    PEState pe;
                    for (int j = 0; j < per_thread; ++j) {
                        for (int t = 0; t < threads; ++t) {
                            const int idx = t * per_thread + j;
                            ThreadInput& in = slots[t];
                            if (idx < k) {
                                in.x = static_cast<act_t>(x.raw(row, idx));
                                in.w = static_cast<wgt_t>(w.raw(idx, col));
                                in.valid = true;
                            } else {
                                in = ThreadInput{};
                            }
                        }
                        const FMulResult res = pe_step(pe, slot_view, cfg.strategy);
                        if (cfg.detailed_trace) {
                            PECycleRecord rec;
                            rec.cycle = static_cast<std::uint32_t>(j);
                            rec.row = static_cast<std::uint16_t>(row);
                            rec.col = static_cast<std::uint16_t>(col);
                            rec.mode = res.mode;
                            rec.lane_count = res.lane_count;
                            rec.lane_products = res.lane;
                            rec.active_mask = res.active_mask;
                            rec.rounded_mask = res.rounded_mask;
                            trace.records.push_back(rec);
                        }
                    }
                    pe_flush(pe);
                    result.out.at(row, col) = pe.psum32();

                    for (size_t c = 0; c < pe.class_count.size(); ++c)
                        trace.class_count[c] += pe.class_count[c];
                    trace.utilized_pe_cycles += pe.utilized_cycles;
                    trace.rounded_terms += pe.rounded_terms;
                    trace.lossy_pe_cycles += pe.lossy_cycles;
                }
            }
        }
    }
    return result;
}

Mat32 reference_matmul(const QTile& x, const QTile& w, bool unsigned_weights) {
    if (x.cols() != w.rows()) throw std::invalid_argument("reference_matmul: dimension mismatch");
    const int m = x.rows(), k = x.cols(), n = w.cols();
    Mat32 out(m, n);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < n; ++c) {
            std::int64_t acc = 0;
            for (int i = 0; i < k; ++i) {
                const int wv = unsigned_weights ? static_cast<int>(w.raw(i, c)) : w.get(i, c);
                acc += static_cast<std::int64_t>(x.get(r, i)) * wv;
            }
            if (acc > std::numeric_limits<acc_t>::max() || acc < std::numeric_limits<acc_t>::min())
                throw std::overflow_error("reference_matmul: 32-bit output overflow");
            out.at(r, c) = static_cast<acc_t>(acc);
        }
    }
    return out;
}

std::uint64_t steady_cycles_formula(const TileSpec& tile, const GridConfig& cfg) {
    const std::uint64_t per_thread = ceil_div(tile.k, cfg.threads);
    const std::uint64_t blocks =
        static_cast<std::uint64_t>(ceil_div(tile.m, cfg.rows)) * ceil_div(tile.n, cfg.cols);
    return blocks * per_thread;
}

std::uint64_t total_cycles_formula(const TileSpec& tile, const GridConfig& cfg) {
    const std::uint64_t per_thread = ceil_div(tile.k, cfg.threads);
    std::uint64_t total = 0;
    for (int bm = 0; bm < tile.m; bm += cfg.rows)
        for (int bn = 0; bn < tile.n; bn += cfg.cols) {
            const int mb = std::min(cfg.rows, tile.m - bm);
            const int nb = std::min(cfg.cols, tile.n - bn);
            total += per_thread + (mb - 1) + (nb - 1) + 1;
        }
    return total;
}

SpeedupReport speedup(const CycleTrace& baseline, const CycleTrace& smt) {
    SpeedupReport r;
    r.steady = smt.steady_cycles ? static_cast<double>(baseline.steady_cycles) / smt.steady_cycles
                                 : 1.0;
    r.total = smt.total_cycles ? static_cast<double>(baseline.total_cycles) / smt.total_cycles
                               : 1.0;
    return r;
}

}  // namespace sysmt
