// systolic.hpp — output-stationary grid simulator: thread-split operand
// scheduling with diagonal skew, cycle accounting, and result collection for
// the baseline array (T=1) and the SMT configurations (T=2, 4).
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sysmt/pe.hpp"
#include "sysmt/tile.hpp"

namespace sysmt {

struct TileSpec {
    int m = 0, k = 0, n = 0;
};

struct GridConfig {
    int rows = 16;
    int cols = 16;
    int threads = 1;  // 1, 2 or 4
    Strategy strategy{};
    bool detailed_trace = false;  // record per-PE, per-cycle lane products
};

// Detailed trace entry (small runs only).
struct PECycleRecord {
    std::uint32_t cycle = 0;  // PE-local stream index
    std::uint16_t row = 0, col = 0;
    FMulMode mode = FMulMode::One8x8;
    int lane_count = 0;
    std::array<acc_t, 4> lane_products{};
    std::uint8_t active_mask = 0;
    std::uint8_t rounded_mask = 0;
};

struct CycleTrace {
    std::uint64_t total_cycles = 0;   // feed + skew fill/drain + pipeline drain
    std::uint64_t steady_cycles = 0;  // operand-feed cycles only
    std::uint64_t pe_window_cycles = 0;

    std::array<std::uint64_t, 4> class_count{};  // by CycleClass, over PE-cycles
    std::uint64_t utilized_pe_cycles = 0;
    std::uint64_t rounded_terms = 0;
    std::uint64_t lossy_pe_cycles = 0;

    std::vector<PECycleRecord> records;  // detailed mode only

    // Fraction of PE-cycles inside the operand window with a working MAC.
    double utilization() const {
        return pe_window_cycles ? static_cast<double>(utilized_pe_cycles) / pe_window_cycles : 0.0;
    }
};

struct SimResult {
    Mat32 out;
    CycleTrace trace;
};

// Contiguous-block split of a row/column pair into T per-thread sub-streams
// (thread t carries indices [t*K/T, (t+1)*K/T)). K is padded up to a
// multiple of T with invalid slots so the tail thread drains quietly.
std::vector<std::vector<ThreadInput>> split_threads(std::span<const act_t> x_row,
                                                    std::span<const wgt_t> w_col, int threads);

// Cycle-accurate simulation of X (M x K activations) times W (K x N weights).
// Output tiles larger than the grid are processed as independent grid-sized
// blocks, sequentially. With T=1 the result is bit-equal to reference_matmul.
SimResult simulate(const QTile& x, const QTile& w, const GridConfig& cfg);

// Widened-integer product oracle, row-major. Independent of the PE path.
// `unsigned_weights` mirrors the golden mode: weight bit patterns read as
// 0..255 instead of two's complement.
Mat32 reference_matmul(const QTile& x, const QTile& w, bool unsigned_weights = false);

// Closed forms for the documented cycle model: per output block,
//   steady = ceil(Kpad / T),  total = steady + (Mb-1) + (Nb-1) + 1,
// summed over blocks (the +1 is the accumulate-stage drain).
std::uint64_t steady_cycles_formula(const TileSpec& tile, const GridConfig& cfg);
std::uint64_t total_cycles_formula(const TileSpec& tile, const GridConfig& cfg);

struct SpeedupReport {
    double steady = 1.0;
    double total = 1.0;
};

SpeedupReport speedup(const CycleTrace& baseline, const CycleTrace& smt);

}  // namespace sysmt
