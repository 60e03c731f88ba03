// metrics.hpp — evaluation accounting: MAC utilization classification, the
// utilization-gain model, MSE against the error-free reference, the energy
// model, and per-layer thread throttling selection.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sysmt/systolic.hpp"
#include "sysmt/tile.hpp"

namespace sysmt {

// A MAC with a zero operand is idle; both nonzero with at least one Fits4
// operand is partial (4b-8b / 8b-4b / 4b-4b); both wide is full.
enum class MacClass : std::uint8_t { Idle, Partial, Full };

MacClass classify_mac(act_t x, wgt_t w);

struct UtilBreakdown {
    double full = 0.0;
    double partial = 0.0;
    double idle = 0.0;
};

// Classify every (x[m,k], w[k,n]) MAC of the matmul.
UtilBreakdown classify_tile_macs(const QTile& x, const QTile& w);

// Predicted utilization gain of T threads over one at activation sparsity s
// (weights nonzero, threads independent): (1 - s^T) / (1 - s). T=2 reduces
// to s + 1; the s -> 1 limit is T.
double util_gain_model(double s, int threads);

// Ratio of utilized-PE-cycle fractions on the same workload.
double measured_util_gain(const CycleTrace& baseline, const CycleTrace& smt);

// Mean squared error over dequantized outputs; `ref` is the error-free
// reference. Scales: one activation scale, per-column weight scales.
double mse(const Mat32& out, const Mat32& ref, double act_scale,
           std::span<const double> wgt_scales);

// Average-power lookup per thread count, piecewise linear in utilization
// with clamping outside the tabulated range. Entries must be monotone in
// utilization. Defaults carry the synthesis operating points: 320mW @ 80%
// and 277mW @ 40% for the baseline, 429mW / 723mW @ 80% for 2T / 4T.
class PowerTable {
public:
    struct Point {
        double util;  // fraction in (0, 1]
        double mw;
    };

    static PowerTable defaults();
    static PowerTable from_json(const std::string& text);
    std::string to_json() const;

    void set_points(int threads, std::vector<Point> pts);  // validates monotonicity
    double lookup_mw(int threads, double util) const;      // throws if threads unknown

private:
    std::vector<std::pair<int, std::vector<Point>>> tables_;
};

// Peak throughput in MAC/s: 256 GMACS baseline, scaling with threads.
double throughput_macs(int threads);

struct LayerEnergyInput {
    std::string name;
    std::uint64_t macs = 0;
    int threads = 1;
    double utilization = 0.0;
};

struct EnergyReport {
    struct Layer {
        std::string name;
        double e_mj = 0.0;
        double power_mw = 0.0;
        double time_s = 0.0;
    };
    std::vector<Layer> layers;
    double total_mj = 0.0;
};

// E_l = MAC_l / Throughput * P_l, summed over layers.
EnergyReport energy(std::span<const LayerEnergyInput> layers, const PowerTable& table);

// Indices of the `count` highest-MSE layers, ties broken toward earlier
// layers. Throws if count exceeds the layer count.
std::vector<int> select_throttled_layers(std::span<const double> layer_mse, int count);

}  // namespace sysmt
