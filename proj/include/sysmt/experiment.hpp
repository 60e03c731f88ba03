// experiment.hpp — experiment driver shared by the CLI and the integration
// tests: config parsing, single runs with baseline comparison, parameter
// sweeps, and the self-verification pass.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sysmt/lowering.hpp"
#include "sysmt/metrics.hpp"
#include "sysmt/reorder.hpp"
#include "sysmt/systolic.hpp"

namespace sysmt {

// One layer of a workload: either a pair of tile files or a generator spec.
struct LayerSpec {
    std::string name;
    std::string x_path;  // .qtile or .csv
    std::string w_path;
    std::optional<SynthSpec> gen;
};

struct ExperimentConfig {
    std::vector<LayerSpec> layers;
    int grid_rows = 16;
    int grid_cols = 16;
    int threads = 2;
    std::string strategy = "S+A";
    bool reorder = false;
    std::map<int, int> layer_threads;  // per-layer overrides (throttling)
    std::string power_table_path;      // empty -> built-in table
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    bool golden_unsigned_weights = false;  // verification mode only

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);
    std::string to_json_text() const;
    void validate() const;  // throws std::invalid_argument
};

struct LayerResult {
    std::string name;
    int m = 0, k = 0, n = 0;
    int threads = 1;
    std::uint64_t macs = 0;
    std::uint64_t cycles_total = 0;
    std::uint64_t cycles_steady = 0;
    std::uint64_t baseline_cycles_total = 0;
    std::uint64_t baseline_cycles_steady = 0;
    double utilization = 0.0;
    double baseline_utilization = 0.0;
    double util_gain = 0.0;
    UtilBreakdown mac_breakdown{};
    std::array<std::uint64_t, 4> class_count{};  // no-op / single / exact / lossy
    std::uint64_t rounded_terms = 0;
    double mse = 0.0;
    double energy_mj = 0.0;
    double baseline_energy_mj = 0.0;
    SpeedupReport speedup{};
    std::vector<int> permutation;  // empty when reordering is off
};

struct RunReport {
    ExperimentConfig config;
    std::vector<LayerResult> layers;
    double total_mse = 0.0;  // sum of per-layer MSEs
    double total_energy_mj = 0.0;
    double baseline_energy_mj = 0.0;
    SpeedupReport network_speedup{};  // MAC-weighted over layers

    std::string to_json_text() const;
    std::string to_csv_text() const;
};

RunReport run_experiment(const ExperimentConfig& cfg);

// Sweeps emit one CSV row per point (header included). Each point reuses
// the config with one axis varied; all randomness derives from cfg.seed.
std::string sweep_sparsity_csv(const ExperimentConfig& cfg,
                               const std::vector<double>& sparsities);
std::string sweep_strategy_csv(const ExperimentConfig& cfg,
                               const std::vector<std::string>& strategies);
std::string sweep_threads_csv(const ExperimentConfig& cfg, const std::vector<int>& threads);
std::string sweep_throttle_csv(const ExperimentConfig& cfg, int max_throttled);

// Self-checks behind `sysmt verify`: exhaustive fMUL recomposition over all
// 65536 operand pairs (both decompositions), the rounding rule over all 512
// inputs, and the conv-lowering equivalence on random specs.
struct VerifyOutcome {
    bool ok = true;
    std::vector<std::string> checks;    // one human-readable line per check
    std::vector<std::string> failures;  // counterexamples, empty when ok
};

VerifyOutcome run_verification(int conv_cases = 50, std::uint64_t seed = 20220426);

}  // namespace sysmt
