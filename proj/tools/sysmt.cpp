// sysmt — experiment driver for the NB-SMT systolic-array simulator.
//
// Subcommands:
//   simulate       run a workload (baseline + SMT), write report JSON/CSV
//   verify         exhaustive multiplier/rounding/lowering self-checks
//   sweep          parameter sweeps over sparsity/strategy/threads/throttle
//   reorder-stats  column statistics and the derived permutation
//
// Exit codes: 0 ok, 1 verification failure, 2 usage/config error.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sysmt/experiment.hpp"

namespace fs = std::filesystem;
using namespace sysmt;

namespace {

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path.string());
    f << text;
}

ExperimentConfig load_config(const std::string& config_path) {
    return ExperimentConfig::from_json_file(config_path);
}

// Flags shared by simulate/sweep that override the config file.
struct Overrides {
    int threads = 0;
    std::string strategy;
    std::string out_dir;
    std::uint64_t seed = 0;
    int reorder = -1;
    bool golden_unsigned = false;

    void apply(ExperimentConfig& cfg) const {
        if (threads) cfg.threads = threads;
        if (!strategy.empty()) cfg.strategy = strategy;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed) cfg.seed = seed;
        if (reorder >= 0) cfg.reorder = reorder != 0;
        if (golden_unsigned) cfg.golden_unsigned_weights = true;
        cfg.validate();
    }
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--threads", ov.threads, "Override thread count (1, 2 or 4)");
    cmd->add_option("--strategy", ov.strategy, "Override strategy (S, A, W, Aw, aW, S+A, ...)");
    cmd->add_option("--out-dir", ov.out_dir, "Override output directory");
    cmd->add_option("--seed", ov.seed, "Override RNG seed");
    cmd->add_option("--reorder", ov.reorder, "Override reordering (0/1)");
    cmd->add_flag("--golden-unsigned-weights", ov.golden_unsigned,
                  "Verification mode: weight bit patterns read as unsigned");
}

int cmd_simulate(const std::string& config_path, const Overrides& ov, bool trace) {
    ExperimentConfig cfg = load_config(config_path);
    ov.apply(cfg);

    const RunReport report = run_experiment(cfg);

    fs::create_directories(cfg.out_dir);
    write_file(fs::path(cfg.out_dir) / "report.json", report.to_json_text());
    write_file(fs::path(cfg.out_dir) / "report.csv", report.to_csv_text());
    write_file(fs::path(cfg.out_dir) / "config.json", cfg.to_json_text());
    for (const LayerResult& l : report.layers)
        if (!l.permutation.empty())
            write_file(fs::path(cfg.out_dir) / ("perm_" + l.name + ".json"),
                       permutation_to_json(l.permutation) + "\n");

    std::printf("layers: %zu  threads: %d  strategy: %s  reorder: %s\n", report.layers.size(),
                cfg.threads, cfg.strategy.c_str(), cfg.reorder ? "on" : "off");
    for (const LayerResult& l : report.layers)
        std::printf("  %-12s %4dx%d/%d T=%d  cycles: %llu (steady %llu)  util: %.3f  "
                    "mse: %.6g  speedup: %.3fx/%.3fx\n",
                    l.name.c_str(), l.m, l.k, l.n, l.threads,
                    static_cast<unsigned long long>(l.cycles_total),
                    static_cast<unsigned long long>(l.cycles_steady), l.utilization, l.mse,
                    l.speedup.steady, l.speedup.total);
    std::printf("total mse: %.6g  energy: %.6g mJ (baseline %.6g mJ)  "
                "network speedup: %.3fx steady, %.3fx total\n",
                report.total_mse, report.total_energy_mj, report.baseline_energy_mj,
                report.network_speedup.steady, report.network_speedup.total);
    std::printf("reports written to %s\n", cfg.out_dir.c_str());

    if (trace) {
        // Per-cycle lane products for the first layer (small tiles only).
        Strategy strat = Strategy::parse(cfg.strategy);
        strat.unsigned_weights = cfg.golden_unsigned_weights;
        ExperimentConfig probe = cfg;
        GridConfig gc{cfg.grid_rows, cfg.grid_cols, cfg.threads, strat, true};
        const auto layer0 = probe.layers.front();
        QTile x = layer0.gen ? gen_synthetic(*layer0.gen).x
                             : (layer0.x_path.ends_with(".csv")
                                    ? QTile::load_csv(layer0.x_path, TileKind::Activation)
                                    : QTile::load_qtile(layer0.x_path));
        QTile w = layer0.gen ? gen_synthetic(*layer0.gen).w
                             : (layer0.w_path.ends_with(".csv")
                                    ? QTile::load_csv(layer0.w_path, TileKind::Weight)
                                    : QTile::load_qtile(layer0.w_path));
        if (static_cast<std::uint64_t>(x.rows()) * w.cols() * x.cols() > 4096) {
            std::printf("trace: first layer too large, skipping\n");
            return 0;
        }
        const SimResult sim = simulate(x, w, gc);
        std::printf("cycle trace (pe, cycle, mode, lanes):\n");
        for (const PECycleRecord& r : sim.trace.records) {
            std::printf("  pe(%u,%u) c%u %s lanes:", r.row, r.col, r.cycle, to_string(r.mode));
            for (int i = 0; i < r.lane_count; ++i) std::printf(" %d", r.lane_products[i]);
            std::printf("  active=%02x rounded=%02x\n", r.active_mask, r.rounded_mask);
        }
    }
    return 0;
}

int cmd_verify(int conv_cases, std::uint64_t seed) {
    const VerifyOutcome out = run_verification(conv_cases, seed);
    for (const std::string& line : out.checks) std::printf("[ ok ] %s\n", line.c_str());
    for (const std::string& line : out.failures) std::printf("[FAIL] %s\n", line.c_str());
    std::printf(out.ok ? "verification passed\n" : "verification FAILED\n");
    return out.ok ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const Overrides& ov, const std::string& axis,
              const std::string& points, int max_throttled, const std::string& out_file) {
    ExperimentConfig cfg = load_config(config_path);
    ov.apply(cfg);

    std::string csv;
    if (axis == "sparsity") {
        std::vector<double> ss;
        if (points.empty()) {
            for (int i = 1; i <= 9; ++i) ss.push_back(i / 10.0);
        } else {
            std::stringstream in(points);
            std::string tok;
            while (std::getline(in, tok, ',')) ss.push_back(std::stod(tok));
        }
        csv = sweep_sparsity_csv(cfg, ss);
    } else if (axis == "strategy") {
        std::vector<std::string> names = {"S", "A", "Aw", "S+A", "S+Aw", "W", "aW", "S+W", "S+aW",
                                          "reduce"};
        if (!points.empty()) {
            names.clear();
            std::stringstream in(points);
            std::string tok;
            while (std::getline(in, tok, ',')) names.push_back(tok);
        }
        csv = sweep_strategy_csv(cfg, names);
    } else if (axis == "threads") {
        std::vector<int> ts = {1, 2, 4};
        if (!points.empty()) {
            ts.clear();
            std::stringstream in(points);
            std::string tok;
            while (std::getline(in, tok, ',')) ts.push_back(std::stoi(tok));
        }
        csv = sweep_threads_csv(cfg, ts);
    } else if (axis == "throttle_count") {
        const int count = max_throttled >= 0 ? max_throttled : static_cast<int>(cfg.layers.size());
        csv = sweep_throttle_csv(cfg, count);
    } else {
        throw std::invalid_argument("unknown sweep axis: " + axis);
    }

    if (out_file.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        fs::create_directories(fs::path(out_file).parent_path().empty()
                                   ? fs::path(".")
                                   : fs::path(out_file).parent_path());
        write_file(out_file, csv);
        std::printf("sweep written to %s\n", out_file.c_str());
    }
    return 0;
}

int cmd_reorder_stats(const std::vector<std::string>& sample_paths, int threads,
                      const std::string& out_stats, const std::string& out_perm) {
    std::vector<QTile> samples;
    for (const std::string& p : sample_paths)
        samples.push_back(p.ends_with(".csv") ? QTile::load_csv(p, TileKind::Activation)
                                              : QTile::load_qtile(p));
    const ColumnStats stats = gather_stats(samples);
    const std::vector<int> perm = compute_permutation(stats, threads);

    nlohmann::ordered_json j;
    j["sample_rows"] = stats.sample_rows;
    j["p_zero"] = stats.p_zero;
    j["p_fits4"] = stats.p_fits4;
    j["p_wide"] = stats.p_wide;
    const std::string stats_text = j.dump(2) + "\n";
    const std::string perm_text = permutation_to_json(perm) + "\n";

    if (out_stats.empty()) std::fputs(stats_text.c_str(), stdout);
    else write_file(out_stats, stats_text);
    if (out_perm.empty()) std::fputs(perm_text.c_str(), stdout);
    else write_file(out_perm, perm_text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NB-SMT output-stationary systolic array simulator"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run a workload and write reports");
    std::string sim_config;
    bool sim_trace = false;
    Overrides sim_ov;
    sim->add_option("--config", sim_config, "Experiment config JSON")->required();
    sim->add_flag("--trace", sim_trace, "Print per-cycle lane products (small tiles)");
    add_override_flags(sim, sim_ov);

    // verify
    auto* ver = app.add_subcommand("verify", "Run the multiplier/rounding/lowering self-checks");
    int ver_conv_cases = 50;
    std::uint64_t ver_seed = 20220426;
    ver->add_option("--conv-cases", ver_conv_cases, "Random conv specs to check");
    ver->add_option("--seed", ver_seed, "RNG seed for the lowering checks");

    // sweep
    auto* swp = app.add_subcommand("sweep", "Run a parameter sweep, emit CSV");
    std::string swp_config, swp_axis, swp_points, swp_out;
    int swp_max_throttled = -1;
    Overrides swp_ov;
    swp->add_option("--config", swp_config, "Experiment config JSON")->required();
    swp->add_option("--axis", swp_axis, "sparsity | strategy | threads | throttle_count")
        ->required();
    swp->add_option("--points", swp_points, "Comma-separated axis points");
    swp->add_option("--max-throttled", swp_max_throttled, "Throttle sweep upper bound");
    swp->add_option("--out", swp_out, "Output CSV path (stdout when omitted)");
    add_override_flags(swp, swp_ov);

    // reorder-stats
    auto* ros = app.add_subcommand("reorder-stats", "Column statistics and permutation");
    std::vector<std::string> ros_samples;
    int ros_threads = 2;
    std::string ros_stats, ros_perm;
    ros->add_option("--samples", ros_samples, "Sample activation tiles (.qtile/.csv)")->required();
    ros->add_option("--threads", ros_threads, "Thread count for the permutation");
    ros->add_option("--out-stats", ros_stats, "Stats JSON path (stdout when omitted)");
    ros->add_option("--out-perm", ros_perm, "Permutation JSON path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_config, sim_ov, sim_trace);
        if (ver->parsed()) return cmd_verify(ver_conv_cases, ver_seed);
        if (swp->parsed())
            return cmd_sweep(swp_config, swp_ov, swp_axis, swp_points, swp_max_throttled, swp_out);
        if (ros->parsed()) return cmd_reorder_stats(ros_samples, ros_threads, ros_stats, ros_perm);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
