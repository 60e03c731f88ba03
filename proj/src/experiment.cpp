#include "sysmt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sysmt/qnum.hpp"

namespace sysmt {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

SynthSpec synth_from_json(const nlohmann::json& j) {
    SynthSpec s;
    s.m = j.value("M", 16);
    s.k = j.value("K", 64);
    s.n = j.value("N", 16);
    s.p_zero = j.value("p_zero", 0.0);
    s.p_fits4 = j.value("p_fits4", 0.0);
    s.correlation = j.value("correlation", 0.0);
    s.w_p_zero = j.value("w_p_zero", 0.0);
    s.seed = j.value("seed", 0ull);  // 0: derive from the run seed
    return s;
}

ordered_json synth_to_json(const SynthSpec& s) {
    ordered_json j;
    j["M"] = s.m;
    j["K"] = s.k;
    j["N"] = s.n;
    j["p_zero"] = s.p_zero;
    j["p_fits4"] = s.p_fits4;
    j["correlation"] = s.correlation;
    j["w_p_zero"] = s.w_p_zero;
    j["seed"] = s.seed;
    return j;
}

QTile load_tile(const std::string& path, TileKind kind) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".csv")
        return QTile::load_csv(path, kind);
    return QTile::load_qtile(path);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config: json parse error: ") + e.what());
    }

    ExperimentConfig cfg;
    for (const auto& lj : j.value("workload", nlohmann::json::array())) {
        LayerSpec l;
        l.name = lj.value("name", "");
        if (lj.contains("gen")) l.gen = synth_from_json(lj.at("gen"));
        l.x_path = lj.value("x", "");
        l.w_path = lj.value("w", "");
        cfg.layers.push_back(std::move(l));
    }
    if (j.contains("grid")) {
        cfg.grid_rows = j["grid"].value("rows", 16);
        cfg.grid_cols = j["grid"].value("cols", 16);
    }
    cfg.threads = j.value("threads", 2);
    cfg.strategy = j.value("strategy", "S+A");
    cfg.reorder = j.value("reorder", false);
    if (j.contains("layer_threads"))
        for (const auto& [key, v] : j.at("layer_threads").items())
            cfg.layer_threads[std::stoi(key)] = v.get<int>();
    cfg.power_table_path = j.value("power_table", "");
    cfg.seed = j.value("seed", 1ull);
    cfg.out_dir = j.value("out_dir", "out");
    cfg.golden_unsigned_weights = j.value("golden_unsigned_weights", false);
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json_text() const {
    ordered_json j;
    ordered_json workload = ordered_json::array();
    for (const LayerSpec& l : layers) {
        ordered_json lj;
        lj["name"] = l.name;
        if (l.gen) lj["gen"] = synth_to_json(*l.gen);
        if (!l.x_path.empty()) lj["x"] = l.x_path;
        if (!l.w_path.empty()) lj["w"] = l.w_path;
        workload.push_back(std::move(lj));
    }
    j["workload"] = std::move(workload);
    j["grid"] = {{"rows", grid_rows}, {"cols", grid_cols}};
    j["threads"] = threads;
    j["strategy"] = strategy;
    j["reorder"] = reorder;
    ordered_json lt;
    for (const auto& [idx, t] : layer_threads) lt[std::to_string(idx)] = t;
    j["layer_threads"] = std::move(lt);
    j["power_table"] = power_table_path;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["golden_unsigned_weights"] = golden_unsigned_weights;
    return j.dump(2) + "\n";
}

void ExperimentConfig::validate() const {
    if (layers.empty()) throw std::invalid_argument("config: workload has no layers");
    for (const LayerSpec& l : layers) {
        const bool files = !l.x_path.empty() && !l.w_path.empty();
        if (files == l.gen.has_value())
            throw std::invalid_argument("config: each layer needs either x/w files or a gen spec");
    }
    if (threads != 1 && threads != 2 && threads != 4)
        throw std::invalid_argument("config: threads must be 1, 2 or 4");
    for (const auto& [idx, t] : layer_threads) {
        if (idx < 0 || idx >= static_cast<int>(layers.size()))
            throw std::invalid_argument("config: layer_threads index out of range");
        if (t != 1 && t != 2 && t != 4)
            throw std::invalid_argument("config: layer_threads values must be 1, 2 or 4");
    }
    if (grid_rows <= 0 || grid_cols <= 0) throw std::invalid_argument("config: bad grid dims");
    Strategy::parse(strategy);  // throws on unknown names
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

namespace {

struct LoadedLayer {
    std::string name;
    QTile x;
    QTile w;
};

LoadedLayer load_layer(const ExperimentConfig& cfg, int index) {
    const LayerSpec& spec = cfg.layers[index];
    LoadedLayer out;
    out.name = spec.name.empty() ? "layer" + std::to_string(index) : spec.name;
    if (spec.gen) {
        SynthSpec g = *spec.gen;
        if (g.seed == 0) g.seed = Rng(cfg.seed).fork(index + 1).next();
        SynthTiles tiles = gen_synthetic(g);
        out.x = std::move(tiles.x);
        out.w = std::move(tiles.w);
    } else {
        out.x = load_tile(spec.x_path, TileKind::Activation);
        out.w = load_tile(spec.w_path, TileKind::Weight);
        if (out.x.kind() != TileKind::Activation || out.w.kind() != TileKind::Weight)
            throw std::runtime_error("config: tile kinds do not match their roles");
    }
    return out;
}

PowerTable load_power_table(const ExperimentConfig& cfg) {
    if (cfg.power_table_path.empty()) return PowerTable::defaults();
    std::ifstream f(cfg.power_table_path);
    if (!f) throw std::runtime_error("config: cannot open power table: " + cfg.power_table_path);
    std::stringstream ss;
    ss << f.rdbuf();
    return PowerTable::from_json(ss.str());
}

LayerResult run_layer(const ExperimentConfig& cfg, const PowerTable& power, int index) {
    LoadedLayer layer = load_layer(cfg, index);
    const int threads = cfg.layer_threads.count(index) ? cfg.layer_threads.at(index) : cfg.threads;

    Strategy strat = Strategy::parse(cfg.strategy);
    strat.unsigned_weights = cfg.golden_unsigned_weights;

    LayerResult res;
    res.name = layer.name;
    res.m = layer.x.rows();
    res.k = layer.x.cols();
    res.n = layer.w.cols();
    res.threads = threads;
    res.macs = static_cast<std::uint64_t>(res.m) * res.k * res.n;

    if (cfg.reorder && threads > 1) {
        const QTile samples[] = {layer.x};
        const ColumnStats stats = gather_stats(samples);
        res.permutation = compute_permutation(stats, threads);
        auto [xp, wp] = apply_permutation(layer.x, layer.w, res.permutation);
        layer.x = std::move(xp);
        layer.w = std::move(wp);
    }

    const Mat32 ref = reference_matmul(layer.x, layer.w, cfg.golden_unsigned_weights);

    GridConfig base_cfg{cfg.grid_rows, cfg.grid_cols, 1, strat, false};
    GridConfig smt_cfg{cfg.grid_rows, cfg.grid_cols, threads, strat, false};
    const SimResult base = simulate(layer.x, layer.w, base_cfg);
    const SimResult smt = simulate(layer.x, layer.w, smt_cfg);

    res.cycles_total = smt.trace.total_cycles;
    res.cycles_steady = smt.trace.steady_cycles;
    res.baseline_cycles_total = base.trace.total_cycles;
    res.baseline_cycles_steady = base.trace.steady_cycles;
    res.utilization = smt.trace.utilization();
    res.baseline_utilization = base.trace.utilization();
    res.util_gain = measured_util_gain(base.trace, smt.trace);
    res.mac_breakdown = classify_tile_macs(layer.x, layer.w);
    res.class_count = smt.trace.class_count;
    res.rounded_terms = smt.trace.rounded_terms;
    res.mse = mse(smt.out, ref, layer.x.scale(), layer.w.scales());
    res.speedup = speedup(base.trace, smt.trace);

    const LayerEnergyInput smt_e{res.name, res.macs, threads, res.utilization};
    const LayerEnergyInput base_e{res.name, res.macs, 1, res.baseline_utilization};
    res.energy_mj = energy(std::span(&smt_e, 1), power).total_mj;
    res.baseline_energy_mj = energy(std::span(&base_e, 1), power).total_mj;
    return res;
}

void append_double(ordered_json& j, const char* key, double v) {
    // normalize negative zero so reports are byte-stable
    j[key] = v == 0.0 ? 0.0 : v;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const PowerTable power = load_power_table(cfg);

    RunReport report;
    report.config = cfg;

    std::uint64_t base_steady = 0, base_total = 0, smt_steady = 0, smt_total = 0;
    for (int i = 0; i < static_cast<int>(cfg.layers.size()); ++i) {
        LayerResult layer = run_layer(cfg, power, i);
        report.total_mse += layer.mse;
        report.total_energy_mj += layer.energy_mj;
        report.baseline_energy_mj += layer.baseline_energy_mj;
        base_steady += layer.baseline_cycles_steady;
        base_total += layer.baseline_cycles_total;
        smt_steady += layer.cycles_steady;
        smt_total += layer.cycles_total;
        report.layers.push_back(std::move(layer));
    }
    report.network_speedup.steady =
        smt_steady ? static_cast<double>(base_steady) / smt_steady : 1.0;
    report.network_speedup.total = smt_total ? static_cast<double>(base_total) / smt_total : 1.0;
    return report;
}

std::string RunReport::to_json_text() const {
    ordered_json j;
    j["config"] = ordered_json::parse(config.to_json_text());
    ordered_json layers_json = ordered_json::array();
    for (const LayerResult& l : layers) {
        ordered_json lj;
        lj["name"] = l.name;
        lj["M"] = l.m;
        lj["K"] = l.k;
        lj["N"] = l.n;
        lj["threads"] = l.threads;
        lj["macs"] = l.macs;
        lj["cycles_total"] = l.cycles_total;
        lj["cycles_steady"] = l.cycles_steady;
        lj["baseline_cycles_total"] = l.baseline_cycles_total;
        lj["baseline_cycles_steady"] = l.baseline_cycles_steady;
        append_double(lj, "utilization", l.utilization);
        append_double(lj, "baseline_utilization", l.baseline_utilization);
        append_double(lj, "util_gain", l.util_gain);
        lj["mac_breakdown"] = {{"full", l.mac_breakdown.full},
                               {"partial", l.mac_breakdown.partial},
                               {"idle", l.mac_breakdown.idle}};
        lj["cycle_classes"] = {{"noop", l.class_count[0]},
                               {"single_active", l.class_count[1]},
                               {"squeeze_exact", l.class_count[2]},
                               {"squeeze_lossy", l.class_count[3]}};
        lj["rounded_terms"] = l.rounded_terms;
        append_double(lj, "mse", l.mse);
        append_double(lj, "energy_mj", l.energy_mj);
        append_double(lj, "baseline_energy_mj", l.baseline_energy_mj);
        append_double(lj, "speedup_steady", l.speedup.steady);
        append_double(lj, "speedup_total", l.speedup.total);
        if (!l.permutation.empty()) lj["permutation"] = l.permutation;
        layers_json.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers_json);
    append_double(j, "total_mse", total_mse);
    append_double(j, "total_energy_mj", total_energy_mj);
    append_double(j, "baseline_energy_mj", baseline_energy_mj);
    append_double(j, "network_speedup_steady", network_speedup.steady);
    append_double(j, "network_speedup_total", network_speedup.total);
    return j.dump(2) + "\n";
}

std::string RunReport::to_csv_text() const {
    std::string out =
        "layer,M,K,N,threads,macs,cycles_total,cycles_steady,utilization,util_gain,"
        "mac_full,mac_partial,mac_idle,noop,single_active,squeeze_exact,squeeze_lossy,"
        "rounded_terms,mse,energy_mj,speedup_steady,speedup_total\n";
    char buf[512];
    for (const LayerResult& l : layers) {
        std::snprintf(buf, sizeof buf,
                      "%s,%d,%d,%d,%d,%llu,%llu,%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%llu,%llu,%llu,"
                      "%llu,%llu,%.9g,%.9g,%.9g,%.9g\n",
                      l.name.c_str(), l.m, l.k, l.n, l.threads,
                      static_cast<unsigned long long>(l.macs),
                      static_cast<unsigned long long>(l.cycles_total),
                      static_cast<unsigned long long>(l.cycles_steady), l.utilization, l.util_gain,
                      l.mac_breakdown.full, l.mac_breakdown.partial, l.mac_breakdown.idle,
                      static_cast<unsigned long long>(l.class_count[0]),
                      static_cast<unsigned long long>(l.class_count[1]),
                      static_cast<unsigned long long>(l.class_count[2]),
                      static_cast<unsigned long long>(l.class_count[3]),
                      static_cast<unsigned long long>(l.rounded_terms), l.mse, l.energy_mj,
                      l.speedup.steady, l.speedup.total);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

namespace {

// The sparsity axis regenerates the first generated layer with p_zero = s,
// scaling the 4-bit share into the remaining probability mass.
SynthSpec sparsity_point(const ExperimentConfig& cfg, double s) {
    SynthSpec base;
    for (const LayerSpec& l : cfg.layers)
        if (l.gen) {
            base = *l.gen;
            break;
        }
    const double nz = 1.0 - base.p_zero;
    const double fits_share = nz > 0.0 ? base.p_fits4 / nz : 0.3;
    SynthSpec point = base;
    point.p_zero = s;
    point.p_fits4 = (1.0 - s) * fits_share;
    if (point.seed == 0) point.seed = Rng(cfg.seed).fork(101).next();
    return point;
}

}  // namespace

std::string sweep_sparsity_csv(const ExperimentConfig& cfg,
                               const std::vector<double>& sparsities) {
    std::string out = "s_requested,s_measured,util_gain_measured,util_gain_model,mse\n";
    char buf[256];
    for (double s : sparsities) {
        ExperimentConfig point = cfg;
        point.layers.clear();
        LayerSpec l;
        l.name = "sweep";
        l.gen = sparsity_point(cfg, s);
        point.layers.push_back(std::move(l));
        const RunReport report = run_experiment(point);
        const LayerResult& r = report.layers.front();
        const double s_measured = 1.0 - r.baseline_utilization;
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g\n", s, s_measured, r.util_gain,
                      util_gain_model(s_measured, r.threads), r.mse);
        out += buf;
    }
    return out;
}

std::string sweep_strategy_csv(const ExperimentConfig& cfg,
                               const std::vector<std::string>& strategies) {
    std::string out = "strategy,total_mse,mean_util_gain,rounded_terms,lossy_fraction\n";
    char buf[256];
    for (const std::string& name : strategies) {
        ExperimentConfig point = cfg;
        point.strategy = name;
        const RunReport report = run_experiment(point);
        double gain = 0.0;
        std::uint64_t rounded = 0, lossy = 0, window = 0;
        for (const LayerResult& l : report.layers) {
            gain += l.util_gain;
            rounded += l.rounded_terms;
            lossy += l.class_count[3];
            for (std::uint64_t c : l.class_count) window += c;  // PE-cycles
        }
        gain /= static_cast<double>(report.layers.size());
        std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%llu,%.9g\n", name.c_str(), report.total_mse,
                      gain, static_cast<unsigned long long>(rounded),
                      window ? static_cast<double>(lossy) / window : 0.0);
        out += buf;
    }
    return out;
}

std::string sweep_threads_csv(const ExperimentConfig& cfg, const std::vector<int>& threads) {
    std::string out =
        "threads,cycles_total,cycles_steady,speedup_steady,speedup_total,total_mse,total_energy_mj\n";
    char buf[256];
    for (int t : threads) {
        ExperimentConfig point = cfg;
        point.threads = t;
        point.layer_threads.clear();
        const RunReport report = run_experiment(point);
        std::uint64_t total = 0, steady = 0;
        for (const LayerResult& l : report.layers) {
            total += l.cycles_total;
            steady += l.cycles_steady;
        }
        std::snprintf(buf, sizeof buf, "%d,%llu,%llu,%.9g,%.9g,%.9g,%.9g\n", t,
                      static_cast<unsigned long long>(total),
                      static_cast<unsigned long long>(steady), report.network_speedup.steady,
                      report.network_speedup.total, report.total_mse, report.total_energy_mj);
        out += buf;
    }
    return out;
}

std::string sweep_throttle_csv(const ExperimentConfig& cfg, int max_throttled) {
    if (max_throttled < 0 || max_throttled > static_cast<int>(cfg.layers.size()))
        throw std::invalid_argument("sweep_throttle: count out of range");

    // Profile once at the configured thread count, then slow down the top-k
    // MSE layers to half the threads.
    ExperimentConfig profile = cfg;
    profile.layer_threads.clear();
    const RunReport base = run_experiment(profile);
    std::vector<double> mses;
    for (const LayerResult& l : base.layers) mses.push_back(l.mse);

    const int slow = std::max(1, cfg.threads / 2);
    std::string out = "throttled,speedup_steady,speedup_total,total_mse,layers\n";
    char buf[256];
    for (int count = 0; count <= max_throttled; ++count) {
        ExperimentConfig point = cfg;
        point.layer_threads.clear();
        const std::vector<int> chosen = select_throttled_layers(mses, count);
        std::string names;
        for (int idx : chosen) {
            point.layer_threads[idx] = slow;
            if (!names.empty()) names += ';';
            names += std::to_string(idx);
        }
        const RunReport report = run_experiment(point);
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%s\n", count,
                      report.network_speedup.steady, report.network_speedup.total,
                      report.total_mse, names.c_str());
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Self-verification
// ---------------------------------------------------------------------------

namespace {

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

}  // namespace

VerifyOutcome run_verification(int conv_cases, std::uint64_t seed) {
    VerifyOutcome out;

    // Exhaustive fMUL recomposition, both decompositions, all 2^16 pairs.
    std::uint64_t checked = 0;
    for (int x = 0; x <= 255 && out.failures.size() < 8; ++x) {
        for (int ws = -128; ws <= 127; ++ws) {
            const acc_t exact = static_cast<acc_t>(x) * ws;
            const auto l2 = one8x8_lanes_2t(static_cast<act_t>(x), ws);
            const auto p2 = fmul_2t(l2[0], l2[1], FMulMode::One8x8);
            if (p2[0] + p2[1] != exact) {
                out.failures.push_back(
                    fmt("fmul_2t one8x8 mismatch at x=%d w=%d: %d != %d", x, ws, p2[0] + p2[1],
                        exact));
                break;
            }
            const auto l4 = one8x8_lanes_4t(static_cast<act_t>(x), static_cast<wgt_t>(ws), false);
            const auto p4 = fmul_4t(l4, FMulMode::One8x8);
            if (p4[0] + p4[1] + p4[2] + p4[3] != exact) {
                out.failures.push_back(
                    fmt("fmul_4t one8x8 mismatch at x=%d w=%d", x, ws));
                break;
            }
            ++checked;
        }
    }
    out.checks.push_back(fmt("fmul recomposition: %llu/65536 operand pairs exact",
                             static_cast<unsigned long long>(checked)));

    // Rounding rule over all 512 inputs: multiple-of-16 fixpoints, error
    // bounds, and the worked tie/saturation cases.
    int round_checked = 0;
    for (int sign = 0; sign < 2; ++sign) {
        const bool is_signed = sign == 1;
        const int lo = is_signed ? -128 : 0;
        const int hi = is_signed ? 127 : 255;
        for (int v = lo; v <= hi; ++v) {
            const Nibble n = reduce_to_msb_nibble(v, is_signed);
            const int err = std::abs(n.reconstruct() - v);
            const int bound = n.saturated ? 15 : 8;
            if (err > bound) {
                out.failures.push_back(
                    fmt("rounding bound violated at v=%d signed=%d: |%d - %d| > %d", v, sign,
                        n.reconstruct(), v, bound));
            } else if (v % 16 == 0 && n.reconstruct() != v) {
                out.failures.push_back(fmt("rounding not idempotent at v=%d signed=%d", v, sign));
            } else {
                ++round_checked;
            }
        }
    }
    const std::pair<int, int> worked[] = {{59, 64}, {-59, -64}, {56, 64}, {-56, -48}};
    for (auto [v, expect] : worked) {
        const Nibble n = reduce_to_msb_nibble(v, v < 0);
        if (n.reconstruct() != expect)
            out.failures.push_back(fmt("rounding worked example %d -> %d, got %d", v, expect,
                                       n.reconstruct()));
    }
    out.checks.push_back(fmt("rounding rule: %d/512 inputs within bounds", round_checked));

    // Conv lowering: im2col matmul vs. direct convolution, bit exact.
    Rng rng(seed);
    int conv_ok = 0;
    for (int t = 0; t < conv_cases; ++t) {
        ConvSpec spec;
        spec.in_c = rng.range(1, 3);
        spec.kh = rng.range(1, 3);
        spec.kw = rng.range(1, 3);
        spec.stride = rng.range(1, 2);
        spec.pad = rng.range(0, 2);
        spec.in_h = rng.range(spec.kh, 9);
        spec.in_w = rng.range(spec.kw, 9);
        spec.out_c = rng.range(1, 4);

        std::vector<act_t> act(spec.act_size());
        std::vector<wgt_t> wv(spec.wgt_size());
        for (auto& a : act) a = static_cast<act_t>(rng.below(2) ? rng.below(256) : 0);
        for (auto& w : wv) w = static_cast<wgt_t>(rng.range(-127, 127));

        const QTile xm = im2col(act, spec);
        const QTile wm = weights_to_matrix(wv, spec);
        const Mat32 lowered = reference_matmul(xm, wm);
        const Mat32 direct = direct_conv(act, wv, spec);
        if (lowered == direct) {
            ++conv_ok;
        } else {
            out.failures.push_back(
                fmt("conv lowering mismatch: C=%d HxW=%dx%d F=%d k=%dx%d s=%d p=%d", spec.in_c,
                    spec.in_h, spec.in_w, spec.out_c, spec.kh, spec.kw, spec.stride, spec.pad));
        }
    }
    out.checks.push_back(fmt("conv lowering: %d/%d random specs bit-exact", conv_ok, conv_cases));

    out.ok = out.failures.empty();
    return out;
}

}  // namespace sysmt
