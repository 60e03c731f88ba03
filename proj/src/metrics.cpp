#include "sysmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "sysmt/qnum.hpp"

namespace sysmt {

MacClass classify_mac(act_t x, wgt_t w) {
    if (x == 0 || w == 0) return MacClass::Idle;
    const bool x_fits = effective_width(x, false) == Width::Fits4;
    const bool w_fits = effective_width(w, true) == Width::Fits4;
    return (x_fits || w_fits) ? MacClass::Partial : MacClass::Full;
}

UtilBreakdown classify_tile_macs(const QTile& x, const QTile& w) {
    if (x.cols() != w.rows()) throw std::invalid_argument("classify_tile_macs: dim mismatch");
    const int m = x.rows(), k = x.cols(), n = w.cols();

    // Per-k column/row tallies instead of the full M*K*N sweep.
    std::uint64_t idle = 0, full = 0;
    for (int i = 0; i < k; ++i) {
        std::uint64_t zx = 0, widex = 0;
        for (int r = 0; r < m; ++r) {
            const int v = x.get(r, i);
            if (v == 0) ++zx;
            else if (v > 15) ++widex;
        }
        std::uint64_t zw = 0, widew = 0;
        for (int c = 0; c < n; ++c) {
            const int v = w.get(i, c);
            if (v == 0) ++zw;
            else if (v < -8 || v > 7) ++widew;
        }
        idle += zx * n + (m - zx) * zw;
        full += widex * widew;
    }
    const double total = static_cast<double>(m) * k * n;
    UtilBreakdown b;
    b.idle = idle / total;
    b.full = full / total;
    b.partial = 1.0 - b.idle - b.full;
    return b;
}

double util_gain_model(double s, int threads) {
    if (s < 0.0 || s > 1.0) throw std::invalid_argument("util_gain_model: s must be in [0,1]");
    if (threads <= 1) return 1.0;
    if (s == 0.0) return 1.0;
    if (s == 1.0) return static_cast<double>(threads);  // limit of (1 - s^T) / (1 - s)
    return (1.0 - std::pow(s, threads)) / (1.0 - s);
}

double measured_util_gain(const CycleTrace& baseline, const CycleTrace& smt) {
    const double b = baseline.utilization();
    const double t = smt.utilization();
    if (b == 0.0) return t == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return t / b;
}

double mse(const Mat32& out, const Mat32& ref, double act_scale,
           std::span<const double> wgt_scales) {
    if (out.rows != ref.rows || out.cols != ref.cols)
        throw std::invalid_argument("mse: shape mismatch");
    if (!wgt_scales.empty() && wgt_scales.size() != 1 &&
        wgt_scales.size() != static_cast<size_t>(out.cols))
        throw std::invalid_argument("mse: weight scale count mismatch");

    double sum = 0.0;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) {
            const double ws =
                wgt_scales.empty() ? 1.0 : wgt_scales[wgt_scales.size() == 1 ? 0 : c];
            const double d = (out.at(r, c) - ref.at(r, c)) * act_scale * ws;
            sum += d * d;
        }
    return sum / (static_cast<double>(out.rows) * out.cols);
}

// ---------------------------------------------------------------------------
// Power and energy
// ---------------------------------------------------------------------------

PowerTable PowerTable::defaults() {
    PowerTable t;
    t.set_points(1, {{0.4, 277.0}, {0.8, 320.0}});
    t.set_points(2, {{0.8, 429.0}});
    t.set_points(4, {{0.8, 723.0}});
    return t;
}

void PowerTable::set_points(int threads, std::vector<Point> pts) {
    if (pts.empty()) throw std::invalid_argument("power table: empty point set");
    for (const Point& p : pts)
        if (!(p.util > 0.0) || p.util > 1.0 || !(p.mw > 0.0))
            throw std::invalid_argument("power table: entries must have util in (0,1] and mw > 0");
    for (size_t i = 1; i < pts.size(); ++i)
        if (pts[i].util <= pts[i - 1].util || pts[i].mw < pts[i - 1].mw)
            throw std::invalid_argument("power table: points must be increasing and monotone");
    for (auto& [t, v] : tables_)
        if (t == threads) {
            v = std::move(pts);
            return;
        }
    tables_.emplace_back(threads, std::move(pts));
}

double PowerTable::lookup_mw(int threads, double util) const {
    const std::vector<Point>* pts = nullptr;
    for (const auto& [t, v] : tables_)
        if (t == threads) pts = &v;
    if (!pts) throw std::invalid_argument("power table: no entry for thread count");

    // Clamp outside the tabulated range, interpolate linearly inside.
    if (util <= pts->front().util) return pts->front().mw;
    if (util >= pts->back().util) return pts->back().mw;
    for (size_t i = 1; i < pts->size(); ++i) {
        if (util <= (*pts)[i].util) {
            const Point& a = (*pts)[i - 1];
            const Point& b = (*pts)[i];
            const double f = (util - a.util) / (b.util - a.util);
            return a.mw + f * (b.mw - a.mw);
        }
    }
    return pts->back().mw;
}

PowerTable PowerTable::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    PowerTable t;
    for (const auto& [key, arr] : j.items()) {
        std::vector<Point> pts;
        for (const auto& p : arr) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        t.set_points(std::stoi(key), std::move(pts));
    }
    return t;
}

std::string PowerTable::to_json() const {
    nlohmann::ordered_json j;
    auto sorted = tables_;
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.first < b.first; });
    for (const auto& [threads, pts] : sorted) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const Point& p : pts) arr.push_back({p.util, p.mw});
        j[std::to_string(threads)] = arr;
    }
    return j.dump();
}

double throughput_macs(int threads) { return 256e9 * threads; }

EnergyReport energy(std::span<const LayerEnergyInput> layers, const PowerTable& table) {
    EnergyReport report;
    for (const LayerEnergyInput& l : layers) {
        EnergyReport::Layer out;
        out.name = l.name;
        out.power_mw = table.lookup_mw(l.threads, l.utilization);
        out.time_s = static_cast<double>(l.macs) / throughput_macs(l.threads);
        out.e_mj = out.time_s * out.power_mw;  // s * mW = mJ
        report.total_mj += out.e_mj;
        report.layers.push_back(std::move(out));
    }
    return report;
}

std::vector<int> select_throttled_layers(std::span<const double> layer_mse, int count) {
    if (count < 0 || count > static_cast<int>(layer_mse.size()))
        throw std::invalid_argument("select_throttled_layers: count out of range");
    std::vector<int> idx(layer_mse.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Highest MSE first; equal MSEs slow down the earliest layers first.
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return layer_mse[a] > layer_mse[b]; });
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace sysmt
