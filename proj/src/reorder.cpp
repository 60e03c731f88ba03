#include "sysmt/reorder.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace sysmt {

ColumnStats gather_stats(std::span<const QTile> samples) {
    if (samples.empty()) throw std::invalid_argument("gather_stats: empty sample set");
    const int k = samples.front().cols();
    for (const QTile& t : samples) {
        if (t.kind() != TileKind::Activation)
            throw std::invalid_argument("gather_stats: samples must be activation tiles");
        if (t.cols() != k) throw std::invalid_argument("gather_stats: inconsistent K across samples");
    }

    ColumnStats stats;
    stats.p_zero.assign(k, 0.0);
    stats.p_fits4.assign(k, 0.0);
    stats.p_wide.assign(k, 0.0);
    for (const QTile& t : samples) {
        for (int r = 0; r < t.rows(); ++r)
            for (int c = 0; c < k; ++c) {
                const int v = t.get(r, c);
                if (v == 0) stats.p_zero[c] += 1.0;
                else if (v <= 15) stats.p_fits4[c] += 1.0;
                else stats.p_wide[c] += 1.0;
            }
        stats.sample_rows += t.rows();
    }
    for (int c = 0; c < k; ++c) {
        stats.p_zero[c] /= static_cast<double>(stats.sample_rows);
        stats.p_fits4[c] /= static_cast<double>(stats.sample_rows);
        stats.p_wide[c] /= static_cast<double>(stats.sample_rows);
    }
    return stats;
}

std::vector<int> compute_permutation(const ColumnStats& stats, int threads,
                                     const ScoreWeights& weights) {
    const int k = stats.k();
    if (k <= 0) throw std::invalid_argument("compute_permutation: empty stats");
    if (threads < 1 || k < threads) throw std::invalid_argument("compute_permutation: K < threads");

    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    if (threads == 1) return perm;

    std::vector<double> score(k);
    for (int c = 0; c < k; ++c)
        score[c] = weights.wide * stats.p_wide[c] + weights.fits4 * stats.p_fits4[c] +
                   weights.zero * stats.p_zero[c];

    const auto [lo, hi] = std::minmax_element(score.begin(), score.end());
    if (*hi - *lo < 1e-12) return perm;  // uniform stats: keep the identity

    // Columns by descending score, ties toward the lower index.
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return score[a] > score[b]; });

    // Serpentine rank layout over the thread blocks of the contiguous K
    // split: even blocks take their rank chunk ascending, odd blocks
    // descending, so stream position j pairs top ranks with bottom ranks
    // and mid ranks with each other.
    const int per_thread = (k + threads - 1) / threads;
    int rank_start = 0;
    for (int t = 0; t < threads; ++t) {
        const int begin = t * per_thread;
        const int len = std::max(0, std::min(per_thread, k - begin));
        for (int j = 0; j < len; ++j) {
            const int rank = (t % 2 == 0) ? rank_start + j : rank_start + len - 1 - j;
            perm[begin + j] = order[rank];
        }
        rank_start += len;
    }
    return perm;
}

std::pair<QTile, QTile> apply_permutation(const QTile& x, const QTile& w,
                                          std::span<const int> perm) {
    const int k = x.cols();
    if (w.rows() != k) throw std::invalid_argument("apply_permutation: X cols != W rows");
    if (static_cast<int>(perm.size()) != k)
        throw std::invalid_argument("apply_permutation: permutation length mismatch");
    std::vector<bool> seen(k, false);
    for (int p : perm) {
        if (p < 0 || p >= k || seen[p])
            throw std::invalid_argument("apply_permutation: not a bijection");
        seen[p] = true;
    }

    QTile xp = x, wp = w;
    for (int p = 0; p < k; ++p) {
        const int src = perm[p];
        for (int r = 0; r < x.rows(); ++r) xp.set(r, p, x.get(r, src));
        for (int c = 0; c < w.cols(); ++c) wp.set(p, c, w.get(src, c));
    }
    return {std::move(xp), std::move(wp)};
}

std::string permutation_to_json(std::span<const int> perm) {
    nlohmann::json j = std::vector<int>(perm.begin(), perm.end());
    return j.dump();
}

std::vector<int> permutation_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw std::invalid_argument("permutation json: expected an array");
    return j.get<std::vector<int>>();
}

}  // namespace sysmt
