// reorder.hpp — offline statistics over sample activation tiles and the
// column permutation that pairs wide columns with sparse ones across thread
// blocks (4-bit columns land opposite each other). Applying the permutation
// to X columns and the matching W rows leaves the product unchanged.
#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sysmt/tile.hpp"

namespace sysmt {

struct ColumnStats {
    std::vector<double> p_zero;   // fraction of zero entries
    std::vector<double> p_fits4;  // fraction in [1, 15]
    std::vector<double> p_wide;   // fraction >= 16
    std::uint64_t sample_rows = 0;

    int k() const { return static_cast<int>(p_zero.size()); }
};

// Column score used to rank columns before striping. Defaults order wide
// columns first and zero-heavy columns last; the exact weighting is open in
// the underlying scheme so it stays configurable.
struct ScoreWeights {
    double wide = 1.0;
    double fits4 = 0.0;
    double zero = -1.0;
};

// Empirical per-column frequencies over one or more sample tiles with a
// consistent K. Throws on an empty sample set or mismatched widths.
ColumnStats gather_stats(std::span<const QTile> samples);

// Deterministic rank-striping permutation: sort columns by score, then lay
// ranks serpentine across the T thread blocks so stream position j pairs
// top ranks with bottom ranks (and mid ranks with each other). Uniform
// stats yield the identity. perm[p] is the source column of new position p.
std::vector<int> compute_permutation(const ColumnStats& stats, int threads,
                                     const ScoreWeights& weights = {});

// Permute X columns and W rows consistently. Throws on length mismatch or a
// non-bijective mapping.
std::pair<QTile, QTile> apply_permutation(const QTile& x, const QTile& w,
                                          std::span<const int> perm);

// JSON array serialization for reproducibility.
std::string permutation_to_json(std::span<const int> perm);
std::vector<int> permutation_from_json(const std::string& text);

}  // namespace sysmt
