// tile.hpp — quantized 2-D tiles, the int32 output matrix, and the seeded RNG
// shared by the workload generators and sweep drivers.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sysmt {

using act_t = std::uint8_t;  // activation level, 0..255
using wgt_t = std::int8_t;   // weight level, -127..127 (-128 unused)
using acc_t = std::int32_t;  // partial-sum / output accumulator

// Row-major int32 matrix used for simulator outputs and references.
struct Mat32 {
    int rows = 0;
    int cols = 0;
    std::vector<acc_t> v;

    Mat32() = default;
    Mat32(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0) {}

    acc_t& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    acc_t at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    bool operator==(const Mat32&) const = default;
};

enum class TileKind : std::uint8_t { Activation = 0, Weight = 1 };

// A quantized 2-D tensor with scale metadata. Activations carry one scale
// per tile, weights one scale per output column (per kernel).
class QTile {
public:
    QTile() = default;
    QTile(TileKind kind, int rows, int cols);

    static QTile activations(int rows, int cols, double scale = 1.0);
    static QTile weights(int rows, int cols);

    TileKind kind() const { return kind_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }

    // Decoded level: 0..255 for activations, -127..127 for weights.
    int get(int r, int c) const {
        std::uint8_t b = data_[static_cast<size_t>(r) * cols_ + c];
        return kind_ == TileKind::Weight ? static_cast<int>(static_cast<wgt_t>(b))
                                         : static_cast<int>(b);
    }
    void set(int r, int c, int level);

    std::uint8_t raw(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    double scale(int col = 0) const { return scales_.size() > 1 ? scales_[col] : scales_.at(0); }
    const std::vector<double>& scales() const { return scales_; }
    void set_scales(std::vector<double> s);

    double dequant(int r, int c) const { return get(r, c) * scale(c); }

    bool operator==(const QTile&) const = default;

    // `.qtile` container: magic "QTIL", version u16, kind u8, rows u32,
    // cols u32, scale count u32, little-endian f64 scales, raw payload.
    void save_qtile(const std::string& path) const;
    static QTile load_qtile(const std::string& path);

    // Plain integer grid, one row per line, comma separated. Scales are
    // not carried; the loader leaves them at 1.
    void save_csv(const std::string& path) const;
    static QTile load_csv(const std::string& path, TileKind kind);

private:
    TileKind kind_ = TileKind::Activation;
    int rows_ = 0;
    int cols_ = 0;
    std::vector<std::uint8_t> data_;
    std::vector<double> scales_{1.0};
};

// Deterministic generator: splitmix64 core with explicit helpers so runs
// are byte-identical for a given seed on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : s_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next();
    std::uint32_t below(std::uint32_t n);          // uniform in [0, n)
    int range(int lo, int hi);                     // uniform in [lo, hi]
    double unit();                                 // uniform in [0, 1)
    Rng fork(std::uint64_t stream) const;          // child stream, decorrelated

private:
    std::uint64_t s_;
};

}  // namespace sysmt
