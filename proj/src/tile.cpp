#include "sysmt/tile.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sysmt {

QTile::QTile(TileKind kind, int rows, int cols)
    : kind_(kind), rows_(rows), cols_(cols),
      data_(static_cast<size_t>(rows) * cols, 0) {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("QTile: dims must be positive");
}

QTile QTile::activations(int rows, int cols, double scale) {
    QTile t(TileKind::Activation, rows, cols);
    t.scales_ = {scale};
    return t;
}

QTile QTile::weights(int rows, int cols) {
    QTile t(TileKind::Weight, rows, cols);
    t.scales_.assign(cols, 1.0);
    return t;
}

void QTile::set(int r, int c, int level) {
    if (kind_ == TileKind::Activation) {
        if (level < 0 || level > 255) throw std::out_of_range("activation level out of [0,255]");
        data_[static_cast<size_t>(r) * cols_ + c] = static_cast<std::uint8_t>(level);
    } else {
        // -128 is reserved: symmetric quantization never emits it.
        if (level < -127 || level > 127) throw std::out_of_range("weight level out of [-127,127]");
        data_[static_cast<size_t>(r) * cols_ + c] =
            static_cast<std::uint8_t>(static_cast<wgt_t>(level));
    }
}

void QTile::set_scales(std::vector<double> s) {
    if (s.empty() || (s.size() != 1 && s.size() != static_cast<size_t>(cols_)))
        throw std::invalid_argument("QTile: scale count must be 1 or cols");
    for (double v : s)
        if (!(v > 0.0)) throw std::invalid_argument("QTile: scales must be positive");
    scales_ = std::move(s);
}

// ---------------------------------------------------------------------------
// .qtile container
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'I', 'L'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T v) {
    for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const std::string& in, size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw std::runtime_error("qtile: truncated file");
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<T>(static_cast<std::uint8_t>(in[pos + i])) << (8 * i);
    pos += sizeof(T);
    return v;
}

}  // namespace

void QTile::save_qtile(const std::string& path) const {
    std::string buf;
    buf.append(kMagic, 4);
    put_le<std::uint16_t>(buf, kVersion);
    buf.push_back(static_cast<char>(kind_));
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(rows_));
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(cols_));
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(scales_.size()));
    for (double s : scales_) {
        std::uint64_t bits;
        std::memcpy(&bits, &s, sizeof bits);
        put_le<std::uint64_t>(buf, bits);
    }
    buf.append(reinterpret_cast<const char*>(data_.data()), data_.size());

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("qtile: cannot open for write: " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("qtile: write failed: " + path);
}

QTile QTile::load_qtile(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("qtile: cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string buf = ss.str();

    size_t pos = 0;
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw std::runtime_error("qtile: bad magic: " + path);
    pos = 4;
    const auto version = get_le<std::uint16_t>(buf, pos);
    if (version != kVersion) throw std::runtime_error("qtile: unsupported version");
    const auto kind_byte = get_le<std::uint8_t>(buf, pos);
    if (kind_byte > 1) throw std::runtime_error("qtile: bad kind byte");
    const auto rows = get_le<std::uint32_t>(buf, pos);
    const auto cols = get_le<std::uint32_t>(buf, pos);
    const auto nscales = get_le<std::uint32_t>(buf, pos);
    if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24))
        throw std::runtime_error("qtile: implausible dims");

    QTile t(static_cast<TileKind>(kind_byte), static_cast<int>(rows), static_cast<int>(cols));
    std::vector<double> scales(nscales);
    for (auto& s : scales) {
        const auto bits = get_le<std::uint64_t>(buf, pos);
        std::memcpy(&s, &bits, sizeof s);
    }
    t.set_scales(std::move(scales));

    const size_t payload = static_cast<size_t>(rows) * cols;
    if (buf.size() - pos != payload) throw std::runtime_error("qtile: payload size mismatch");
    std::memcpy(t.data_.data(), buf.data() + pos, payload);

    // Validate levels against the kind's range (-128 is reserved).
    if (t.kind_ == TileKind::Weight)
        for (std::uint8_t b : t.data_)
            if (b == 0x80) throw std::runtime_error("qtile: weight level -128 is reserved");
    return t;
}

void QTile::save_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("qtile: cannot open for write: " + path);
    for (int r = 0; r < rows_; ++r) {
        for (int c = 0; c < cols_; ++c) {
            if (c) f << ',';
            f << get(r, c);
        }
        f << '\n';
    }
}

QTile QTile::load_csv(const std::string& path, TileKind kind) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("qtile: cannot open: " + path);
    std::vector<std::vector<int>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<int> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stoi(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("qtile csv: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("qtile csv: empty file");

    QTile t(kind, static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    if (kind == TileKind::Weight) t.scales_.assign(t.cols_, 1.0);
    for (int r = 0; r < t.rows_; ++r)
        for (int c = 0; c < t.cols_; ++c) t.set(r, c, rows[r][c]);
    return t;
}

// ---------------------------------------------------------------------------
// Rng — splitmix64
// ---------------------------------------------------------------------------

std::uint64_t Rng::next() {
    std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint32_t Rng::below(std::uint32_t n) {
    // Multiply-shift range reduction; bias is negligible for the small
    // ranges used here and the mapping is platform-stable.
    return static_cast<std::uint32_t>((next() >> 32) * static_cast<std::uint64_t>(n) >> 32);
}

int Rng::range(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint32_t>(hi - lo + 1)));
}

double Rng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

Rng Rng::fork(std::uint64_t stream) const {
    Rng child(s_ ^ (0xd1342543de82ef95ull * (stream + 1)));
    child.next();
    return child;
}

}  // namespace sysmt
