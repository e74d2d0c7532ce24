#include "clasp/voxel_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

namespace clasp {

namespace {

constexpr char kMagic[4] = {'C', 'V', 'G', 'R'};
constexpr std::uint16_t kVersion = 1;
constexpr int kBruteForceCutoff = 16 * 16 * 16;

void requireSameDims(const VoxelGrid &a, const VoxelGrid &b, const char *op) {
    if (a.dims() != b.dims()) {
        throw DimensionMismatch(std::string(op) + ": grid dimensions differ");
    }
}

template <typename Op>
VoxelGrid combine(const VoxelGrid &a, const VoxelGrid &b, const char *name, Op op) {
    requireSameDims(a, b, name);
    VoxelGrid out(a.dims(), a.voxelSize(), a.origin());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (op(a.occupied(i), b.occupied(i))) out.setFlat(i, 1.0);
    }
    return out;
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), in place on one
// line of `n` samples spaced by `stride`.
void edt1d(double *f, int n, std::size_t stride, std::vector<double> &d, std::vector<int> &v,
           std::vector<double> &z) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    d.resize(n);
    v.resize(n);
    z.resize(n + 1);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        const double fq = f[q * stride];
        if (!std::isfinite(fq)) continue;
        double s = -kInf;
        while (k >= 0) {
            const int p = v[k];
            s = ((fq + double(q) * q) - (f[p * stride] + double(p) * p)) / (2.0 * (q - p));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -kInf : s;
        z[k + 1] = kInf;
    }
    if (k < 0) return;
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double diff = q - v[j];
        d[q] = diff * diff + f[v[j] * stride];
    }
    for (int q = 0; q < n; ++q) f[q * stride] = d[q];
}

void putBytes(std::vector<std::uint8_t> &out, const void *src, std::size_t n) {
    const auto *p = static_cast<const std::uint8_t *>(src);
    if constexpr (std::endian::native == std::endian::little) {
        out.insert(out.end(), p, p + n);
    } else {
        for (std::size_t i = 0; i < n; ++i) out.push_back(p[n - 1 - i]);
    }
}

template <typename T>
void put(std::vector<std::uint8_t> &out, T value) {
    putBytes(out, &value, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char *what) {
        if (pos_ + sizeof(T) > bytes_.size()) {
            throw FormatError(std::string("truncated grid data while reading ") + what);
        }
        T value;
        auto *dst = reinterpret_cast<std::uint8_t *>(&value);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(dst, bytes_.data() + pos_, sizeof(T));
        } else {
            for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = bytes_[pos_ + sizeof(T) - 1 - i];
        }
        pos_ += sizeof(T);
        return value;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

VoxelGrid::VoxelGrid(Index3 dims, double voxel_size, Vec3 origin, double fill)
    : dims_(dims), voxel_size_(voxel_size), origin_(origin) {
    if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) {
        throw GridError("grid dimensions must be positive");
    }
    if (!(voxel_size > 0.0)) throw GridError("voxel size must be positive");
    if (!(fill >= 0.0 && fill <= 1.0)) throw GridError("fill value outside [0, 1]");
    values_.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], fill);
}

Index3 VoxelGrid::coord(std::size_t flat) const {
    const auto nx = static_cast<std::size_t>(dims_[0]);
    const auto ny = static_cast<std::size_t>(dims_[1]);
    return {static_cast<int>(flat % nx), static_cast<int>((flat / nx) % ny),
            static_cast<int>(flat / (nx * ny))};
}

void VoxelGrid::set(int x, int y, int z, double v) {
    if (!inBounds(x, y, z)) throw GridError("voxel index out of bounds");
    setFlat(index(x, y, z), v);
}

void VoxelGrid::setFlat(std::size_t flat, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw GridError("voxel value outside [0, 1]");
    values_[flat] = v;
}

bool VoxelGrid::isBinary() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::size_t VoxelGrid::occupiedCount() const {
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [](double v) { return v > 0.5; }));
}

std::vector<std::size_t> VoxelGrid::occupiedIndices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (values_[i] > 0.5) out.push_back(i);
    }
    return out;
}

bool VoxelGrid::sameGeometry(const VoxelGrid &other) const {
    return dims_ == other.dims_ && voxel_size_ == other.voxel_size_ && origin_ == other.origin_;
}

Vec3 VoxelGrid::center(const Index3 &i) const {
    return {origin_[0] + (i[0] + 0.5) * voxel_size_, origin_[1] + (i[1] + 0.5) * voxel_size_,
            origin_[2] + (i[2] + 0.5) * voxel_size_};
}

VoxelGrid threshold(const VoxelGrid &grid, double t) {
    VoxelGrid out(grid.dims(), grid.voxelSize(), grid.origin());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] > t) out.setFlat(i, 1.0);
    }
    return out;
}

std::size_t overlapCount(const VoxelGrid &a, const VoxelGrid &b) {
    requireSameDims(a, b, "overlapCount");
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.occupied(i) && b.occupied(i)) ++n;
    }
    return n;
}

VoxelGrid setDifference(const VoxelGrid &a, const VoxelGrid &b) {
    return combine(a, b, "setDifference", [](bool x, bool y) { return x && !y; });
}

VoxelGrid setUnion(const VoxelGrid &a, const VoxelGrid &b) {
    return combine(a, b, "setUnion", [](bool x, bool y) { return x || y; });
}

VoxelGrid setIntersection(const VoxelGrid &a, const VoxelGrid &b) {
    return combine(a, b, "setIntersection", [](bool x, bool y) { return x && y; });
}

VoxelGrid resample(const VoxelGrid &src, const GridTransform &t, Index3 dims) {
    const double vs = src.voxelSize();
    const Vec3 origin{src.origin()[0] - vs * t.translation[0], src.origin()[1] - vs * t.translation[1],
                      src.origin()[2] - vs * t.translation[2]};
    VoxelGrid out(dims, vs, origin);
    for (std::size_t flat : src.occupiedIndices()) {
        const Index3 dst = t.apply(src.coord(flat));
        if (out.inBounds(dst)) out.set(dst, 1.0);
    }
    return out;
}

std::vector<double> squaredDistanceTransform(const VoxelGrid &grid) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    const auto [nx, ny, nz] = grid.dims();
    std::vector<double> f(grid.size(), kInf);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.occupied(i)) f[i] = 0.0;
    }
    std::vector<double> d;
    std::vector<int> v;
    std::vector<double> z;
    const std::size_t sx = 1, sy = nx, sz = static_cast<std::size_t>(nx) * ny;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j) edt1d(&f[j * sy + k * sz], nx, sx, d, v, z);
    for (int k = 0; k < nz; ++k)
        for (int i = 0; i < nx; ++i) edt1d(&f[i * sx + k * sz], ny, sy, d, v, z);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) edt1d(&f[i * sx + j * sy], nz, sz, d, v, z);
    return f;
}

double chamferDistanceBruteForce(const VoxelGrid &a, const VoxelGrid &b) {
    const auto ia = a.occupiedIndices();
    const auto ib = b.occupiedIndices();
    if (ia.empty() || ib.empty()) throw EmptyGridError("chamferDistance: empty grid");
    std::vector<Vec3> pa, pb;
    pa.reserve(ia.size());
    pb.reserve(ib.size());
    for (auto i : ia) pa.push_back(a.center(a.coord(i)));
    for (auto i : ib) pb.push_back(b.center(b.coord(i)));
    auto directed = [](const std::vector<Vec3> &from, const std::vector<Vec3> &to) {
        double sum = 0.0;
        for (const auto &p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto &q : to) {
                const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            sum += std::sqrt(best);
        }
        return sum / static_cast<double>(from.size());
    };
    return 0.5 * (directed(pa, pb) + directed(pb, pa));
}

double chamferDistance(const VoxelGrid &a, const VoxelGrid &b) {
    const bool lattice_shared = a.sameGeometry(b);
    const auto n = static_cast<long>(a.size());
    if (!lattice_shared || n <= kBruteForceCutoff) return chamferDistanceBruteForce(a, b);
    return ChamferReference(a).distanceTo(b);
}

ChamferReference::ChamferReference(VoxelGrid reference)
    : reference_(std::move(reference)),
      occupied_(reference_.occupiedIndices()),
      dist2_(squaredDistanceTransform(reference_)) {
    if (occupied_.empty()) throw EmptyGridError("chamferDistance: empty reference grid");
}

double ChamferReference::distanceTo(const VoxelGrid &other) const {
    if (!other.sameGeometry(reference_)) return chamferDistanceBruteForce(reference_, other);
    const auto other_occ = other.occupiedIndices();
    if (other_occ.empty()) throw EmptyGridError("chamferDistance: empty grid");
    double to_ref = 0.0;
    for (auto i : other_occ) to_ref += std::sqrt(dist2_[i]);
    const auto other_dist2 = squaredDistanceTransform(other);
    double from_ref = 0.0;
    for (auto i : occupied_) from_ref += std::sqrt(other_dist2[i]);
    const double vs = reference_.voxelSize();
    return 0.5 * vs * (to_ref / other_occ.size() + from_ref / occupied_.size());
}

std::vector<std::uint8_t> serializeToBytes(const VoxelGrid &grid) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put<std::uint16_t>(out, kVersion);
    for (int d : grid.dims()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    put<double>(out, grid.voxelSize());
    for (double o : grid.origin()) put<double>(out, o);
    const auto values = grid.values();
    std::size_t i = 0;
    while (i < values.size()) {
        const auto v = static_cast<float>(values[i]);
        std::uint32_t run = 1;
        while (i + run < values.size() && static_cast<float>(values[i + run]) == v &&
               run < std::numeric_limits<std::uint32_t>::max()) {
            ++run;
        }
        put<float>(out, v);
        put<std::uint32_t>(out, run);
        i += run;
    }
    return out;
}

VoxelGrid deserializeFromBytes(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("not a voxel grid file (bad magic)");
    }
    Reader r(bytes.subspan(4));
    const auto version = r.get<std::uint16_t>("version");
    if (version != kVersion) throw FormatError("unsupported grid version " + std::to_string(version));
    Index3 dims{};
    for (auto &d : dims) {
        const auto raw = r.get<std::uint32_t>("dims");
        if (raw == 0 || raw > (1u << 16)) throw FormatError("invalid grid dimension");
        d = static_cast<int>(raw);
    }
    const auto vs = r.get<double>("voxel size");
    if (!(vs > 0.0) || !std::isfinite(vs)) throw FormatError("invalid voxel size");
    Vec3 origin{};
    for (auto &o : origin) o = r.get<double>("origin");
    VoxelGrid grid(dims, vs, origin);
    std::size_t pos = 0;
    while (pos < grid.size()) {
        const auto v = r.get<float>("payload value");
        const auto run = r.get<std::uint32_t>("payload count");
        if (run == 0 || pos + run > grid.size()) throw FormatError("run length overflows grid");
        if (!(v >= 0.0f && v <= 1.0f)) throw FormatError("payload value outside [0, 1]");
        for (std::uint32_t k = 0; k < run; ++k) grid.setFlat(pos + k, v);
        pos += run;
    }
    return grid;
}

void serialize(const VoxelGrid &grid, std::ostream &out) {
    const auto bytes = serializeToBytes(grid);
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw GridError("failed to write grid");
}

VoxelGrid deserialize(std::istream &in) {
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserializeFromBytes(bytes);
}

void saveGrid(const VoxelGrid &grid, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw GridError("cannot open " + path + " for writing");
    serialize(grid, out);
}

VoxelGrid loadGrid(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw GridError("cannot open " + path);
    return deserialize(in);
}

}  // namespace clasp
