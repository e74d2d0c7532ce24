#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace clasp {

using Index3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

inline constexpr double kDefaultVoxelSize = 0.01;

struct GridError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : GridError {
    using GridError::GridError;
};

// Raised by chamferDistance when either operand has no occupied voxel.
struct EmptyGridError : GridError {
    using GridError::GridError;
};

struct FormatError : GridError {
    using GridError::GridError;
};

// Integer voxel offset from a local grid into a parent grid, plus the
// sub-voxel remainder in meters (carried along, never used for indexing).
struct GridTransform {
    Index3 translation{0, 0, 0};
    Vec3 residual{0.0, 0.0, 0.0};

    Index3 apply(const Index3 &local) const {
        return {local[0] + translation[0], local[1] + translation[1], local[2] + translation[2]};
    }
    GridTransform inverse() const {
        return {{-translation[0], -translation[1], -translation[2]},
                {-residual[0], -residual[1], -residual[2]}};
    }
    GridTransform compose(const GridTransform &inner) const {
        return {apply(inner.translation),
                {residual[0] + inner.residual[0], residual[1] + inner.residual[1],
                 residual[2] + inner.residual[2]}};
    }
    bool operator==(const GridTransform &) const = default;
};

// Dense occupancy lattice, x-fastest storage. Values lie in [0, 1]; a binary
// grid holds only 0 and 1.
class VoxelGrid {
public:
    VoxelGrid() = default;
    explicit VoxelGrid(Index3 dims, double voxel_size = kDefaultVoxelSize, Vec3 origin = {},
                       double fill = 0.0);

    const Index3 &dims() const { return dims_; }
    double voxelSize() const { return voxel_size_; }
    const Vec3 &origin() const { return origin_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    bool inBounds(int x, int y, int z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < dims_[0] && y < dims_[1] && z < dims_[2];
    }
    bool inBounds(const Index3 &i) const { return inBounds(i[0], i[1], i[2]); }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims_[0]) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims_[1]) * z);
    }
    std::size_t index(const Index3 &i) const { return index(i[0], i[1], i[2]); }
    Index3 coord(std::size_t flat) const;

    double at(int x, int y, int z) const { return values_[index(x, y, z)]; }
    double at(const Index3 &i) const { return values_[index(i)]; }
    double operator[](std::size_t flat) const { return values_[flat]; }

    // Throws GridError for values outside [0, 1].
    void set(int x, int y, int z, double v);
    void set(const Index3 &i, double v) { set(i[0], i[1], i[2], v); }
    void setFlat(std::size_t flat, double v);

    bool occupied(std::size_t flat) const { return values_[flat] > 0.5; }
    bool occupied(int x, int y, int z) const { return occupied(index(x, y, z)); }
    bool occupied(const Index3 &i) const { return occupied(index(i)); }

    std::span<const double> values() const { return values_; }

    bool isBinary() const;
    std::size_t occupiedCount() const;
    std::vector<std::size_t> occupiedIndices() const;
    bool sameGeometry(const VoxelGrid &other) const;

    // World coordinates of a voxel center.
    Vec3 center(const Index3 &i) const;

    bool operator==(const VoxelGrid &) const = default;

private:
    Index3 dims_{0, 0, 0};
    double voxel_size_ = kDefaultVoxelSize;
    Vec3 origin_{0.0, 0.0, 0.0};
    std::vector<double> values_;
};

// Voxel = 1 iff value > t (strict).
VoxelGrid threshold(const VoxelGrid &grid, double t);

std::size_t overlapCount(const VoxelGrid &a, const VoxelGrid &b);
VoxelGrid setDifference(const VoxelGrid &a, const VoxelGrid &b);
VoxelGrid setUnion(const VoxelGrid &a, const VoxelGrid &b);
VoxelGrid setIntersection(const VoxelGrid &a, const VoxelGrid &b);

// Copies every occupied voxel of `src` through `t` into a grid of `dims`
// (voxels landing out of bounds are dropped). Origin of the result is the
// world position implied by `t` relative to src.
VoxelGrid resample(const VoxelGrid &src, const GridTransform &t, Index3 dims);

// Symmetric Chamfer distance between occupied voxel centers, in meters:
// 0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|).
double chamferDistance(const VoxelGrid &a, const VoxelGrid &b);

// Exhaustive O(|A||B|) variant, used below the distance-transform cutoff.
double chamferDistanceBruteForce(const VoxelGrid &a, const VoxelGrid &b);

// Squared Euclidean distance (in voxels^2) from each voxel to the nearest
// occupied voxel of `grid`. Unreachable entries are +inf.
std::vector<double> squaredDistanceTransform(const VoxelGrid &grid);

// Precomputed nearest-neighbor field of a fixed reference grid, for
// repeated Chamfer queries against the same ground truth.
class ChamferReference {
public:
    explicit ChamferReference(VoxelGrid reference);
    double distanceTo(const VoxelGrid &other) const;
    const VoxelGrid &grid() const { return reference_; }

private:
    VoxelGrid reference_;
    std::vector<std::size_t> occupied_;
    std::vector<double> dist2_;
};

void serialize(const VoxelGrid &grid, std::ostream &out);
VoxelGrid deserialize(std::istream &in);
std::vector<std::uint8_t> serializeToBytes(const VoxelGrid &grid);
VoxelGrid deserializeFromBytes(std::span<const std::uint8_t> bytes);
void saveGrid(const VoxelGrid &grid, const std::string &path);
VoxelGrid loadGrid(const std::string &path);

}  // namespace clasp
