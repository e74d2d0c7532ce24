#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clasp/scene.hpp"
#include "clasp/voxel_grid.hpp"

namespace clasp {

struct ShapeModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kParamsPerBox = 6;
inline constexpr double kStddevFloor = 1e-3;

// Latent vector. Soft-box layout per box: center (x, y, z) in voxel units,
// then log half-extents (x, y, z).
struct LatentShape {
    std::vector<double> params;

    std::size_t size() const { return params.size(); }
    bool operator==(const LatentShape &) const = default;
};

// Diagonal Gaussian over the latent. A soft-box center coordinate i may be
// anchored to a face: with anchor[i] = -1 (lower) or +1 (upper) the Gaussian
// is over c + anchor[i] * exp(s) where s = latent[i + 3]. The map has unit
// Jacobian, so densities need no correction.
struct LatentPrior {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<int> anchor;  // empty or one entry per coordinate

    LatentPrior() = default;
    LatentPrior(std::vector<double> mean, std::vector<double> stddev, std::vector<int> anchor = {});  // floors stddev
    std::size_t size() const { return mean.size(); }
    int anchorOf(std::size_t i) const { return anchor.empty() ? 0 : anchor[i]; }
    // Latent at the prior mode.
    LatentShape mode() const;
    // Latent <-> the coordinates the Gaussian is over (anchored centers become faces).
    std::vector<double> toAnchored(const std::vector<double> &latent) const;
    std::vector<double> fromAnchored(const std::vector<double> &u) const;
};

LatentShape sampleLatent(const LatentPrior &prior, Rng &rng);
double logProb(const LatentPrior &prior, const LatentShape &latent);
// d logProb / d latent
std::vector<double> logProbGradient(const LatentPrior &prior, const LatentShape &latent);

class DecoderSpec {
public:
    enum class Kind { SoftBox, Affine };

    // Union of K soft boxes: per box the product over axes of
    // sigmoid(k * (exp(s) - |v - c|)), boxes combined by probabilistic OR.
    static DecoderSpec softBox(Index3 dims, int boxes, double sharpness = 8.0);
    // W = sigmoid(A * latent + bias); A is row-major (voxel, latent).
    static DecoderSpec affine(Index3 dims, int latent_size, std::vector<double> weights, std::vector<double> bias);

    Kind kind() const { return kind_; }
    const Index3 &dims() const { return dims_; }
    std::size_t voxelCount() const { return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]; }
    int boxes() const { return boxes_; }
    double sharpness() const { return sharpness_; }
    // Same decoder with another soft-box sharpness.
    DecoderSpec withSharpness(double sharpness) const;
    std::size_t latentSize() const { return latent_size_; }
    std::span<const double> weights() const { return weights_; }
    std::span<const double> bias() const { return bias_; }

    // Natural step scale of each latent coordinate: the stddev of the
    // uninformed (whole-grid) prior for this decoder.
    std::vector<double> latentScale() const;

    VoxelGrid decode(const LatentShape &latent, double voxel_size = kDefaultVoxelSize, Vec3 origin = {}) const;

    // Decoder state for one latent, for evaluating values and chain-rule
    // gradients at individual voxels without building the whole grid.
    class Evaluation {
    public:
        double value(std::size_t flat) const;
        // grad += upstream * dW(flat)/dlatent
        void addGradient(std::size_t flat, double upstream, std::span<double> grad) const;

    private:
        friend class DecoderSpec;
        const DecoderSpec *spec_ = nullptr;
        const LatentShape *latent_ = nullptr;
        // soft box: per box, per axis, tables over that axis' coordinates
        std::vector<std::vector<double>> g_, dgdc_, dgds_;
        const std::vector<double> &table(const std::vector<std::vector<double>> &t, int box, int axis) const {
            return t[static_cast<std::size_t>(box) * 3 + axis];
        }
    };

    // `latent` must outlive the returned evaluation.
    Evaluation prepare(const LatentShape &latent) const;

private:
    Kind kind_ = Kind::SoftBox;
    Index3 dims_{0, 0, 0};
    int boxes_ = 0;
    double sharpness_ = 8.0;
    std::size_t latent_size_ = 0;
    std::vector<double> weights_;
    std::vector<double> bias_;
};

// Soft-box latent for a list of (center, half-extent) boxes.
LatentShape boxLatent(const std::vector<std::pair<Vec3, Vec3>> &boxes);
LatentShape boxLatent(const Box &box);

void saveAffineDecoder(const DecoderSpec &spec, const std::string &path);
DecoderSpec loadAffineDecoder(const std::string &path);

// Prior knowledge about an object class beyond what a single view shows.
struct AuxBoxPrior {
    Vec3 center_offset{0.0, 0.0, 0.0};  // from the main box center, voxels
    Vec3 center_stddev{4.0, 4.0, 4.0};
    Vec3 half_extent{2.0, 2.0, 2.0};
    Vec3 log_extent_stddev{0.3, 0.3, 0.3};
};

struct ShapeClass {
    std::string name = "box";
    std::vector<AuxBoxPrior> aux;  // boxes after the main box
    int boxes() const { return 1 + static_cast<int>(aux.size()); }
};

// Feasible interval of one face coordinate (voxel boundary units).
struct FaceInterval {
    double lo = 0.0;
    double hi = 0.0;
    double mid() const { return 0.5 * (lo + hi); }
    double width() const { return hi - lo; }
};

struct BoxFaceBounds {
    std::array<FaceInterval, 3> lower;
    std::array<FaceInterval, 3> upper;
};

// Face intervals of the main box consistent with a view: observed extremes
// bound each face from inside, known free space (or the grid edge) from
// outside. Faces on the view axis are widened by twice the depth noise.
BoxFaceBounds viewFaceBounds(const DepthView &view);

// Stand-in encoder: maps a view to a latent prior.
LatentPrior priorFromView(const DepthView &view, const ShapeClass &shape_class);

// Prior over the whole grid for one object class, used when nothing is seen.
LatentPrior uninformedPrior(Index3 dims, const ShapeClass &shape_class);

}  // namespace clasp
