#pragma once

#include <cstdint>
#include <vector>

#include "clasp/belief.hpp"

namespace clasp {

struct BaselineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ViolationCount {
    int unexplained_chs = 0;
    int free_violations = 0;
    int total = 0;

    static ViolationCount of(int unexplained_chs, int free_violations) {
        return {unexplained_chs, free_violations, unexplained_chs + free_violations};
    }
};

// Known-free voxels decoding above delta, plus CHS without a voxel above the
// occupancy threshold. Zero exactly when constraintCheck passes.
ViolationCount countViolations(const VoxelGrid &soft, const ConstraintSet &constraints, const ProjectionConfig &config);

// (shape minus known_free) union true_contact_voxels.
VoxelGrid directEdit(const VoxelGrid &shape, const VoxelGrid &known_free, const VoxelGrid &true_contact_voxels);

// Scene-frame constraints accumulated in a belief.
ConstraintSet sceneConstraints(const Belief &belief);

struct SceneSample {
    std::vector<LatentShape> latents;
    ViolationCount violations;
    bool accepted() const { return violations.total == 0; }
};

// Independent draws from the belief's object priors, checked against its
// scene-frame constraints. Sample i uses stream (seed, stream, i).
std::vector<SceneSample> rejectionSample(const Belief &belief, const DecoderSpec &spec, const ProjectionConfig &config,
                                         std::size_t n, std::uint64_t seed, std::uint64_t stream);

// Fraction of `n` draws satisfying every constraint.
double rejectionAcceptanceRate(const Belief &belief, const DecoderSpec &spec, const ProjectionConfig &config,
                               std::size_t n, std::uint64_t seed, std::uint64_t stream);

struct SoftRejectionPick {
    std::size_t index = 0;  // into the sample list
    bool edited = false;    // passed through directEdit
};

// Zero-violation samples if any, else every sample tied at the minimum
// violation count, marked for direct editing.
std::vector<SoftRejectionPick> softRejectionSelect(const std::vector<SceneSample> &samples);

// Binary scene shape of a soft-rejection pick.
VoxelGrid softRejectionShape(const Belief &belief, const SceneSample &sample, const SoftRejectionPick &pick,
                             const DecoderSpec &spec, const VoxelGrid &true_contact_voxels);

// Prior from a view augmented with robot free space and contacted voxels,
// all in the object's local frame.
LatentPrior combinedInputPrior(const DepthView &view, const VoxelGrid &robot_free, const VoxelGrid &true_contact_voxels,
                               const ShapeClass &shape_class);

}  // namespace clasp
