#include "clasp/baselines.hpp"

#include <algorithm>

#include "clasp/parallel.hpp"

namespace clasp {

ViolationCount countViolations(const VoxelGrid &soft, const ConstraintSet &constraints, const ProjectionConfig &config) {
    if (soft.dims() != constraints.known_free.dims()) throw DimensionMismatch("countViolations: grid dimensions differ");
    int free_violations = 0;
    for (std::size_t flat : constraints.known_free.occupiedIndices()) {
        if (soft[flat] > config.delta) ++free_violations;
    }
    int unexplained = 0;
    for (const auto &region : constraints.chs) {
        if (region.dims() != soft.dims()) throw DimensionMismatch("countViolations: grid dimensions differ");
        const auto idx = region.occupiedIndices();
        const bool hit =
            std::any_of(idx.begin(), idx.end(), [&](std::size_t f) { return soft[f] > config.occupancy_threshold; });
        if (!hit) ++unexplained;
    }
    return ViolationCount::of(unexplained, free_violations);
}

VoxelGrid directEdit(const VoxelGrid &shape, const VoxelGrid &known_free, const VoxelGrid &true_contact_voxels) {
    return setUnion(setDifference(shape, known_free), true_contact_voxels);
}

ConstraintSet sceneConstraints(const Belief &belief) {
    ConstraintSet out{belief.knownFree(), {}};
    for (const auto &contact : belief.contacts) out.chs.push_back(setDifference(contact.region, out.known_free));
    return out;
}

namespace {

SceneSample drawSample(const Belief &belief, const ConstraintSet &constraints, const DecoderSpec &spec,
                       const ProjectionConfig &config, Rng &rng) {
    Particle particle;
    for (const auto &obj : belief.objects) particle.latents.push_back(sampleLatent(obj.prior, rng));
    const VoxelGrid soft = decodeParticleSoft(belief, particle, spec);
    return {std::move(particle.latents), countViolations(soft, constraints, config)};
}

}  // namespace

std::vector<SceneSample> rejectionSample(const Belief &belief, const DecoderSpec &spec, const ProjectionConfig &config,
                                         std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    if (n == 0) throw BaselineError("sample count must be at least 1");
    const ConstraintSet constraints = sceneConstraints(belief);
    std::vector<SceneSample> out(n);
    parallelFor(n, [&](std::size_t i) {
        Rng rng = makeRng(seed, stream, i);
        out[i] = drawSample(belief, constraints, spec, config, rng);
    });
    return out;
}

double rejectionAcceptanceRate(const Belief &belief, const DecoderSpec &spec, const ProjectionConfig &config,
                               std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    if (n == 0) throw BaselineError("sample count must be at least 1");
    const ConstraintSet constraints = sceneConstraints(belief);
    std::vector<char> accepted(n, 0);
    parallelFor(n, [&](std::size_t i) {
        Rng rng = makeRng(seed, stream, i);
        accepted[i] = drawSample(belief, constraints, spec, config, rng).accepted();
    });
    return static_cast<double>(std::count(accepted.begin(), accepted.end(), 1)) / static_cast<double>(n);
}

std::vector<SoftRejectionPick> softRejectionSelect(const std::vector<SceneSample> &samples) {
    std::vector<SoftRejectionPick> out;
    if (samples.empty()) return out;
    int best = samples.front().violations.total;
    for (const auto &s : samples) best = std::min(best, s.violations.total);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].violations.total == best) out.push_back({i, best > 0});
    }
    return out;
}

VoxelGrid softRejectionShape(const Belief &belief, const SceneSample &sample, const SoftRejectionPick &pick,
                             const DecoderSpec &spec, const VoxelGrid &true_contact_voxels) {
    Particle particle{sample.latents, {}, true};
    VoxelGrid shape = decodeParticle(belief, particle, spec);
    if (!pick.edited) return shape;
    return directEdit(shape, belief.knownFree(), true_contact_voxels);
}

LatentPrior combinedInputPrior(const DepthView &view, const VoxelGrid &robot_free, const VoxelGrid &true_contact_voxels,
                               const ShapeClass &shape_class) {
    if (robot_free.dims() != view.known_free.dims() || true_contact_voxels.dims() != view.known_free.dims()) {
        throw DimensionMismatch("combinedInputPrior: grid dimensions differ");
    }
    if (overlapCount(true_contact_voxels, view.known_free) > 0) {
        throw BaselineError("combinedInputPrior: contact voxel lies in vision free space");
    }
    DepthView augmented = view;
    augmented.known_free = setDifference(setUnion(view.known_free, robot_free), true_contact_voxels);
    augmented.known_occupied = setUnion(view.known_occupied, true_contact_voxels);
    return priorFromView(augmented, shape_class);
}

}  // namespace clasp
