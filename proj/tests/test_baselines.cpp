#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "clasp/baselines.hpp"
#include "oracles.hpp"

using namespace clasp;

namespace {

Box boxAt(Index3 lo, Index3 ext) {
    return {{lo[0] + ext[0] / 2.0, lo[1] + ext[1] / 2.0, lo[2] + ext[2] / 2.0}, ext};
}

VoxelGrid voxels(Index3 dims, const std::vector<Index3> &list) {
    VoxelGrid g(dims);
    for (const auto &v : list) g.set(v, 1.0);
    return g;
}

SceneSample sampleWith(int chs, int free) { return {{}, ViolationCount::of(chs, free)}; }

// One box with its front face at x = 3 in a 12^3 scene.
struct SmallScene {
    Index3 dims{12, 12, 12};
    DecoderSpec spec = DecoderSpec::softBox({12, 12, 12}, 1);
    DepthView view;
    Belief belief;

    SmallScene() {
        SceneConfig c;
        c.scene_dims = c.object_dims = dims;
        c.objects.push_back({"box", "box", {}, {boxAt({3, 3, 3}, {3, 6, 6})}});
        Rng rng = makeRng(0, 0);
        view = renderDepthView(buildScene(c), 0, {}, rng);
        belief = initBelief({{"box", {}, view, {}}}, dims, kDefaultVoxelSize, 1, 0);
    }
};

}  // namespace

TEST(Violations, CountsAndTotal) {
    VoxelGrid soft({4, 4, 4});
    soft.set(0, 0, 0, 0.9);
    soft.set(1, 0, 0, 0.45);
    soft.set(2, 0, 0, 0.3);
    const ConstraintSet cs{voxels({4, 4, 4}, {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}),
                           {voxels({4, 4, 4}, {{0, 0, 0}}), voxels({4, 4, 4}, {{3, 3, 3}})}};
    const auto v = countViolations(soft, cs, {});
    EXPECT_EQ(v.free_violations, 2);
    EXPECT_EQ(v.unexplained_chs, 1);
    EXPECT_EQ(v.total, 3);
    EXPECT_THROW(countViolations(VoxelGrid({4, 4, 5}), cs, {}), DimensionMismatch);
}

TEST(Violations, ZeroIffConstraintCheck) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 60; ++trial) {
        const auto g = oracle::randomGradientInstance(rng, 8, 0.0);
        const auto v = countViolations(g.spec.decode(g.latent), g.constraints, g.config);
        EXPECT_EQ(v.total, v.unexplained_chs + v.free_violations);
        EXPECT_GE(v.total, 0);
        EXPECT_EQ(v.total == 0, constraintCheck(g.spec, g.latent, g.constraints, g.config));
    }
}

TEST(DirectEdit, Examples) {
    const Index3 d{6, 6, 6};
    const VoxelGrid shape = rasterizeBoxes({boxAt({1, 1, 1}, {3, 3, 3})}, d);
    const VoxelGrid empty(d);
    EXPECT_EQ(directEdit(shape, empty, empty), shape);
    VoxelGrid all(d);
    for (std::size_t i = 0; i < all.size(); ++i) all.setFlat(i, 1.0);
    const VoxelGrid contact = voxels(d, {{5, 5, 5}});
    EXPECT_EQ(directEdit(shape, all, contact), contact);
    EXPECT_THROW(directEdit(shape, VoxelGrid({6, 6, 7}), empty), DimensionMismatch);
}

TEST(DirectEdit, SetAlgebraProperties) {
    std::mt19937_64 rng(15);
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 20; ++trial) {
        VoxelGrid shape({6, 6, 6}), free({6, 6, 6}), contact({6, 6, 6});
        for (std::size_t i = 0; i < shape.size(); ++i) {
            shape.setFlat(i, coin(rng));
            free.setFlat(i, coin(rng));
            contact.setFlat(i, coin(rng) && coin(rng));
        }
        const VoxelGrid out = directEdit(shape, free, contact);
        EXPECT_EQ(overlapCount(out, contact), contact.occupiedCount());
        EXPECT_EQ(overlapCount(out, setDifference(free, contact)), 0u);
        const VoxelGrid clean_contact = setDifference(contact, free);
        EXPECT_EQ(overlapCount(directEdit(shape, free, clean_contact), free), 0u);
    }
}

TEST(Rejection, NoConstraintsAcceptsEverything) {
    Belief b = SmallScene().belief;
    b.objects[0].view.known_free = VoxelGrid({12, 12, 12});
    const auto spec = DecoderSpec::softBox({12, 12, 12}, 1);
    const auto samples = rejectionSample(b, spec, {}, 50, 1, 0);
    ASSERT_EQ(samples.size(), 50u);
    for (const auto &smp : samples) EXPECT_TRUE(smp.accepted());
    EXPECT_EQ(rejectionAcceptanceRate(b, spec, {}, 50, 1, 0), 1.0);
    EXPECT_THROW(rejectionSample(b, spec, {}, 0, 1, 0), BaselineError);
    EXPECT_THROW(rejectionAcceptanceRate(b, spec, {}, 0, 1, 0), BaselineError);
}

TEST(Rejection, AcceptanceMatchesPriorMassReachingContact) {
    SmallScene s;
    Belief b = s.belief;
    // behind the visible face, inside the box's y-z footprint
    Observation obs{VoxelGrid(s.dims), CollisionHypothesisSet{voxels(s.dims, {{8, 5, 5}, {8, 6, 6}})}, std::nullopt};
    registerObservation(b, obs);
    const ProjectionConfig config;
    const double rate = rejectionAcceptanceRate(b, s.spec, config, 20000, 3, 0);

    // independent Monte Carlo over the Gaussian in its own coordinates
    const LatentPrior &p = b.objects[0].prior;
    const VoxelGrid free = b.knownFree();
    const std::vector<std::size_t> free_idx = free.occupiedIndices();
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> normal;
    const int n = 100000;
    int hits = 0;
    for (int k = 0; k < n; ++k) {
        std::vector<double> u(6), z(6);
        for (int i = 0; i < 6; ++i) u[i] = p.mean[i] + p.stddev[i] * normal(rng);
        for (int i = 0; i < 6; ++i) z[i] = i < 3 ? u[i] - p.anchorOf(i) * std::exp(u[i + 3]) : u[i];
        const auto ev = s.spec.prepare(LatentShape{z});
        bool ok = ev.value(obs.chs->region.index(8, 5, 5)) > 0.5 || ev.value(obs.chs->region.index(8, 6, 6)) > 0.5;
        for (std::size_t i = 0; ok && i < free_idx.size(); ++i) ok = ev.value(free_idx[i]) <= config.delta;
        hits += ok;
    }
    const double mc = static_cast<double>(hits) / n;
    EXPECT_GT(mc, 0.02);
    EXPECT_LT(mc, 0.98);
    EXPECT_NEAR(rate, mc, 4.0 * std::sqrt(mc * (1 - mc) * (1.0 / 20000 + 1.0 / n)));
}

TEST(Rejection, TwoFarContactsCollapse) {
    SmallScene s;
    Belief b = s.belief;
    registerObservation(b, {VoxelGrid(s.dims), CollisionHypothesisSet{voxels(s.dims, {{11, 0, 0}})}, std::nullopt});
    registerObservation(b, {VoxelGrid(s.dims), CollisionHypothesisSet{voxels(s.dims, {{11, 11, 11}})}, std::nullopt});
    EXPECT_LT(rejectionAcceptanceRate(b, s.spec, {}, 2000, 1, 0), 0.005);
}

TEST(SoftRejection, SelectionRules) {
    const std::vector<SceneSample> valid{sampleWith(0, 0), sampleWith(0, 0)};
    const auto all = softRejectionSelect(valid);
    ASSERT_EQ(all.size(), 2u);
    EXPECT_FALSE(all[0].edited);

    const auto unique = softRejectionSelect({sampleWith(2, 1), sampleWith(0, 1), sampleWith(1, 3)});
    ASSERT_EQ(unique.size(), 1u);
    EXPECT_EQ(unique[0].index, 1u);
    EXPECT_TRUE(unique[0].edited);

    const auto ties = softRejectionSelect({sampleWith(1, 1), sampleWith(0, 2), sampleWith(3, 0), sampleWith(2, 0)});
    ASSERT_EQ(ties.size(), 3u);
    EXPECT_EQ(ties[0].index, 0u);
    EXPECT_EQ(ties[1].index, 1u);
    EXPECT_EQ(ties[2].index, 3u);

    const auto mixed = softRejectionSelect({sampleWith(0, 1), sampleWith(0, 0), sampleWith(0, 0)});
    EXPECT_EQ(mixed.size(), 2u);
    EXPECT_TRUE(softRejectionSelect({}).empty());
}

TEST(SoftRejection, AcceptedSubsetAndEditedShapes) {
    SmallScene s;
    Belief b = s.belief;
    const VoxelGrid contact = voxels(s.dims, {{8, 5, 5}});
    registerObservation(b, {VoxelGrid(s.dims), CollisionHypothesisSet{contact}, contact});
    const auto samples = rejectionSample(b, s.spec, {}, 300, 2, 0);
    const auto picks = softRejectionSelect(samples);
    std::size_t accepted = 0;
    for (const auto &smp : samples) accepted += smp.accepted();
    ASSERT_GT(accepted, 0u);
    EXPECT_EQ(picks.size(), accepted);
    for (const auto &pick : picks) EXPECT_TRUE(samples[pick.index].accepted());

    // force editing by adding a contact nothing explains
    registerObservation(b, {VoxelGrid(s.dims), CollisionHypothesisSet{voxels(s.dims, {{11, 11, 0}})}, std::nullopt});
    const auto hard = rejectionSample(b, s.spec, {}, 50, 2, 0);
    const auto hard_picks = softRejectionSelect(hard);
    ASSERT_FALSE(hard_picks.empty());
    const VoxelGrid truth = voxels(s.dims, {{8, 5, 5}, {11, 11, 0}});
    for (const auto &pick : hard_picks) {
        ASSERT_TRUE(pick.edited);
        const VoxelGrid shape = softRejectionShape(b, hard[pick.index], pick, s.spec, truth);
        EXPECT_EQ(overlapCount(shape, truth), 2u);
        EXPECT_EQ(overlapCount(shape, setDifference(b.knownFree(), truth)), 0u);
    }
}

TEST(CombinedPrior, Examples) {
    SmallScene s;
    const VoxelGrid none(s.dims);
    const LatentPrior vision = priorFromView(s.view, ShapeClass{});
    const LatentPrior same = combinedInputPrior(s.view, none, none, ShapeClass{});
    EXPECT_EQ(same.mean, vision.mean);
    EXPECT_EQ(same.stddev, vision.stddev);

    const VoxelGrid contact = voxels(s.dims, {{9, 5, 5}});
    const LatentPrior combined = combinedInputPrior(s.view, none, contact, ShapeClass{});
    DepthView augmented = s.view;
    augmented.known_occupied = setUnion(s.view.known_occupied, contact);
    const BoxFaceBounds bounds = viewFaceBounds(augmented);
    EXPECT_EQ(bounds.upper[0].lo, 10.0);
    EXPECT_EQ(viewFaceBounds(s.view).upper[0].lo, 4.0);
    const LatentPrior direct = priorFromView(augmented, ShapeClass{});
    EXPECT_EQ(combined.mean, direct.mean);
    const double back_vision = vision.mean[0] + std::exp(vision.mean[3]);
    const double back_combined = combined.mean[0] + std::exp(combined.mean[3]);
    EXPECT_GT(back_combined, back_vision);

    EXPECT_THROW(combinedInputPrior(s.view, none, voxels(s.dims, {{0, 5, 5}}), ShapeClass{}), BaselineError);
    EXPECT_THROW(combinedInputPrior(s.view, VoxelGrid({4, 4, 4}), none, ShapeClass{}), DimensionMismatch);
}
