#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "clasp/scene.hpp"

using namespace clasp;

namespace {

SceneConfig singleBox(Index3 dims, Box box) {
    SceneConfig c;
    c.scene_dims = dims;
    c.object_dims = dims;
    c.objects.push_back({"obj", "box", {}, {box}});
    return c;
}

// Box with integer bounds [lo, lo + ext).
Box boxAt(Index3 lo, Index3 ext) {
    return {{lo[0] + ext[0] / 2.0, lo[1] + ext[1] / 2.0, lo[2] + ext[2] / 2.0}, ext};
}

DepthView viewOf(const SceneConfig &config, NoiseParams noise = {}, std::uint64_t seed = 0) {
    const Scene scene = buildScene(config);
    Rng rng = makeRng(seed, 0);
    return renderDepthView(scene, 0, noise, rng);
}

}  // namespace

TEST(Rasterize, SolidBoxCount) {
    const Scene s = buildScene(singleBox({16, 16, 16}, boxAt({0, 0, 0}, {10, 10, 10})));
    EXPECT_EQ(s.occupancy.occupiedCount(), 1000u);
    EXPECT_TRUE(s.occupancy.occupied(9, 9, 9));
    EXPECT_FALSE(s.occupancy.occupied(10, 9, 9));
}

TEST(Rasterize, CompositeCountsOverlapOnce) {
    const Box body = boxAt({4, 4, 4}, {12, 12, 12});
    const Box attached = boxAt({2, 8, 7}, {2, 2, 6});
    const Box overlapping = boxAt({3, 8, 7}, {2, 2, 6});
    EXPECT_EQ(rasterizeBoxes({body, attached}, {20, 20, 20}).occupiedCount(), 1728u + 24u);
    // half of the second handle lies inside the body: 12 voxels shared
    EXPECT_EQ(rasterizeBoxes({body, overlapping}, {20, 20, 20}).occupiedCount(), 1728u + 24u - 12u);
}

TEST(Rasterize, MembershipRule) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> c(3.5, 8.5);
    std::uniform_int_distribution<int> e(1, 6);
    for (int trial = 0; trial < 20; ++trial) {
        const Box b{{c(rng), c(rng), c(rng)}, {e(rng), e(rng), e(rng)}};
        const VoxelGrid g = rasterizeBoxes({b}, {12, 12, 12});
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Index3 v = g.coord(i);
            bool inside = true;
            for (int a = 0; a < 3; ++a) inside &= std::abs(v[a] + 0.5 - b.center[a]) < b.extents[a] / 2.0;
            EXPECT_EQ(g.occupied(i), inside);
        }
    }
    EXPECT_THROW(rasterizeBoxes({boxAt({10, 0, 0}, {4, 1, 1})}, {12, 12, 12}), SceneError);
}

TEST(BuildScene, RejectsBadObjects) {
    EXPECT_THROW(buildScene(singleBox({8, 8, 8}, boxAt({0, 0, 0}, {0, 2, 2}))), SceneError);
    SceneConfig outside = singleBox({8, 8, 8}, boxAt({0, 0, 0}, {2, 2, 2}));
    outside.objects[0].transform.translation = {7, 0, 0};
    EXPECT_THROW(buildScene(outside), SceneError);
}

TEST(BuildScene, LabelsAndObjectOccupancy) {
    SceneConfig c = singleBox({12, 12, 12}, boxAt({0, 0, 0}, {3, 3, 3}));
    c.objects[0].transform.translation = {4, 4, 4};
    c.support.push_back(boxAt({0, 0, 0}, {12, 12, 2}));
    const Scene s = buildScene(c);
    EXPECT_EQ(s.objectOccupancy().occupiedCount(), 27u);
    EXPECT_EQ(s.support.occupiedCount(), 288u);
    EXPECT_EQ(s.occupancy.occupiedCount(), 27u + 288u);
    EXPECT_EQ(s.labels[s.occupancy.index(5, 5, 5)], 0);
    EXPECT_EQ(s.labels[s.occupancy.index(5, 5, 0)], -2);
    EXPECT_EQ(s.labels[s.occupancy.index(9, 9, 9)], -1);
}

TEST(DepthViewTest, CubeFrontFace) {
    const DepthView v = viewOf(singleBox({8, 8, 8}, boxAt({3, 2, 2}, {4, 4, 4})));
    EXPECT_EQ(v.known_occupied.occupiedCount(), 16u);
    for (int z = 0; z < 8; ++z)
        for (int y = 0; y < 8; ++y) {
            const bool hit = y >= 2 && y < 6 && z >= 2 && z < 6;
            for (int x = 0; x < 8; ++x) {
                EXPECT_EQ(v.known_occupied.occupied(x, y, z), hit && x == 3);
                EXPECT_EQ(v.known_free.occupied(x, y, z), hit ? x < 3 : true);
            }
        }
}

TEST(DepthViewTest, ShallowAndDeepLookIdentical) {
    const DepthView shallow = viewOf(singleBox({32, 32, 32}, boxAt({10, 8, 8}, {5, 12, 12})));
    const DepthView deep = viewOf(singleBox({32, 32, 32}, boxAt({10, 8, 8}, {15, 12, 12})));
    EXPECT_EQ(shallow.known_occupied, deep.known_occupied);
    EXPECT_EQ(shallow.known_free, deep.known_free);
    EXPECT_NE(buildScene(singleBox({32, 32, 32}, boxAt({10, 8, 8}, {5, 12, 12}))).occupancy,
              buildScene(singleBox({32, 32, 32}, boxAt({10, 8, 8}, {15, 12, 12}))).occupancy);
}

TEST(DepthViewTest, ZeroNoiseMatchesNoiseOff) {
    const SceneConfig c = singleBox({16, 16, 16}, boxAt({4, 3, 3}, {6, 8, 8}));
    NoiseParams zero{true, 0.0, 16};
    const DepthView a = viewOf(c), b = viewOf(c, zero, 5);
    EXPECT_EQ(a.known_occupied, b.known_occupied);
    EXPECT_EQ(a.known_free, b.known_free);
}

TEST(DepthViewTest, NoiseOffInvariants) {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> lo(0, 8), ext(1, 7);
    for (int trial = 0; trial < 20; ++trial) {
        SceneConfig c = singleBox({16, 16, 16}, boxAt({lo(rng), lo(rng), lo(rng)}, {ext(rng), ext(rng), ext(rng)}));
        c.objects[0].boxes.push_back(boxAt({lo(rng), lo(rng), lo(rng)}, {ext(rng), ext(rng), ext(rng)}));
        const Scene s = buildScene(c);
        Rng r = makeRng(0, 0);
        const DepthView v = renderDepthView(s, 0, {}, r);
        const VoxelGrid &shape = s.objects[0].shape;
        EXPECT_EQ(setDifference(v.known_occupied, shape).occupiedCount(), 0u);
        EXPECT_EQ(overlapCount(v.known_free, shape), 0u);
        EXPECT_EQ(overlapCount(v.known_free, v.known_occupied), 0u);
    }
}

TEST(DepthViewTest, NoiseIsSeededAndDisjoint) {
    const SceneConfig c = singleBox({32, 32, 32}, boxAt({10, 6, 6}, {10, 20, 20}));
    NoiseParams noise{true, 0.02, 16};
    const DepthView a = viewOf(c, noise, 3), b = viewOf(c, noise, 3), d = viewOf(c, noise, 4);
    EXPECT_EQ(a.known_occupied, b.known_occupied);
    EXPECT_NE(a.known_occupied, d.known_occupied);
    EXPECT_EQ(overlapCount(a.known_free, a.known_occupied), 0u);
    EXPECT_GT(a.depth_noise_voxels, 0.0);
}

TEST(DepthNoise, ImageStatistics) {
    NoiseParams noise{true, 0.02, 16};
    Rng rng = makeRng(1, 0);
    // 16x16 image upscaled to 16x16 is the raw image, rounded: stddev 2 voxels at 1 cm
    double sum = 0.0, sq = 0.0;
    const int reps = 50;
    for (int r = 0; r < reps; ++r) {
        for (int d : sampleDepthNoise(noise, 0.01, 16, 16, rng)) {
            sum += d;
            sq += double(d) * d;
        }
    }
    const double n = reps * 256.0;
    EXPECT_NEAR(sum / n, 0.0, 0.1);
    // rounding adds 1/12 to the variance
    EXPECT_NEAR(sq / n, 4.0 + 1.0 / 12.0, 0.3);
}

TEST(Probe, LineWaypointsAreUnitSteps) {
    const auto w = lineWaypoints({0, 0, 0}, {5, -3, 2});
    ASSERT_FALSE(w.empty());
    EXPECT_EQ(w.front(), (Index3{0, 0, 0}));
    EXPECT_EQ(w.back(), (Index3{5, -3, 2}));
    for (std::size_t i = 1; i < w.size(); ++i)
        for (int a = 0; a < 3; ++a) EXPECT_LE(std::abs(w[i][a] - w[i - 1][a]), 1);
}

TEST(Probe, EmptySceneSweep) {
    const Scene s = buildScene(singleBox({16, 16, 16}, boxAt({0, 0, 0}, {1, 1, 1})));
    ProbeMotion m{cubeStencil(3), lineWaypoints({4, 8, 8}, {12, 8, 8})};
    const Observation obs = sweepProbe(s, m, VoxelGrid({16, 16, 16}));
    EXPECT_FALSE(obs.hasContact());
    EXPECT_EQ(obs.swept_free, m.sweptRegion({16, 16, 16}, s.voxel_size));
    EXPECT_EQ(obs.swept_free.occupiedCount(), 11u * 9u);
}

TEST(Probe, ImmediateContact) {
    const Scene s = buildScene(singleBox({16, 16, 16}, boxAt({6, 6, 6}, {4, 4, 4})));
    ProbeMotion m{cubeStencil(3), lineWaypoints({7, 7, 7}, {7, 7, 14})};
    VoxelGrid prior_free({16, 16, 16});
    prior_free.set(6, 6, 6, 1.0);
    const Observation obs = sweepProbe(s, m, prior_free);
    ASSERT_TRUE(obs.hasContact());
    EXPECT_EQ(obs.swept_free.occupiedCount(), 0u);
    const VoxelGrid stamp = m.stamp({7, 7, 7}, {16, 16, 16}, s.voxel_size);
    EXPECT_EQ(obs.chs->region, setDifference(stamp, prior_free));
}

TEST(Probe, ContactRegionAgainstReplay) {
    const Scene s = buildScene(singleBox({32, 32, 32}, boxAt({8, 10, 2}, {18, 12, 12})));
    ProbeMotion m{cubeStencil(3), lineWaypoints({31, 16, 8}, {12, 16, 8})};
    Rng rng = makeRng(0, 0);
    const VoxelGrid known = renderDepthView(s, 0, {}, rng).known_free;
    const Observation obs = sweepProbe(s, m, known);
    ASSERT_TRUE(obs.hasContact());

    // replay stamps until the first overlap
    VoxelGrid swept({32, 32, 32}, s.voxel_size);
    VoxelGrid contact_stamp;
    for (const auto &w : m.waypoints) {
        const VoxelGrid st = m.stamp(w, {32, 32, 32}, s.voxel_size);
        if (overlapCount(st, s.occupancy) > 0) {
            contact_stamp = st;
            break;
        }
        swept = setUnion(swept, st);
    }
    EXPECT_EQ(obs.swept_free, swept);
    EXPECT_EQ(obs.chs->region, setDifference(contact_stamp, setUnion(known, swept)));
    EXPECT_EQ(overlapCount(obs.chs->region, swept), 0u);
    EXPECT_GT(obs.chs->region.occupiedCount(), 0u);
    ASSERT_TRUE(obs.true_contact_voxels.has_value());
    EXPECT_EQ(*obs.true_contact_voxels, setIntersection(contact_stamp, s.occupancy));
    // last box column is x = 25: the stencil first touches at center x = 26
    EXPECT_TRUE(obs.true_contact_voxels->occupied(25, 16, 8));
}

TEST(Probe, EmptyWaypointsThrow) {
    const Scene s = buildScene(singleBox({8, 8, 8}, boxAt({0, 0, 0}, {1, 1, 1})));
    EXPECT_THROW(sweepProbe(s, ProbeMotion{cubeStencil(3), {}}, VoxelGrid({8, 8, 8})), SceneError);
}

TEST(ProbeSelection, AgreementPicksFirst) {
    VoxelGrid freq({8, 8, 8});
    for (std::size_t i = 0; i < freq.size(); i += 2) freq.setFlat(i, 1.0);
    std::vector<ProbeMotion> c{{cubeStencil(1), lineWaypoints({0, 0, 0}, {7, 0, 0})},
                               {cubeStencil(1), lineWaypoints({0, 3, 3}, {7, 3, 3})}};
    EXPECT_EQ(selectInformativeProbe(freq, c), 0u);
}

TEST(ProbeSelection, UncertainRegionWins) {
    VoxelGrid freq({8, 8, 8});
    for (int x = 0; x < 8; ++x) freq.set(x, 5, 5, 0.5);
    std::vector<ProbeMotion> c{{cubeStencil(1), lineWaypoints({0, 0, 0}, {7, 0, 0})},
                               {cubeStencil(1), lineWaypoints({0, 5, 5}, {7, 5, 5})},
                               {cubeStencil(1), lineWaypoints({0, 2, 2}, {7, 2, 2})}};
    EXPECT_EQ(selectInformativeProbe(freq, c), 1u);
}

TEST(ProbeSelection, MatchesEntropySum) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    VoxelGrid freq({8, 8, 8});
    for (std::size_t i = 0; i < freq.size(); ++i) freq.setFlat(i, u(rng));
    std::vector<ProbeMotion> c{{cubeStencil(3), lineWaypoints({1, 1, 1}, {6, 1, 1})},
                               {cubeStencil(3), lineWaypoints({1, 1, 6}, {1, 6, 6})},
                               {cubeStencil(3), lineWaypoints({6, 6, 1}, {1, 1, 6})}};
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        const VoxelGrid region = c[k].sweptRegion({8, 8, 8}, freq.voxelSize());
        double score = 0.0;
        for (std::size_t i = 0; i < region.size(); ++i) {
            if (!region.occupied(i)) continue;
            const double p = freq[i];
            if (p > 0.0 && p < 1.0) score += -p * std::log2(p) - (1 - p) * std::log2(1 - p);
        }
        if (score > best_score) {
            best_score = score;
            best = k;
        }
    }
    EXPECT_EQ(selectInformativeProbe(freq, c), best);
    EXPECT_DOUBLE_EQ(binaryEntropy(0.5), 1.0);
    EXPECT_DOUBLE_EQ(binaryEntropy(0.0), 0.0);
}
