#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "clasp/voxel_grid.hpp"

namespace clasp {

using Rng = std::mt19937_64;

// Independent generator for (seed, stream, index); used to give every
// particle and every stochastic stage its own reproducible stream.
Rng makeRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

struct SceneError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Axis-aligned box in voxel units. A voxel i is inside iff
// |i + 0.5 - center| < extents / 2 on every axis.
struct Box {
    Vec3 center{0.0, 0.0, 0.0};
    Index3 extents{1, 1, 1};
};

VoxelGrid rasterizeBoxes(const std::vector<Box> &boxes, Index3 dims, double voxel_size = kDefaultVoxelSize);

struct ObjectSpec {
    std::string id;
    std::string shape_class = "box";
    GridTransform transform;  // local grid -> scene grid
    std::vector<Box> boxes;   // composite, in the local grid
};

struct SceneConfig {
    Index3 scene_dims{32, 32, 32};
    Index3 object_dims{32, 32, 32};
    double voxel_size = kDefaultVoxelSize;
    std::vector<ObjectSpec> objects;
    std::vector<Box> support;  // scene frame; occludes and collides, excluded from evaluation
};

struct SceneObject {
    std::string id;
    std::string shape_class;
    VoxelGrid shape;  // binary, local grid
    GridTransform transform;
};

struct Scene {
    std::vector<SceneObject> objects;
    Index3 dims{0, 0, 0};
    double voxel_size = kDefaultVoxelSize;
    VoxelGrid occupancy;        // objects and support
    VoxelGrid support;          // evaluation mask
    std::vector<int> labels;    // per scene voxel: object index, -2 support, -1 free

    // Union of object shapes only, in the scene frame.
    VoxelGrid objectOccupancy() const;
};

Scene buildScene(const SceneConfig &config);

struct NoiseParams {
    bool enabled = false;
    double stddev = 0.02;  // meters, applied along the view (x) axis
    int image_size = 16;
};

struct DepthView {
    VoxelGrid known_occupied;
    VoxelGrid known_free;
    double depth_noise_voxels = 0.0;
};

// 2.5D view of one object along +x in the object's local grid.
DepthView renderDepthView(const Scene &scene, std::size_t object_index, const NoiseParams &noise, Rng &rng);

// Per-column depth perturbation in voxels: a coarse image of i.i.d. Gaussian
// samples bilinearly upscaled to (ny, nz), rounded to whole voxels.
std::vector<int> sampleDepthNoise(const NoiseParams &noise, double voxel_size, int ny, int nz, Rng &rng);

struct CollisionHypothesisSet {
    VoxelGrid region;  // scene frame
};

struct ProbeMotion {
    VoxelGrid stencil;              // binary; its center voxel sits on each waypoint
    std::vector<Index3> waypoints;  // scene voxels, unit steps

    // Stencil placed with its center voxel at `waypoint`, clipped to `dims`.
    VoxelGrid stamp(const Index3 &waypoint, Index3 dims, double voxel_size) const;
    // Union of all stamps along the motion.
    VoxelGrid sweptRegion(Index3 dims, double voxel_size) const;
};

VoxelGrid cubeStencil(int side = 3);

// Waypoints from `from` to `to` advancing at most one voxel per axis per step.
std::vector<Index3> lineWaypoints(const Index3 &from, const Index3 &to);

struct Observation {
    VoxelGrid swept_free;
    std::optional<CollisionHypothesisSet> chs;
    std::optional<VoxelGrid> true_contact_voxels;  // oracle baselines only

    bool hasContact() const { return chs.has_value(); }
};

Observation sweepProbe(const Scene &scene, const ProbeMotion &motion, const VoxelGrid &known_free_so_far);

double binaryEntropy(double p);

// Index of the candidate whose swept region carries the largest summed
// occupancy entropy; ties go to the lowest index.
std::size_t selectInformativeProbe(const VoxelGrid &occupancy_frequency, const std::vector<ProbeMotion> &candidates);

}  // namespace clasp
