#include "clasp/scene.hpp"

#include <algorithm>
#include <cmath>

namespace clasp {

Rng makeRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

VoxelGrid rasterizeBoxes(const std::vector<Box> &boxes, Index3 dims, double voxel_size) {
    VoxelGrid grid(dims, voxel_size);
    for (const auto &box : boxes) {
        int lo[3], hi[3];
        for (int a = 0; a < 3; ++a) {
            if (box.extents[a] <= 0) throw SceneError("box extent must be positive");
            const double half = 0.5 * box.extents[a];
            // voxels with |i + 0.5 - c| < half
            lo[a] = static_cast<int>(std::floor(box.center[a] - half - 0.5)) + 1;
            hi[a] = static_cast<int>(std::ceil(box.center[a] + half - 0.5)) - 1;
            if (lo[a] > hi[a]) throw SceneError("box covers no voxel centers");
            if (lo[a] < 0 || hi[a] >= dims[a]) throw SceneError("box extends outside its grid");
        }
        for (int z = lo[2]; z <= hi[2]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[0]; x <= hi[0]; ++x) grid.set(x, y, z, 1.0);
    }
    return grid;
}

VoxelGrid Scene::objectOccupancy() const {
    VoxelGrid out(dims, voxel_size);
    for (const auto &obj : objects) out = setUnion(out, resample(obj.shape, obj.transform, dims));
    return out;
}

Scene buildScene(const SceneConfig &config) {
    if (config.objects.empty()) throw SceneError("scene has no objects");
    Scene scene;
    scene.dims = config.scene_dims;
    scene.voxel_size = config.voxel_size;
    scene.occupancy = VoxelGrid(config.scene_dims, config.voxel_size);
    scene.support = config.support.empty() ? VoxelGrid(config.scene_dims, config.voxel_size)
                                           : rasterizeBoxes(config.support, config.scene_dims, config.voxel_size);
    scene.labels.assign(scene.occupancy.size(), -1);
    for (std::size_t i = 0; i < scene.support.size(); ++i) {
        if (scene.support.occupied(i)) {
            scene.labels[i] = -2;
            scene.occupancy.setFlat(i, 1.0);
        }
    }
    for (std::size_t j = 0; j < config.objects.size(); ++j) {
        const auto &spec = config.objects[j];
        if (spec.boxes.empty()) throw SceneError("object '" + spec.id + "' has no boxes");
        SceneObject obj{spec.id, spec.shape_class, rasterizeBoxes(spec.boxes, config.object_dims, config.voxel_size),
                        spec.transform};
        for (std::size_t flat : obj.shape.occupiedIndices()) {
            const Index3 s = obj.transform.apply(obj.shape.coord(flat));
            if (!scene.occupancy.inBounds(s)) {
                throw SceneError("object '" + spec.id + "' lies outside the scene bounds");
            }
            const auto si = scene.occupancy.index(s);
            scene.occupancy.setFlat(si, 1.0);
            if (scene.labels[si] == -1) scene.labels[si] = static_cast<int>(j);
        }
        scene.objects.push_back(std::move(obj));
    }
    return scene;
}

std::vector<int> sampleDepthNoise(const NoiseParams &noise, double voxel_size, int ny, int nz, Rng &rng) {
    std::vector<int> out(static_cast<std::size_t>(ny) * nz, 0);
    if (!noise.enabled) return out;
    const int m = std::max(noise.image_size, 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> image(static_cast<std::size_t>(m) * m);
    for (auto &v : image) v = noise.stddev * normal(rng);
    auto sampleAxis = [m](int i, int n, int &i0, int &i1, double &t) {
        const double u = n > 1 ? double(i) * (m - 1) / (n - 1) : 0.0;
        i0 = std::min(static_cast<int>(std::floor(u)), m - 1);
        i1 = std::min(i0 + 1, m - 1);
        t = u - i0;
    };
    for (int z = 0; z < nz; ++z) {
        int z0, z1;
        double tz;
        sampleAxis(z, nz, z0, z1, tz);
        for (int y = 0; y < ny; ++y) {
            int y0, y1;
            double ty;
            sampleAxis(y, ny, y0, y1, ty);
            const double v00 = image[y0 + m * z0], v10 = image[y1 + m * z0];
            const double v01 = image[y0 + m * z1], v11 = image[y1 + m * z1];
            const double v = (1 - ty) * (1 - tz) * v00 + ty * (1 - tz) * v10 + (1 - ty) * tz * v01 + ty * tz * v11;
            out[y + static_cast<std::size_t>(ny) * z] = static_cast<int>(std::lround(v / voxel_size));
        }
    }
    return out;
}

// Noisy hit depth sets both the occupied voxel and the free prefix in front of it.
DepthView renderDepthView(const Scene &scene, std::size_t object_index, const NoiseParams &noise, Rng &rng) {
    if (object_index >= scene.objects.size()) throw SceneError("no such object");
    const auto &obj = scene.objects[object_index];
    const Index3 dims = obj.shape.dims();
    const auto [nx, ny, nz] = dims;
    DepthView view{VoxelGrid(dims, scene.voxel_size), VoxelGrid(dims, scene.voxel_size),
                   noise.enabled ? noise.stddev / scene.voxel_size : 0.0};
    const auto shift = sampleDepthNoise(noise, scene.voxel_size, ny, nz, rng);
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            int hit = -1;
            int label = -1;
            for (int x = 0; x < nx; ++x) {
                const Index3 s = obj.transform.apply({x, y, z});
                if (!scene.occupancy.inBounds(s)) continue;
                const auto si = scene.occupancy.index(s);
                if (scene.occupancy.occupied(si)) {
                    hit = x;
                    label = scene.labels[si];
                    break;
                }
            }
            if (hit < 0) {
                for (int x = 0; x < nx; ++x) view.known_free.set(x, y, z, 1.0);
                continue;
            }
            const int depth = std::clamp(hit + shift[y + static_cast<std::size_t>(ny) * z], 0, nx - 1);
            if (label == static_cast<int>(object_index)) view.known_occupied.set(depth, y, z, 1.0);
            for (int x = 0; x < depth; ++x) view.known_free.set(x, y, z, 1.0);
        }
    }
    return view;
}

VoxelGrid cubeStencil(int side) {
    if (side <= 0) throw SceneError("stencil side must be positive");
    return VoxelGrid({side, side, side}, kDefaultVoxelSize, {}, 1.0);
}

VoxelGrid ProbeMotion::stamp(const Index3 &waypoint, Index3 dims, double voxel_size) const {
    VoxelGrid out(dims, voxel_size);
    const Index3 &sd = stencil.dims();
    const Index3 offset{waypoint[0] - sd[0] / 2, waypoint[1] - sd[1] / 2, waypoint[2] - sd[2] / 2};
    for (std::size_t flat : stencil.occupiedIndices()) {
        const Index3 l = stencil.coord(flat);
        const Index3 s{l[0] + offset[0], l[1] + offset[1], l[2] + offset[2]};
        if (out.inBounds(s)) out.set(s, 1.0);
    }
    return out;
}

VoxelGrid ProbeMotion::sweptRegion(Index3 dims, double voxel_size) const {
    VoxelGrid out(dims, voxel_size);
    for (const auto &w : waypoints) out = setUnion(out, stamp(w, dims, voxel_size));
    return out;
}

std::vector<Index3> lineWaypoints(const Index3 &from, const Index3 &to) {
    int steps = 0;
    for (int a = 0; a < 3; ++a) steps = std::max(steps, std::abs(to[a] - from[a]));
    std::vector<Index3> out;
    out.reserve(steps + 1);
    for (int s = 0; s <= steps; ++s) {
        Index3 p;
        for (int a = 0; a < 3; ++a) {
            const double t = steps == 0 ? 0.0 : double(s) / steps;
            p[a] = from[a] + static_cast<int>(std::lround(t * (to[a] - from[a])));
        }
        out.push_back(p);
    }
    return out;
}

Observation sweepProbe(const Scene &scene, const ProbeMotion &motion, const VoxelGrid &known_free_so_far) {
    if (motion.waypoints.empty()) throw SceneError("probe motion has no waypoints");
    if (known_free_so_far.dims() != scene.dims) throw DimensionMismatch("known free grid does not match scene");
    for (std::size_t i = 0; i < motion.waypoints.size(); ++i) {
        const auto &w = motion.waypoints[i];
        if (!scene.occupancy.inBounds(w)) throw SceneError("waypoint outside the scene");
        if (i > 0) {
            const auto &p = motion.waypoints[i - 1];
            for (int a = 0; a < 3; ++a) {
                if (std::abs(w[a] - p[a]) > 1) throw SceneError("waypoints must advance at most one voxel per axis");
            }
        }
    }
    Observation obs{VoxelGrid(scene.dims, scene.voxel_size), std::nullopt, std::nullopt};
    for (const auto &w : motion.waypoints) {
        VoxelGrid stamp = motion.stamp(w, scene.dims, scene.voxel_size);
        if (overlapCount(stamp, scene.occupancy) == 0) {
            obs.swept_free = setUnion(obs.swept_free, stamp);
            continue;
        }
        VoxelGrid region = setDifference(stamp, setUnion(known_free_so_far, obs.swept_free));
        if (region.occupiedCount() == 0) {
            // Only reachable when noisy vision marked contacted voxels free.
            region = setDifference(stamp, obs.swept_free);
        }
        obs.true_contact_voxels = setIntersection(stamp, scene.occupancy);
        obs.chs = CollisionHypothesisSet{std::move(region)};
        break;
    }
    return obs;
}

double binaryEntropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

std::size_t selectInformativeProbe(const VoxelGrid &occupancy_frequency, const std::vector<ProbeMotion> &candidates) {
    if (candidates.empty()) throw SceneError("no candidate probes");
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const VoxelGrid region = candidates[c].sweptRegion(occupancy_frequency.dims(), occupancy_frequency.voxelSize());
        double score = 0.0;
        for (std::size_t flat : region.occupiedIndices()) score += binaryEntropy(occupancy_frequency[flat]);
        if (score > best_score) {
            best_score = score;
            best = c;
        }
    }
    return best;
}

}  // namespace clasp
