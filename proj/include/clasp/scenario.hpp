#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clasp/belief.hpp"
#include "clasp/metrics.hpp"
#include "clasp/projection.hpp"
#include "clasp/scene.hpp"
#include "clasp/shape_model.hpp"

namespace YAML {
class Node;
}

namespace clasp {

// Malformed or inconsistent configuration; the message names the key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Scenarios are authored at test scale. Profile::Paper doubles every
// length in voxels and halves the voxel size.
enum class Profile { Test, Paper };

Profile parseProfile(const std::string &name);
std::string profileName(Profile profile);
int profileScale(Profile profile);
std::size_t profileParticles(Profile profile);

struct ScenarioConfig {
    std::string name;
    SceneConfig scene;
    ShapeClass shape_class;  // shared by every object
    double sharpness = 8.0;
    NoiseParams noise;
    ProjectionConfig projection;
    std::size_t particles = 30;
    int steps = 0;
    std::vector<std::vector<ProbeMotion>> probe_steps;  // candidates per step
    std::string document;  // source document with overrides applied, authored scale

    DecoderSpec decoder() const;
};

// KEY=VALUE with a dotted key into the scenario document.
void applyOverride(YAML::Node &root, const std::string &assignment);

ScenarioConfig parseScenario(const YAML::Node &root, Profile profile);
ScenarioConfig loadScenario(const std::string &path, Profile profile, const std::vector<std::string> &overrides = {});

struct RunSpec {
    std::string scenario_path;
    Method method = Method::Clasp;
    std::optional<std::size_t> particles;
    std::optional<int> steps;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    Profile profile = Profile::Test;
    std::vector<std::string> overrides;
};

// Applies the run spec's particle and step counts on top of a scenario.
ScenarioConfig resolveScenario(const RunSpec &spec);

// Per-step diagnostics that do not go into the result tables.
struct StepTrace {
    int step = 0;
    std::size_t chosen_probe = 0;
    bool contact = false;
    double acceptance_rate = 0.0;  // rejection-style methods
};

struct ScenarioRun {
    RunRecord record;
    std::vector<StepTrace> trace;
    std::optional<Belief> belief;  // final belief for projection-based methods
};

// Contacts that touch only support voxels are dropped; the swept free space stays.
Observation dropEnvironmentContact(const Scene &scene, Observation obs);

// Called once per step with the belief after that step's update.
using StepObserver = std::function<void(int step, const Belief &belief)>;

// Builds the scene, renders views, runs `steps` observations with `method`
// and evaluates every step. Deterministic in (config, method, seed).
// Failures inside a step are rethrown with the scenario, method and step.
ScenarioRun runScenario(const ScenarioConfig &config, Method method, std::uint64_t seed,
                        const StepObserver &observer = {});

Scene buildScenarioScene(const ScenarioConfig &config);
std::vector<ObjectObservation> renderViews(const ScenarioConfig &config, const Scene &scene, std::uint64_t seed);

std::string manifestYaml(const RunSpec &spec, const ScenarioConfig &config, const std::vector<std::string> &methods);

struct ManifestReplay {
    RunSpec spec;
    ScenarioConfig config;
    std::vector<Method> methods;
};

// Reads a run manifest back into the exact configuration it records.
ManifestReplay loadManifest(const std::string &path);

// Writes results.csv, stats.csv and manifest.yaml into spec.out_dir.
void writeRunOutputs(const RunSpec &spec, const ScenarioConfig &config, const std::vector<RunRecord> &records,
                     const std::vector<std::string> &methods);

std::vector<RunRecord> compareMethods(const ScenarioConfig &config, const std::vector<Method> &methods,
                                      std::uint64_t seed);

struct DatasetEntry {
    std::string file;
    Index3 extents{0, 0, 0};
    Index3 translation{0, 0, 0};
    Box box;
};

struct DatasetParams {
    std::size_t count = 100;
    Index3 dims{64, 64, 64};
    int min_extent = 2;
    int max_extent = 41;
    int max_translation = 10;
    double voxel_size = kDefaultVoxelSize;
};

// Random axis-aligned boxes centred in the grid, shifted by a random
// translation and clamped to stay inside. Writes one grid file per box plus
// manifest.yaml into `out_dir`.
std::vector<DatasetEntry> generateDataset(const DatasetParams &params, std::uint64_t seed, const std::string &out_dir);
std::vector<DatasetEntry> sampleDataset(const DatasetParams &params, std::uint64_t seed);

}  // namespace clasp
