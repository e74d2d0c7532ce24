#include "clasp/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "clasp/baselines.hpp"
#include "clasp/parallel.hpp"

namespace clasp {

namespace {

constexpr const char *kVersion = "1.0.0";
constexpr std::uint64_t kNoiseStream = 100;
constexpr std::uint64_t kRejectionStream = 1000;
constexpr std::uint64_t kCombinedStream = 2000;
constexpr std::uint64_t kDatasetStream = 3000;

YAML::Node child(const YAML::Node &node, const std::string &key, const std::string &path) {
    if (!node.IsMap()) throw ConfigError("'" + path + "' must be a mapping");
    YAML::Node value = node[key];
    if (!value) throw ConfigError("missing key '" + (path.empty() ? key : path + "." + key) + "'");
    return value;
}

template <typename T>
T scalar(const YAML::Node &node, const std::string &path) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception &) {
        throw ConfigError("invalid value for '" + path + "'");
    }
}

template <typename T>
T optionalScalar(const YAML::Node &node, const std::string &key, const std::string &path, T fallback) {
    if (!node || !node[key]) return fallback;
    return scalar<T>(node[key], path + "." + key);
}

template <typename T>
std::array<T, 3> triple(const YAML::Node &node, const std::string &path) {
    if (!node.IsSequence() || node.size() != 3) throw ConfigError("'" + path + "' must be a list of 3 numbers");
    return {scalar<T>(node[0], path), scalar<T>(node[1], path), scalar<T>(node[2], path)};
}

Index3 scaled(const Index3 &v, int s) { return {v[0] * s, v[1] * s, v[2] * s}; }
Vec3 scaled(const Vec3 &v, int s) { return {v[0] * s, v[1] * s, v[2] * s}; }

Box parseBox(const YAML::Node &node, const std::string &path, int scale) {
    Box box;
    box.center = scaled(triple<double>(child(node, "center", path), path + ".center"), scale);
    box.extents = scaled(triple<int>(child(node, "extents", path), path + ".extents"), scale);
    return box;
}

std::vector<Box> parseBoxes(const YAML::Node &node, const std::string &path, int scale) {
    if (!node.IsSequence()) throw ConfigError("'" + path + "' must be a list");
    std::vector<Box> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
        out.push_back(parseBox(node[i], path + "[" + std::to_string(i) + "]", scale));
    }
    return out;
}

ShapeClass parseShapeClass(const YAML::Node &root, const std::string &name, int scale) {
    ShapeClass cls;
    cls.name = name;
    if (name == "box") return cls;
    const std::string path = "classes." + name;
    const YAML::Node node = child(child(root, "classes", ""), name, "classes");
    const YAML::Node aux = child(node, "aux", path);
    if (!aux.IsSequence()) throw ConfigError("'" + path + ".aux' must be a list");
    for (std::size_t i = 0; i < aux.size(); ++i) {
        const std::string p = path + ".aux[" + std::to_string(i) + "]";
        AuxBoxPrior a;
        a.center_offset = scaled(triple<double>(child(aux[i], "center_offset", p), p + ".center_offset"), scale);
        if (aux[i]["center_stddev"]) {
            a.center_stddev = scaled(triple<double>(aux[i]["center_stddev"], p + ".center_stddev"), scale);
        }
        a.half_extent = scaled(triple<double>(child(aux[i], "half_extent", p), p + ".half_extent"), scale);
        if (aux[i]["log_extent_stddev"]) {
            a.log_extent_stddev = triple<double>(aux[i]["log_extent_stddev"], p + ".log_extent_stddev");
        }
        cls.aux.push_back(a);
    }
    return cls;
}

ProjectionConfig parseProjection(const YAML::Node &node) {
    ProjectionConfig c;
    const std::string p = "projection";
    c.delta = optionalScalar(node, "delta", p, c.delta);
    c.alpha = optionalScalar(node, "alpha", p, c.alpha);
    c.learning_rate = optionalScalar(node, "learning_rate", p, c.learning_rate);
    c.max_iters = optionalScalar(node, "max_iters", p, c.max_iters);
    c.beta1 = optionalScalar(node, "beta1", p, c.beta1);
    c.beta2 = optionalScalar(node, "beta2", p, c.beta2);
    c.epsilon = optionalScalar(node, "epsilon", p, c.epsilon);
    c.stagnation_window = optionalScalar(node, "stagnation_window", p, c.stagnation_window);
    c.stagnation_tol = optionalScalar(node, "stagnation_tol", p, c.stagnation_tol);
    c.anneal_sharpness = optionalScalar(node, "anneal_sharpness", p, c.anneal_sharpness);
    c.anneal_fraction = optionalScalar(node, "anneal_fraction", p, c.anneal_fraction);
    c.anneal_power = optionalScalar(node, "anneal_power", p, c.anneal_power);
    c.gradient_clip = optionalScalar(node, "gradient_clip", p, c.gradient_clip);
    try {
        c.validate();
    } catch (const ProjectionError &e) {
        throw ConfigError(std::string("projection: ") + e.what());
    }
    return c;
}

ProbeMotion parseProbe(const YAML::Node &node, const std::string &path, int scale, const VoxelGrid &stencil) {
    ProbeMotion motion;
    motion.stencil = stencil;
    std::vector<Index3> points;
    if (node["path"]) {
        const YAML::Node pts = node["path"];
        if (!pts.IsSequence() || pts.size() < 1) throw ConfigError("'" + path + ".path' must be a list of points");
        for (std::size_t i = 0; i < pts.size(); ++i) points.push_back(scaled(triple<int>(pts[i], path + ".path"), scale));
    } else {
        points.push_back(scaled(triple<int>(child(node, "from", path), path + ".from"), scale));
        points.push_back(scaled(triple<int>(child(node, "to", path), path + ".to"), scale));
    }
    motion.waypoints.push_back(points.front());
    for (std::size_t i = 1; i < points.size(); ++i) {
        const auto seg = lineWaypoints(points[i - 1], points[i]);
        motion.waypoints.insert(motion.waypoints.end(), seg.begin() + 1, seg.end());
    }
    return motion;
}

}  // namespace

Profile parseProfile(const std::string &name) {
    if (name == "test") return Profile::Test;
    if (name == "paper") return Profile::Paper;
    throw ConfigError("unknown profile '" + name + "' (expected paper or test)");
}

std::string profileName(Profile profile) { return profile == Profile::Paper ? "paper" : "test"; }
int profileScale(Profile profile) { return profile == Profile::Paper ? 2 : 1; }
std::size_t profileParticles(Profile profile) { return profile == Profile::Paper ? 100 : 30; }

DecoderSpec ScenarioConfig::decoder() const { return DecoderSpec::softBox(scene.object_dims, shape_class.boxes(), sharpness); }

namespace {

void assignPath(YAML::Node node, const std::vector<std::string> &parts, std::size_t i, const YAML::Node &value,
                const std::string &key) {
    if (i + 1 == parts.size()) {
        node[parts[i]] = value;
        return;
    }
    if (!node[parts[i]] || node[parts[i]].IsNull()) node[parts[i]] = YAML::Node(YAML::NodeType::Map);
    YAML::Node next = node[parts[i]];
    if (!next.IsMap()) throw ConfigError("override key '" + key + "' does not address a mapping");
    assignPath(next, parts, i + 1, value, key);
}

}  // namespace

void applyOverride(YAML::Node &root, const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not KEY=VALUE");
    const std::string key = assignment.substr(0, eq);
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
        parts.push_back(part);
    }
    if (parts.empty() || key.back() == '.') throw ConfigError("override key '" + key + "' is malformed");
    YAML::Node value;
    try {
        value = YAML::Load(assignment.substr(eq + 1));
    } catch (const YAML::Exception &) {
        throw ConfigError("override value for '" + key + "' is not valid YAML");
    }
    if (!root.IsMap()) throw ConfigError("scenario document must be a mapping");
    assignPath(root, parts, 0, value, key);
}

ScenarioConfig parseScenario(const YAML::Node &root, Profile profile) {
    if (!root.IsMap()) throw ConfigError("scenario document must be a mapping");
    const int s = profileScale(profile);
    ScenarioConfig c;
    c.name = scalar<std::string>(child(root, "name", ""), "name");

    const YAML::Node scene = child(root, "scene", "");
    c.scene.scene_dims = scaled(triple<int>(child(scene, "dims", "scene"), "scene.dims"), s);
    c.scene.object_dims =
        scene["object_dims"] ? scaled(triple<int>(scene["object_dims"], "scene.object_dims"), s) : c.scene.scene_dims;
    c.scene.voxel_size = scalar<double>(child(scene, "voxel_size", "scene"), "scene.voxel_size") / s;
    if (!(c.scene.voxel_size > 0.0)) throw ConfigError("'scene.voxel_size' must be positive");
    for (int a = 0; a < 3; ++a) {
        if (c.scene.scene_dims[a] <= 0 || c.scene.object_dims[a] <= 0) throw ConfigError("'scene.dims' must be positive");
    }
    if (scene["support"]) c.scene.support = parseBoxes(scene["support"], "scene.support", s);

    const YAML::Node objects = child(root, "objects", "");
    if (!objects.IsSequence() || objects.size() == 0) throw ConfigError("'objects' must be a non-empty list");
    std::string class_name;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const std::string p = "objects[" + std::to_string(i) + "]";
        ObjectSpec obj;
        obj.id = scalar<std::string>(child(objects[i], "id", p), p + ".id");
        obj.shape_class = optionalScalar<std::string>(objects[i], "class", p, "box");
        if (objects[i]["transform"]) obj.transform.translation = scaled(triple<int>(objects[i]["transform"], p + ".transform"), s);
        obj.boxes = parseBoxes(child(objects[i], "boxes", p), p + ".boxes", s);
        if (i == 0) class_name = obj.shape_class;
        if (obj.shape_class != class_name) throw ConfigError("'" + p + ".class': all objects must share one class");
        c.scene.objects.push_back(std::move(obj));
    }
    c.shape_class = parseShapeClass(root, class_name, s);

    if (root["decoder"]) c.sharpness = optionalScalar(root["decoder"], "sharpness", "decoder", c.sharpness);
    if (root["noise"]) {
        c.noise.enabled = optionalScalar(root["noise"], "enabled", "noise", c.noise.enabled);
        c.noise.stddev = optionalScalar(root["noise"], "stddev", "noise", c.noise.stddev);
        c.noise.image_size = optionalScalar(root["noise"], "image_size", "noise", c.noise.image_size);
    }
    c.projection = parseProjection(root["projection"]);

    const YAML::Node probes = child(root, "probes", "");
    const int stencil_side = optionalScalar(probes, "stencil", "probes", 3);
    if (stencil_side <= 0) throw ConfigError("'probes.stencil' must be positive");
    const VoxelGrid stencil = cubeStencil(stencil_side);
    const YAML::Node steps = child(probes, "steps", "probes");
    if (!steps.IsSequence()) throw ConfigError("'probes.steps' must be a list");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const std::string p = "probes.steps[" + std::to_string(i) + "]";
        const YAML::Node cands = child(steps[i], "candidates", p);
        if (!cands.IsSequence() || cands.size() == 0) throw ConfigError("'" + p + ".candidates' must be a non-empty list");
        std::vector<ProbeMotion> motions;
        for (std::size_t k = 0; k < cands.size(); ++k) {
            motions.push_back(parseProbe(cands[k], p + ".candidates[" + std::to_string(k) + "]", s, stencil));
        }
        c.probe_steps.push_back(std::move(motions));
    }

    const YAML::Node run = root["run"];
    c.particles = profileParticles(profile);
    if (run && run["particles"] && profile == Profile::Test) {
        c.particles = scalar<std::size_t>(run["particles"], "run.particles");
    }
    c.steps = optionalScalar(run, "steps", "run", static_cast<int>(c.probe_steps.size()));
    if (c.steps < 0 || c.steps > static_cast<int>(c.probe_steps.size())) {
        throw ConfigError("'run.steps' must lie in [0, number of probe steps]");
    }
    if (c.particles == 0) throw ConfigError("'run.particles' must be at least 1");
    return c;
}

ScenarioConfig loadScenario(const std::string &path, Profile profile, const std::vector<std::string> &overrides) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile &) {
        throw ConfigError("cannot read scenario file " + path);
    } catch (const YAML::Exception &e) {
        throw ConfigError("scenario " + path + ": " + e.what());
    }
    for (const auto &o : overrides) applyOverride(root, o);
    ScenarioConfig c = parseScenario(root, profile);
    YAML::Emitter em;
    em << root;
    c.document = em.c_str();
    return c;
}

ScenarioConfig resolveScenario(const RunSpec &spec) {
    ScenarioConfig c = loadScenario(spec.scenario_path, spec.profile, spec.overrides);
    if (spec.particles) {
        if (*spec.particles == 0) throw ConfigError("--particles must be at least 1");
        c.particles = *spec.particles;
    }
    if (spec.steps) {
        if (*spec.steps < 0 || *spec.steps > static_cast<int>(c.probe_steps.size())) {
            throw ConfigError("--steps must lie in [0, " + std::to_string(c.probe_steps.size()) + "]");
        }
        c.steps = *spec.steps;
    }
    return c;
}

Scene buildScenarioScene(const ScenarioConfig &config) { return buildScene(config.scene); }

std::vector<ObjectObservation> renderViews(const ScenarioConfig &config, const Scene &scene, std::uint64_t seed) {
    std::vector<ObjectObservation> out;
    for (std::size_t j = 0; j < scene.objects.size(); ++j) {
        Rng rng = makeRng(seed, kNoiseStream, j);
        out.push_back({scene.objects[j].id, scene.objects[j].transform, renderDepthView(scene, j, config.noise, rng),
                       config.shape_class});
    }
    return out;
}

namespace {

using ShapeFn = std::function<std::optional<VoxelGrid>(std::size_t)>;

struct StepEvaluation {
    std::vector<std::optional<double>> cds;
    VoxelGrid frequency;
};

StepEvaluation evaluateStep(std::size_t n, const ShapeFn &shape_at, const ChamferReference &truth,
                            const VoxelGrid &support, bool want_frequency) {
    StepEvaluation ev;
    ev.cds.resize(n);
    std::vector<std::optional<VoxelGrid>> shapes(want_frequency ? n : 0);
    parallelFor(n, [&](std::size_t i) {
        auto shape = shape_at(i);
        if (!shape) return;
        ev.cds[i] = evaluationDistance(*shape, truth, support);
        if (want_frequency) shapes[i] = std::move(shape);
    });
    if (want_frequency) ev.frequency = occupancyFrequency(shapes, support.dims(), support.voxelSize());
    return ev;
}

// Contact voxels of one object, moved into its local frame.
VoxelGrid localContacts(const Scene &scene, std::size_t object, const VoxelGrid &contacts, Index3 local_dims) {
    VoxelGrid own(scene.dims, scene.voxel_size);
    for (std::size_t flat : contacts.occupiedIndices()) {
        if (scene.labels[flat] == static_cast<int>(object)) own.setFlat(flat, 1.0);
    }
    return resample(own, scene.objects[object].transform.inverse(), local_dims);
}

}  // namespace


// The support is known to the robot, so touching only support voxels tells
// nothing about the objects: the motion still counts as swept free space.
Observation dropEnvironmentContact(const Scene &scene, Observation obs) {
    if (!obs.hasContact() || !obs.true_contact_voxels) return obs;
    if (setDifference(*obs.true_contact_voxels, scene.support).occupiedCount() == 0) {
        obs.chs.reset();
        obs.true_contact_voxels.reset();
    }
    return obs;
}

ScenarioRun runScenario(const ScenarioConfig &config, Method method, std::uint64_t seed,
                        const StepObserver &observer) {
    const Scene scene = buildScenarioScene(config);
    const auto views = renderViews(config, scene, seed);
    const DecoderSpec spec = config.decoder();
    const ProjectionConfig &pc = config.projection;
    const std::size_t n = config.particles;
    const ChamferReference truth(scene.objectOccupancy());
    const UpdateOptions options = UpdateOptions::forMethod(method);

    ScenarioRun run;
    run.record = {config.name, methodName(method), seed, {}};
    Belief belief = initBelief(views, scene.dims, scene.voxel_size, n, seed);
    const Belief initial = belief;
    VoxelGrid true_contacts(scene.dims, scene.voxel_size);
    VoxelGrid frequency;

    for (int step = 0; step <= config.steps; ++step) {
        try {
            StepTrace trace;
            trace.step = step;
            if (step > 0) {
                const auto &candidates = config.probe_steps[static_cast<std::size_t>(step - 1)];
                trace.chosen_probe = selectInformativeProbe(frequency, candidates);
                const Observation obs =
                    dropEnvironmentContact(scene, sweepProbe(scene, candidates[trace.chosen_probe], belief.knownFree()));
                trace.contact = obs.hasContact();
                if (obs.true_contact_voxels) true_contacts = setUnion(true_contacts, *obs.true_contact_voxels);
                if (isProjectionMethod(method)) {
                    belief = updateBelief(belief, obs, spec, pc, options, seed, step);
                } else {
                    registerObservation(belief, obs);
                }
            }
            if (observer) observer(step, belief);

            ShapeFn shape_at;
            std::vector<SceneSample> samples;
            std::vector<char> selected;
            std::vector<SoftRejectionPick> picks;
            Belief sampled;
            VoxelGrid known_free;
            switch (method) {
                case Method::Clasp:
                case Method::ClaspIgnorePrior:
                case Method::ClaspAcceptFailed:
                case Method::ClaspNoDisambiguation:
                    shape_at = [&](std::size_t i) -> std::optional<VoxelGrid> {
                        const Particle &p = belief.particles[i];
                        if (!p.valid) return std::nullopt;
                        return decodeParticle(belief, p, spec);
                    };
                    break;
                case Method::Rejection:
                case Method::SoftRejection: {
                    samples = rejectionSample(belief, spec, pc, n, seed, kRejectionStream + static_cast<std::uint64_t>(step));
                    const auto accepted =
                        std::count_if(samples.begin(), samples.end(), [](const SceneSample &s) { return s.accepted(); });
                    trace.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(n);
                    if (method == Method::Rejection) {
                        for (std::size_t i = 0; i < n; ++i) {
                            picks.push_back({i, false});
                            selected.push_back(samples[i].accepted());
                        }
                    } else {
                        const auto chosen = softRejectionSelect(samples);
                        selected.assign(n, 0);
                        picks.assign(n, {});
                        for (const auto &pick : chosen) {
                            selected[pick.index] = 1;
                            picks[pick.index] = pick;
                        }
                    }
                    shape_at = [&](std::size_t i) -> std::optional<VoxelGrid> {
                        if (!selected[i]) return std::nullopt;
                        return softRejectionShape(belief, samples[i], picks[i], spec, true_contacts);
                    };
                    break;
                }
                case Method::DirectEdit:
                    known_free = belief.knownFree();
                    shape_at = [&](std::size_t i) -> std::optional<VoxelGrid> {
                        return directEdit(decodeParticle(initial, initial.particles[i], spec), known_free, true_contacts);
                    };
                    break;
                case Method::CombinedInputPrior: {
                    sampled = belief;
                    if (step > 0) {
                        for (std::size_t j = 0; j < sampled.objects.size(); ++j) {
                            auto &obj = sampled.objects[j];
                            const VoxelGrid robot = resample(belief.robot_free, obj.transform.inverse(), spec.dims());
                            const VoxelGrid contacts = localContacts(scene, j, true_contacts, spec.dims());
                            obj.prior = combinedInputPrior(obj.view, robot, contacts, config.shape_class);
                        }
                        for (std::size_t i = 0; i < n; ++i) {
                            Rng rng = makeRng(seed, kCombinedStream + static_cast<std::uint64_t>(step), i);
                            for (std::size_t j = 0; j < sampled.objects.size(); ++j) {
                                sampled.particles[i].latents[j] = sampleLatent(sampled.objects[j].prior, rng);
                            }
                        }
                    }
                    shape_at = [&](std::size_t i) -> std::optional<VoxelGrid> {
                        return decodeParticle(sampled, sampled.particles[i], spec);
                    };
                    break;
                }
            }

            const bool more = step < config.steps;
            StepEvaluation ev = evaluateStep(n, shape_at, truth, scene.support, more);
            if (more) frequency = std::move(ev.frequency);
            run.record.steps.push_back(makeStepRecord(step, std::move(ev.cds)));
            run.trace.push_back(trace);
        } catch (const ConfigError &) {
            throw;
        } catch (const std::exception &e) {
            throw std::runtime_error(config.name + " " + methodName(method) + " step " + std::to_string(step) + ": " + e.what());
        }
    }
    if (isProjectionMethod(method)) run.belief = std::move(belief);
    return run;
}

std::vector<RunRecord> compareMethods(const ScenarioConfig &config, const std::vector<Method> &methods,
                                      std::uint64_t seed) {
    if (methods.empty()) throw ConfigError("no methods to compare");
    std::vector<RunRecord> out;
    for (Method m : methods) out.push_back(runScenario(config, m, seed).record);
    return out;
}

std::string manifestYaml(const RunSpec &spec, const ScenarioConfig &config, const std::vector<std::string> &methods) {
    YAML::Emitter em;
    em << YAML::BeginMap;
    em << YAML::Key << "tool" << YAML::Value << "clasp";
    em << YAML::Key << "version" << YAML::Value << kVersion;
    em << YAML::Key << "scenario" << YAML::Value << config.name;
    em << YAML::Key << "scenario_path" << YAML::Value << spec.scenario_path;
    em << YAML::Key << "profile" << YAML::Value << profileName(spec.profile);
    em << YAML::Key << "methods" << YAML::Value << YAML::Flow << methods;
    em << YAML::Key << "seed" << YAML::Value << spec.seed;
    em << YAML::Key << "particles" << YAML::Value << config.particles;
    em << YAML::Key << "steps" << YAML::Value << config.steps;
    em << YAML::Key << "overrides" << YAML::Value << YAML::Flow << spec.overrides;
    em << YAML::Key << "config" << YAML::Value << YAML::Load(config.document);
    em << YAML::EndMap;
    return std::string(em.c_str()) + "\n";
}

ManifestReplay loadManifest(const std::string &path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::Exception &e) {
        throw ConfigError("manifest " + path + ": " + e.what());
    }
    ManifestReplay r;
    r.spec.scenario_path = scalar<std::string>(child(root, "scenario_path", ""), "scenario_path");
    r.spec.profile = parseProfile(scalar<std::string>(child(root, "profile", ""), "profile"));
    r.spec.seed = scalar<std::uint64_t>(child(root, "seed", ""), "seed");
    r.spec.particles = scalar<std::size_t>(child(root, "particles", ""), "particles");
    r.spec.steps = scalar<int>(child(root, "steps", ""), "steps");
    if (root["overrides"]) r.spec.overrides = scalar<std::vector<std::string>>(root["overrides"], "overrides");
    for (const auto &name : scalar<std::vector<std::string>>(child(root, "methods", ""), "methods")) {
        try {
            r.methods.push_back(parseMethod(name));
        } catch (const BeliefError &e) {
            throw ConfigError(std::string("methods: ") + e.what());
        }
    }
    if (r.methods.empty()) throw ConfigError("manifest lists no methods");
    r.spec.method = r.methods.front();
    const YAML::Node document = child(root, "config", "");
    r.config = parseScenario(document, r.spec.profile);
    YAML::Emitter em;
    em << document;
    r.config.document = em.c_str();
    r.config.particles = *r.spec.particles;
    if (*r.spec.steps < 0 || *r.spec.steps > static_cast<int>(r.config.probe_steps.size())) {
        throw ConfigError("manifest steps out of range");
    }
    r.config.steps = *r.spec.steps;
    return r;
}

void writeRunOutputs(const RunSpec &spec, const ScenarioConfig &config, const std::vector<RunRecord> &records,
                     const std::vector<std::string> &methods) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(spec.out_dir, ec);
    if (ec) throw MetricsError("cannot create output directory " + spec.out_dir + ": " + ec.message());
    const fs::path dir(spec.out_dir);
    writeResultsCsv(records, (dir / "results.csv").string());
    writeStatsCsv(records, (dir / "stats.csv").string());
    std::ofstream manifest(dir / "manifest.yaml", std::ios::binary);
    if (!manifest) throw MetricsError("cannot write manifest in " + spec.out_dir);
    manifest << manifestYaml(spec, config, methods);
}

std::vector<DatasetEntry> sampleDataset(const DatasetParams &params, std::uint64_t seed) {
    if (params.count == 0) throw ConfigError("dataset count must be at least 1");
    if (params.min_extent < 1 || params.max_extent < params.min_extent) throw ConfigError("invalid extent range");
    for (int a = 0; a < 3; ++a) {
        if (params.max_extent > params.dims[a]) throw ConfigError("extent range exceeds grid dims");
    }
    std::vector<DatasetEntry> out;
    for (std::size_t i = 0; i < params.count; ++i) {
        Rng rng = makeRng(seed, kDatasetStream, i);
        std::uniform_int_distribution<int> extent(params.min_extent, params.max_extent);
        std::uniform_int_distribution<int> shift(-params.max_translation, params.max_translation);
        DatasetEntry e;
        for (int a = 0; a < 3; ++a) e.extents[a] = extent(rng);
        for (int a = 0; a < 3; ++a) e.translation[a] = shift(rng);
        for (int a = 0; a < 3; ++a) {
            const int n = params.dims[a];
            const int lo = (n - e.extents[a]) / 2 + e.translation[a];
            const int clamped = std::clamp(lo, 0, n - e.extents[a]);
            e.translation[a] += clamped - lo;
            e.box.center[a] = clamped + 0.5 * e.extents[a];
            e.box.extents[a] = e.extents[a];
        }
        char name[32];
        std::snprintf(name, sizeof name, "shape_%05zu.cvgr", i);
        e.file = name;
        out.push_back(e);
    }
    return out;
}

std::vector<DatasetEntry> generateDataset(const DatasetParams &params, std::uint64_t seed, const std::string &out_dir) {
    namespace fs = std::filesystem;
    auto entries = sampleDataset(params, seed);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw MetricsError("cannot create output directory " + out_dir + ": " + ec.message());
    const fs::path dir(out_dir);
    YAML::Emitter em;
    em << YAML::BeginMap;
    em << YAML::Key << "kind" << YAML::Value << "aab";
    em << YAML::Key << "seed" << YAML::Value << seed;
    em << YAML::Key << "dims" << YAML::Value << YAML::Flow << std::vector<int>(params.dims.begin(), params.dims.end());
    em << YAML::Key << "voxel_size" << YAML::Value << params.voxel_size;
    em << YAML::Key << "extent_range" << YAML::Value << YAML::Flow
       << std::vector<int>{params.min_extent, params.max_extent};
    em << YAML::Key << "max_translation" << YAML::Value << params.max_translation;
    em << YAML::Key << "shapes" << YAML::Value << YAML::BeginSeq;
    for (const auto &e : entries) {
        saveGrid(rasterizeBoxes({e.box}, params.dims, params.voxel_size), (dir / e.file).string());
        em << YAML::BeginMap;
        em << YAML::Key << "file" << YAML::Value << e.file;
        em << YAML::Key << "extents" << YAML::Value << YAML::Flow << std::vector<int>(e.extents.begin(), e.extents.end());
        em << YAML::Key << "translation" << YAML::Value << YAML::Flow
           << std::vector<int>(e.translation.begin(), e.translation.end());
        em << YAML::EndMap;
    }
    em << YAML::EndSeq << YAML::EndMap;
    std::ofstream manifest(dir / "manifest.yaml", std::ios::binary);
    if (!manifest) throw MetricsError("cannot write dataset manifest in " + out_dir);
    manifest << em.c_str() << "\n";
    return entries;
}

}  // namespace clasp
