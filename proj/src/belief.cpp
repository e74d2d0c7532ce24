#include "clasp/belief.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "clasp/parallel.hpp"

namespace clasp {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kUpdateStream = 1;

const std::vector<std::pair<Method, std::string>> &methodTable() {
    static const std::vector<std::pair<Method, std::string>> table{
        {Method::Clasp, "clasp"},
        {Method::ClaspIgnorePrior, "clasp-ignore-prior"},
        {Method::ClaspAcceptFailed, "clasp-accept-failed"},
        {Method::ClaspNoDisambiguation, "clasp-no-disambiguation"},
        {Method::Rejection, "rejection"},
        {Method::SoftRejection, "soft-rejection"},
        {Method::DirectEdit, "direct-edit"},
        {Method::CombinedInputPrior, "combined-input-prior"},
    };
    return table;
}

struct Trial {
    int object;
    ProjectionResult result;
};

}  // namespace

std::string methodName(Method method) {
    for (const auto &[m, name] : methodTable()) {
        if (m == method) return name;
    }
    throw BeliefError("unknown method");
}

Method parseMethod(const std::string &name) {
    for (const auto &[m, n] : methodTable()) {
        if (n == name) return m;
    }
    throw BeliefError("unknown method '" + name + "'");
}

const std::vector<Method> &allMethods() {
    static const std::vector<Method> methods = [] {
        std::vector<Method> out;
        for (const auto &entry : methodTable()) out.push_back(entry.first);
        return out;
    }();
    return methods;
}

bool isProjectionMethod(Method method) {
    return method == Method::Clasp || method == Method::ClaspIgnorePrior || method == Method::ClaspAcceptFailed ||
           method == Method::ClaspNoDisambiguation;
}

UpdateOptions UpdateOptions::forMethod(Method method) {
    UpdateOptions o;
    o.ignore_prior = method == Method::ClaspIgnorePrior;
    o.accept_failed = method == Method::ClaspAcceptFailed;
    o.no_disambiguation = method == Method::ClaspNoDisambiguation;
    return o;
}

std::size_t Belief::validCount() const {
    return static_cast<std::size_t>(
        std::count_if(particles.begin(), particles.end(), [](const Particle &p) { return p.valid; }));
}

VoxelGrid Belief::knownFree() const {
    VoxelGrid out = robot_free;
    for (const auto &obj : objects) out = setUnion(out, resample(obj.view.known_free, obj.transform, scene_dims));
    return out;
}

Belief initBelief(const std::vector<ObjectObservation> &objects, Index3 scene_dims, double voxel_size,
                  std::size_t particle_count, std::uint64_t seed) {
    if (objects.empty()) throw BeliefError("belief needs at least one object");
    if (particle_count == 0) throw BeliefError("particle count must be at least 1");
    Belief belief;
    belief.scene_dims = scene_dims;
    belief.voxel_size = voxel_size;
    belief.robot_free = VoxelGrid(scene_dims, voxel_size);
    for (const auto &obs : objects) {
        belief.objects.push_back({obs.id, obs.transform, obs.view, priorFromView(obs.view, obs.shape_class)});
    }
    belief.particles.resize(particle_count);
    for (std::size_t i = 0; i < particle_count; ++i) {
        Rng rng = makeRng(seed, kInitStream, i);
        for (const auto &obj : belief.objects) belief.particles[i].latents.push_back(sampleLatent(obj.prior, rng));
    }
    return belief;
}

ConstraintContext::ConstraintContext(const Belief &belief, const DecoderSpec &spec) {
    const std::size_t n_obj = belief.objects.size();
    for (const auto &obj : belief.objects) {
        if (obj.view.known_free.dims() != spec.dims()) throw DimensionMismatch("object view does not match decoder");
        VoxelGrid free = setUnion(obj.view.known_free, resample(belief.robot_free, obj.transform.inverse(), spec.dims()));
        free_idx_.push_back(free.occupiedIndices());
        local_free_.push_back(std::move(free));
    }
    for (const auto &contact : belief.contacts) {
        std::vector<VoxelGrid> grids;
        std::vector<std::vector<std::size_t>> idx;
        for (std::size_t j = 0; j < n_obj; ++j) {
            const auto &obj = belief.objects[j];
            VoxelGrid local = setDifference(resample(contact.region, obj.transform.inverse(), spec.dims()), local_free_[j]);
            idx.push_back(local.occupiedIndices());
            grids.push_back(std::move(local));
        }
        local_chs_.push_back(std::move(grids));
        chs_idx_.push_back(std::move(idx));
    }
}

CompiledConstraints ConstraintContext::compiled(std::size_t object, const std::vector<int> &contacts) const {
    std::vector<std::vector<std::size_t>> chs;
    for (int c : contacts) chs.push_back(chs_idx_.at(static_cast<std::size_t>(c))[object]);
    return CompiledConstraints(free_idx_[object], std::move(chs));
}

ConstraintSet ConstraintContext::constraintSet(std::size_t object, const std::vector<int> &contacts) const {
    ConstraintSet out{local_free_[object], {}};
    for (int c : contacts) out.chs.push_back(local_chs_.at(static_cast<std::size_t>(c))[object]);
    return out;
}

std::vector<int> ConstraintContext::assignedContacts(const Particle &particle, std::size_t object) {
    std::vector<int> out;
    for (const auto &[contact, objs] : particle.assignments) {
        if (std::find(objs.begin(), objs.end(), static_cast<int>(object)) != objs.end()) out.push_back(contact);
    }
    return out;
}

std::vector<int> assignContact(const Belief &belief, const ConstraintContext &context, Particle &particle,
                               int contact, const DecoderSpec &spec, const ProjectionConfig &config,
                               const UpdateOptions &options, Rng &rng) {
    std::vector<int> region;
    for (std::size_t j = 0; j < belief.objects.size(); ++j) {
        if (context.chsReaches(static_cast<std::size_t>(contact), j)) region.push_back(static_cast<int>(j));
    }
    if (region.empty()) return {};

    std::vector<CompiledConstraints> constraints;
    for (int j : region) {
        auto contacts = ConstraintContext::assignedContacts(particle, static_cast<std::size_t>(j));
        contacts.push_back(contact);
        constraints.push_back(context.compiled(static_cast<std::size_t>(j), contacts));
    }

    std::vector<Trial> all, feasible;
    for (std::size_t r = 0; r < region.size(); ++r) {
        const auto j = static_cast<std::size_t>(region[r]);
        auto result = project(spec, particle.latents[j], belief.objects[j].prior, constraints[r], config);
        if (result.satisfied()) feasible.push_back({region[r], result});
        all.push_back({region[r], std::move(result)});
    }
    if (feasible.empty() && !options.accept_failed) {
        for (int attempt = 0; attempt < options.reseed_attempts && feasible.empty(); ++attempt) {
            for (std::size_t r = 0; r < region.size(); ++r) {
                const auto j = static_cast<std::size_t>(region[r]);
                const LatentShape start = sampleLatent(belief.objects[j].prior, rng);
                auto result = project(spec, start, belief.objects[j].prior, constraints[r], config);
                if (result.satisfied()) feasible.push_back({region[r], std::move(result)});
            }
        }
    }

    std::vector<Trial> chosen;
    if (!feasible.empty()) {
        if (options.no_disambiguation) {
            chosen = std::move(feasible);
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
            chosen.push_back(std::move(feasible[pick(rng)]));
        }
    } else if (options.accept_failed) {
        std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
        chosen.push_back(std::move(all[pick(rng)]));
    }

    std::vector<int> objects;
    for (auto &trial : chosen) {
        particle.latents[static_cast<std::size_t>(trial.object)] = std::move(trial.result.latent);
        objects.push_back(trial.object);
    }
    if (!objects.empty()) particle.assignments[contact] = objects;
    return objects;
}

bool particleConsistent(const Belief &belief, const ConstraintContext &context, const Particle &particle,
                        const DecoderSpec &spec, const ProjectionConfig &config) {
    for (std::size_t j = 0; j < belief.objects.size(); ++j) {
        const auto compiled = context.compiled(j, ConstraintContext::assignedContacts(particle, j));
        if (!compiled.check(spec, particle.latents[j], config)) return false;
    }
    return true;
}

namespace {

// Re-projects every object whose latent violates its constraints. Returns
// false when some object cannot be repaired.
bool repairObjects(const Belief &belief, const ConstraintContext &context, Particle &particle, const DecoderSpec &spec,
                   const ProjectionConfig &config, const UpdateOptions &options, Rng &rng) {
    for (std::size_t j = 0; j < belief.objects.size(); ++j) {
        const auto compiled = context.compiled(j, ConstraintContext::assignedContacts(particle, j));
        if (compiled.check(spec, particle.latents[j], config)) continue;
        const auto &prior = belief.objects[j].prior;
        auto result = project(spec, particle.latents[j], prior, compiled, config);
        if (options.accept_failed || result.satisfied()) {
            particle.latents[j] = std::move(result.latent);
            continue;
        }
        bool repaired = false;
        for (int attempt = 0; attempt < options.reseed_attempts && !repaired; ++attempt) {
            result = project(spec, sampleLatent(prior, rng), prior, compiled, config);
            if (result.satisfied()) {
                particle.latents[j] = std::move(result.latent);
                repaired = true;
            }
        }
        if (!repaired) return false;
    }
    return true;
}

}  // namespace

int registerObservation(Belief &belief, const Observation &obs) {
    if (obs.swept_free.dims() != belief.scene_dims) throw DimensionMismatch("observation does not match scene");
    if (obs.chs && obs.chs->region.dims() != belief.scene_dims) throw DimensionMismatch("CHS does not match scene");
    belief.robot_free = setUnion(belief.robot_free, obs.swept_free);
    if (!obs.chs) return -1;
    const int contact = static_cast<int>(belief.contacts.size());
    belief.contacts.push_back({contact, obs.chs->region});
    return contact;
}

Belief updateBelief(const Belief &belief, const Observation &obs, const DecoderSpec &spec,
                    const ProjectionConfig &config, const UpdateOptions &options, std::uint64_t seed, int step) {
    config.validate();
    ProjectionConfig cfg = config;
    if (options.ignore_prior) cfg.alpha = 0.0;

    Belief next = belief;
    const int contact = registerObservation(next, obs);
    const ConstraintContext context(next, spec);

    parallelFor(next.particles.size(), [&](std::size_t i) {
        Particle &particle = next.particles[i];
        if (!particle.valid) return;
        Rng rng = makeRng(seed, kUpdateStream + static_cast<std::uint64_t>(step), i);
        if (contact >= 0 && assignContact(next, context, particle, contact, spec, cfg, options, rng).empty()) {
            particle.valid = false;
            return;
        }
        if (!repairObjects(next, context, particle, spec, cfg, options, rng)) particle.valid = false;
    });
    return next;
}

VoxelGrid decodeParticle(const Belief &belief, const Particle &particle, const DecoderSpec &spec) {
    if (!particle.valid) throw BeliefError("cannot decode an invalid particle");
    if (particle.latents.size() != belief.objects.size()) throw BeliefError("particle does not match belief");
    VoxelGrid out(belief.scene_dims, belief.voxel_size);
    for (std::size_t j = 0; j < belief.objects.size(); ++j) {
        const VoxelGrid local = threshold(spec.decode(particle.latents[j], belief.voxel_size), 0.5);
        out = setUnion(out, resample(local, belief.objects[j].transform, belief.scene_dims));
    }
    return out;
}

VoxelGrid decodeParticleSoft(const Belief &belief, const Particle &particle, const DecoderSpec &spec) {
    if (particle.latents.size() != belief.objects.size()) throw BeliefError("particle does not match belief");
    VoxelGrid out(belief.scene_dims, belief.voxel_size);
    for (std::size_t j = 0; j < belief.objects.size(); ++j) {
        const VoxelGrid local = spec.decode(particle.latents[j], belief.voxel_size);
        const auto &t = belief.objects[j].transform;
        for (std::size_t flat = 0; flat < local.size(); ++flat) {
            const Index3 s = t.apply(local.coord(flat));
            if (!out.inBounds(s)) continue;
            if (local[flat] > out.at(s)) out.set(s, local[flat]);
        }
    }
    return out;
}

VoxelGrid occupancyFrequency(const std::vector<std::optional<VoxelGrid>> &shapes, Index3 dims, double voxel_size) {
    VoxelGrid out(dims, voxel_size);
    std::vector<double> counts(out.size(), 0.0);
    std::size_t n = 0;
    for (const auto &shape : shapes) {
        if (!shape) continue;
        if (shape->dims() != dims) throw DimensionMismatch("occupancyFrequency: grid dimensions differ");
        ++n;
        for (std::size_t flat : shape->occupiedIndices()) counts[flat] += 1.0;
    }
    if (n == 0) return out;
    for (std::size_t flat = 0; flat < counts.size(); ++flat) out.setFlat(flat, counts[flat] / static_cast<double>(n));
    return out;
}

void saveBeliefSnapshot(const Belief &belief, const std::string &directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    const fs::path dir(directory);
    std::ofstream table(dir / "latents.tsv");
    if (!table) throw BeliefError("cannot write snapshot to " + directory);
    table << "particle_id\tvalid\tassignments";
    for (std::size_t j = 0; j < belief.objects.size(); ++j) {
        const std::size_t n = belief.particles.empty() ? 0 : belief.particles.front().latents[j].size();
        for (std::size_t k = 0; k < n; ++k) table << '\t' << belief.objects[j].id << '_' << k;
    }
    table << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < belief.particles.size(); ++i) {
        const Particle &p = belief.particles[i];
        std::ostringstream assign;
        bool first = true;
        for (const auto &[contact, objs] : p.assignments) {
            if (!first) assign << ';';
            first = false;
            assign << contact << ':';
            for (std::size_t k = 0; k < objs.size(); ++k) assign << (k ? "," : "") << objs[k];
        }
        table << i << '\t' << (p.valid ? 1 : 0) << '\t' << (first ? "-" : assign.str());
        for (const auto &latent : p.latents) {
            for (double v : latent.params) table << '\t' << v;
        }
        table << '\n';
    }
    saveGrid(belief.knownFree(), (dir / "known_free.cvgr").string());
    for (const auto &contact : belief.contacts) {
        saveGrid(contact.region, (dir / ("chs_" + std::to_string(contact.id) + ".cvgr")).string());
    }
}

}  // namespace clasp
