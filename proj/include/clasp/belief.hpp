#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clasp/projection.hpp"
#include "clasp/scene.hpp"
#include "clasp/shape_model.hpp"

namespace clasp {

struct BeliefError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Method {
    Clasp,
    ClaspIgnorePrior,
    ClaspAcceptFailed,
    ClaspNoDisambiguation,
    Rejection,
    SoftRejection,
    DirectEdit,
    CombinedInputPrior,
};

std::string methodName(Method method);
Method parseMethod(const std::string &name);
const std::vector<Method> &allMethods();
bool isProjectionMethod(Method method);

struct UpdateOptions {
    bool ignore_prior = false;
    bool accept_failed = false;
    bool no_disambiguation = false;
    int reseed_attempts = 3;

    static UpdateOptions forMethod(Method method);
};

struct Particle {
    std::vector<LatentShape> latents;        // one per object
    std::map<int, std::vector<int>> assignments;  // contact id -> object indices
    bool valid = true;
};

struct BeliefObject {
    std::string id;
    GridTransform transform;  // local -> scene
    DepthView view;
    LatentPrior prior;
};

struct Contact {
    int id = 0;
    VoxelGrid region;  // scene frame, as observed
};

struct Belief {
    Index3 scene_dims{0, 0, 0};
    double voxel_size = kDefaultVoxelSize;
    std::vector<BeliefObject> objects;
    std::vector<Particle> particles;
    VoxelGrid robot_free;  // scene frame, accumulated
    std::vector<Contact> contacts;

    std::size_t validCount() const;
    // Robot free space plus every object's vision free space, scene frame.
    VoxelGrid knownFree() const;
};

struct ObjectObservation {
    std::string id;
    GridTransform transform;
    DepthView view;
    ShapeClass shape_class;
};

Belief initBelief(const std::vector<ObjectObservation> &objects, Index3 scene_dims, double voxel_size,
                  std::size_t particle_count, std::uint64_t seed);

// Shared per-update constraint data in each object's local frame.
class ConstraintContext {
public:
    ConstraintContext(const Belief &belief, const DecoderSpec &spec);

    const VoxelGrid &localFree(std::size_t object) const { return local_free_[object]; }
    // Contact region cropped into the object's frame minus its known free space.
    const VoxelGrid &localChs(std::size_t contact, std::size_t object) const { return local_chs_[contact][object]; }
    bool chsReaches(std::size_t contact, std::size_t object) const { return !chs_idx_[contact][object].empty(); }

    CompiledConstraints compiled(std::size_t object, const std::vector<int> &contacts) const;
    ConstraintSet constraintSet(std::size_t object, const std::vector<int> &contacts) const;
    // Contacts assigned to `object` in `particle`.
    static std::vector<int> assignedContacts(const Particle &particle, std::size_t object);

private:
    std::vector<VoxelGrid> local_free_;
    std::vector<std::vector<std::size_t>> free_idx_;
    std::vector<std::vector<VoxelGrid>> local_chs_;
    std::vector<std::vector<std::vector<std::size_t>>> chs_idx_;
};

// Chooses which object(s) explain contact `contact` for one particle and
// projects the chosen latents in place. Returns the chosen object indices;
// empty when no object can explain the contact.
std::vector<int> assignContact(const Belief &belief, const ConstraintContext &context, Particle &particle,
                               int contact, const DecoderSpec &spec, const ProjectionConfig &config,
                               const UpdateOptions &options, Rng &rng);

// Grows robot free space and registers the CHS, if any, without touching
// particles. Returns the new contact id or -1.
int registerObservation(Belief &belief, const Observation &obs);

Belief updateBelief(const Belief &belief, const Observation &obs, const DecoderSpec &spec,
                    const ProjectionConfig &config, const UpdateOptions &options, std::uint64_t seed, int step);

// True iff every object of the particle passes constraintCheck against its
// accumulated constraints.
bool particleConsistent(const Belief &belief, const ConstraintContext &context, const Particle &particle,
                        const DecoderSpec &spec, const ProjectionConfig &config);

// Union of thresholded object decodes placed in the scene frame.
VoxelGrid decodeParticle(const Belief &belief, const Particle &particle, const DecoderSpec &spec);
// Per-voxel maximum of the soft object decodes, scene frame.
VoxelGrid decodeParticleSoft(const Belief &belief, const Particle &particle, const DecoderSpec &spec);

// Fraction of shapes occupying each voxel; invalid entries are skipped.
VoxelGrid occupancyFrequency(const std::vector<std::optional<VoxelGrid>> &shapes, Index3 dims, double voxel_size);

void saveBeliefSnapshot(const Belief &belief, const std::string &directory);

}  // namespace clasp
