#pragma once

#include <span>
#include <string>
#include <vector>

#include "clasp/shape_model.hpp"
#include "clasp/voxel_grid.hpp"

namespace clasp {

struct ProjectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Constraints on one object, in its local (decoder) grid.
struct ConstraintSet {
    VoxelGrid known_free;
    std::vector<VoxelGrid> chs;
};

struct ProjectionConfig {
    double delta = 0.4;
    double alpha = 0.01;
    double learning_rate = 0.01;
    int max_iters = 100;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int stagnation_window = 10;
    double stagnation_tol = 1e-6;
    double occupancy_threshold = 0.5;
    // Soft-box continuation: for the first T = anneal_fraction * max_iters
    // iterations constraint gradients come from a decoder of sharpness
    // k0 * (k / k0)^((t / T)^anneal_power), k0 = anneal_sharpness, k the
    // decoder's own. Losses and satisfaction always use the decoder itself.
    double anneal_sharpness = 0.1;
    double anneal_fraction = 0.9;
    double anneal_power = 4.0;
    // Per-coordinate clip of the preconditioned gradient before Adam; 0 disables.
    double gradient_clip = 1.0;

    void validate() const;
};

enum class ProjectionStatus { Satisfied, IterationLimit, Stagnated, NonFinite };

std::string toString(ProjectionStatus status);

struct LossBreakdown {
    double free = 0.0;
    double occ = 0.0;
    double prior = 0.0;
    double total() const { return free + occ + prior; }
};

struct ProjectionResult {
    LatentShape latent;
    ProjectionStatus status = ProjectionStatus::IterationLimit;
    int iterations = 0;
    LossBreakdown loss;

    bool satisfied() const { return status == ProjectionStatus::Satisfied; }
};

// Grid formulation of the three loss terms.
double lossFree(const VoxelGrid &soft, const VoxelGrid &known_free, double delta);
double lossOcc(const VoxelGrid &soft, const std::vector<VoxelGrid> &chs);
double lossPrior(const LatentShape &latent, const LatentPrior &prior, double alpha);

struct LossEvaluation {
    LossBreakdown loss;
    std::vector<double> gradient;  // d total / d latent
    bool satisfied = false;        // constraintCheck at this latent
};

// Constraint masks flattened into voxel index lists, built once per
// projection. Evaluation touches only constrained voxels.
class CompiledConstraints {
public:
    CompiledConstraints(const DecoderSpec &spec, const ConstraintSet &constraints);
    // From precomputed index lists (flat indices into the decoder grid).
    CompiledConstraints(std::vector<std::size_t> free, std::vector<std::vector<std::size_t>> chs);

    // gradient_spec, when given, supplies the derivatives of the free and
    // occupancy terms and picks each CHS's argmax voxel. Loss values, the set
    // of violated free voxels and satisfaction always come from spec.
    LossEvaluation evaluate(const DecoderSpec &spec, const LatentShape &latent, const LatentPrior &prior,
                            const ProjectionConfig &config, bool with_gradient = true,
                            const DecoderSpec *gradient_spec = nullptr) const;
    bool check(const DecoderSpec &spec, const LatentShape &latent, const ProjectionConfig &config) const;

    std::size_t freeCount() const { return free_.size(); }
    std::size_t chsCount() const { return chs_.size(); }

private:
    std::vector<std::size_t> free_;
    std::vector<std::vector<std::size_t>> chs_;
};

LossEvaluation lossGradient(const DecoderSpec &spec, const LatentShape &latent, const LatentPrior &prior,
                            const ConstraintSet &constraints, const ProjectionConfig &config);

// True iff every known-free voxel decodes to <= delta and every CHS holds a
// voxel decoding above the occupancy threshold.
bool constraintCheck(const DecoderSpec &spec, const LatentShape &latent, const ConstraintSet &constraints,
                     const ProjectionConfig &config);

// Adam on the latent, decoder fixed. Steps are taken in units of
// spec.latentScale() so the learning rate is comparable across coordinates.
// The stagnation test only runs once annealing is over.
ProjectionResult project(const DecoderSpec &spec, const LatentShape &initial, const LatentPrior &prior,
                         const ConstraintSet &constraints, const ProjectionConfig &config);
ProjectionResult project(const DecoderSpec &spec, const LatentShape &initial, const LatentPrior &prior,
                         const CompiledConstraints &constraints, const ProjectionConfig &config);

}  // namespace clasp
