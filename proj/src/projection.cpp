#include "clasp/projection.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>

namespace clasp {

void ProjectionConfig::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ProjectionError("delta must lie in (0, 1)");
    if (!(alpha >= 0.0)) throw ProjectionError("alpha must be non-negative");
    if (max_iters < 1) throw ProjectionError("max_iters must be at least 1");
    if (!(learning_rate > 0.0)) throw ProjectionError("learning_rate must be positive");
    if (stagnation_window < 1) throw ProjectionError("stagnation_window must be at least 1");
    if (!(gradient_clip >= 0.0)) throw ProjectionError("gradient_clip must be non-negative");
    if (!(anneal_power > 0.0)) throw ProjectionError("anneal_power must be positive");
    if (!(anneal_sharpness > 0.0)) throw ProjectionError("anneal_sharpness must be positive");
    if (!(anneal_fraction >= 0.0 && anneal_fraction <= 1.0)) throw ProjectionError("anneal_fraction must lie in [0, 1]");
}

std::string toString(ProjectionStatus status) {
    switch (status) {
        case ProjectionStatus::Satisfied: return "satisfied";
        case ProjectionStatus::IterationLimit: return "iteration_limit";
        case ProjectionStatus::Stagnated: return "stagnated";
        case ProjectionStatus::NonFinite: return "non_finite";
    }
    return "unknown";
}

double lossFree(const VoxelGrid &soft, const VoxelGrid &known_free, double delta) {
    if (soft.dims() != known_free.dims()) throw DimensionMismatch("lossFree: grid dimensions differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < soft.size(); ++i) {
        if (known_free.occupied(i)) sum += std::max(soft[i] - delta, 0.0);
    }
    return sum;
}

double lossOcc(const VoxelGrid &soft, const std::vector<VoxelGrid> &chs) {
    double sum = 0.0;
    for (const auto &region : chs) {
        if (region.dims() != soft.dims()) throw DimensionMismatch("lossOcc: grid dimensions differ");
        double best = -1.0;
        for (std::size_t i = 0; i < soft.size(); ++i) {
            if (region.occupied(i)) best = std::max(best, soft[i]);
        }
        if (best < 0.0) throw ProjectionError("lossOcc: empty collision hypothesis set");
        sum += 1.0 - best;
    }
    return sum;
}

double lossPrior(const LatentShape &latent, const LatentPrior &prior, double alpha) {
    if (alpha == 0.0) return 0.0;
    return -alpha * logProb(prior, latent);
}

CompiledConstraints::CompiledConstraints(const DecoderSpec &spec, const ConstraintSet &constraints) {
    if (constraints.known_free.dims() != spec.dims()) {
        throw DimensionMismatch("known free grid does not match decoder output");
    }
    free_ = constraints.known_free.occupiedIndices();
    for (const auto &region : constraints.chs) {
        if (region.dims() != spec.dims()) throw DimensionMismatch("CHS grid does not match decoder output");
        auto idx = region.occupiedIndices();
        if (idx.empty()) throw ProjectionError("empty collision hypothesis set");
        chs_.push_back(std::move(idx));
    }
}

CompiledConstraints::CompiledConstraints(std::vector<std::size_t> free, std::vector<std::vector<std::size_t>> chs)
    : free_(std::move(free)), chs_(std::move(chs)) {
    for (const auto &region : chs_) {
        if (region.empty()) throw ProjectionError("empty collision hypothesis set");
    }
}

LossEvaluation CompiledConstraints::evaluate(const DecoderSpec &spec, const LatentShape &latent,
                                             const LatentPrior &prior, const ProjectionConfig &config,
                                             bool with_gradient, const DecoderSpec *gradient_spec) const {
    LossEvaluation out;
    const auto ev = spec.prepare(latent);
    std::optional<DecoderSpec::Evaluation> occ_ev;
    if (with_gradient && gradient_spec != nullptr) occ_ev = gradient_spec->prepare(latent);
    const DecoderSpec::Evaluation &gev = occ_ev ? *occ_ev : ev;
    if (with_gradient) out.gradient.assign(latent.size(), 0.0);
    bool free_ok = true;
    for (std::size_t flat : free_) {
        const double w = ev.value(flat);
        if (w > config.delta) {
            free_ok = false;
            out.loss.free += w - config.delta;
            if (with_gradient) gev.addGradient(flat, 1.0, out.gradient);
        }
    }
    bool occ_ok = true;
    for (const auto &region : chs_) {
        double best = ev.value(region.front());
        for (std::size_t k = 1; k < region.size(); ++k) best = std::max(best, ev.value(region[k]));
        out.loss.occ += 1.0 - best;
        if (!(best > config.occupancy_threshold)) occ_ok = false;
        if (!with_gradient) continue;
        std::size_t arg = region.front();
        double gbest = gev.value(arg);
        for (std::size_t k = 1; k < region.size(); ++k) {
            const double w = gev.value(region[k]);
            if (w > gbest) {
                gbest = w;
                arg = region[k];
            }
        }
        gev.addGradient(arg, -1.0, out.gradient);
    }
    if (config.alpha != 0.0) {
        out.loss.prior = -config.alpha * logProb(prior, latent);
        if (with_gradient) {
            const auto g = logProbGradient(prior, latent);
            for (std::size_t i = 0; i < g.size(); ++i) out.gradient[i] -= config.alpha * g[i];
        }
    }
    out.satisfied = free_ok && occ_ok;
    return out;
}

bool CompiledConstraints::check(const DecoderSpec &spec, const LatentShape &latent,
                                const ProjectionConfig &config) const {
    const auto ev = spec.prepare(latent);
    for (std::size_t flat : free_) {
        if (ev.value(flat) > config.delta) return false;
    }
    for (const auto &region : chs_) {
        const bool hit = std::any_of(region.begin(), region.end(),
                                     [&](std::size_t flat) { return ev.value(flat) > config.occupancy_threshold; });
        if (!hit) return false;
    }
    return true;
}

LossEvaluation lossGradient(const DecoderSpec &spec, const LatentShape &latent, const LatentPrior &prior,
                            const ConstraintSet &constraints, const ProjectionConfig &config) {
    return CompiledConstraints(spec, constraints).evaluate(spec, latent, prior, config);
}

bool constraintCheck(const DecoderSpec &spec, const LatentShape &latent, const ConstraintSet &constraints,
                     const ProjectionConfig &config) {
    return CompiledConstraints(spec, constraints).check(spec, latent, config);
}

ProjectionResult project(const DecoderSpec &spec, const LatentShape &initial, const LatentPrior &prior,
                         const ConstraintSet &constraints, const ProjectionConfig &config) {
    return project(spec, initial, prior, CompiledConstraints(spec, constraints), config);
}

ProjectionResult project(const DecoderSpec &spec, const LatentShape &initial, const LatentPrior &prior,
                         const CompiledConstraints &constraints, const ProjectionConfig &config) {
    config.validate();
    if (initial.size() != spec.latentSize()) throw ShapeModelError("latent length does not match decoder");
    if (prior.size() != spec.latentSize()) throw ShapeModelError("prior length does not match decoder");

    const std::vector<double> scale = spec.latentScale();
    const std::size_t n = initial.size();
    ProjectionResult result{initial, ProjectionStatus::IterationLimit, 0, {}};
    std::vector<double> m(n, 0.0), v(n, 0.0);
    std::deque<double> history;
    double b1t = 1.0, b2t = 1.0;

    int anneal_iters = 0;
    if (spec.kind() == DecoderSpec::Kind::SoftBox && config.anneal_sharpness < spec.sharpness()) {
        anneal_iters = static_cast<int>(std::floor(config.anneal_fraction * config.max_iters));
    }
    const double ratio = spec.sharpness() / config.anneal_sharpness;

    for (int it = 0;; ++it) {
        std::optional<DecoderSpec> soft;
        if (it < anneal_iters) {
            const double progress = std::pow(double(it) / anneal_iters, config.anneal_power);
            soft = spec.withSharpness(config.anneal_sharpness * std::pow(ratio, progress));
        }
        const LossEvaluation eval =
            constraints.evaluate(spec, result.latent, prior, config, true, soft ? &*soft : nullptr);
        result.loss = eval.loss;
        result.iterations = it;
        const double total = eval.loss.total();
        if (!std::isfinite(total) ||
            std::any_of(eval.gradient.begin(), eval.gradient.end(), [](double g) { return !std::isfinite(g); })) {
            result.status = ProjectionStatus::NonFinite;
            return result;
        }
        if (eval.satisfied) {
            result.status = ProjectionStatus::Satisfied;
            return result;
        }
        if (it < anneal_iters) {
            history.clear();
        } else {
            history.push_back(total);
        }
        if (static_cast<int>(history.size()) > config.stagnation_window) {
            if (std::abs(history.back() - history.front()) < config.stagnation_tol) {
                result.status = ProjectionStatus::Stagnated;
                return result;
            }
            history.pop_front();
        }
        if (it == config.max_iters) {
            result.status = ProjectionStatus::IterationLimit;
            return result;
        }
        b1t *= config.beta1;
        b2t *= config.beta2;
        // Adam runs in the prior's anchored coordinates: c = u - a * exp(s)
        std::vector<double> grad = eval.gradient;
        std::vector<double> y = prior.toAnchored(result.latent.params);
        for (std::size_t i = 0; i < prior.anchor.size(); ++i) {
            if (prior.anchor[i] != 0) grad[i + 3] -= prior.anchor[i] * std::exp(y[i + 3]) * eval.gradient[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double g = grad[i] * scale[i];
            if (config.gradient_clip > 0.0) g = std::clamp(g, -config.gradient_clip, config.gradient_clip);
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            const double mhat = m[i] / (1.0 - b1t);
            const double vhat = v[i] / (1.0 - b2t);
            y[i] -= scale[i] * config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
        }
        result.latent.params = prior.fromAnchored(y);
    }
}

}  // namespace clasp
