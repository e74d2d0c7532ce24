#include "clasp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "clasp/parallel.hpp"

namespace clasp {

double quantileSorted(const std::vector<double> &sorted, double p) {
    if (sorted.empty()) throw MetricsError("quantile of an empty list");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ObservationStepStats summarize(int step, std::vector<double> cds) {
    ObservationStepStats s;
    s.step = step;
    s.n_valid = cds.size();
    s.cds = cds;
    if (cds.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        s.mean = s.q1 = s.median = s.q3 = s.whisker_low = s.whisker_high = nan;
        return s;
    }
    std::sort(cds.begin(), cds.end());
    s.mean = std::accumulate(cds.begin(), cds.end(), 0.0) / static_cast<double>(cds.size());
    s.q1 = quantileSorted(cds, 0.25);
    s.median = quantileSorted(cds, 0.5);
    s.q3 = quantileSorted(cds, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr, hi_fence = s.q3 + 1.5 * iqr;
    s.whisker_low = *std::find_if(cds.begin(), cds.end(), [&](double v) { return v >= lo_fence; });
    s.whisker_high = *std::find_if(cds.rbegin(), cds.rend(), [&](double v) { return v <= hi_fence; });
    return s;
}

double evaluationDistance(const VoxelGrid &prediction, const ChamferReference &truth, const VoxelGrid &support) {
    const VoxelGrid masked = support.empty() ? prediction : setDifference(prediction, support);
    if (masked.occupiedCount() == 0) {
        const auto &d = masked.dims();
        return masked.voxelSize() * std::sqrt(double(d[0]) * d[0] + double(d[1]) * d[1] + double(d[2]) * d[2]);
    }
    return truth.distanceTo(masked);
}

std::vector<std::optional<double>> particleDistances(const Belief &belief, const DecoderSpec &spec,
                                                     const ChamferReference &truth, const VoxelGrid &support) {
    std::vector<std::optional<double>> out(belief.particles.size());
    parallelFor(out.size(), [&](std::size_t i) {
        const Particle &p = belief.particles[i];
        if (p.valid) out[i] = evaluationDistance(decodeParticle(belief, p, spec), truth, support);
    });
    return out;
}

ObservationStepStats chamferStats(int step, const std::vector<std::optional<double>> &cds) {
    std::vector<double> valid;
    for (const auto &cd : cds) {
        if (cd) valid.push_back(*cd);
    }
    return summarize(step, std::move(valid));
}

double kernelLikelihood(const std::vector<std::optional<double>> &cds) {
    if (cds.empty()) return 0.0;
    double sum = 0.0;
    for (const auto &cd : cds) {
        if (cd) sum += 1.0 / std::max(*cd, kLikelihoodEpsilon);
    }
    return sum / static_cast<double>(cds.size());
}

namespace {

VoxelGrid maskedTruth(const VoxelGrid &ground_truth, const VoxelGrid &support) {
    return support.empty() ? ground_truth : setDifference(ground_truth, support);
}

}  // namespace

ObservationStepStats chamferStats(const Belief &belief, const DecoderSpec &spec, const VoxelGrid &ground_truth,
                                  const VoxelGrid &support, int step) {
    const ChamferReference truth(maskedTruth(ground_truth, support));
    return chamferStats(step, particleDistances(belief, spec, truth, support));
}

double kernelLikelihood(const Belief &belief, const DecoderSpec &spec, const VoxelGrid &ground_truth,
                        const VoxelGrid &support) {
    const ChamferReference truth(maskedTruth(ground_truth, support));
    return kernelLikelihood(particleDistances(belief, spec, truth, support));
}

TrainSimilarityReport trainSimilarityStudy(const std::vector<VoxelGrid> &train_set, const VoxelGrid &test_shape,
                                           const std::vector<VoxelGrid> &completions) {
    if (train_set.empty()) throw MetricsError("train set is empty");
    if (completions.empty()) throw MetricsError("no completions");
    TrainSimilarityReport r;
    r.test_to_closest_train = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        const double d = chamferDistance(test_shape, train_set[i]);
        if (d < r.test_to_closest_train) {
            r.test_to_closest_train = d;
            r.closest_train = i;
        }
    }
    const ChamferReference test(test_shape), train(train_set[r.closest_train]);
    std::size_t closer = 0;
    for (const auto &c : completions) {
        r.cd_to_test.push_back(test.distanceTo(c));
        r.cd_to_train.push_back(train.distanceTo(c));
        if (r.cd_to_train.back() < r.cd_to_test.back()) ++closer;
    }
    const double n = static_cast<double>(completions.size());
    r.mean_to_test = std::accumulate(r.cd_to_test.begin(), r.cd_to_test.end(), 0.0) / n;
    r.mean_to_train = std::accumulate(r.cd_to_train.begin(), r.cd_to_train.end(), 0.0) / n;
    r.fraction_closer_to_train = static_cast<double>(closer) / n;
    return r;
}

StepRecord makeStepRecord(int step, std::vector<std::optional<double>> cds) {
    StepRecord r;
    r.step = step;
    r.stats = chamferStats(step, cds);
    r.likelihood = kernelLikelihood(cds);
    r.cds = std::move(cds);
    return r;
}

std::string formatNumber(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    return buf;
}

namespace {

std::ofstream openOutput(const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MetricsError("cannot write " + path);
    return out;
}

}  // namespace

void writeResultsCsv(const std::vector<RunRecord> &runs, const std::string &path) {
    auto out = openOutput(path);
    out << "scenario,method,seed,step,particle_id,valid,cd_m\n";
    for (const auto &run : runs) {
        for (const auto &step : run.steps) {
            for (std::size_t i = 0; i < step.cds.size(); ++i) {
                out << run.scenario << ',' << run.method << ',' << run.seed << ',' << step.step << ',' << i << ','
                    << (step.cds[i] ? 1 : 0) << ',' << (step.cds[i] ? formatNumber(*step.cds[i]) : "") << '\n';
            }
        }
    }
    if (!out) throw MetricsError("failed writing " + path);
}

void writeStatsCsv(const std::vector<RunRecord> &runs, const std::string &path) {
    auto out = openOutput(path);
    out << "scenario,method,seed,step,n_valid,mean,q1,median,q3,likelihood\n";
    for (const auto &run : runs) {
        for (const auto &step : run.steps) {
            const auto &s = step.stats;
            out << run.scenario << ',' << run.method << ',' << run.seed << ',' << step.step << ',' << s.n_valid << ','
                << formatNumber(s.mean) << ',' << formatNumber(s.q1) << ',' << formatNumber(s.median) << ','
                << formatNumber(s.q3) << ',' << formatNumber(step.likelihood) << '\n';
        }
    }
    if (!out) throw MetricsError("failed writing " + path);
}

std::vector<StatsRow> readStatsCsv(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw MetricsError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "scenario,method,seed,step,n_valid,mean,q1,median,q3,likelihood") {
        throw MetricsError("unexpected stats header in " + path);
    }
    std::vector<StatsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 10) throw MetricsError("malformed stats row: " + line);
        StatsRow r;
        r.scenario = f[0];
        r.method = f[1];
        r.seed = std::stoull(f[2]);
        r.step = std::stoi(f[3]);
        r.n_valid = std::stoul(f[4]);
        r.mean = std::stod(f[5]);
        r.q1 = std::stod(f[6]);
        r.median = std::stod(f[7]);
        r.q3 = std::stod(f[8]);
        r.likelihood = std::stod(f[9]);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace clasp
