#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clasp/belief.hpp"
#include "clasp/voxel_grid.hpp"

namespace clasp {

struct MetricsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kLikelihoodEpsilon = 1e-6;  // meters

// Box-plot summary of one observation step. Quantiles use linear
// interpolation between order statistics; whiskers are the most extreme
// samples within 1.5 IQR of the quartiles.
struct ObservationStepStats {
    int step = 0;
    std::vector<double> cds;
    std::size_t n_valid = 0;
    double mean = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_low = 0.0;
    double whisker_high = 0.0;

    bool empty() const { return n_valid == 0; }
};

// Linear-interpolation quantile of sorted data, p in [0, 1].
double quantileSorted(const std::vector<double> &sorted, double p);

ObservationStepStats summarize(int step, std::vector<double> cds);

// Chamfer distance of one prediction to the truth with the support mask
// removed. An empty prediction scores the scene diagonal.
double evaluationDistance(const VoxelGrid &prediction, const ChamferReference &truth, const VoxelGrid &support);

// Per-particle distances; nullopt for invalid particles.
std::vector<std::optional<double>> particleDistances(const Belief &belief, const DecoderSpec &spec,
                                                     const ChamferReference &truth, const VoxelGrid &support);

ObservationStepStats chamferStats(const Belief &belief, const DecoderSpec &spec, const VoxelGrid &ground_truth,
                                  const VoxelGrid &support, int step = 0);
double kernelLikelihood(const Belief &belief, const DecoderSpec &spec, const VoxelGrid &ground_truth,
                        const VoxelGrid &support);

// (1/n) sum over valid samples of 1 / max(cd, epsilon); n counts invalid ones.
double kernelLikelihood(const std::vector<std::optional<double>> &cds);
ObservationStepStats chamferStats(int step, const std::vector<std::optional<double>> &cds);

struct TrainSimilarityReport {
    std::size_t closest_train = 0;
    double test_to_closest_train = 0.0;
    std::vector<double> cd_to_test;
    std::vector<double> cd_to_train;
    double mean_to_test = 0.0;
    double mean_to_train = 0.0;
    double fraction_closer_to_train = 0.0;
};

TrainSimilarityReport trainSimilarityStudy(const std::vector<VoxelGrid> &train_set, const VoxelGrid &test_shape,
                                           const std::vector<VoxelGrid> &completions);

struct StepRecord {
    int step = 0;
    std::vector<std::optional<double>> cds;  // per particle
    ObservationStepStats stats;
    double likelihood = 0.0;
};

struct RunRecord {
    std::string scenario;
    std::string method;
    std::uint64_t seed = 0;
    std::vector<StepRecord> steps;
};

StepRecord makeStepRecord(int step, std::vector<std::optional<double>> cds);

// Fixed-precision number formatting shared by every emitted table.
std::string formatNumber(double value);

void writeResultsCsv(const std::vector<RunRecord> &runs, const std::string &path);
void writeStatsCsv(const std::vector<RunRecord> &runs, const std::string &path);

struct StatsRow {
    std::string scenario;
    std::string method;
    std::uint64_t seed = 0;
    int step = 0;
    std::size_t n_valid = 0;
    double mean = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double likelihood = 0.0;
};

std::vector<StatsRow> readStatsCsv(const std::string &path);

}  // namespace clasp
