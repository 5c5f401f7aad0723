#ifndef GEOSEP_PIPELINE_HPP
#define GEOSEP_PIPELINE_HPP

#include "geosep/calibration.hpp"
#include "geosep/dataset.hpp"
#include "geosep/metrics.hpp"
#include "geosep/partition_index.hpp"
#include "geosep/separation.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace geosep {

struct KnnVote {
    Label label;
    double vote_fraction = 0.0;
};

/**
 * Majority label among the k nearest training points.
 *
 * Vote ties go to the label whose voters have the smaller mean distance,
 * then to the lexicographically smaller label. Distance ties at the k-th
 * neighbor are broken by bucket order, then position in the bucket.
 */
KnnVote knn_predict(const ClassPartitionIndex& index, std::span<const double> x, std::size_t k);

// k-NN over every point of `data`; record i is point i, with the vote
// fraction as native confidence.
std::vector<PredictionRecord> knn_predictions(const ClassPartitionIndex& index, const Dataset& data, std::size_t k,
                                              int threads = 0);

/**
 * Gaussian clusters labelled c0, c1, ... with unit-separated means and
 * per-coordinate standard deviation `spread`. When dimension >= classes the
 * means sit on a regular simplex (e_c / sqrt(2)); otherwise they are spaced
 * one unit apart along the first axis. Points are emitted round-robin over
 * classes. Deterministic per seed.
 */
Dataset generate_blobs(std::size_t classes, std::size_t per_class, std::size_t dimension, double spread,
                       std::uint64_t seed);

struct ExperimentConfig {
    SplitRatios ratios;
    std::size_t trials = 10;
    std::size_t m_bins = 30;
    ScoreKind score_kind = ScoreKind::fast;
    CalibratorKind calibrator_kind = CalibratorKind::isotonic;
    std::size_t knn_k = 5;
    std::uint64_t seed = 0;
    int threads = 0;  // scoring threads, 0 = OpenMP default
};

struct ExperimentReport {
    ScoreKind score_kind = ScoreKind::fast;
    std::vector<std::uint64_t> seeds;
    std::vector<double> ece_geometric;
    // Empty when the predictions carry no native confidence.
    std::vector<double> ece_native;
    std::vector<double> accuracy;
    // Present only with two or more trials.
    std::optional<TrialSummary> geometric_summary;
    std::optional<TrialSummary> native_summary;
    std::optional<TrialSummary> accuracy_summary;
};

/// Predictions over a dataset; index i corresponds to point i.
using PredictionList = std::vector<PredictionRecord>;

// Check external predictions against a dataset: one record per point
// index, labels from `vocabulary`. Returns them ordered by index.
PredictionList validate_predictions(const PredictionList& records, std::size_t size,
                                    const std::vector<Label>& vocabulary);

/**
 * Fit a calibrator on the separation scores of `validation` under the given
 * predictions. Outcome of point i is predicted_label == true label.
 */
Calibrator fit_calibrator(const ClassPartitionIndex& index, const Dataset& validation,
                          const PredictionList& predictions, ScoreKind score_kind, CalibratorKind kind,
                          int threads = 0, LogisticFit* logistic_info = nullptr);

std::vector<int> outcomes_of(const Dataset& data, const PredictionList& predictions);
std::vector<Label> predicted_labels(const PredictionList& predictions);

/**
 * Repeated split / index / predict / calibrate / evaluate protocol. Trial t
 * splits with seed + t. Without external predictions the built-in k-NN is
 * the model and its vote fraction the native confidence.
 *
 * `external` holds predictions over the whole source dataset, either one
 * list shared by all trials or one list per trial.
 */
ExperimentReport run_experiment(const Dataset& data, const ExperimentConfig& config,
                                const std::vector<PredictionList>* external = nullptr);

void write_experiment_csv(std::ostream& out, const ExperimentReport& report);
void print_experiment_table(std::ostream& out, const ExperimentReport& report);

struct ThroughputReport {
    double predictions_per_second = 0.0;
    std::size_t trials = 0;
    double ci95_halfwidth = 0.0;
    std::size_t train_size = 0;
    std::size_t dimension = 0;
    std::size_t queries = 0;
    int threads = 1;
    std::vector<double> per_trial;
    // nn_distance calls inside the timed region, over all trials.
    std::uint64_t distance_queries = 0;
};

/**
 * Time fast separation plus calibrator application over every query,
 * `repeats` times after one untimed warm-up pass. threads == 1 runs the
 * serial loop; otherwise the loop is split over OpenMP threads.
 */
ThroughputReport benchmark_throughput(const ClassPartitionIndex& index, const Calibrator& calibrator,
                                      std::span<const FeatureVector> queries, std::span<const Label> predicted,
                                      std::size_t repeats = 5, int threads = 1);

void write_throughput_csv(std::ostream& out, const ThroughputReport& report);

}  // namespace geosep

#endif  // GEOSEP_PIPELINE_HPP
