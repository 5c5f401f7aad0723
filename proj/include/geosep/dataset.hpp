#ifndef GEOSEP_DATASET_HPP
#define GEOSEP_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace geosep {

using Label = std::string;
using FeatureVector = std::vector<double>;

struct LabeledPoint {
    FeatureVector features;
    Label label;

    bool operator==(const LabeledPoint&) const = default;
};

/**
 * An ordered, immutable collection of labeled points sharing one dimension.
 *
 * Construction validates that every point is finite, non-empty and of the
 * same length, and derives the sorted label set.
 */
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<LabeledPoint> points);

    const std::vector<LabeledPoint>& points() const { return points_; }
    const LabeledPoint& operator[](std::size_t i) const { return points_[i]; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    std::size_t dimension() const { return dimension_; }
    // Distinct labels, sorted lexicographically.
    const std::vector<Label>& labels() const { return labels_; }

    // Points at the given source indices, in that order.
    Dataset subset(const std::vector<std::size_t>& indices) const;

    bool operator==(const Dataset&) const = default;

private:
    std::vector<LabeledPoint> points_;
    std::size_t dimension_ = 0;
    std::vector<Label> labels_;
};

struct SplitRatios {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
};

struct DataSplit {
    Dataset train;
    Dataset validation;
    Dataset test;
    std::uint64_t seed = 0;
    // Source indices backing each part.
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> validation_indices;
    std::vector<std::size_t> test_indices;
};

struct PredictionRecord {
    std::size_t point_index = 0;
    Label predicted_label;
    std::optional<double> native_confidence;

    bool operator==(const PredictionRecord&) const = default;
};

struct LoadOptions {
    // Reject features outside [-1e6, 1e6] as likely unnormalized.
    bool strict = false;
};

Dataset read_dataset(std::istream& in, const LoadOptions& options = {});
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

// Header `label,f0,...`; reals in shortest round-trip form.
void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::filesystem::path& path, const Dataset& data);

/**
 * Shuffle the source with a seeded Fisher-Yates permutation (mt19937_64)
 * and cut it into train/validation/test.
 *
 * Part sizes are floor(ratio * n); the one or two leftover points are dealt
 * out train first, then validation.
 * Throws ContractError when ratios do not sum to 1 (within 1e-9), when a
 * ratio is not positive, or when some part would end up empty.
 */
DataSplit split_dataset(const Dataset& source, const SplitRatios& ratios, std::uint64_t seed);

// `index,predicted_label[,native_confidence]`
std::vector<PredictionRecord> read_predictions(std::istream& in);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records);

// Shortest decimal form that parses back to the same double.
std::string format_shortest(double value);
// printf("%.*g") with the given significant digits.
std::string format_significant(double value, int digits);

}  // namespace geosep

#endif  // GEOSEP_DATASET_HPP
