#ifndef GEOSEP_CALIBRATION_HPP
#define GEOSEP_CALIBRATION_HPP

#include "geosep/separation.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

namespace geosep {

/// One point fed to a calibration fit. After grouping, `correct` is the mean
/// outcome of the group and `weight` its size.
struct CalibrationPair {
    double score = 0.0;
    double correct = 0.0;
    double weight = 1.0;

    bool operator==(const CalibrationPair&) const = default;
};

/**
 * Pair scores with 0/1 outcomes, sort by score, and merge exact-duplicate
 * scores into one pair (weight = count, correct = mean outcome).
 */
std::vector<CalibrationPair> collect_pairs(std::span<const double> scores, std::span<const int> outcomes);
std::vector<CalibrationPair> collect_pairs(std::span<const SeparationScore> scores, std::span<const int> outcomes);

/**
 * Weighted pool-adjacent-violators: the non-decreasing sequence v that
 * minimizes sum w_i (v_i - y_i)^2. Targets are arbitrary reals.
 */
std::vector<double> pool_adjacent_violators(std::span<const double> targets, std::span<const double> weights);

/// Monotone piecewise-linear map from separation score to confidence.
/// Clamps to the end values outside the fitted score range.
class IsotonicCalibrator {
public:
    // Throws ContractError unless breakpoints strictly increase and values
    // are non-decreasing in [0, 1].
    IsotonicCalibrator(std::vector<double> breakpoints, std::vector<double> values);

    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }

    double predict(double score) const;

    bool operator==(const IsotonicCalibrator&) const = default;

private:
    std::vector<double> breakpoints_;
    std::vector<double> values_;
};

// sigmoid(slope * s + offset), slope >= 0.
struct LogisticCalibrator {
    double slope = 0.0;
    double offset = 0.0;

    double predict(double score) const;

    bool operator==(const LogisticCalibrator&) const = default;
};

struct LogisticFit {
    LogisticCalibrator calibrator;
    // Outcomes were (quasi-)separable, the likelihood has no finite maximum
    // and the slope sits at the cap.
    bool separated = false;
    int iterations = 0;
    bool converged = false;
};

struct LogisticOptions {
    double slope_cap = 1e3;
    int max_iterations = 100;
    double gradient_tolerance = 1e-8;
};

// Pairs must be sorted ascending by score (ties allowed; they are pooled).
IsotonicCalibrator fit_isotonic(std::span<const CalibrationPair> pairs);

// Damped Newton on the weighted Bernoulli log-likelihood.
LogisticFit fit_logistic(std::span<const CalibrationPair> pairs, const LogisticOptions& options = {});

double log_likelihood(std::span<const CalibrationPair> pairs, const LogisticCalibrator& calibrator);

enum class CalibratorKind { isotonic, logistic };
CalibratorKind parse_calibrator_kind(std::string_view text);

using Calibrator = std::variant<IsotonicCalibrator, LogisticCalibrator>;

// Throws ContractError on a NaN score.
double predict_confidence(const Calibrator& calibrator, double score);

/**
 * Text format, one record per line:
 *
 *     geosep-isotonic v1            geosep-logistic v1
 *     <breakpoint>\t<value>         <slope>\t<offset>
 *     ...
 *
 * Reals are written with 17 significant digits so predictions survive the
 * round trip bit for bit.
 */
void write_calibrator(std::ostream& out, const Calibrator& calibrator);
Calibrator read_calibrator(std::istream& in);
void save_calibrator(const std::filesystem::path& path, const Calibrator& calibrator);
Calibrator load_calibrator(const std::filesystem::path& path);

struct FitCurveBin {
    double mean_score = 0.0;
    double accuracy = 0.0;
    std::size_t count = 0;
};

// Equal-count bins of (score, outcome) sorted by score, for plotting the
// empirical success ratio against the fitted curve.
std::vector<FitCurveBin> fit_curve_table(std::span<const double> scores, std::span<const int> outcomes,
                                         std::size_t bins = 50);
// `mean_score,accuracy,count[,fitted]`
void write_fit_curve_csv(std::ostream& out, std::span<const FitCurveBin> table, const Calibrator* fitted = nullptr);

}  // namespace geosep

#endif  // GEOSEP_CALIBRATION_HPP
