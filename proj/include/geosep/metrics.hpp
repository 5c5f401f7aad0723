#ifndef GEOSEP_METRICS_HPP
#define GEOSEP_METRICS_HPP

#include "geosep/dataset.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace geosep {

struct EceBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double accuracy = 0.0;         // 0 for an empty bin
    double mean_confidence = 0.0;  // 0 for an empty bin
};

struct EceReport {
    std::size_t m_bins = 0;
    std::vector<EceBin> bins;
    double ece = 0.0;
    std::size_t n = 0;
};

/**
 * Expected calibration error over M equal-width confidence bins.
 *
 * Bin b covers [b/M, (b+1)/M); the last bin also takes confidence 1.0.
 * ECE = sum over non-empty bins of (|B|/n) * |acc(B) - conf(B)|.
 */
EceReport ece(std::span<const double> confidences, std::span<const int> correctness, std::size_t m_bins = 30);

// Rows `bin_lower,bin_upper,count,accuracy,mean_confidence` under that
// header, then `ECE,<value>,N,<n>,M,<m_bins>`.
void write_ece_csv(std::ostream& out, const EceReport& report);

double accuracy(std::span<const Label> predicted, std::span<const Label> actual);

// 95% normal-approximation interval over independent trials.
struct TrialSummary {
    std::vector<double> trial_values;
    double mean = 0.0;
    double ci95_halfwidth = 0.0;
};

inline constexpr double kZ95 = 1.96;

// Needs at least two values: the half-width is 1.96 * s / sqrt(n) with the
// sample (n - 1) standard deviation.
TrialSummary aggregate_trials(std::span<const double> values);

}  // namespace geosep

#endif  // GEOSEP_METRICS_HPP
