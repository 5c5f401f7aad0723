#include "geosep/metrics.hpp"

#include "geosep/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace geosep {

EceReport ece(std::span<const double> confidences, std::span<const int> correctness, std::size_t m_bins) {
    if (confidences.size() != correctness.size()) throw ContractError("confidences and correctness differ in length");
    if (confidences.empty()) throw ContractError("ECE needs at least one sample");
    if (m_bins == 0) throw ContractError("ECE needs at least one bin");

    EceReport report;
    report.m_bins = m_bins;
    report.n = confidences.size();
    report.bins.resize(m_bins);
    std::vector<double> hits(m_bins, 0.0), conf_sum(m_bins, 0.0);
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double c = confidences[i];
        if (!(c >= 0.0 && c <= 1.0)) throw ContractError("confidence outside [0,1] at " + std::to_string(i));
        if (correctness[i] != 0 && correctness[i] != 1) throw ContractError("correctness must be 0 or 1");
        const auto b = std::min(static_cast<std::size_t>(c * static_cast<double>(m_bins)), m_bins - 1);
        ++report.bins[b].count;
        hits[b] += correctness[i];
        conf_sum[b] += c;
    }
    const auto n = static_cast<double>(report.n);
    for (std::size_t b = 0; b < m_bins; ++b) {
        auto& bin = report.bins[b];
        bin.lower = static_cast<double>(b) / static_cast<double>(m_bins);
        bin.upper = static_cast<double>(b + 1) / static_cast<double>(m_bins);
        if (bin.count == 0) continue;
        const auto count = static_cast<double>(bin.count);
        bin.accuracy = hits[b] / count;
        bin.mean_confidence = conf_sum[b] / count;
        report.ece += count / n * std::abs(bin.accuracy - bin.mean_confidence);
    }
    return report;
}

void write_ece_csv(std::ostream& out, const EceReport& report) {
    out << "bin_lower,bin_upper,count,accuracy,mean_confidence\n";
    for (const auto& bin : report.bins) {
        out << format_significant(bin.lower, 17) << ',' << format_significant(bin.upper, 17) << ',' << bin.count
            << ',' << format_significant(bin.accuracy, 17) << ',' << format_significant(bin.mean_confidence, 17)
            << '\n';
    }
    out << "ECE," << format_significant(report.ece, 17) << ",N," << report.n << ",M," << report.m_bins << '\n';
}

double accuracy(std::span<const Label> predicted, std::span<const Label> actual) {
    if (predicted.size() != actual.size()) throw ContractError("label lists differ in length");
    if (predicted.empty()) throw ContractError("accuracy needs at least one label");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i];
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

TrialSummary aggregate_trials(std::span<const double> values) {
    if (values.size() < 2) throw ContractError("confidence interval needs at least two trials");
    TrialSummary s;
    s.trial_values.assign(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    for (double v : values) s.mean += v;
    s.mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.ci95_halfwidth = kZ95 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return s;
}

}  // namespace geosep
