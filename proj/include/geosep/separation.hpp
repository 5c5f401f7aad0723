#ifndef GEOSEP_SEPARATION_HPP
#define GEOSEP_SEPARATION_HPP

#include "geosep/partition_index.hpp"

#include <span>
#include <string_view>

namespace geosep {

enum class ScoreKind { fast, exact };

std::string_view to_string(ScoreKind kind);
// Throws ContractError for anything but "fast" or "exact".
ScoreKind parse_score_kind(std::string_view text);

/// Signed separation of an input from the other-label training points.
/// Positive means safe; zero and below mean dangerous. |value| is a zone
/// radius in feature-space units.
struct SeparationScore {
    double value = 0.0;
    ScoreKind kind = ScoreKind::fast;

    bool safe() const { return value > 0.0; }
};

/**
 * Signed distance from x to the perpendicular bisector of (same, other),
 * positive when x is strictly closer to `same`:
 *
 *     (d^2(x, other) - d^2(x, same)) / (2 d(same, other))
 *
 * Throws ContractError("degenerate pair") when same and other coincide.
 */
double bisector_margin(std::span<const double> x, std::span<const double> same, std::span<const double> other);

/**
 * Exact separation: minimum over other-label points x'' of the maximum over
 * same-label points x' of bisector_margin(x, x', x'').
 *
 * Pairs with d(x', x'') = 0 are skipped; an x'' whose every pair is skipped
 * contributes 0. Cost is |F| * |F-bar| distance evaluations.
 */
SeparationScore exact_separation(const ClassPartitionIndex& index, std::span<const double> x,
                                 const Label& predicted_label);

// (D(x, F-bar) - D(x, F)) / 2, from exactly two nearest-neighbor queries.
SeparationScore fast_separation(const ClassPartitionIndex& index, std::span<const double> x,
                                const Label& predicted_label);

// (D(x, F) + D(x, F-bar)) / 2, an upper bound on |exact - fast|.
double gap_bound(const ClassPartitionIndex& index, std::span<const double> x, const Label& predicted_label);

}  // namespace geosep

#endif  // GEOSEP_SEPARATION_HPP
