#ifndef GEOSEP_BATCH_SCORING_HPP
#define GEOSEP_BATCH_SCORING_HPP

#include "geosep/separation.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace geosep {

// Serial reference kernel: one separation per input, in order.
std::vector<SeparationScore> score_batch_serial(const ClassPartitionIndex& index, std::span<const FeatureVector> inputs,
                                                std::span<const Label> predicted, ScoreKind kind);

/**
 * OpenMP kernel over inputs. Produces the same values as the serial kernel
 * bit for bit; every input is scored independently against the shared,
 * read-only index. threads <= 0 uses the OpenMP default.
 */
std::vector<SeparationScore> score_batch_parallel(const ClassPartitionIndex& index,
                                                  std::span<const FeatureVector> inputs,
                                                  std::span<const Label> predicted, ScoreKind kind, int threads = 0);

// `index,predicted_label,fast_sep,exact_sep`, 9 significant digits; the
// exact column is left empty when not given.
void write_scores_csv(std::ostream& out, std::span<const Label> predicted, std::span<const SeparationScore> fast,
                      const std::optional<std::vector<SeparationScore>>& exact);

}  // namespace geosep

#endif  // GEOSEP_BATCH_SCORING_HPP
