#include "geosep/batch_scoring.hpp"

#include "geosep/error.hpp"

#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace geosep {

namespace {

// Resolves labels and checks dimensions before any kernel runs, so nothing
// throws inside a parallel region.
std::vector<std::size_t> resolve(const ClassPartitionIndex& index, std::span<const FeatureVector> inputs,
                                 std::span<const Label> predicted) {
    if (inputs.size() != predicted.size()) {
        throw ContractError("inputs and predicted labels differ in length");
    }
    std::vector<std::size_t> ids(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        index.check_query(inputs[i]);
        ids[i] = index.label_id(predicted[i]);
    }
    return ids;
}

SeparationScore score_one(const ClassPartitionIndex& index, const FeatureVector& x, const Label& label,
                          ScoreKind kind) {
    return kind == ScoreKind::fast ? fast_separation(index, x, label) : exact_separation(index, x, label);
}

}  // namespace

std::vector<SeparationScore> score_batch_serial(const ClassPartitionIndex& index, std::span<const FeatureVector> inputs,
                                                std::span<const Label> predicted, ScoreKind kind) {
    resolve(index, inputs, predicted);
    std::vector<SeparationScore> out(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = score_one(index, inputs[i], predicted[i], kind);
    return out;
}

std::vector<SeparationScore> score_batch_parallel(const ClassPartitionIndex& index,
                                                  std::span<const FeatureVector> inputs,
                                                  std::span<const Label> predicted, ScoreKind kind, int threads) {
    resolve(index, inputs, predicted);
    std::vector<SeparationScore> out(inputs.size());
    const auto n = static_cast<std::ptrdiff_t>(inputs.size());
#ifdef _OPENMP
    const int team = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 4) num_threads(team)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = score_one(index, inputs[i], predicted[i], kind);
    (void)threads;
    return out;
}

void write_scores_csv(std::ostream& out, std::span<const Label> predicted, std::span<const SeparationScore> fast,
                      const std::optional<std::vector<SeparationScore>>& exact) {
    if (predicted.size() != fast.size() || (exact && exact->size() != fast.size())) {
        throw ContractError("score columns differ in length");
    }
    out << "index,predicted_label,fast_sep,exact_sep\n";
    for (std::size_t i = 0; i < fast.size(); ++i) {
        out << i << ',' << predicted[i] << ',' << format_significant(fast[i].value, 9) << ',';
        if (exact) out << format_significant((*exact)[i].value, 9);
        out << '\n';
    }
}

}  // namespace geosep
