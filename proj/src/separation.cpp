#include "geosep/separation.hpp"

#include "geosep/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace geosep {

std::string_view to_string(ScoreKind kind) { return kind == ScoreKind::fast ? "fast" : "exact"; }

ScoreKind parse_score_kind(std::string_view text) {
    if (text == "fast") return ScoreKind::fast;
    if (text == "exact") return ScoreKind::exact;
    throw ContractError("unknown score kind: " + std::string(text));
}

double bisector_margin(std::span<const double> x, std::span<const double> same, std::span<const double> other) {
    if (x.size() != same.size() || x.size() != other.size()) throw ContractError("dimension mismatch");
    const std::size_t dim = x.size();
    const double pair_sq = detail::squared_l2(same.data(), other.data(), dim);
    if (pair_sq == 0.0) throw ContractError("degenerate pair");
    const double to_other = detail::squared_l2(x.data(), other.data(), dim);
    const double to_same = detail::squared_l2(x.data(), same.data(), dim);
    return (to_other - to_same) / (2.0 * std::sqrt(pair_sq));
}

SeparationScore exact_separation(const ClassPartitionIndex& index, std::span<const double> x,
                                 const Label& predicted_label) {
    index.check_query(x);
    const std::size_t dim = index.dimension();
    const std::size_t own = index.label_id(predicted_label);
    const auto& same = index.buckets()[own];

    std::vector<double> same_sq(same.count);
    for (std::size_t i = 0; i < same.count; ++i) {
        same_sq[i] = detail::squared_l2(x.data(), same.coords.data() + i * dim, dim);
    }

    double outer = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < index.buckets().size(); ++b) {
        if (b == own) continue;
        const auto& other = index.buckets()[b];
        for (std::size_t k = 0; k < other.count; ++k) {
            const double* far = other.coords.data() + k * dim;
            const double other_sq = detail::squared_l2(x.data(), far, dim);
            double inner = -std::numeric_limits<double>::infinity();
            bool any_pair = false;
            for (std::size_t i = 0; i < same.count; ++i) {
                const double pair_sq = detail::squared_l2(same.coords.data() + i * dim, far, dim);
                if (pair_sq == 0.0) continue;
                any_pair = true;
                inner = std::max(inner, (other_sq - same_sq[i]) / (2.0 * std::sqrt(pair_sq)));
            }
            outer = std::min(outer, any_pair ? inner : 0.0);
        }
    }
    return {outer, ScoreKind::exact};
}

SeparationScore fast_separation(const ClassPartitionIndex& index, std::span<const double> x,
                                const Label& predicted_label) {
    index.check_query(x);
    const std::size_t id = index.label_id(predicted_label);
    const double to_same = std::sqrt(index.nn_distance_squared(x, id, Side::same));
    const double to_other = std::sqrt(index.nn_distance_squared(x, id, Side::other));
    return {(to_other - to_same) / 2.0, ScoreKind::fast};
}

double gap_bound(const ClassPartitionIndex& index, std::span<const double> x, const Label& predicted_label) {
    index.check_query(x);
    const std::size_t id = index.label_id(predicted_label);
    const double to_same = std::sqrt(index.nn_distance_squared(x, id, Side::same));
    const double to_other = std::sqrt(index.nn_distance_squared(x, id, Side::other));
    return (to_same + to_other) / 2.0;
}

}  // namespace geosep
