#ifndef GEOSEP_PARTITION_INDEX_HPP
#define GEOSEP_PARTITION_INDEX_HPP

#include "geosep/dataset.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geosep {

namespace detail {

// Squared Euclidean distance. The only metric exposed; every distance in the
// library goes through here.
inline double squared_l2(const double* a, const double* b, std::size_t dim) {
    // Independent lane accumulators keep the adds off one dependency chain.
    constexpr std::size_t kLanes = 8;
    double acc[kLanes] = {};
    std::size_t j = 0;
    for (; j + kLanes <= dim; j += kLanes) {
#pragma omp simd
        for (std::size_t k = 0; k < kLanes; ++k) {
            const double diff = a[j + k] - b[j + k];
            acc[k] += diff * diff;
        }
    }
    double sum = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (; j < dim; ++j) {
        const double diff = a[j] - b[j];
        sum += diff * diff;
    }
    return sum;
}

}  // namespace detail

enum class Side {
    same,   // D(x, F): the bucket of the given label
    other,  // D(x, F-bar): every other bucket
};

/**
 * Training points grouped by label into contiguous row-major blocks.
 *
 * Answers exact nearest-neighbor distances by linear scan against one label
 * bucket or against its complement. The scan reads the single-precision
 * shadow first and rechecks the few rows it cannot rule out in double
 * precision, so results equal a full double-precision scan bit for bit. Immutable after build; queries are safe
 * to issue from several threads at once.
 */
class ClassPartitionIndex {
public:
    struct Bucket {
        Label label;
        std::vector<double> coords;  // count * dimension, row-major
        std::size_t count = 0;
        // Single-precision copy of coords and, per row, the Euclidean norm of
        // the rounding error. Used only to discard rows that provably cannot
        // be nearest; surviving rows are measured on coords.
        std::vector<float> shadow;
        std::vector<double> shadow_error;

        std::span<const double> point(std::size_t i, std::size_t dim) const {
            return {coords.data() + i * dim, dim};
        }
    };

    // Throws ContractError when train is empty or has fewer than two labels.
    static ClassPartitionIndex build(const Dataset& train);

    ClassPartitionIndex(const ClassPartitionIndex& other);
    ClassPartitionIndex& operator=(const ClassPartitionIndex& other);
    ClassPartitionIndex(ClassPartitionIndex&& other) noexcept;
    ClassPartitionIndex& operator=(ClassPartitionIndex&& other) noexcept;

    std::size_t dimension() const { return dimension_; }
    std::size_t total_count() const { return total_count_; }
    // Sorted by label.
    const std::vector<Bucket>& buckets() const { return buckets_; }
    std::vector<Label> labels() const;

    std::optional<std::size_t> find_label(const Label& label) const;
    // Throws ContractError for an unknown label.
    std::size_t label_id(const Label& label) const;
    const Bucket& bucket(const Label& label) const { return buckets_[label_id(label)]; }

    /// Minimum Euclidean distance from x to the chosen side of `label`.
    double nn_distance(std::span<const double> x, const Label& label, Side side) const;
    double nn_distance_squared(std::span<const double> x, std::size_t label_id, Side side) const;

    // Throws ContractError when x has the wrong dimension.
    void check_query(std::span<const double> x) const;

    // Number of nn_distance queries served so far (all threads).
    std::uint64_t query_count() const { return queries_.load(std::memory_order_relaxed); }
    void reset_query_count() const { queries_.store(0, std::memory_order_relaxed); }

private:
    ClassPartitionIndex() = default;

    std::vector<Bucket> buckets_;
    std::size_t dimension_ = 0;
    std::size_t total_count_ = 0;
    mutable std::atomic<std::uint64_t> queries_{0};
};

}  // namespace geosep

#endif  // GEOSEP_PARTITION_INDEX_HPP
