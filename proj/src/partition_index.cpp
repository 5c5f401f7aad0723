#include "geosep/partition_index.hpp"

#include "geosep/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace geosep {

namespace {

// Squared distance from x to a shadow row, accumulated in double.
double shadow_squared(const double* x, const float* row, std::size_t dim) {
    constexpr std::size_t kLanes = 8;
    double acc[kLanes] = {};
    std::size_t j = 0;
    for (; j + kLanes <= dim; j += kLanes) {
#pragma omp simd
        for (std::size_t k = 0; k < kLanes; ++k) {
            const double diff = x[j + k] - static_cast<double>(row[j + k]);
            acc[k] += diff * diff;
        }
    }
    double sum = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (; j < dim; ++j) {
        const double diff = x[j] - static_cast<double>(row[j]);
        sum += diff * diff;
    }
    return sum;
}

void attach_shadow(ClassPartitionIndex::Bucket& b, std::size_t dim) {
    b.shadow.resize(b.coords.size());
    b.shadow_error.resize(b.count);
    for (std::size_t i = 0; i < b.count; ++i) {
        const double* row = b.coords.data() + i * dim;
        float* low = b.shadow.data() + i * dim;
        double err = 0.0;
        bool finite = true;
        for (std::size_t j = 0; j < dim; ++j) {
            low[j] = static_cast<float>(row[j]);
            finite = finite && std::isfinite(low[j]);
            const double d = row[j] - static_cast<double>(low[j]);
            err += d * d;
        }
        if (!finite) {
            // Out of float range: park the row at the origin with an infinite
            // error so it is always rechecked.
            std::fill(low, low + dim, 0.0f);
            b.shadow_error[i] = std::numeric_limits<double>::infinity();
        } else {
            b.shadow_error[i] = std::sqrt(err) * (1.0 + 1e-9);
        }
    }
}

// Exact minimum of squared_l2 over the rows of the selected buckets.
//
// Pass one bounds every true distance d by a -+ (rel * a + e), where a is the
// shadow distance and e the row's rounding-error norm. Rows whose lower bound
// exceeds the smallest upper bound, widened once more for the rounding of
// squared_l2 itself, cannot hold the minimum and are skipped in pass two.
double min_squared(const std::vector<ClassPartitionIndex::Bucket>& buckets, std::size_t skip, bool only,
                   const double* x, std::size_t dim) {
    const double rel = static_cast<double>(dim + 16) * std::numeric_limits<double>::epsilon();
    thread_local std::vector<double> approx;
    auto selected = [&](std::size_t b) { return only ? b == skip : b != skip; };

    double upper = std::numeric_limits<double>::infinity();
    std::size_t total = 0;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        if (selected(b)) total += buckets[b].count;
    }
    approx.resize(total);
    std::size_t k = 0;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        if (!selected(b)) continue;
        const auto& bucket = buckets[b];
        const float* row = bucket.shadow.data();
        for (std::size_t i = 0; i < bucket.count; ++i, row += dim, ++k) {
            const double a = std::sqrt(shadow_squared(x, row, dim));
            approx[k] = a;
            upper = std::min(upper, a * (1 + rel) + bucket.shadow_error[i]);
        }
    }

    const double cut = upper * (1 + 4 * rel);
    double best = std::numeric_limits<double>::infinity();
    k = 0;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        if (!selected(b)) continue;
        const auto& bucket = buckets[b];
        for (std::size_t i = 0; i < bucket.count; ++i, ++k) {
            if (approx[k] * (1 - rel) - bucket.shadow_error[i] > cut) continue;
            best = std::min(best, detail::squared_l2(x, bucket.coords.data() + i * dim, dim));
        }
    }
    return best;
}

}  // namespace

ClassPartitionIndex ClassPartitionIndex::build(const Dataset& train) {
    if (train.empty()) throw ContractError("cannot build index: train set is empty");
    if (train.labels().size() < 2) {
        throw ContractError("cannot build index: complement set F̄ would be empty (single label)");
    }
    ClassPartitionIndex index;
    index.dimension_ = train.dimension();
    index.total_count_ = train.size();

    std::map<Label, std::size_t> slot;
    for (const auto& label : train.labels()) {
        slot.emplace(label, index.buckets_.size());
        index.buckets_.push_back(Bucket{label, {}, 0, {}, {}});
    }
    for (const auto& p : train.points()) {
        auto& b = index.buckets_[slot.at(p.label)];
        b.coords.insert(b.coords.end(), p.features.begin(), p.features.end());
        ++b.count;
    }
    for (auto& b : index.buckets_) attach_shadow(b, index.dimension_);
    return index;
}

ClassPartitionIndex::ClassPartitionIndex(const ClassPartitionIndex& other)
    : buckets_(other.buckets_),
      dimension_(other.dimension_),
      total_count_(other.total_count_),
      queries_(other.query_count()) {}

ClassPartitionIndex& ClassPartitionIndex::operator=(const ClassPartitionIndex& other) {
    buckets_ = other.buckets_;
    dimension_ = other.dimension_;
    total_count_ = other.total_count_;
    queries_.store(other.query_count(), std::memory_order_relaxed);
    return *this;
}

ClassPartitionIndex::ClassPartitionIndex(ClassPartitionIndex&& other) noexcept
    : buckets_(std::move(other.buckets_)),
      dimension_(other.dimension_),
      total_count_(other.total_count_),
      queries_(other.query_count()) {}

ClassPartitionIndex& ClassPartitionIndex::operator=(ClassPartitionIndex&& other) noexcept {
    buckets_ = std::move(other.buckets_);
    dimension_ = other.dimension_;
    total_count_ = other.total_count_;
    queries_.store(other.query_count(), std::memory_order_relaxed);
    return *this;
}

std::vector<Label> ClassPartitionIndex::labels() const {
    std::vector<Label> out;
    out.reserve(buckets_.size());
    for (const auto& b : buckets_) out.push_back(b.label);
    return out;
}

std::optional<std::size_t> ClassPartitionIndex::find_label(const Label& label) const {
    auto it = std::lower_bound(buckets_.begin(), buckets_.end(), label,
                               [](const Bucket& b, const Label& l) { return b.label < l; });
    if (it == buckets_.end() || it->label != label) return std::nullopt;
    return static_cast<std::size_t>(it - buckets_.begin());
}

std::size_t ClassPartitionIndex::label_id(const Label& label) const {
    auto id = find_label(label);
    if (!id) throw ContractError("unknown label: " + label);
    return *id;
}

void ClassPartitionIndex::check_query(std::span<const double> x) const {
    if (x.size() != dimension_) {
        throw ContractError("dimension mismatch: query has " + std::to_string(x.size()) + ", index has " +
                            std::to_string(dimension_));
    }
}

double ClassPartitionIndex::nn_distance_squared(std::span<const double> x, std::size_t label_id, Side side) const {
    queries_.fetch_add(1, std::memory_order_relaxed);
    return min_squared(buckets_, label_id, side == Side::same, x.data(), dimension_);
}

double ClassPartitionIndex::nn_distance(std::span<const double> x, const Label& label, Side side) const {
    check_query(x);
    return std::sqrt(nn_distance_squared(x, label_id(label), side));
}

}  // namespace geosep
