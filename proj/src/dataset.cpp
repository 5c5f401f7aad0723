#include "geosep/dataset.hpp"

#include "geosep/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace geosep {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool parse_real(const std::string& cell, double& value) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    // from_chars rejects a leading '+', which some writers emit.
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last && first != last;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

}  // namespace

Dataset::Dataset(std::vector<LabeledPoint> points) : points_(std::move(points)) {
    std::set<Label> labels;
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto& p = points_[i];
        if (p.features.empty()) throw ContractError("point " + std::to_string(i) + " has no features");
        if (i == 0) dimension_ = p.features.size();
        if (p.features.size() != dimension_) {
            throw ContractError("dimension mismatch at point " + std::to_string(i));
        }
        for (double v : p.features) {
            if (!std::isfinite(v)) throw ContractError("non-finite feature at point " + std::to_string(i));
        }
        if (p.label.empty()) throw ContractError("empty label at point " + std::to_string(i));
        labels.insert(p.label);
    }
    labels_.assign(labels.begin(), labels.end());
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    std::vector<LabeledPoint> picked;
    picked.reserve(indices.size());
    for (auto i : indices) {
        if (i >= points_.size()) throw ContractError("subset index out of range: " + std::to_string(i));
        picked.push_back(points_[i]);
    }
    return Dataset(std::move(picked));
}

Dataset read_dataset(std::istream& in, const LoadOptions& options) {
    std::string line;
    if (!std::getline(in, line)) throw ContractError("empty file");
    strip_cr(line);
    const auto header = split_fields(line);
    if (header.empty() || header[0] != "label") {
        throw ContractError("row 1: first header column must be `label`");
    }
    if (header.size() < 2) throw ContractError("row 1: no feature columns");
    const std::size_t dim = header.size() - 1;

    std::vector<LabeledPoint> points;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != dim + 1) {
            throw ContractError("dimension mismatch at row " + std::to_string(row));
        }
        LabeledPoint p;
        p.label = fields[0];
        if (p.label.empty()) throw ContractError("empty label at row " + std::to_string(row));
        p.features.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            double v = 0.0;
            if (!parse_real(fields[j + 1], v) || !std::isfinite(v)) {
                throw ContractError("non-numeric feature at row " + std::to_string(row) + ", column " +
                                    std::to_string(j + 2));
            }
            if (options.strict && std::abs(v) > 1e6) {
                throw ContractError("feature outside [-1e6, 1e6] at row " + std::to_string(row) +
                                    " (strict mode)");
            }
            p.features[j] = v;
        }
        points.push_back(std::move(p));
    }
    if (points.empty()) throw ContractError("empty file: no data rows");
    return Dataset(std::move(points));
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
    auto in = open_input(path);
    try {
        return read_dataset(in, options);
    } catch (const ContractError& e) {
        throw ContractError(path.string() + ": " + e.what());
    }
}

std::string format_shortest(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

std::string format_significant(double value, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
    return buf;
}

void write_dataset(std::ostream& out, const Dataset& data) {
    out << "label";
    for (std::size_t j = 0; j < data.dimension(); ++j) out << ",f" << j;
    out << '\n';
    for (const auto& p : data.points()) {
        out << p.label;
        for (double v : p.features) out << ',' << format_shortest(v);
        out << '\n';
    }
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_dataset(out, data);
    if (!out) throw IoError("write failed: " + path.string());
}

DataSplit split_dataset(const Dataset& source, const SplitRatios& ratios, std::uint64_t seed) {
    if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0) {
        throw ContractError("split ratios must be positive");
    }
    if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
        throw ContractError("split ratios must sum to 1");
    }
    const std::size_t n = source.size();
    if (n < 3) throw ContractError("dataset too small to split: " + std::to_string(n) + " points");

    // The epsilon keeps products like 0.6 * 10 from flooring to 5.
    auto floor_of = [n](double r) {
        return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
    };
    std::size_t sizes[3] = {floor_of(ratios.train), floor_of(ratios.validation), floor_of(ratios.test)};
    while (sizes[0] + sizes[1] + sizes[2] > n && sizes[0] > 0) --sizes[0];
    // At most two points are left over; deal them out train first.
    for (std::size_t k = 0; sizes[0] + sizes[1] + sizes[2] < n; ++k) ++sizes[k % 3];
    if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0) {
        throw ContractError("dataset too small to give each split part at least one point");
    }
    const std::size_t n_train = sizes[0], n_val = sizes[1];

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }

    DataSplit split;
    split.seed = seed;
    split.train_indices.assign(order.begin(), order.begin() + n_train);
    split.validation_indices.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    split.test_indices.assign(order.begin() + n_train + n_val, order.end());
    split.train = source.subset(split.train_indices);
    split.validation = source.subset(split.validation_indices);
    split.test = source.subset(split.test_indices);
    return split;
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ContractError("empty predictions file");
    strip_cr(line);
    const auto header = split_fields(line);
    if (header.size() < 2 || header.size() > 3 || header[0] != "index" || header[1] != "predicted_label" ||
        (header.size() == 3 && header[2] != "native_confidence")) {
        throw ContractError("row 1: expected header index,predicted_label[,native_confidence]");
    }
    const bool with_confidence = header.size() == 3;

    std::vector<PredictionRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw ContractError("wrong field count at row " + std::to_string(row));
        }
        PredictionRecord r;
        double idx = 0.0;
        if (!parse_real(fields[0], idx) || idx < 0 || idx != std::floor(idx)) {
            throw ContractError("bad index at row " + std::to_string(row));
        }
        r.point_index = static_cast<std::size_t>(idx);
        r.predicted_label = fields[1];
        if (r.predicted_label.empty()) throw ContractError("empty predicted_label at row " + std::to_string(row));
        if (with_confidence && !fields[2].empty()) {
            double c = 0.0;
            if (!parse_real(fields[2], c) || c < 0.0 || c > 1.0) {
                throw ContractError("native_confidence outside [0,1] at row " + std::to_string(row));
            }
            r.native_confidence = c;
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return read_predictions(in);
    } catch (const ContractError& e) {
        throw ContractError(path.string() + ": " + e.what());
    }
}

void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records) {
    const bool with_confidence =
        std::any_of(records.begin(), records.end(), [](const auto& r) { return r.native_confidence.has_value(); });
    out << "index,predicted_label" << (with_confidence ? ",native_confidence" : "") << '\n';
    for (const auto& r : records) {
        out << r.point_index << ',' << r.predicted_label;
        if (with_confidence) {
            out << ',';
            if (r.native_confidence) out << format_shortest(*r.native_confidence);
        }
        out << '\n';
    }
}

}  // namespace geosep
