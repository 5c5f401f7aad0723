#include "geosep/calibration.hpp"

#include "geosep/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace geosep {

namespace {

constexpr const char* kIsotonicHeader = "geosep-isotonic v1";
constexpr const char* kLogisticHeader = "geosep-logistic v1";

double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// log(sigmoid(t)) without overflow.
double log_sigmoid(double t) { return t >= 0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t)); }

std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_field(const std::string& text, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        throw ContractError("calibrator line " + std::to_string(line) + ": bad number `" + text + "`");
    }
    return v;
}

}  // namespace

std::vector<CalibrationPair> collect_pairs(std::span<const double> scores, std::span<const int> outcomes) {
    if (scores.size() != outcomes.size()) throw ContractError("scores and outcomes differ in length");
    if (scores.empty()) throw ContractError("no calibration pairs");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw ContractError("NaN score at " + std::to_string(i));
        if (outcomes[i] != 0 && outcomes[i] != 1) throw ContractError("outcome must be 0 or 1");
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::vector<CalibrationPair> pairs;
    for (std::size_t i : order) {
        if (!pairs.empty() && pairs.back().score == scores[i]) {
            pairs.back().correct += outcomes[i];
            pairs.back().weight += 1.0;
        } else {
            pairs.push_back({scores[i], static_cast<double>(outcomes[i]), 1.0});
        }
    }
    for (auto& p : pairs) p.correct /= p.weight;
    return pairs;
}

std::vector<CalibrationPair> collect_pairs(std::span<const SeparationScore> scores, std::span<const int> outcomes) {
    std::vector<double> values(scores.size());
    std::transform(scores.begin(), scores.end(), values.begin(), [](const auto& s) { return s.value; });
    return collect_pairs(values, outcomes);
}

std::vector<double> pool_adjacent_violators(std::span<const double> targets, std::span<const double> weights) {
    if (targets.size() != weights.size()) throw ContractError("targets and weights differ in length");
    struct Block {
        double mean;
        double weight;
        std::size_t size;
    };
    std::vector<Block> blocks;
    blocks.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!(weights[i] > 0)) throw ContractError("weights must be positive");
        blocks.push_back({targets[i], weights[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
            const Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            const double w = prev.weight + top.weight;
            prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / w;
            prev.weight = w;
            prev.size += top.size;
        }
    }
    std::vector<double> fitted;
    fitted.reserve(targets.size());
    for (const auto& b : blocks) fitted.insert(fitted.end(), b.size, b.mean);
    return fitted;
}

IsotonicCalibrator::IsotonicCalibrator(std::vector<double> breakpoints, std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (breakpoints_.empty() || breakpoints_.size() != values_.size()) {
        throw ContractError("isotonic calibrator needs equal, non-zero numbers of breakpoints and values");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(breakpoints_[i])) throw ContractError("non-finite breakpoint");
        if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) throw ContractError("fitted value outside [0,1]");
        if (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1])) {
            throw ContractError("breakpoints must be strictly increasing");
        }
        if (i > 0 && values_[i] < values_[i - 1]) throw ContractError("fitted values must be non-decreasing");
    }
}

double IsotonicCalibrator::predict(double score) const {
    if (std::isnan(score)) throw ContractError("NaN score");
    if (score <= breakpoints_.front()) return values_.front();
    if (score >= breakpoints_.back()) return values_.back();
    const auto hi = static_cast<std::size_t>(
        std::upper_bound(breakpoints_.begin(), breakpoints_.end(), score) - breakpoints_.begin());
    const std::size_t lo = hi - 1;
    const double t = (score - breakpoints_[lo]) / (breakpoints_[hi] - breakpoints_[lo]);
    const double v = values_[lo] + t * (values_[hi] - values_[lo]);
    return std::clamp(v, values_[lo], values_[hi]);
}

double LogisticCalibrator::predict(double score) const {
    if (std::isnan(score)) throw ContractError("NaN score");
    return sigmoid(slope * score + offset);
}

IsotonicCalibrator fit_isotonic(std::span<const CalibrationPair> pairs) {
    if (pairs.empty()) throw ContractError("no calibration pairs");
    std::vector<double> scores, targets, weights;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        if (!std::isfinite(p.score)) throw ContractError("non-finite score");
        if (!(p.weight > 0)) throw ContractError("weights must be positive");
        if (i > 0 && p.score < pairs[i - 1].score) throw ContractError("pairs must be sorted by score");
        if (!scores.empty() && scores.back() == p.score) {
            const double w = weights.back() + p.weight;
            targets.back() = (targets.back() * weights.back() + p.correct * p.weight) / w;
            weights.back() = w;
        } else {
            scores.push_back(p.score);
            targets.push_back(p.correct);
            weights.push_back(p.weight);
        }
    }
    auto fitted = pool_adjacent_violators(targets, weights);
    for (auto& v : fitted) v = std::clamp(v, 0.0, 1.0);
    return IsotonicCalibrator(std::move(scores), std::move(fitted));
}

double log_likelihood(std::span<const CalibrationPair> pairs, const LogisticCalibrator& c) {
    double ll = 0.0;
    for (const auto& p : pairs) {
        const double t = c.slope * p.score + c.offset;
        if (p.correct > 0) ll += p.weight * p.correct * log_sigmoid(t);
        if (p.correct < 1) ll += p.weight * (1.0 - p.correct) * log_sigmoid(-t);
    }
    return ll;
}

LogisticFit fit_logistic(std::span<const CalibrationPair> pairs, const LogisticOptions& options) {
    if (pairs.empty()) throw ContractError("no calibration pairs");
    double total = 0.0, positive = 0.0, mean = 0.0;
    double lowest = std::numeric_limits<double>::infinity(), highest = -lowest;
    double max_failure = -std::numeric_limits<double>::infinity();
    double min_success = std::numeric_limits<double>::infinity();
    for (const auto& p : pairs) {
        if (!std::isfinite(p.score) || !(p.weight > 0) || p.correct < 0 || p.correct > 1) {
            throw ContractError("invalid calibration pair");
        }
        total += p.weight;
        positive += p.weight * p.correct;
        mean += p.weight * p.score;
        lowest = std::min(lowest, p.score);
        highest = std::max(highest, p.score);
        if (p.correct < 1) max_failure = std::max(max_failure, p.score);
        if (p.correct > 0) min_success = std::min(min_success, p.score);
    }
    if (!(highest > lowest)) throw ContractError("logistic fit needs at least two distinct scores");
    if (positive <= 0 || positive >= total) throw ContractError("logistic fit needs both outcome classes");
    mean /= total;

    LogisticFit fit;
    if (max_failure < min_success) {
        // Perfectly separated: the likelihood grows without bound in the slope.
        const double threshold = (max_failure + min_success) / 2.0;
        fit.calibrator = {options.slope_cap, -options.slope_cap * threshold};
        fit.separated = true;
        fit.converged = true;
        return fit;
    }

    // Newton in standardized score units, t = a * (s - mean) / scale + b.
    double var = 0.0;
    for (const auto& p : pairs) var += p.weight * (p.score - mean) * (p.score - mean);
    const double scale = std::sqrt(var / total);
    const double cap = options.slope_cap * scale;

    auto to_original = [&](double a, double b) { return LogisticCalibrator{a / scale, b - a * mean / scale}; };
    auto objective = [&](double a, double b) { return log_likelihood(pairs, to_original(a, b)); };

    double a = 0.0;
    double b = std::log(positive / (total - positive));
    double current = objective(a, b);
    for (int it = 0; it < options.max_iterations; ++it) {
        double ga = 0, gb = 0, haa = 0, hab = 0, hbb = 0;
        for (const auto& p : pairs) {
            const double z = (p.score - mean) / scale;
            const double q = sigmoid(a * z + b);
            const double r = p.weight * (p.correct - q);
            const double c = p.weight * q * (1.0 - q);
            ga += r * z;
            gb += r;
            haa += c * z * z;
            hab += c * z;
            hbb += c;
        }
        fit.iterations = it + 1;
        if (std::hypot(ga, gb) < options.gradient_tolerance) {
            fit.converged = true;
            break;
        }
        const double det = haa * hbb - hab * hab;
        double da = 0, db = 0;
        if (det > 1e-300) {
            da = (hbb * ga - hab * gb) / det;
            db = (haa * gb - hab * ga) / det;
        } else {
            da = ga;
            db = gb;
        }
        // Halve the step until the likelihood improves.
        double step = 1.0;
        bool moved = false;
        for (int k = 0; k < 60; ++k, step /= 2) {
            const double na = std::clamp(a + step * da, 0.0, cap);
            const double nb = b + step * db;
            const double value = objective(na, nb);
            if (value > current) {
                a = na;
                b = nb;
                current = value;
                moved = true;
                break;
            }
        }
        if (!moved) {
            fit.converged = true;
            break;
        }
    }
    if (a <= 0.0) {
        // Likelihood prefers a decreasing curve; the closest monotone fit is flat.
        a = 0.0;
        b = std::log(positive / (total - positive));
    }
    fit.separated = a >= cap;
    fit.calibrator = to_original(a, b);
    return fit;
}

CalibratorKind parse_calibrator_kind(std::string_view text) {
    if (text == "isotonic") return CalibratorKind::isotonic;
    if (text == "logistic") return CalibratorKind::logistic;
    throw ContractError("unknown calibrator kind: " + std::string(text));
}

double predict_confidence(const Calibrator& calibrator, double score) {
    return std::visit([score](const auto& c) { return c.predict(score); }, calibrator);
}

void write_calibrator(std::ostream& out, const Calibrator& calibrator) {
    if (const auto* iso = std::get_if<IsotonicCalibrator>(&calibrator)) {
        out << kIsotonicHeader << '\n';
        for (std::size_t i = 0; i < iso->breakpoints().size(); ++i) {
            out << format17(iso->breakpoints()[i]) << '\t' << format17(iso->values()[i]) << '\n';
        }
    } else {
        const auto& log = std::get<LogisticCalibrator>(calibrator);
        out << kLogisticHeader << '\n' << format17(log.slope) << '\t' << format17(log.offset) << '\n';
    }
}

Calibrator read_calibrator(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw ContractError("empty calibrator file");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const bool isotonic = header == kIsotonicHeader;
    if (!isotonic && header != kLogisticHeader) {
        if (header.rfind("geosep-isotonic ", 0) == 0 || header.rfind("geosep-logistic ", 0) == 0) {
            throw ContractError("calibrator version mismatch: `" + header + "`, expected v1");
        }
        throw ContractError("not a calibrator file: `" + header + "`");
    }
    std::vector<double> first, second;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
            throw ContractError("calibrator line " + std::to_string(line_no) + ": expected two tab-separated reals");
        }
        first.push_back(parse_field(line.substr(0, tab), line_no));
        second.push_back(parse_field(line.substr(tab + 1), line_no));
    }
    if (isotonic) {
        if (first.empty()) throw ContractError("isotonic calibrator has no knots");
        return IsotonicCalibrator(std::move(first), std::move(second));
    }
    if (first.size() != 1) throw ContractError("logistic calibrator needs exactly one `slope<TAB>offset` line");
    if (first[0] < 0) throw ContractError("logistic slope must be non-negative");
    return LogisticCalibrator{first[0], second[0]};
}

void save_calibrator(const std::filesystem::path& path, const Calibrator& calibrator) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_calibrator(out, calibrator);
    if (!out) throw IoError("write failed: " + path.string());
}

Calibrator load_calibrator(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return read_calibrator(in);
    } catch (const ContractError& e) {
        throw ContractError(path.string() + ": " + e.what());
    }
}

std::vector<FitCurveBin> fit_curve_table(std::span<const double> scores, std::span<const int> outcomes,
                                         std::size_t bins) {
    if (scores.size() != outcomes.size()) throw ContractError("scores and outcomes differ in length");
    if (scores.empty() || bins == 0) throw ContractError("fit curve needs samples and at least one bin");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    const std::size_t n = scores.size();
    bins = std::min(bins, n);
    std::vector<FitCurveBin> table(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
        double s = 0, c = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            s += scores[order[i]];
            c += outcomes[order[i]];
        }
        table[b] = {s / double(hi - lo), c / double(hi - lo), hi - lo};
    }
    return table;
}

void write_fit_curve_csv(std::ostream& out, std::span<const FitCurveBin> table, const Calibrator* fitted) {
    out << "mean_score,accuracy,count" << (fitted ? ",fitted" : "") << '\n';
    for (const auto& bin : table) {
        out << format17(bin.mean_score) << ',' << format17(bin.accuracy) << ',' << bin.count;
        if (fitted) out << ',' << format17(predict_confidence(*fitted, bin.mean_score));
        out << '\n';
    }
}

}  // namespace geosep
