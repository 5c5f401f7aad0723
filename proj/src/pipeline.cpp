#include "geosep/pipeline.hpp"

#include "geosep/batch_scoring.hpp"
#include "geosep/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace geosep {

KnnVote knn_predict(const ClassPartitionIndex& index, std::span<const double> x, std::size_t k) {
    index.check_query(x);
    if (k == 0) throw ContractError("k must be positive");
    if (k > index.total_count()) {
        throw ContractError("k = " + std::to_string(k) + " exceeds train size " + std::to_string(index.total_count()));
    }
    const std::size_t dim = index.dimension();
    struct Neighbor {
        double sq;
        std::size_t bucket;
        std::size_t row;
    };
    std::vector<Neighbor> all;
    all.reserve(index.total_count());
    const auto& buckets = index.buckets();
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        const double* row = buckets[b].coords.data();
        for (std::size_t i = 0; i < buckets[b].count; ++i, row += dim) {
            all.push_back({detail::squared_l2(x.data(), row, dim), b, i});
        }
    }
    auto closer = [](const Neighbor& a, const Neighbor& b) {
        return std::tie(a.sq, a.bucket, a.row) < std::tie(b.sq, b.bucket, b.row);
    };
    std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k - 1), all.end(), closer);

    std::vector<std::size_t> votes(buckets.size(), 0);
    std::vector<double> distance_sum(buckets.size(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        ++votes[all[i].bucket];
        distance_sum[all[i].bucket] += std::sqrt(all[i].sq);
    }
    // Buckets are in label order, so the first winner is the lexicographic tie-break.
    std::size_t best = 0;
    for (std::size_t b = 1; b < buckets.size(); ++b) {
        if (votes[b] == 0) continue;
        if (votes[best] == 0 || votes[b] > votes[best]) {
            best = b;
        } else if (votes[b] == votes[best] &&
                   distance_sum[b] / double(votes[b]) < distance_sum[best] / double(votes[best])) {
            best = b;
        }
    }
    return {buckets[best].label, static_cast<double>(votes[best]) / static_cast<double>(k)};
}

std::vector<PredictionRecord> knn_predictions(const ClassPartitionIndex& index, const Dataset& data, std::size_t k,
                                              int threads) {
    if (k == 0 || k > index.total_count()) {
        throw ContractError("k = " + std::to_string(k) + " must be in [1, train size " +
                            std::to_string(index.total_count()) + "]");
    }
    for (const auto& p : data.points()) index.check_query(p.features);
    std::vector<PredictionRecord> out(data.size());
    const auto n = static_cast<std::ptrdiff_t>(data.size());
#ifdef _OPENMP
    const int team = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 8) num_threads(team)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        auto vote = knn_predict(index, data[static_cast<std::size_t>(i)].features, k);
        out[i] = {static_cast<std::size_t>(i), std::move(vote.label), vote.vote_fraction};
    }
    (void)threads;
    return out;
}

Dataset generate_blobs(std::size_t classes, std::size_t per_class, std::size_t dimension, double spread,
                       std::uint64_t seed) {
    if (classes == 0 || per_class == 0 || dimension == 0) throw ContractError("blob sizes must be positive");
    if (!(spread > 0)) throw ContractError("spread must be positive");
    const bool simplex = dimension >= classes;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spread);
    std::vector<LabeledPoint> points;
    points.reserve(classes * per_class);
    for (std::size_t i = 0; i < per_class; ++i) {
        for (std::size_t c = 0; c < classes; ++c) {
            LabeledPoint p;
            p.label = "c" + std::to_string(c);
            p.features.resize(dimension);
            for (auto& v : p.features) v = noise(rng);
            if (simplex) {
                p.features[c] += 1.0 / std::sqrt(2.0);
            } else {
                p.features[0] += static_cast<double>(c);
            }
            points.push_back(std::move(p));
        }
    }
    return Dataset(std::move(points));
}

PredictionList validate_predictions(const PredictionList& records, std::size_t size,
                                    const std::vector<Label>& vocabulary) {
    if (records.size() != size) {
        throw ContractError("expected " + std::to_string(size) + " predictions, got " +
                            std::to_string(records.size()));
    }
    const std::set<Label> known(vocabulary.begin(), vocabulary.end());
    PredictionList ordered(size);
    std::vector<bool> seen(size, false);
    for (const auto& r : records) {
        if (r.point_index >= size) throw ContractError("prediction index out of range: " + std::to_string(r.point_index));
        if (seen[r.point_index]) throw ContractError("duplicate prediction index: " + std::to_string(r.point_index));
        if (!known.count(r.predicted_label)) {
            throw ContractError("unknown predicted label `" + r.predicted_label + "` at index " +
                                std::to_string(r.point_index));
        }
        seen[r.point_index] = true;
        ordered[r.point_index] = r;
    }
    return ordered;
}

std::vector<int> outcomes_of(const Dataset& data, const PredictionList& predictions) {
    if (data.size() != predictions.size()) throw ContractError("predictions and data differ in length");
    std::vector<int> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = predictions[i].predicted_label == data[i].label;
    return out;
}

std::vector<Label> predicted_labels(const PredictionList& predictions) {
    std::vector<Label> out;
    out.reserve(predictions.size());
    for (const auto& r : predictions) out.push_back(r.predicted_label);
    return out;
}

namespace {

std::vector<FeatureVector> features_of(const Dataset& data) {
    std::vector<FeatureVector> out;
    out.reserve(data.size());
    for (const auto& p : data.points()) out.push_back(p.features);
    return out;
}

Calibrator fit_from_pairs(const std::vector<CalibrationPair>& pairs, CalibratorKind kind, LogisticFit* info) {
    if (kind == CalibratorKind::isotonic) return fit_isotonic(pairs);
    auto fit = fit_logistic(pairs);
    if (info) *info = fit;
    return fit.calibrator;
}

// Native confidences of the records, or nothing when none carry one.
std::optional<std::vector<double>> native_confidences(const PredictionList& predictions) {
    std::size_t present = 0;
    for (const auto& r : predictions) present += r.native_confidence.has_value();
    if (present == 0) return std::nullopt;
    if (present != predictions.size()) throw ContractError("native_confidence given for some predictions only");
    std::vector<double> out;
    out.reserve(predictions.size());
    for (const auto& r : predictions) out.push_back(*r.native_confidence);
    return out;
}

PredictionList pick(const PredictionList& source_predictions, const std::vector<std::size_t>& indices) {
    PredictionList out;
    out.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto r = source_predictions[indices[i]];
        r.point_index = i;
        out.push_back(std::move(r));
    }
    return out;
}

std::string csv_real(double v) { return format_significant(v, 17); }

}  // namespace

Calibrator fit_calibrator(const ClassPartitionIndex& index, const Dataset& validation,
                          const PredictionList& predictions, ScoreKind score_kind, CalibratorKind kind, int threads,
                          LogisticFit* logistic_info) {
    const auto labels = predicted_labels(predictions);
    const auto inputs = features_of(validation);
    const auto scores = score_batch_parallel(index, inputs, labels, score_kind, threads);
    const auto outcomes = outcomes_of(validation, predictions);
    return fit_from_pairs(collect_pairs(scores, outcomes), kind, logistic_info);
}

ExperimentReport run_experiment(const Dataset& data, const ExperimentConfig& config,
                                const std::vector<PredictionList>* external) {
    if (config.trials == 0) throw ContractError("trials must be positive");
    if (config.m_bins == 0) throw ContractError("m_bins must be positive");
    if (config.knn_k == 0) throw ContractError("knn_k must be positive");
    if (data.labels().size() < 2) throw ContractError("experiment needs at least two classes");

    std::vector<PredictionList> validated;
    if (external) {
        if (external->size() != 1 && external->size() != config.trials) {
            throw ContractError("external predictions must be one list or one list per trial");
        }
        for (const auto& list : *external) validated.push_back(validate_predictions(list, data.size(), data.labels()));
    }

    ExperimentReport report;
    report.score_kind = config.score_kind;
    for (std::size_t t = 0; t < config.trials; ++t) {
        const std::uint64_t seed = config.seed + t;
        const auto split = split_dataset(data, config.ratios, seed);
        const auto index = ClassPartitionIndex::build(split.train);

        PredictionList val_pred, test_pred;
        if (external) {
            const auto& source = validated[validated.size() == 1 ? 0 : t];
            val_pred = pick(source, split.validation_indices);
            test_pred = pick(source, split.test_indices);
            for (const auto& r : val_pred) index.label_id(r.predicted_label);
            for (const auto& r : test_pred) index.label_id(r.predicted_label);
        } else {
            val_pred = knn_predictions(index, split.validation, config.knn_k, config.threads);
            test_pred = knn_predictions(index, split.test, config.knn_k, config.threads);
        }

        const auto val_outcomes = outcomes_of(split.validation, val_pred);
        const auto test_outcomes = outcomes_of(split.test, test_pred);
        const auto calibrator = fit_calibrator(index, split.validation, val_pred, config.score_kind,
                                               config.calibrator_kind, config.threads);

        const auto test_scores = score_batch_parallel(index, features_of(split.test), predicted_labels(test_pred),
                                                      config.score_kind, config.threads);
        std::vector<double> confidences(test_scores.size());
        for (std::size_t i = 0; i < test_scores.size(); ++i) {
            confidences[i] = predict_confidence(calibrator, test_scores[i].value);
        }
        report.seeds.push_back(seed);
        report.ece_geometric.push_back(ece(confidences, test_outcomes, config.m_bins).ece);
        report.accuracy.push_back(
            static_cast<double>(std::count(test_outcomes.begin(), test_outcomes.end(), 1)) /
            static_cast<double>(test_outcomes.size()));

        // Baseline: the model's own confidence through the same isotonic fit.
        const auto val_native = native_confidences(val_pred);
        const auto test_native = native_confidences(test_pred);
        if (val_native && test_native) {
            const auto native_fit = fit_isotonic(collect_pairs(*val_native, val_outcomes));
            std::vector<double> native_conf(test_native->size());
            for (std::size_t i = 0; i < native_conf.size(); ++i) native_conf[i] = native_fit.predict((*test_native)[i]);
            report.ece_native.push_back(ece(native_conf, test_outcomes, config.m_bins).ece);
        } else if (val_native || test_native || !report.ece_native.empty()) {
            throw ContractError("native_confidence must be given for all predictions or none");
        }
    }

    if (config.trials >= 2) {
        report.geometric_summary = aggregate_trials(report.ece_geometric);
        report.accuracy_summary = aggregate_trials(report.accuracy);
        if (!report.ece_native.empty()) report.native_summary = aggregate_trials(report.ece_native);
    }
    return report;
}

void write_experiment_csv(std::ostream& out, const ExperimentReport& report) {
    const bool native = !report.ece_native.empty();
    out << "trial,seed,accuracy,ece_geometric,ece_native\n";
    for (std::size_t t = 0; t < report.ece_geometric.size(); ++t) {
        out << t << ',' << report.seeds[t] << ',' << csv_real(report.accuracy[t]) << ','
            << csv_real(report.ece_geometric[t]) << ',' << (native ? csv_real(report.ece_native[t]) : "") << '\n';
    }
    if (!report.geometric_summary) return;
    const auto& acc = *report.accuracy_summary;
    const auto& geo = *report.geometric_summary;
    out << "mean,," << csv_real(acc.mean) << ',' << csv_real(geo.mean) << ','
        << (report.native_summary ? csv_real(report.native_summary->mean) : "") << '\n';
    out << "ci95,," << csv_real(acc.ci95_halfwidth) << ',' << csv_real(geo.ci95_halfwidth) << ','
        << (report.native_summary ? csv_real(report.native_summary->ci95_halfwidth) : "") << '\n';
}

void print_experiment_table(std::ostream& out, const ExperimentReport& report) {
    auto pct = [](double v) { return format_significant(100.0 * v, 4); };
    out << "score: " << to_string(report.score_kind) << "-separation, " << report.ece_geometric.size()
        << " trial(s)\n";
    out << "trial  accuracy(%)  ECE geometric(%)  ECE native(%)\n";
    for (std::size_t t = 0; t < report.ece_geometric.size(); ++t) {
        out << t << "      " << pct(report.accuracy[t]) << "        " << pct(report.ece_geometric[t]) << "             "
            << (report.ece_native.empty() ? "-" : pct(report.ece_native[t])) << '\n';
    }
    if (report.geometric_summary) {
        auto row = [&](const char* name, const TrialSummary& s) {
            out << name << pct(s.mean) << " +- " << pct(s.ci95_halfwidth) << " (95% CI, z = 1.96)\n";
        };
        row("accuracy(%):      ", *report.accuracy_summary);
        row("ECE geometric(%): ", *report.geometric_summary);
        if (report.native_summary) row("ECE native(%):    ", *report.native_summary);
    } else {
        out << "single trial: no confidence interval\n";
    }
}

ThroughputReport benchmark_throughput(const ClassPartitionIndex& index, const Calibrator& calibrator,
                                      std::span<const FeatureVector> queries, std::span<const Label> predicted,
                                      std::size_t repeats, int threads) {
    if (queries.empty()) throw ContractError("benchmark needs at least one query");
    if (queries.size() != predicted.size()) throw ContractError("queries and labels differ in length");
    if (repeats < 2) throw ContractError("benchmark needs at least two repeats for a confidence interval");
    std::vector<std::size_t> ids(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        index.check_query(queries[i]);
        ids[i] = index.label_id(predicted[i]);
    }
#ifdef _OPENMP
    const int team = threads > 0 ? threads : omp_get_max_threads();
#else
    const int team = 1;
#endif

    std::vector<double> confidences(queries.size());
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
    auto pass = [&] {
        if (team == 1) {
            for (std::ptrdiff_t i = 0; i < n; ++i) {
                confidences[i] = predict_confidence(calibrator, fast_separation(index, queries[i], predicted[i]).value);
            }
            return;
        }
#pragma omp parallel for schedule(dynamic, 1) num_threads(team)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            confidences[i] = predict_confidence(calibrator, fast_separation(index, queries[i], predicted[i]).value);
        }
    };

    pass();  // warm-up, untimed
    ThroughputReport report;
    report.trials = repeats;
    report.train_size = index.total_count();
    report.dimension = index.dimension();
    report.queries = queries.size();
    report.threads = team;
    index.reset_query_count();
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto start = std::chrono::steady_clock::now();
        pass();
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        report.per_trial.push_back(static_cast<double>(queries.size()) / std::max(elapsed.count(), 1e-12));
    }
    report.distance_queries = index.query_count();
    const auto summary = aggregate_trials(report.per_trial);
    report.predictions_per_second = summary.mean;
    report.ci95_halfwidth = summary.ci95_halfwidth;
    return report;
}

void write_throughput_csv(std::ostream& out, const ThroughputReport& r) {
    out << "predictions_per_second,ci95_halfwidth,trials,train_size,dimension,queries,threads\n";
    out << format_significant(r.predictions_per_second, 9) << ',' << format_significant(r.ci95_halfwidth, 9) << ','
        << r.trials << ',' << r.train_size << ',' << r.dimension << ',' << r.queries << ',' << r.threads << '\n';
}

}  // namespace geosep
