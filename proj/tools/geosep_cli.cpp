// geosep: separation-based confidence calibration from the command line.
//
// stdout carries only machine-readable output; diagnostics go to stderr.
// Exit codes: 0 success, 1 runtime failure, 2 usage or contract error.

#include "geosep/batch_scoring.hpp"
#include "geosep/calibration.hpp"
#include "geosep/dataset.hpp"
#include "geosep/error.hpp"
#include "geosep/metrics.hpp"
#include "geosep/partition_index.hpp"
#include "geosep/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

namespace {

using namespace geosep;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Either the file named by --out or stdout.
class Output {
public:
    explicit Output(const std::string& path) {
        if (path.empty()) return;
        file_.open(path);
        if (!file_) throw IoError("cannot write " + path);
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

// Where predicted labels come from: an external predictions file or k-NN.
struct ModelSource {
    std::string predictions;
    std::size_t knn = 5;

    PredictionList predict(const ClassPartitionIndex& index, const Dataset& data, int threads) const {
        if (predictions.empty()) return knn_predictions(index, data, knn, threads);
        auto records = validate_predictions(load_predictions(predictions), data.size(), index.labels());
        return records;
    }
};

void add_model_flags(CLI::App* cmd, ModelSource& model, const char* predictions_flag = "--predictions") {
    auto* knn = cmd->add_option("--knn", model.knn, "Use the built-in k-NN model with this k")
                    ->check(CLI::PositiveNumber)
                    ->capture_default_str();
    auto* pred = cmd->add_option(predictions_flag, model.predictions,
                                 "External predictions CSV (index,predicted_label[,native_confidence])");
    knn->excludes(pred);
}

std::vector<FeatureVector> features_of(const Dataset& data) {
    std::vector<FeatureVector> out;
    out.reserve(data.size());
    for (const auto& p : data.points()) out.push_back(p.features);
    return out;
}

struct SeparationArgs {
    std::string train, inputs, out;
    ModelSource model;
    bool exact = false;
    int threads = 0;
};

void cmd_separation(const SeparationArgs& a) {
    const auto train = load_dataset(a.train);
    const auto inputs = load_dataset(a.inputs);
    const auto index = ClassPartitionIndex::build(train);
    const auto predictions = a.model.predict(index, inputs, a.threads);
    const auto labels = predicted_labels(predictions);
    const auto features = features_of(inputs);
    const auto fast = score_batch_parallel(index, features, labels, ScoreKind::fast, a.threads);
    std::optional<std::vector<SeparationScore>> exact;
    if (a.exact) exact = score_batch_parallel(index, features, labels, ScoreKind::exact, a.threads);
    Output out(a.out);
    write_scores_csv(out.stream(), labels, fast, exact);
}

struct CalibrateArgs {
    std::string train, val, out, kind = "isotonic", score = "fast", fit_curve;
    ModelSource model;
    int threads = 0;
};

void cmd_calibrate(const CalibrateArgs& a) {
    const auto kind = parse_calibrator_kind(a.kind);
    const auto score_kind = parse_score_kind(a.score);
    const auto train = load_dataset(a.train);
    const auto val = load_dataset(a.val);
    const auto index = ClassPartitionIndex::build(train);
    const auto predictions = a.model.predict(index, val, a.threads);
    LogisticFit info;
    const auto calibrator = fit_calibrator(index, val, predictions, score_kind, kind, a.threads, &info);
    if (kind == CalibratorKind::logistic && info.separated) {
        std::cerr << "warning: outcomes are perfectly separated by score; logistic slope capped at "
                  << info.calibrator.slope << '\n';
    }
    save_calibrator(a.out, calibrator);
    if (!a.fit_curve.empty()) {
        const auto scores =
            score_batch_parallel(index, features_of(val), predicted_labels(predictions), score_kind, a.threads);
        std::vector<double> values;
        for (const auto& s : scores) values.push_back(s.value);
        const auto table = fit_curve_table(values, outcomes_of(val, predictions), 50);
        std::ofstream curve(a.fit_curve);
        if (!curve) throw IoError("cannot write " + a.fit_curve);
        write_fit_curve_csv(curve, table, &calibrator);
    }
}

struct PredictArgs {
    std::string train, inputs, calibrator, out, score = "fast";
    ModelSource model;
    int threads = 0;
};

void cmd_predict(const PredictArgs& a) {
    const auto score_kind = parse_score_kind(a.score);
    const auto calibrator = load_calibrator(a.calibrator);
    const auto train = load_dataset(a.train);
    const auto inputs = load_dataset(a.inputs);
    const auto index = ClassPartitionIndex::build(train);
    const auto predictions = a.model.predict(index, inputs, a.threads);
    const auto labels = predicted_labels(predictions);
    const auto scores = score_batch_parallel(index, features_of(inputs), labels, score_kind, a.threads);
    Output out(a.out);
    out.stream() << "index,predicted_label,score,confidence\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out.stream() << i << ',' << labels[i] << ',' << format_significant(scores[i].value, 9) << ','
                     << format_significant(predict_confidence(calibrator, scores[i].value), 9) << '\n';
    }
}

struct EvaluateArgs {
    std::string train, test, calibrator, data, out, score = "fast", kind = "isotonic";
    ModelSource model;
    std::size_t m_bins = 30;
    std::size_t trials = 10;
    std::uint64_t seed = 0;
    int threads = 0;
    bool trials_mode = false;
};

void cmd_evaluate(const EvaluateArgs& a) {
    const auto score_kind = parse_score_kind(a.score);
    if (a.trials_mode) {
        ExperimentConfig config;
        config.trials = a.trials;
        config.m_bins = a.m_bins;
        config.score_kind = score_kind;
        config.calibrator_kind = parse_calibrator_kind(a.kind);
        config.knn_k = a.model.knn;
        config.seed = a.seed;
        config.threads = a.threads;
        const auto data = load_dataset(a.data);
        std::vector<PredictionList> external;
        if (!a.model.predictions.empty()) external.push_back(load_predictions(a.model.predictions));
        const auto report = run_experiment(data, config, external.empty() ? nullptr : &external);
        Output out(a.out);
        write_experiment_csv(out.stream(), report);
        print_experiment_table(std::cerr, report);
        return;
    }
    if (a.train.empty() || a.test.empty() || a.calibrator.empty()) {
        throw ContractError("evaluate needs --train, --test and --calibrator (or --data for trial mode)");
    }
    const auto calibrator = load_calibrator(a.calibrator);
    const auto train = load_dataset(a.train);
    const auto test = load_dataset(a.test);
    const auto index = ClassPartitionIndex::build(train);
    const auto predictions = a.model.predict(index, test, a.threads);
    const auto scores =
        score_batch_parallel(index, features_of(test), predicted_labels(predictions), score_kind, a.threads);
    std::vector<double> confidences;
    for (const auto& s : scores) confidences.push_back(predict_confidence(calibrator, s.value));
    Output out(a.out);
    write_ece_csv(out.stream(), ece(confidences, outcomes_of(test, predictions), a.m_bins));
}

struct BenchArgs {
    std::string train, synthetic, out;
    std::size_t queries = 100;
    std::size_t repeats = 5;
    std::size_t classes = 10;
    double spread = 0.3;
    std::uint64_t seed = 0;
    int threads = 1;
};

std::pair<std::size_t, std::size_t> parse_shape(const std::string& text) {
    const auto x = text.find('x');
    try {
        if (x == std::string::npos) throw std::invalid_argument(text);
        std::size_t used1 = 0, used2 = 0;
        const auto n = std::stoul(text.substr(0, x), &used1);
        const auto d = std::stoul(text.substr(x + 1), &used2);
        if (used1 != x || used2 != text.size() - x - 1 || n == 0 || d == 0) throw std::invalid_argument(text);
        return {n, d};
    } catch (const std::exception&) {
        throw ContractError("--synthetic expects NxD with positive N and D, got `" + text + "`");
    }
}

void cmd_bench(const BenchArgs& a) {
    Dataset train, queries;
    if (!a.synthetic.empty()) {
        const auto [n, d] = parse_shape(a.synthetic);
        if (a.classes < 2) throw ContractError("--classes must be at least 2");
        train = generate_blobs(a.classes, (n + a.classes - 1) / a.classes, d, a.spread, a.seed);
        if (train.size() > n) {
            std::vector<std::size_t> head(n);
            for (std::size_t i = 0; i < n; ++i) head[i] = i;
            train = train.subset(head);
        }
        auto pool = generate_blobs(a.classes, (a.queries + a.classes - 1) / a.classes, d, a.spread, a.seed + 1);
        std::vector<std::size_t> head(a.queries);
        for (std::size_t i = 0; i < a.queries; ++i) head[i] = i;
        queries = pool.subset(head);
    } else {
        // Hold the queries out of the loaded set.
        const auto all = load_dataset(a.train);
        if (a.queries >= all.size()) throw ContractError("--queries must be smaller than the train file");
        std::vector<std::size_t> order(all.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), std::mt19937_64(a.seed));
        queries = all.subset({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(a.queries)});
        train = all.subset({order.begin() + static_cast<std::ptrdiff_t>(a.queries), order.end()});
    }
    const auto index = ClassPartitionIndex::build(train);
    std::vector<Label> labels;
    for (const auto& p : queries.points()) labels.push_back(p.label);
    const auto features = features_of(queries);

    // Placeholder calibrator: timing depends on its knot count, not its values.
    const auto scores = score_batch_serial(index, features, labels, ScoreKind::fast);
    std::vector<int> safe;
    for (const auto& s : scores) safe.push_back(s.safe());
    const Calibrator calibrator = fit_isotonic(collect_pairs(scores, safe));

    const auto report = benchmark_throughput(index, calibrator, features, labels, a.repeats, a.threads);
    Output out(a.out);
    write_throughput_csv(out.stream(), report);
    std::cerr << format_significant(report.predictions_per_second, 5) << " +- "
              << format_significant(report.ci95_halfwidth, 3) << " predictions/s (" << report.trials
              << " trials, train " << report.train_size << " x " << report.dimension << ", " << report.threads
              << " thread(s))\n";
}

struct SynthArgs {
    std::size_t classes = 3, per_class = 100, dim = 2;
    double spread = 0.3;
    std::uint64_t seed = 0;
    std::string out;
};

void cmd_synth(const SynthArgs& a) {
    const auto data = generate_blobs(a.classes, a.per_class, a.dim, a.spread, a.seed);
    Output out(a.out);
    write_dataset(out.stream(), data);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometric separation confidence calibration"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string("geosep ") + GEOSEP_VERSION +
                                          " (calibrator format geosep-isotonic v1 / geosep-logistic v1)");

    SeparationArgs sep;
    auto* c_sep = app.add_subcommand("separation", "Score inputs by fast (and optionally exact) separation");
    c_sep->add_option("--train", sep.train, "Train dataset CSV")->required();
    c_sep->add_option("--inputs", sep.inputs, "Inputs dataset CSV")->required();
    add_model_flags(c_sep, sep.model, "--labels");
    c_sep->add_flag("--exact", sep.exact, "Also compute exact separation");
    c_sep->add_option("--out", sep.out, "Output path (default stdout)");
    c_sep->add_option("--threads", sep.threads, "Scoring threads (0 = all cores)");

    CalibrateArgs cal;
    auto* c_cal = app.add_subcommand("calibrate", "Fit a separation-to-confidence calibrator on a validation set");
    c_cal->add_option("--train", cal.train, "Train dataset CSV")->required();
    c_cal->add_option("--val", cal.val, "Validation dataset CSV")->required();
    add_model_flags(c_cal, cal.model);
    c_cal->add_option("--kind", cal.kind, "isotonic | logistic")->capture_default_str();
    c_cal->add_option("--score", cal.score, "fast | exact")->capture_default_str();
    c_cal->add_option("--out", cal.out, "Calibrator output path")->required();
    c_cal->add_option("--dump-fit-curve", cal.fit_curve, "Write the 50-bin score/accuracy table as CSV");
    c_cal->add_option("--threads", cal.threads, "Scoring threads (0 = all cores)");

    PredictArgs pred;
    auto* c_pred = app.add_subcommand("predict", "Confidence for each input from a fitted calibrator");
    c_pred->add_option("--train", pred.train, "Train dataset CSV")->required();
    c_pred->add_option("--inputs", pred.inputs, "Inputs dataset CSV")->required();
    c_pred->add_option("--calibrator", pred.calibrator, "Calibrator file")->required();
    add_model_flags(c_pred, pred.model);
    c_pred->add_option("--score", pred.score, "fast | exact")->capture_default_str();
    c_pred->add_option("--out", pred.out, "Output path (default stdout)");
    c_pred->add_option("--threads", pred.threads, "Scoring threads (0 = all cores)");

    EvaluateArgs ev;
    auto* c_ev = app.add_subcommand("evaluate", "Expected calibration error on a test set, or over repeated splits");
    c_ev->add_option("--train", ev.train, "Train dataset CSV");
    c_ev->add_option("--test", ev.test, "Test dataset CSV");
    c_ev->add_option("--calibrator", ev.calibrator, "Calibrator file");
    auto* data_opt = c_ev->add_option("--data", ev.data, "Full dataset CSV for the repeated-split protocol");
    auto* trials_opt = c_ev->add_option("--trials", ev.trials, "Number of random splits")
                           ->check(CLI::PositiveNumber)
                           ->capture_default_str();
    trials_opt->needs(data_opt);
    c_ev->add_option("--seed", ev.seed, "Seed of the first split")->capture_default_str();
    c_ev->add_option("--kind", ev.kind, "isotonic | logistic (trial mode)")->capture_default_str();
    add_model_flags(c_ev, ev.model);
    c_ev->add_option("--m-bins", ev.m_bins, "Equal-width ECE bins")->check(CLI::PositiveNumber)->capture_default_str();
    c_ev->add_option("--score", ev.score, "fast | exact")->capture_default_str();
    c_ev->add_option("--out", ev.out, "Output path (default stdout)");
    c_ev->add_option("--threads", ev.threads, "Scoring threads (0 = all cores)")->capture_default_str();

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench", "Confidence estimations per second");
    auto* b_train = c_bench->add_option("--train", bench.train, "Dataset CSV; queries are held out of it");
    auto* b_syn = c_bench->add_option("--synthetic", bench.synthetic, "Synthetic train set shape NxD");
    b_train->excludes(b_syn);
    c_bench->add_option("--queries", bench.queries, "Number of queries")->check(CLI::PositiveNumber)->capture_default_str();
    c_bench->add_option("--repeats", bench.repeats, "Timed repeats")->capture_default_str();
    c_bench->add_option("--classes", bench.classes, "Synthetic classes")->capture_default_str();
    c_bench->add_option("--spread", bench.spread, "Synthetic spread")->capture_default_str();
    c_bench->add_option("--seed", bench.seed, "Seed")->capture_default_str();
    c_bench->add_option("--threads", bench.threads, "Threads (1 = serial per-core figure)")->capture_default_str();
    c_bench->add_option("--out", bench.out, "Output path (default stdout)");

    SynthArgs syn;
    auto* c_syn = app.add_subcommand("synth", "Write a Gaussian-blob dataset");
    c_syn->add_option("--classes", syn.classes)->required()->check(CLI::PositiveNumber);
    c_syn->add_option("--per-class", syn.per_class)->required()->check(CLI::PositiveNumber);
    c_syn->add_option("--dim", syn.dim)->required()->check(CLI::PositiveNumber);
    c_syn->add_option("--spread", syn.spread)->required();
    c_syn->add_option("--seed", syn.seed)->capture_default_str();
    c_syn->add_option("--out", syn.out, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n";
        const CLI::App* failing = &app;
        for (auto* sub : app.get_subcommands()) failing = sub;
        std::cerr << failing->help();
        return kExitUsage;
    }

    try {
        if (c_sep->parsed()) {
            cmd_separation(sep);
        } else if (c_cal->parsed()) {
            cmd_calibrate(cal);
        } else if (c_pred->parsed()) {
            cmd_predict(pred);
        } else if (c_ev->parsed()) {
            ev.trials_mode = !ev.data.empty();
            cmd_evaluate(ev);
        } else if (c_bench->parsed()) {
            if (bench.train.empty() && bench.synthetic.empty()) {
                throw ContractError("bench needs --train PATH or --synthetic NxD");
            }
            cmd_bench(bench);
        } else if (c_syn->parsed()) {
            cmd_synth(syn);
        }
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
