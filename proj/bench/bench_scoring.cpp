// Serial reference kernel vs. OpenMP batch kernel, fast and exact separation.
//
//   bench_scoring [train_per_class] [dim] [queries] [threads]

#include "geosep/batch_scoring.hpp"
#include "geosep/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

template <typename Fn>
double seconds(Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    using namespace geosep;
    const std::size_t per_class = argc > 1 ? std::stoul(argv[1]) : 2000;
    const std::size_t dim = argc > 2 ? std::stoul(argv[2]) : 64;
    const std::size_t n_queries = argc > 3 ? std::stoul(argv[3]) : 200;
#ifdef _OPENMP
    const int threads = argc > 4 ? std::atoi(argv[4]) : omp_get_max_threads();
#else
    const int threads = 1;
#endif
    const std::size_t classes = 10;

    const auto train = generate_blobs(classes, per_class, dim, 0.3, 1);
    const auto pool = generate_blobs(classes, (n_queries + classes - 1) / classes, dim, 0.3, 2);
    const auto index = ClassPartitionIndex::build(train);
    std::vector<FeatureVector> queries;
    std::vector<Label> labels;
    for (std::size_t i = 0; i < n_queries; ++i) {
        queries.push_back(pool[i].features);
        labels.push_back(pool[i].label);
    }

    std::cout << "train " << train.size() << " x " << dim << ", " << n_queries << " queries, " << threads
              << " thread(s)\n";

    std::vector<SeparationScore> serial, parallel;
    const double t_serial = seconds([&] { serial = score_batch_serial(index, queries, labels, ScoreKind::fast); });
    const double t_parallel =
        seconds([&] { parallel = score_batch_parallel(index, queries, labels, ScoreKind::fast, threads); });
    bool same = true;
    for (std::size_t i = 0; i < serial.size(); ++i) same = same && serial[i].value == parallel[i].value;
    std::cout << "fast   serial   " << n_queries / t_serial << " queries/s\n"
              << "fast   parallel " << n_queries / t_parallel << " queries/s (speedup " << t_serial / t_parallel
              << ", identical " << (same ? "yes" : "NO") << ")\n";

    // Exact separation is |F| * |F-bar| per query; keep it to a small slice.
    const std::size_t n_exact = std::min<std::size_t>(n_queries, 4);
    std::vector<FeatureVector> eq(queries.begin(), queries.begin() + n_exact);
    std::vector<Label> el(labels.begin(), labels.begin() + n_exact);
    const double e_serial = seconds([&] { serial = score_batch_serial(index, eq, el, ScoreKind::exact); });
    const double e_parallel =
        seconds([&] { parallel = score_batch_parallel(index, eq, el, ScoreKind::exact, threads); });
    same = true;
    for (std::size_t i = 0; i < serial.size(); ++i) same = same && serial[i].value == parallel[i].value;
    std::cout << "exact  serial   " << n_exact / e_serial << " queries/s\n"
              << "exact  parallel " << n_exact / e_parallel << " queries/s (speedup " << e_serial / e_parallel
              << ", identical " << (same ? "yes" : "NO") << ")\n";
    return same ? 0 : 1;
}
