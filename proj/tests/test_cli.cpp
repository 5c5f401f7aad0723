#include "geosep/dataset.hpp"
#include "geosep/pipeline.hpp"

#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

const fs::path& workdir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("geosep_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

Run run(const std::string& args) {
    const auto err_path = workdir() / "stderr.txt";
    const std::string cmd = std::string(GEOSEP_CLI_PATH) + " " + args + " 2>" + err_path.string();
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err_path);
    return r;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Blob train / validation / test files shared by the cases below.
void write_fixtures() {
    static bool done = false;
    if (done) return;
    const auto data = geosep::generate_blobs(3, 60, 2, 0.4, 3);
    const auto split = geosep::split_dataset(data, {}, 1);
    geosep::save_dataset(path("train.csv"), split.train);
    geosep::save_dataset(path("val.csv"), split.validation);
    geosep::save_dataset(path("test.csv"), split.test);
    geosep::save_dataset(path("all.csv"), data);
    std::ofstream(path("toy_train.csv")) << "label,f0\nA,-1\nA,-2\nB,1\nB,2\n";
    std::ofstream(path("toy_val.csv")) << "label,f0\nA,-0.5\nA,-1.5\nB,0.5\nB,1.5\nA,0.1\n";
    std::ofstream(path("toy_pred.csv")) << "index,predicted_label\n0,A\n1,B\n2,B\n3,A\n4,A\n";
    std::ofstream(path("bad.csv")) << "label,f0,f1\nA,1,2\nB,1\n";
    done = true;
}

}  // namespace

TEST_CASE("version and usage") {
    auto r = run("--version");
    CHECK(r.code == 0);
    CHECK(r.out.find("geosep-isotonic v1") != std::string::npos);

    r = run("separation --inputs x.csv");
    CHECK(r.code == 2);
    CHECK(r.err.find("--train") != std::string::npos);
    CHECK(r.err.find("Usage") != std::string::npos);

    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
}

TEST_CASE("separation subcommand") {
    write_fixtures();
    auto r = run("separation --train " + path("train.csv") + " --inputs " + path("test.csv") + " --exact");
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "index,predicted_label,fast_sep,exact_sep");
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        const auto c2 = line.find(',', line.find(',') + 1);
        const auto c3 = line.find(',', c2 + 1);
        const double fast = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
        const double exact = std::stod(line.substr(c3 + 1));
        CHECK(std::abs(fast) <= std::abs(exact) + 1e-6);
        CHECK((fast > 0) == (exact > 0));
        ++rows;
    }
    CHECK(rows == 36);

    r = run("separation --train " + path("bad.csv") + " --inputs " + path("test.csv"));
    CHECK(r.code == 2);
    CHECK(r.err.find("dimension mismatch at row 3") != std::string::npos);

    r = run("separation --train " + path("missing.csv") + " --inputs " + path("test.csv"));
    CHECK(r.code == 1);

    r = run("separation --train " + path("train.csv") + " --inputs " + path("test.csv") + " --knn 3 --labels " +
            path("toy_pred.csv"));
    CHECK(r.code == 2);
}

TEST_CASE("calibrate, predict and evaluate") {
    write_fixtures();
    const std::string base = " --train " + path("train.csv");
    auto r = run("calibrate" + base + " --val " + path("val.csv") + " --out " + path("iso.cal") +
                 " --dump-fit-curve " + path("curve.csv"));
    REQUIRE(r.code == 0);
    CHECK(slurp(path("iso.cal")).rfind("geosep-isotonic v1\n", 0) == 0);
    CHECK(slurp(path("curve.csv")).rfind("mean_score,accuracy,count,fitted\n", 0) == 0);

    r = run("calibrate" + base + " --val " + path("val.csv") + " --kind logistic --out " + path("log.cal"));
    REQUIRE(r.code == 0);
    CHECK(slurp(path("log.cal")).rfind("geosep-logistic v1\n", 0) == 0);

    r = run("calibrate" + base + " --val " + path("val.csv") + " --kind spline --out " + path("x.cal"));
    CHECK(r.code == 2);

    r = run("predict" + base + " --inputs " + path("test.csv") + " --calibrator " + path("iso.cal"));
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("index,predicted_label,score,confidence\n", 0) == 0);
    CHECK(count_lines(r.out) == 37);

    r = run("evaluate" + base + " --test " + path("test.csv") + " --calibrator " + path("iso.cal"));
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("bin_lower,bin_upper,count,accuracy,mean_confidence\n", 0) == 0);
    CHECK(r.out.find("\nECE,") != std::string::npos);
    CHECK(r.out.find(",N,36,M,30\n") != std::string::npos);
    CHECK(count_lines(r.out) == 32);

    r = run("evaluate" + base + " --test " + path("test.csv") + " --calibrator " + path("iso.cal") +
            " --m-bins 5");
    CHECK(count_lines(r.out) == 7);

    r = run("evaluate" + base + " --test " + path("test.csv"));
    CHECK(r.code == 2);
}

TEST_CASE("logistic separation warning") {
    write_fixtures();
    const auto r = run("calibrate --train " + path("toy_train.csv") + " --val " + path("toy_val.csv") +
                       " --knn 1 --kind logistic --out " + path("sep.cal"));
    CHECK(r.code == 0);
    CHECK(r.err.find("warning") != std::string::npos);
}

TEST_CASE("external predictions drive the outcomes") {
    write_fixtures();
    const auto r = run("calibrate --train " + path("toy_train.csv") + " --val " + path("toy_val.csv") +
                       " --predictions " + path("toy_pred.csv") + " --out " + path("ext.cal"));
    CHECK(r.code == 0);
}

TEST_CASE("evaluate trial mode") {
    write_fixtures();
    const auto r = run("evaluate --data " + path("all.csv") + " --trials 3 --seed 5");
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("trial,seed,accuracy,ece_geometric,ece_native\n0,5,", 0) == 0);
    CHECK(r.out.find("\nmean,,") != std::string::npos);
    CHECK(r.out.find("\nci95,,") != std::string::npos);
    CHECK(run("evaluate --data " + path("all.csv") + " --trials 3 --seed 5").out == r.out);
}

TEST_CASE("synth") {
    const auto a = run("synth --classes 3 --per-class 4 --dim 2 --spread 0.5 --seed 1");
    REQUIRE(a.code == 0);
    CHECK(a.out.rfind("label,f0,f1\n", 0) == 0);
    CHECK(count_lines(a.out) == 13);
    CHECK(run("synth --classes 3 --per-class 4 --dim 2 --spread 0.5 --seed 1").out == a.out);
    CHECK(run("synth --classes 3 --per-class 4 --dim 2 --spread 0.5 --seed 2").out != a.out);
    std::size_t c1 = 0;
    for (std::size_t p = a.out.find("\nc1,"); p != std::string::npos; p = a.out.find("\nc1,", p + 1)) ++c1;
    CHECK(c1 == 4);
    CHECK(run("synth --classes 3 --per-class 4 --dim 2 --spread 0 --seed 1").code == 2);
}

TEST_CASE("bench") {
    const auto r = run("bench --synthetic 300x8 --queries 10 --repeats 2 --classes 3");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("predictions_per_second") != std::string::npos);
    CHECK(r.err.find("predictions/s") != std::string::npos);
    CHECK(run("bench --queries 10").code == 2);
    CHECK(run("bench --synthetic 3y8").code == 2);
}
