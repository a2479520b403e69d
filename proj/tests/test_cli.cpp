#include "nesp/cli.hpp"

#include <doctest.h>

#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("nesp");
    for (const auto& a : args) argv.push_back(a.c_str());
    return nesp::cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("nesp_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

const char* kGoodDoc = R"([dims]
n_x = 2
n_y = 2

[matrix A]
0, 1;
0, 0

[matrix J]
0, 1;
-1, 0

[field f]
f1 = x2
f2 = -g*sin(x1)

[field g]
g1 = 0
g2 = 0

[params]
g = 1

[flags]
origin_fixed_point = true
autonomous_at_zero = true
)";

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli({}) == 2);
    CHECK(run_cli({"no_such_subcommand"}) == 2);
}

TEST_CASE("validate on a correct document exits 0") {
    TempDir tmp;
    const fs::path doc = tmp.path / "pendulum.sys";
    std::ofstream(doc) << kGoodDoc;
    CHECK(run_cli({"--out", (tmp.path / "out").string(), "validate", doc.string()}) == 0);
    // manifest written with the input hash
    const std::string manifest = slurp(tmp.path / "out" / "manifest.json");
    CHECK(manifest.find("validate") != std::string::npos);
    CHECK(manifest.find("inputs") != std::string::npos);
}

TEST_CASE("config errors exit 3") {
    TempDir tmp;
    const fs::path doc = tmp.path / "broken.sys";
    std::ofstream(doc) << "[dims]\nn_x = 2\n";  // missing everything else
    CHECK(run_cli({"--out", (tmp.path / "out").string(), "validate", doc.string()}) == 3);
    CHECK(run_cli({"--out", (tmp.path / "out").string(), "simulate", "--system",
                   "builtin:not_a_system"}) == 3);
}

TEST_CASE("simulate writes a deterministic trajectory CSV") {
    TempDir tmp;
    const auto args = std::vector<std::string>{
        "--out", (tmp.path / "a").string(), "simulate", "--system", "builtin:elastic_pendulum",
        "--eps", "1e-2", "--T", "2.0", "--x0", "0.4,0"};
    CHECK(run_cli(args) == 0);
    auto args2 = args;
    args2[1] = (tmp.path / "b").string();
    CHECK(run_cli(args2) == 0);
    const std::string csv_a = slurp(tmp.path / "a" / "trajectory.csv");
    const std::string csv_b = slurp(tmp.path / "b" / "trajectory.csv");
    CHECK(csv_a == csv_b);  // byte-identical reruns
    CHECK(csv_a.rfind("t, x1, x2, y1, y2\n", 0) == 0);
}

TEST_CASE("dry run prints the plan and writes nothing") {
    TempDir tmp;
    const fs::path out = tmp.path / "out";
    CHECK(run_cli({"--out", out.string(), "--dry-run", "simulate", "--system",
                   "builtin:elastic_pendulum"}) == 0);
    CHECK(!fs::exists(out / "trajectory.csv"));
}

TEST_CASE("catalog lists and exports") {
    CHECK(run_cli({"catalog"}) == 0);
    CHECK(run_cli({"catalog", "--export", "quad_unstable"}) == 0);
    CHECK(run_cli({"catalog", "--export", "no_such_entry"}) == 3);
}

TEST_CASE("melnikov subcommand reproduces the rigid-limit profile") {
    TempDir tmp;
    const fs::path out = tmp.path / "out";
    CHECK(run_cli({"--out", out.string(), "melnikov", "--system", "builtin:elastic_pendulum",
                   "--gamma", "0.1", "--forcing", "sin(t)", "--t0-grid", "0:6.2831853:21"}) == 0);
    const std::string roots = slurp(out / "roots.json");
    CHECK(roots.find("0.6931") != std::string::npos);
    const std::string csv = slurp(out / "profile.csv");
    CHECK(csv.rfind("t0, M, quad_err\n", 0) == 0);
}

TEST_CASE("converge subcommand emits sweep and summary") {
    TempDir tmp;
    const fs::path out = tmp.path / "out";
    CHECK(run_cli({"--out", out.string(), "--jobs", "3", "converge", "--system",
                   "builtin:elastic_pendulum", "--thm", "3.1", "--eps", "1e-1,3e-2,1e-2",
                   "--x0", "0.8,0", "--T", "5"}) == 0);
    const std::string summary = slurp(out / "summary.json");
    CHECK(summary.find("slope") != std::string::npos);
    const std::string csv = slurp(out / "sweep.csv");
    CHECK(csv.rfind("eps, error\n", 0) == 0);
}

TEST_CASE("diagonalize subcommand runs both methods") {
    TempDir tmp;
    const fs::path out = tmp.path / "out";
    CHECK(run_cli({"--out", out.string(), "diagonalize", "--system",
                   "builtin:elastic_pendulum_raw", "--eps", "1e-2", "--method", "both"}) == 0);
    const std::string j = slurp(out / "diagonalize.json");
    CHECK(j.find("newton") != std::string::npos);
    CHECK(j.find("dichotomy") != std::string::npos);
}
