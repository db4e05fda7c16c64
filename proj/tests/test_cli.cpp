#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "cdf/causal.hpp"
#include "support/testutil.hpp"

namespace {

const std::string kCli = CDF_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("synth writes a loadable fleet deterministically") {
    cdf::test::TempDir tmp("cli_synth");
    const std::string out1 = (tmp.path() / "a").string();
    const std::string out2 = (tmp.path() / "b").string();
    const std::string flags =
        " --seed 9 synth --centers 3 --services 2 --steps 120";
    CHECK(run("--out " + out1 + flags) == 0);
    CHECK(run("--out " + out2 + flags) == 0);

    CHECK(std::filesystem::exists(out1 + "/schema.txt"));
    CHECK(std::filesystem::exists(out1 + "/ground_truth.txt"));
    CHECK(std::filesystem::exists(out1 + "/center_00.csv"));
    CHECK(std::filesystem::exists(out1 + "/manifest.txt"));
    // byte-identical panels across runs with the same seed
    CHECK(slurp(out1 + "/center_00.csv") == slurp(out2 + "/center_00.csv"));
    CHECK(slurp(out1 + "/center_02.csv") == slurp(out2 + "/center_02.csv"));

    const cdf::Fleet fleet = cdf::load_fleet(out1);
    CHECK(fleet.panels.size() == 3);
}

TEST_CASE("train then forecast produces an H-row csv") {
    cdf::test::TempDir tmp("cli_flow");
    const std::string data = (tmp.path() / "data").string();
    const std::string bundle = (tmp.path() / "bundle").string();
    const std::string fcdir = (tmp.path() / "fc").string();
    CHECK(run("--out " + data +
              " --seed 5 synth --centers 2 --services 2 --steps 140") == 0);
    CHECK(run("--out " + bundle + " --data " + data +
              " --seed 5 train --center center_00 --epochs 2 --lookback 6 "
              "--horizon 4 --lstm-dim 8 --graph-dim 4") == 0);
    CHECK(std::filesystem::exists(bundle + "/model.txt"));
    CHECK(std::filesystem::exists(bundle + "/pipeline.txt"));

    CHECK(run("--out " + fcdir + " --data " + data + " forecast --bundle " +
              bundle + " --origin 100") == 0);
    std::ifstream f(fcdir + "/forecast.csv");
    std::string line;
    std::size_t rows = 0;
    std::getline(f, line);
    CHECK(line.rfind("step,", 0) == 0);
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 4);
}

TEST_CASE("forecast without a bundle fails with a clear error") {
    cdf::test::TempDir tmp("cli_nobundle");
    const std::string data = (tmp.path() / "data").string();
    CHECK(run("--out " + data +
              " --seed 4 synth --centers 2 --services 2 --steps 120") == 0);
    const int code = run("--out " + (tmp.path() / "x").string() + " --data " + data +
                         " forecast --bundle " + (tmp.path() / "missing").string());
    CHECK(code == 1);
}

TEST_CASE("bad flags exit with the config code") {
    CHECK(run("definitely-not-a-command") == 2);
    cdf::test::TempDir tmp("cli_badflag");
    // an impossible fleet spec is a config error, not a crash
    CHECK(run("--out " + (tmp.path() / "o").string() + " synth --centers 1") == 2);
}

TEST_CASE("discover writes a graph artifact") {
    cdf::test::TempDir tmp("cli_disc");
    const std::string data = (tmp.path() / "data").string();
    const std::string out = (tmp.path() / "graph").string();
    CHECK(run("--out " + data +
              " --seed 6 synth --centers 2 --services 2 --steps 200") == 0);
    CHECK(run("--out " + out + " --data " + data +
              " discover --center center_01") == 0);
    CHECK(std::filesystem::exists(out + "/center_01_graph.txt"));
    const cdf::CausalGraph g = cdf::load_graph(out + "/center_01_graph.txt");
    CHECK(g.propagation.rows() == 5);
}

TEST_CASE("experiment command is byte-deterministic") {
    cdf::test::TempDir tmp("cli_exp");
    const std::string flags =
        " --seed 11 experiment --kind forecast --seeds 1 --methods cdf "
        "--centers 2 --services 2 --steps 120 --epochs 2 --lookback 6 "
        "--horizon 4 --lstm-dim 8 --graph-dim 4";
    const std::string out1 = (tmp.path() / "r1").string();
    const std::string out2 = (tmp.path() / "r2").string();
    CHECK(run("--out " + out1 + flags) == 0);
    CHECK(run("--out " + out2 + flags) == 0);
    const std::string csv1 = slurp(out1 + "/result.csv");
    CHECK(!csv1.empty());
    CHECK(csv1 == slurp(out2 + "/result.csv"));
    CHECK(slurp(out1 + "/summary.txt") == slurp(out2 + "/summary.txt"));
}

TEST_CASE("coldstart command writes forecast and candidate dumps") {
    cdf::test::TempDir tmp("cli_cold");
    const std::string data = (tmp.path() / "data").string();
    const std::string out = (tmp.path() / "cs").string();
    CHECK(run("--out " + data +
              " --seed 8 synth --centers 3 --services 2 --steps 140") == 0);
    CHECK(run("--out " + out + " --data " + data +
              " --seed 8 coldstart --target center_00 --strategy gmm -k 2 --cut 100 "
              "--gmm-components 2 --masked-services 1 --epochs 2 --lookback 6 "
              "--horizon 4 --lstm-dim 8 --graph-dim 4 --dump-candidates") == 0);
    CHECK(std::filesystem::exists(out + "/forecast.csv"));
    CHECK(std::filesystem::exists(out + "/candidates.csv"));
}

TEST_CASE("sweep command emits the table") {
    cdf::test::TempDir tmp("cli_sweep");
    const std::string out = (tmp.path() / "sw").string();
    CHECK(run("--out " + out +
              " --seed 3 sweep --strategy eros --k-min 1 --k-max 3 --centers 3 "
              "--services 2 --steps 140 --masked-services 1 --cut-fraction 0.6 "
              "--epochs 2 --lookback 6 --horizon 4 --lstm-dim 8 --graph-dim 4") == 0);
    std::ifstream f(out + "/sweep.csv");
    std::string line;
    std::size_t rows = 0;
    std::getline(f, line);
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 3);
}
