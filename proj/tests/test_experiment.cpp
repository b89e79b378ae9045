#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "coalsim/experiment.hpp"

using namespace coalsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("coalsim_test_" + name);
    fs::remove_all(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(COALSIM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string error_of(const std::string& text) {
    try {
        parse_config(text, "cfg.json");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("config parsing") {
    const auto c = parse_config(R"({"experiment": "kingman_reference", "n": 4})", "x");
    CHECK(c.kind == ExperimentKind::kingman_reference);
    CHECK(c.n == 4);
    CHECK(c.replicates == 2000);

    CHECK(error_of("{\n  \"experiment\": \"kingman_reference\",\n  \"colour\": 3\n}").rfind("cfg.json:3:", 0) == 0);
    CHECK(error_of("{\n  \"experiment\": \"kingman_reference\",\n  \"n\": \"five\"\n}").rfind("cfg.json:3:", 0) == 0);
    CHECK(error_of("{\n  \"experiment\": \"kingman_reference\",\n  \"n\": 4,,\n}").rfind("cfg.json:3:", 0) == 0);
    CHECK(error_of("{\"n\": 4}").find("experiment") != std::string::npos);
    CHECK(error_of(R"({"experiment": "nope"})") != "");
    CHECK(error_of(R"({"experiment": "kingman_reference", "replicates": 0})") != "");
    CHECK(error_of(R"({"experiment": "kingman_reference", "t_max": -1})") != "");
    CHECK(error_of(R"({"experiment": "kingman_reference", "scheme": "bogus"})") != "");
    CHECK(error_of(R"({"experiment": "genealogy_convergence", "N_grid": [3, 50], "n": 5})") != "");
    CHECK(error_of(R"({"experiment": "coupled_chain", "n": 2, "environment": [[2, 0], [1, 1, 1]]})") != "");
    CHECK(error_of(R"({"experiment": "coupled_chain", "n": 2})") != "");
    CHECK(error_of("[1, 2]") != "");
}

TEST_CASE("hard cap warning") {
    std::vector<std::string> warnings;
    parse_config(R"({"experiment": "genealogy_convergence", "N_grid": [1000], "t_max": 20, "hard_cap": 1000})", "x",
                 &warnings);
    CHECK(warnings.size() == 1);
    warnings.clear();
    parse_config(R"({"experiment": "genealogy_convergence", "N_grid": [100], "t_max": 2, "hard_cap": 5000})", "x",
                 &warnings);
    CHECK(warnings.empty());
}

TEST_CASE("config round trip") {
    ExperimentConfig c;
    c.kind = ExperimentKind::coupled_chain;
    c.n = 2;
    c.environment = {{2, 1, 1, 0}, {1, 1, 1, 1}};
    c.scheme = ResamplingScheme::stratified;
    c.weights.model = WeightModel::inherited_fitness;
    c.weights.potential.kind = PotentialKind::lognormal;
    c.weights.potential.sigma = 0.3;
    c.weights.heritability = 0.7;
    c.fdd_times = {0.1, 0.3};
    c.master_seed = 123456789012345ULL;
    c.t_max = 0.1 + 0.2;
    c.diag_t = 0.25;
    CHECK(parse_config(to_json(c).dump(), "echo") == c);

    ExperimentConfig d;
    d.kind = ExperimentKind::genealogy_convergence;
    CHECK(parse_config(to_json(d).dump(2), "echo") == d);
}

TEST_CASE("empty results still produce valid files") {
    ExperimentResults r;
    r.config.master_seed = 42;
    const auto dir = scratch_dir("empty");
    emit_outputs(r, dir);
    CHECK(parse_config(slurp(dir / "config.json"), "echo") == r.config);
    CHECK(slurp(dir / "summary.csv") == "# master_seed=42\nstatistic,value\n");
    CHECK(slurp(dir / "long.csv") == "# master_seed=42\nN,statistic,value,stderr\n");
    CHECK(slurp(dir / "report.json").find("\"master_seed\": 42") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("unwritable output is reported with its path") {
    ExperimentResults r;
    const auto blocker = fs::temp_directory_path() / "coalsim_test_blocker";
    fs::remove_all(blocker);
    std::ofstream(blocker) << "x";
    try {
        emit_outputs(r, blocker / "sub");
        FAIL("expected an I/O error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("coalsim_test_blocker") != std::string::npos);
    }
    fs::remove_all(blocker);
}

TEST_CASE("genealogy run is deterministic across worker counts") {
    const auto c = parse_config(R"({"experiment": "genealogy_convergence", "N_grid": [20, 60], "n": 4,
        "replicates": 150, "t_max": 10, "ks_calibration_trials": 50, "newick_trees": 2})",
                                "x");
    const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
    emit_outputs(run_experiment(c, {1}), a);
    emit_outputs(run_experiment(c, {3}), b);
    for (const char* f : {"summary.csv", "long.csv", "report.json", "config.json", "clock_N20.csv", "trees.nwk"}) {
        CAPTURE(f);
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK(slurp(a / f).find("master_seed") != std::string::npos);
    }
    CHECK(slurp(a / "trees.nwk").find("(") != std::string::npos);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("censored replicates are counted") {
    const auto c = parse_config(R"({"experiment": "genealogy_convergence", "N_grid": [500], "n": 3,
        "replicates": 20, "hard_cap": 30, "ks_calibration_trials": 20})",
                                "x");
    const auto r = run_experiment(c);
    CHECK(r.censored_fraction > 0.5);
    const auto& summary = r.tables.front();
    REQUIRE(summary.file == "summary.csv");
    const auto col = std::find(summary.header.begin(), summary.header.end(), "censored") - summary.header.begin();
    REQUIRE(col < std::ptrdiff_t(summary.header.size()));
    CHECK(std::stoi(summary.rows[0][std::size_t(col)]) > 10);
}

TEST_CASE("command line exit codes") {
    const auto dir = scratch_dir("cli");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.json") << "{\n \"experiment\": \"kingman_reference\",\n \"replcates\": 3\n}\n";
    std::ofstream(dir / "censor.json") << R"({"experiment": "genealogy_convergence", "N_grid": [500], "n": 3,
        "replicates": 20, "hard_cap": 30, "ks_calibration_trials": 20})";
    std::ofstream(dir / "ok.json") << R"({"experiment": "kingman_reference", "n": 3, "replicates": 200,
        "ks_calibration_trials": 20})";
    const std::string d = dir.string();
    CHECK(run_cli("run " + d + "/bad.json") == 2);
    CHECK(run_cli("run " + d + "/missing.json") == 2);
    CHECK(run_cli("run " + d + "/censor.json --out " + d + "/c") == 3);
    CHECK(fs::exists(dir / "c" / "summary.csv"));
    CHECK(run_cli("run " + d + "/ok.json --out " + d + "/k --workers 2 --seed 9") == 0);
    CHECK(slurp(dir / "k" / "long.csv").rfind("# master_seed=9\n", 0) == 0);
    CHECK(run_cli("bounds --corpus-size 200 --seed 3 --out " + d + "/b") == 0);
    CHECK(run_cli("calibrate-ks --n 3 --replicates 100 --trials 20") == 0);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("calibrate-ks --n 3") == 2);
    fs::remove_all(dir);
}
