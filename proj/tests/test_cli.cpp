#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "rnff/experiment.hpp"

using namespace rnff;
namespace fs = std::filesystem;

namespace {

int dir_counter = 0;

fs::path fresh_dir() {
    fs::path p = fs::temp_directory_path() /
                 ("rnff_cli_test_" + std::to_string(::getpid()) + "_" +
                  std::to_string(dir_counter++));
    fs::create_directories(p);
    return p;
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RNFF_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

// `extra` is a trailing JSON fragment like "\"epsilon\": 0.03" (no comma).
std::string coordinate_config(int n_steps, long n_trials, const std::string& extra = "") {
    std::ostringstream os;
    os << "{\n"
       << "  \"dimension\": 2,\n"
       << "  \"family\": {\"type\": \"uniform-coordinate-projection\", \"dim\": 2},\n"
       << "  \"x0\": [1.0, 1.0],\n"
       << "  \"n_steps\": " << n_steps << ",\n"
       << "  \"n_trials\": " << n_trials << ",\n"
       << "  \"master_seed\": 42" << (extra.empty() ? "" : ",") << "\n"
       << (extra.empty() ? "" : "  " + extra + "\n") << "}\n";
    return os.str();
}

} // namespace

TEST_CASE("config loading and schema validation") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";

    spit(cfg, coordinate_config(3, 1));
    const auto parsed = load_config_file(cfg.string());
    CHECK(parsed.dimension == 2);
    CHECK(parsed.n_steps == 3);
    CHECK(parsed.master_seed == 42);
    CHECK(effective_alpha(parsed) == doctest::Approx(0.5));

    spit(cfg, coordinate_config(3, 1, "\"surprise\": 1"));
    CHECK_THROWS_AS(load_config_file(cfg.string()), ValidationError);

    spit(cfg, "{\"dimension\": 2}\n");
    CHECK_THROWS_AS(load_config_file(cfg.string()), ValidationError);

    spit(cfg, "not json");
    CHECK_THROWS_AS(load_config_file(cfg.string()), ValidationError);

    // alpha at the endpoint is rejected with a message citing the restriction
    spit(cfg, coordinate_config(3, 1, "\"alpha\": 1.0"));
    try {
        load_config_file(cfg.string());
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("alpha") != std::string::npos);
        CHECK(msg.find("(0,1)") != std::string::npos);
    }

    // family/dimension mismatch
    spit(cfg, "{\"dimension\": 3, \"family\": {\"type\": \"uniform-coordinate-projection\", "
              "\"dim\": 2}, \"n_steps\": 1, \"n_trials\": 1, \"master_seed\": 1}\n");
    CHECK_THROWS_AS(load_config_file(cfg.string()), ValidationError);

    spit(cfg, "{\"dimension\": 2, \"family\": {\"type\": \"nope\"}, \"n_steps\": 1, "
              "\"n_trials\": 1, \"master_seed\": 1}\n");
    CHECK_THROWS_AS(load_config_file(cfg.string()), ValidationError);
}

TEST_CASE("alpha conflicts with an averaged family are rejected") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";
    spit(cfg,
         "{\"dimension\": 2, \"alpha\": 0.25, \"family\": {\"type\": \"averaged\", \"alpha\": "
         "0.5, \"base\": {\"type\": \"uniform-coordinate-projection\", \"dim\": 2}}, "
         "\"n_steps\": 2, \"n_trials\": 1, \"master_seed\": 1}\n");
    const auto parsed = load_config_file(cfg.string());
    CHECK_THROWS_AS(effective_alpha(parsed), ValidationError);
}

TEST_CASE("simulate: structural contract and determinism") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";
    spit(cfg, "{\"dimension\": 2, \"family\": {\"type\": \"gaussian-hyperplane\", \"dim\": 2}, "
              "\"x0\": \"ones\", \"n_steps\": 3, \"n_trials\": 1, \"master_seed\": 7}\n");

    CommandOptions opts;
    opts.out_dir = (dir / "a").string();
    REQUIRE(cmd_simulate(cfg.string(), opts) == kExitOk);
    const std::string csv = slurp(dir / "a" / "trace.csv");

    std::istringstream lines(csv);
    std::string line;
    int data_rows = 0;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "trial,n,residual_norm_sq,atom_norm_sq,cum_energy");
    bool first = true;
    while (std::getline(lines, line)) {
        ++data_rows;
        if (first) {
            CHECK(line == "0,0,2,,0"); // empty atom field at n = 0
            first = false;
        }
    }
    CHECK(data_rows == 4); // n = 0..3

    opts.out_dir = (dir / "b").string();
    REQUIRE(cmd_simulate(cfg.string(), opts) == kExitOk);
    CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
}

TEST_CASE("analyze: coordinate family constants") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";
    spit(cfg, coordinate_config(5, 100));

    CommandOptions opts;
    opts.out_dir = dir.string();
    REQUIRE(cmd_analyze(cfg.string(), opts) == kExitOk);

    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["alpha"].get<double>() == doctest::Approx(0.5));
    CHECK(report["C"].get<double>() == doctest::Approx(0.5));
    CHECK(report["rho"].get<double>() == doctest::Approx(0.5));
    CHECK(report["gamma"].get<double>() == doctest::Approx(0.5 * std::log(2.0)));
    CHECK(report["U_alpha"].get<double>() == doctest::Approx(1.0));
    CHECK(report["admissible"].get<bool>());
    CHECK(report["estimates"]["route"].get<std::string>() == "mean-projection (exact)");
    CHECK(report["provenance"]["master_seed"].get<std::uint64_t>() == 42);
}

TEST_CASE("analyze: degenerate family is inadmissible, not an exception") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";
    spit(cfg,
         "{\"dimension\": 2, \"family\": {\"type\": \"finite\", \"instances\": [{\"type\": "
         "\"ortho-projection\", \"basis\": [[1.0, 0.0]]}], \"probs\": [1.0]}, \"n_steps\": 2, "
         "\"n_trials\": 10, \"master_seed\": 5}\n");

    CommandOptions opts;
    opts.out_dir = dir.string();
    REQUIRE(cmd_analyze(cfg.string(), opts) == kExitOk);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["C"].get<double>() == doctest::Approx(0.0));
    CHECK_FALSE(report["admissible"].get<bool>());
    CHECK(report["gamma"].is_null());
    CHECK(report["U_alpha"].is_null());
}

TEST_CASE("analyze: alpha = 3/4 with C override reproduces U") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";
    spit(cfg, coordinate_config(2, 10, "\"alpha\": 0.75, \"overrides\": {\"C\": 0.9}"));

    CommandOptions opts;
    opts.out_dir = dir.string();
    REQUIRE(cmd_analyze(cfg.string(), opts) == kExitOk);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(std::abs(report["U_alpha"].get<double>() - 1.285714) < 1e-5);
    CHECK(report["rho"].get<double>() == doctest::Approx(0.3));
}

TEST_CASE("verify: coordinate family passes with tight margins") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";
    spit(cfg, coordinate_config(10, 400, "\"epsilon\": 0.03"));

    CommandOptions opts;
    opts.out_dir = dir.string();
    REQUIRE(cmd_verify(cfg.string(), opts) == kExitOk);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["all_pass"].get<bool>());
    CHECK(report["method"].get<std::string>() == "exact-enumeration");
    for (const auto& verdict : report["verdicts"]) CHECK(verdict["pass"].get<bool>());
    CHECK(report["verdicts"][0]["tight"].get<bool>());
    CHECK(std::abs(report["expectations"]["residual_sq"][10].get<double>() -
                   std::pow(0.5, 10) * 2.0) < 1e-12);
}

TEST_CASE("verify: an injected wrong rho fails with exit 3") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";
    spit(cfg, coordinate_config(10, 50, "\"overrides\": {\"rho\": 0.25}"));

    CommandOptions opts;
    opts.out_dir = dir.string();
    REQUIRE(cmd_verify(cfg.string(), opts) == kExitViolation);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK_FALSE(report["all_pass"].get<bool>());
}

TEST_CASE("verify: enumeration budget exceeded names the limit with exit 4") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";
    spit(cfg, "{\"dimension\": 3, \"family\": {\"type\": \"uniform-coordinate-projection\", "
              "\"dim\": 3}, \"x0\": \"ones\", \"n_steps\": 20, \"n_trials\": 0, "
              "\"master_seed\": 1}\n");
    CommandOptions opts;
    opts.out_dir = dir.string();
    CHECK(cmd_verify(cfg.string(), opts) == kExitCapability);
}

TEST_CASE("verify: degenerate constants refuse with exit 2") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";
    spit(cfg,
         "{\"dimension\": 2, \"family\": {\"type\": \"finite\", \"instances\": [{\"type\": "
         "\"ortho-projection\", \"basis\": [[1.0, 0.0]]}], \"probs\": [1.0]}, \"n_steps\": 4, "
         "\"n_trials\": 10, \"master_seed\": 5}\n");
    CommandOptions opts;
    opts.out_dir = dir.string();
    CHECK(cmd_verify(cfg.string(), opts) == kExitConfig);
}

TEST_CASE("CLI binary: exit codes and byte-identical outputs") {
    const fs::path dir = fresh_dir();
    const fs::path cfg = dir / "config.json";
    spit(cfg, coordinate_config(8, 200, "\"epsilon\": 0.03"));

    CHECK(run_cli("verify --config " + cfg.string() + " --out " + (dir / "v1").string() +
                  " --threads 1") == 0);
    CHECK(run_cli("verify --config " + cfg.string() + " --out " + (dir / "v2").string() +
                  " --threads 4") == 0);
    CHECK(slurp(dir / "v1" / "report.json") == slurp(dir / "v2" / "report.json"));

    // invalid config through the binary
    spit(dir / "bad.json", "{\"oops\": 1}");
    CHECK(run_cli("analyze --config " + (dir / "bad.json").string()) == 2);

    // seed override changes the simulate output, same seed reproduces it
    spit(cfg, "{\"dimension\": 2, \"family\": {\"type\": \"gaussian-hyperplane\", \"dim\": 2}, "
              "\"x0\": \"random-unit\", \"n_steps\": 5, \"n_trials\": 3, \"master_seed\": 9}\n");
    CHECK(run_cli("simulate --config " + cfg.string() + " --out " + (dir / "s1").string() +
                  " --threads 1") == 0);
    CHECK(run_cli("simulate --config " + cfg.string() + " --out " + (dir / "s2").string() +
                  " --threads 4") == 0);
    CHECK(run_cli("simulate --config " + cfg.string() + " --out " + (dir / "s3").string() +
                  " --seed 10") == 0);
    CHECK(slurp(dir / "s1" / "trace.csv") == slurp(dir / "s2" / "trace.csv"));
    CHECK(slurp(dir / "s1" / "trace.csv") != slurp(dir / "s3" / "trace.csv"));
}

TEST_CASE("CLI binary: kaczmarz command") {
    const fs::path dir = fresh_dir();
    const fs::path sys_file = dir / "identity3.txt";
    spit(sys_file, "3 3\n1 0 0 1\n0 1 0 2\n0 0 1 3\nx_true 1 2 3\n");

    REQUIRE(run_cli("kaczmarz --matrix " + sys_file.string() + " --steps 60 --seed 3 --out " +
                    (dir / "k1").string()) == 0);
    const auto summary = nlohmann::json::parse(slurp(dir / "k1" / "summary.json"));
    CHECK(summary["C"].get<double>() == doctest::Approx(1.0 - 1.0 / 3.0));
    CHECK(summary["solver_rate"].get<double>() == doctest::Approx(1.0 - 1.0 / 3.0));
    CHECK(summary["final_error"].get<double>() <= 1e-10);

    // error.csv rows are k,error_norm with k starting at 0 when x_true is known
    const std::string csv = slurp(dir / "k1" / "error.csv");
    CHECK(csv.rfind("k,error_norm\n0,", 0) == 0);

    REQUIRE(run_cli("kaczmarz --matrix " + sys_file.string() +
                    " --steps 10 --start-at-solution --out " + (dir / "k2").string()) == 0);
    std::istringstream rows(slurp(dir / "k2" / "error.csv"));
    std::string line;
    std::getline(rows, line); // header
    while (std::getline(rows, line))
        CHECK(line.substr(line.find(',') + 1) == "0");

    // inconsistent file -> exit 2
    spit(dir / "bad.txt", "2 2\n1 0 1\n0 1 2\nx_true 5 5\n");
    CHECK(run_cli("kaczmarz --matrix " + (dir / "bad.txt").string()) == 2);
}
