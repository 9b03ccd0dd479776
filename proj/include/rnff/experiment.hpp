#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rnff/analysis.hpp"
#include "rnff/kaczmarz.hpp"

namespace rnff {

// CLI exit codes.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;     // invalid config / validation failure
constexpr int kExitViolation = 3;  // a verified bound failed beyond tolerance
constexpr int kExitCapability = 4; // budget or capability exceeded

struct X0Spec {
    enum class Kind { Ones, RandomUnit, Explicit };
    Kind kind = Kind::Ones;
    Vec explicit_value;
};

struct Overrides {
    std::optional<double> C;
    std::optional<double> rho;
};

struct OutputNames {
    std::string trace_csv = "trace.csv";
    std::string report_json = "report.json";
};

/// Parsed and schema-validated experiment description. Unknown JSON fields
/// are rejected; all referenced module constraints are re-checked at load.
struct ExperimentConfig {
    int dimension = 0;
    std::optional<double> alpha;
    OperatorFamily family;
    X0Spec x0;
    int n_steps = 0;
    long n_trials = 0;
    std::uint64_t master_seed = 0;
    std::optional<double> epsilon;
    std::optional<std::string> method; // "exact" | "monte-carlo"
    Overrides overrides;
    OutputNames outputs;
    std::string config_hash; // fnv1a-64 of the raw config bytes
};

ExperimentConfig load_config_file(const std::string& path);

/// Alpha used for rate constants: the family's own alpha for averaged
/// families (a conflicting config value is an error), else the config
/// value, else 1/2 (the firmly nonexpansive case).
double effective_alpha(const ExperimentConfig& config);

struct CommandOptions {
    std::optional<std::uint64_t> seed;
    std::optional<long> trials;
    std::string out_dir = ".";
    int threads = 0;
};

int cmd_simulate(const std::string& config_path, const CommandOptions& opts);
int cmd_analyze(const std::string& config_path, const CommandOptions& opts);
int cmd_verify(const std::string& config_path, const CommandOptions& opts);

struct KaczmarzOptions {
    std::string matrix_path;
    RowSampling sampling = RowSampling::Uniform;
    int n_steps = 100;
    std::uint64_t seed = 0;
    bool start_at_solution = false;
    std::string out_dir = ".";
};

int cmd_kaczmarz(const KaczmarzOptions& opts);

} // namespace rnff
