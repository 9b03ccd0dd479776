#include "rnff/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "rnff/json_writer.hpp"

namespace rnff {

namespace {

using nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";

// Substream purposes; each command derives its streams from these roots so
// that runs are reproducible from (config, master_seed) alone.
enum StreamPurpose : std::uint64_t {
    kStreamX0 = 1,
    kStreamTrials = 2,
    kStreamEstimator = 3,
    kStreamProbe = 4,
    kStreamCertificates = 5,
};

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

[[noreturn]] void fail(const std::string& anchor, const std::string& msg) {
    throw ValidationError(anchor + ": " + msg);
}

void check_keys(const json& j, const std::string& anchor,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) fail(anchor + "." + it.key(), "unknown field");
    }
}

const json& require_field(const json& j, const std::string& anchor, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) fail(anchor, std::string("missing required field \"") + key + "\"");
    return *it;
}

double as_number(const json& j, const std::string& anchor) {
    if (!j.is_number()) fail(anchor, "expected a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& anchor) {
    if (!j.is_number_integer()) fail(anchor, "expected an integer");
    return j.get<int>();
}

Vec as_vector(const json& j, const std::string& anchor) {
    if (!j.is_array() || j.empty()) fail(anchor, "expected a nonempty array of numbers");
    Vec v;
    for (const auto& x : j) v.push_back(as_number(x, anchor));
    return v;
}

std::vector<Vec> as_vector_list(const json& j, const std::string& anchor) {
    if (!j.is_array() || j.empty()) fail(anchor, "expected a nonempty array of vectors");
    std::vector<Vec> vs;
    for (size_t i = 0; i < j.size(); ++i)
        vs.push_back(as_vector(j[i], anchor + "[" + std::to_string(i) + "]"));
    return vs;
}

OperatorInstance parse_instance(const json& j, const std::string& anchor) {
    if (!j.is_object()) fail(anchor, "expected an operator object");
    const std::string type = require_field(j, anchor, "type").get<std::string>();
    try {
        if (type == "identity") {
            check_keys(j, anchor, {"type", "dim"});
            return make_identity(as_int(require_field(j, anchor, "dim"), anchor + ".dim"));
        }
        if (type == "ortho-projection") {
            check_keys(j, anchor, {"type", "basis", "span"});
            if (j.contains("basis") == j.contains("span"))
                fail(anchor, "provide exactly one of \"basis\" (orthonormal) or \"span\"");
            if (j.contains("basis"))
                return make_ortho_projection(as_vector_list(j["basis"], anchor + ".basis"));
            return make_ortho_projection_span(as_vector_list(j["span"], anchor + ".span"));
        }
        if (type == "hyperplane-projection") {
            check_keys(j, anchor, {"type", "direction"});
            return make_hyperplane_projection(
                as_vector(require_field(j, anchor, "direction"), anchor + ".direction"));
        }
        if (type == "soft-threshold") {
            check_keys(j, anchor, {"type", "lambda", "dim"});
            return make_soft_threshold(
                as_number(require_field(j, anchor, "lambda"), anchor + ".lambda"),
                as_int(require_field(j, anchor, "dim"), anchor + ".dim"));
        }
        if (type == "averaged") {
            check_keys(j, anchor, {"type", "alpha", "inner"});
            return averaged_wrap(
                as_number(require_field(j, anchor, "alpha"), anchor + ".alpha"),
                parse_instance(require_field(j, anchor, "inner"), anchor + ".inner"));
        }
    } catch (const ValidationError& e) {
        // re-anchor constructor failures to the config location
        std::string msg = e.what();
        if (msg.rfind(anchor, 0) == 0) throw;
        fail(anchor, msg);
    }
    fail(anchor + ".type", "unknown operator type \"" + type + "\"");
}

OperatorFamily parse_family(const json& j, const std::string& anchor) {
    if (!j.is_object()) fail(anchor, "expected a family object");
    const std::string type = require_field(j, anchor, "type").get<std::string>();
    try {
        if (type == "finite") {
            check_keys(j, anchor, {"type", "instances", "probs"});
            const json& ji = require_field(j, anchor, "instances");
            if (!ji.is_array()) fail(anchor + ".instances", "expected an array");
            std::vector<OperatorInstance> instances;
            for (size_t i = 0; i < ji.size(); ++i)
                instances.push_back(
                    parse_instance(ji[i], anchor + ".instances[" + std::to_string(i) + "]"));
            std::vector<double> probs;
            for (const auto& p : require_field(j, anchor, "probs"))
                probs.push_back(as_number(p, anchor + ".probs"));
            return make_finite_family(std::move(instances), std::move(probs));
        }
        if (type == "gaussian-hyperplane") {
            check_keys(j, anchor, {"type", "dim"});
            return make_gaussian_hyperplane(as_int(require_field(j, anchor, "dim"), anchor + ".dim"));
        }
        if (type == "uniform-coordinate-projection") {
            check_keys(j, anchor, {"type", "dim"});
            return make_uniform_coordinate_projection(
                as_int(require_field(j, anchor, "dim"), anchor + ".dim"));
        }
        if (type == "averaged") {
            check_keys(j, anchor, {"type", "alpha", "base"});
            return make_averaged_family(
                as_number(require_field(j, anchor, "alpha"), anchor + ".alpha"),
                parse_family(require_field(j, anchor, "base"), anchor + ".base"));
        }
        if (type == "custom-direction") {
            check_keys(j, anchor, {"type", "dim", "axes", "projection"});
            const int dim = as_int(require_field(j, anchor, "dim"), anchor + ".dim");
            std::vector<int> axes;
            if (j.contains("axes"))
                for (const auto& a : j["axes"]) axes.push_back(as_int(a, anchor + ".axes"));
            const std::string proj =
                require_field(j, anchor, "projection").get<std::string>();
            if (proj != "line" && proj != "hyperplane")
                fail(anchor + ".projection", "expected \"line\" or \"hyperplane\"");
            return make_custom_direction(dim, std::move(axes),
                                         proj == "line" ? CustomDirection::Projection::Line
                                                        : CustomDirection::Projection::Hyperplane);
        }
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        if (msg.rfind(anchor, 0) == 0) throw;
        fail(anchor, msg);
    }
    fail(anchor + ".type", "unknown family type \"" + type + "\"");
}

} // namespace

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();

    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    const std::string anchor = path + ": $";
    if (!j.is_object()) fail(anchor, "config root must be an object");
    check_keys(j, anchor,
               {"dimension", "alpha", "family", "x0", "n_steps", "n_trials", "master_seed",
                "epsilon", "method", "overrides", "outputs"});

    ExperimentConfig cfg;
    cfg.config_hash = fnv1a_hex(bytes);

    cfg.dimension = as_int(require_field(j, anchor, "dimension"), anchor + ".dimension");
    if (cfg.dimension < 1) fail(anchor + ".dimension", "must be >= 1");

    cfg.family = parse_family(require_field(j, anchor, "family"), anchor + ".family");
    if (family_dim(cfg.family) != cfg.dimension)
        fail(anchor + ".family", "family dimension " + std::to_string(family_dim(cfg.family)) +
                                     " does not match \"dimension\" " +
                                     std::to_string(cfg.dimension));

    if (j.contains("alpha")) {
        const double a = as_number(j["alpha"], anchor + ".alpha");
        if (!(a > 0.0 && a < 1.0))
            fail(anchor + ".alpha",
                 "alpha must lie strictly inside (0,1); the alpha=1 endpoint is excluded "
                 "(averaged-operator theory requires strict averaging)");
        cfg.alpha = a;
    }

    if (j.contains("x0")) {
        const json& jx = j["x0"];
        if (jx.is_string()) {
            const std::string s = jx.get<std::string>();
            if (s == "ones")
                cfg.x0.kind = X0Spec::Kind::Ones;
            else if (s == "random-unit")
                cfg.x0.kind = X0Spec::Kind::RandomUnit;
            else
                fail(anchor + ".x0", "expected \"ones\", \"random-unit\", or an explicit vector");
        } else {
            cfg.x0.kind = X0Spec::Kind::Explicit;
            cfg.x0.explicit_value = as_vector(jx, anchor + ".x0");
            check_finite(cfg.x0.explicit_value, anchor + ".x0");
            if (static_cast<int>(cfg.x0.explicit_value.size()) != cfg.dimension)
                fail(anchor + ".x0", "dimension mismatch");
        }
    }

    cfg.n_steps = as_int(require_field(j, anchor, "n_steps"), anchor + ".n_steps");
    if (cfg.n_steps < 0) fail(anchor + ".n_steps", "must be >= 0");

    cfg.n_trials = as_int(require_field(j, anchor, "n_trials"), anchor + ".n_trials");
    if (cfg.n_trials < 0) fail(anchor + ".n_trials", "must be >= 0");

    const json& js = require_field(j, anchor, "master_seed");
    if (!js.is_number_unsigned() && !js.is_number_integer())
        fail(anchor + ".master_seed", "expected an unsigned integer");
    cfg.master_seed = js.get<std::uint64_t>();

    if (j.contains("epsilon")) {
        const double e = as_number(j["epsilon"], anchor + ".epsilon");
        if (!(e > 0.0)) fail(anchor + ".epsilon", "must be positive");
        cfg.epsilon = e;
    }

    if (j.contains("method")) {
        const std::string m = j["method"].get<std::string>();
        if (m != "exact" && m != "monte-carlo")
            fail(anchor + ".method", "expected \"exact\" or \"monte-carlo\"");
        cfg.method = m;
    }

    if (j.contains("overrides")) {
        const json& jo = j["overrides"];
        check_keys(jo, anchor + ".overrides", {"C", "rho"});
        if (jo.contains("C")) cfg.overrides.C = as_number(jo["C"], anchor + ".overrides.C");
        if (jo.contains("rho"))
            cfg.overrides.rho = as_number(jo["rho"], anchor + ".overrides.rho");
    }

    if (j.contains("outputs")) {
        const json& jo = j["outputs"];
        check_keys(jo, anchor + ".outputs", {"trace_csv", "report_json"});
        if (jo.contains("trace_csv")) cfg.outputs.trace_csv = jo["trace_csv"].get<std::string>();
        if (jo.contains("report_json"))
            cfg.outputs.report_json = jo["report_json"].get<std::string>();
    }
    return cfg;
}

double effective_alpha(const ExperimentConfig& config) {
    if (const auto* af = std::get_if<AveragedFamily>(&config.family.v)) {
        if (config.alpha && std::abs(*config.alpha - af->alpha) > 1e-12)
            throw ValidationError(
                "alpha: conflicts with the averaged family's alpha; omit it or make them equal");
        return af->alpha;
    }
    return config.alpha.value_or(0.5);
}

namespace {

Vec resolve_x0(const ExperimentConfig& cfg, std::uint64_t seed) {
    switch (cfg.x0.kind) {
        case X0Spec::Kind::Ones:
            return Vec(static_cast<size_t>(cfg.dimension), 1.0);
        case X0Spec::Kind::RandomUnit: {
            RngStream rng = RngStream::substream(seed, kStreamX0);
            return rng.next_unit_vector(cfg.dimension);
        }
        case X0Spec::Kind::Explicit:
            return cfg.x0.explicit_value;
    }
    throw ValidationError("x0: unrecognized kind");
}

// How the coercivity constant C was obtained, plus the estimator evidence.
struct DerivedConstants {
    RateConstants constants{};
    std::string route;
    std::optional<MeanOperatorEstimate> estimate;
    std::string estimate_kind; // "G" or "Sigma"
    std::optional<double> base_lambda_min;
    std::optional<ProbeResult> probe;
};

// lambda_min(E[P]) for a projection-producing family: equal to derived_C of
// the G route for line/coordinate projections and to 1 - lambda_max(Sigma)
// for hyperplane projections.
struct MeanProjectionFloor {
    double lambda_min;
    MeanOperatorEstimate estimate;
    std::string kind;
};

bool finite_all_ortho(const FiniteFamily& f) {
    for (const auto& op : f.instances)
        if (!std::holds_alternative<OrthoProjection>(op.v) &&
            !std::holds_alternative<Identity>(op.v))
            return false;
    return true;
}

bool finite_all_hyperplane(const FiniteFamily& f) {
    for (const auto& op : f.instances)
        if (!std::holds_alternative<HyperplaneProjection>(op.v)) return false;
    return true;
}

std::optional<MeanProjectionFloor> mean_projection_floor(const OperatorFamily& family,
                                                         long n_samples, RngStream rng,
                                                         int threads) {
    if (std::holds_alternative<UniformCoordinateProjection>(family.v)) {
        auto est = estimate_mean_projection(family, 0, rng, threads);
        return MeanProjectionFloor{est.derived_C, std::move(est), "G"};
    }
    if (const auto* ff = std::get_if<FiniteFamily>(&family.v)) {
        if (finite_all_ortho(*ff)) {
            auto est = estimate_mean_projection(family, 0, rng, threads);
            return MeanProjectionFloor{est.derived_C, std::move(est), "G"};
        }
        if (finite_all_hyperplane(*ff)) {
            auto est = estimate_sigma(family, 0, rng, threads);
            return MeanProjectionFloor{est.derived_C, std::move(est), "Sigma"};
        }
        return std::nullopt;
    }
    if (std::holds_alternative<GaussianHyperplane>(family.v)) {
        auto est = estimate_sigma(family, n_samples, rng, threads);
        return MeanProjectionFloor{est.derived_C, std::move(est), "Sigma"};
    }
    if (const auto* cd = std::get_if<CustomDirection>(&family.v)) {
        if (cd->projection == CustomDirection::Projection::Line) {
            auto est = estimate_mean_projection(family, n_samples, rng, threads);
            return MeanProjectionFloor{est.derived_C, std::move(est), "G"};
        }
        auto est = estimate_sigma(family, n_samples, rng, threads);
        return MeanProjectionFloor{est.derived_C, std::move(est), "Sigma"};
    }
    return std::nullopt;
}

RateConstants constants_for(double alpha, double C) {
    if (C > 0.0 && C < 1.0) return rate_constants(alpha, C);
    // Degenerate coverage: surface an inadmissible verdict instead of
    // throwing at estimation time.
    RateConstants rc;
    rc.alpha = alpha;
    rc.C = C;
    rc.rho = alpha / (1.0 - alpha) * (1.0 - C);
    rc.gamma = std::numeric_limits<double>::quiet_NaN();
    rc.U_alpha = std::numeric_limits<double>::quiet_NaN();
    rc.admissible = false;
    return rc;
}

DerivedConstants derive_constants(const ExperimentConfig& cfg, std::uint64_t seed, int threads) {
    const double alpha = effective_alpha(cfg);
    const long n_samples = cfg.n_trials > 0 ? cfg.n_trials : 100000;
    RngStream est_rng = RngStream::substream(seed, kStreamEstimator);

    DerivedConstants out;
    double C;

    if (const auto* af = std::get_if<AveragedFamily>(&cfg.family.v)) {
        auto base = mean_projection_floor(*af->base, n_samples, est_rng, threads);
        if (base) {
            out.base_lambda_min = base->lambda_min;
            out.estimate = std::move(base->estimate);
            out.estimate_kind = base->kind;
            out.route = "averaged-projection-formula";
            C = predicted_averaged_C(af->alpha, std::min(1.0, std::max(0.0, base->lambda_min)));
        } else {
            RngStream probe_rng = RngStream::substream(seed, kStreamProbe);
            out.probe = coercivity_probe(cfg.family, 8, n_samples, probe_rng, 1.0, threads);
            out.route = "coercivity-probe";
            C = out.probe->empirical_C;
        }
    } else {
        auto floor = mean_projection_floor(cfg.family, n_samples, est_rng, threads);
        if (floor) {
            out.estimate = std::move(floor->estimate);
            out.estimate_kind = floor->kind;
            out.route = out.estimate_kind == "G" ? "mean-projection" : "sigma";
            out.route += out.estimate->n_samples == 0 ? " (exact)" : " (monte-carlo)";
            C = floor->lambda_min;
        } else {
            RngStream probe_rng = RngStream::substream(seed, kStreamProbe);
            out.probe = coercivity_probe(cfg.family, 8, n_samples, probe_rng, 1.0, threads);
            out.route = "coercivity-probe";
            C = out.probe->empirical_C;
        }
    }

    if (cfg.overrides.C) {
        C = *cfg.overrides.C;
        out.route += " + C-override";
    }
    out.constants = constants_for(alpha, C);

    if (cfg.overrides.rho) {
        out.route += " + rho-override";
        RateConstants& rc = out.constants;
        rc.rho = *cfg.overrides.rho;
        rc.admissible = rc.rho > 0.0 && rc.rho < 1.0;
        if (rc.admissible) {
            rc.gamma = -0.5 * std::log(rc.rho);
            rc.U_alpha = alpha <= 0.5
                             ? 1.0
                             : 1.0 + (2.0 * alpha - 1.0) / alpha * (rc.rho / (1.0 - rc.rho));
        } else {
            rc.gamma = std::numeric_limits<double>::quiet_NaN();
            rc.U_alpha = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

std::filesystem::path resolve_output(const std::string& out_dir, const std::string& name) {
    std::filesystem::path p(out_dir);
    std::filesystem::create_directories(p);
    return p / name;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CapabilityError("cannot write " + path.string());
    out << contents;
}

void write_constants(JsonWriter& w, const RateConstants& rc) {
    w.kv("alpha", rc.alpha);
    w.kv("C", rc.C);
    w.kv("rho", rc.rho);
    w.kv_or_null("gamma", rc.gamma);
    w.kv_or_null("U_alpha", rc.U_alpha);
    w.kv("admissible", rc.admissible);
}

void write_estimates(JsonWriter& w, const DerivedConstants& dc) {
    w.key("estimates");
    w.begin_object();
    w.kv("route", dc.route);
    if (dc.estimate) {
        w.key(dc.estimate_kind == "G" ? "mean_projection" : "sigma");
        w.begin_object();
        const MeanOperatorEstimate& est = *dc.estimate;
        w.key("matrix");
        w.begin_array();
        for (int i = 0; i < est.matrix.dim(); ++i) {
            w.begin_array();
            for (int jj = 0; jj < est.matrix.dim(); ++jj) w.value(est.matrix(i, jj));
            w.end_array();
        }
        w.end_array();
        w.kv("lambda_min", est.lambda_min);
        w.kv("lambda_max", est.lambda_max);
        w.kv("derived_C", est.derived_C);
        w.kv("n_samples", est.n_samples);
        w.kv("std_error", est.std_error);
        w.kv("method", est.n_samples == 0 ? "exact" : "monte-carlo");
        w.end_object();
    }
    if (dc.base_lambda_min) w.kv("base_lambda_min", *dc.base_lambda_min);
    if (dc.probe) {
        w.key("probe");
        w.begin_object();
        w.kv("empirical_C", dc.probe->empirical_C);
        w.kv("std_error", dc.probe->std_error);
        w.kv("n_probes", dc.probe->n_probes);
        w.kv("note", "statistical upper estimate of the coercivity infimum over probed "
                     "directions; not a certificate");
        w.end_object();
    }
    w.end_object();
}

void write_provenance(JsonWriter& w, const ExperimentConfig& cfg, std::uint64_t seed) {
    w.key("provenance");
    w.begin_object();
    w.kv("config_hash", cfg.config_hash);
    w.kv("master_seed", seed);
    w.kv("tool_version", kToolVersion);
    w.end_object();
}

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CapabilityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCapability;
    }
}

} // namespace

int cmd_simulate(const std::string& config_path, const CommandOptions& opts) {
    return run_guarded([&]() {
        const ExperimentConfig cfg = load_config_file(config_path);
        const std::uint64_t seed = opts.seed.value_or(cfg.master_seed);
        const long n_trials = opts.trials.value_or(cfg.n_trials);
        if (n_trials < 1)
            throw ValidationError(config_path + ": $.n_trials: simulate needs n_trials >= 1");
        effective_alpha(cfg); // validates alpha against the family

        const Vec x0 = resolve_x0(cfg, seed);
        const auto traces =
            run_trace_ensemble(cfg.family, x0, cfg.n_steps, n_trials,
                               RngStream::substream(seed, kStreamTrials), false, opts.threads);

        std::string csv = "trial,n,residual_norm_sq,atom_norm_sq,cum_energy\n";
        for (long t = 0; t < n_trials; ++t) {
            const IterationTrace& tr = traces[static_cast<size_t>(t)];
            double cum = 0.0;
            for (int n = 0; n <= cfg.n_steps; ++n) {
                csv += std::to_string(t);
                csv += ',';
                csv += std::to_string(n);
                csv += ',';
                csv += format_g12(tr.residual_norms_sq[static_cast<size_t>(n)]);
                csv += ',';
                if (n > 0) {
                    const double a = tr.atom_norms_sq[static_cast<size_t>(n) - 1];
                    cum += a;
                    csv += format_g12(a);
                }
                csv += ',';
                csv += format_g12(cum);
                csv += '\n';
            }
        }
        write_file(resolve_output(opts.out_dir, cfg.outputs.trace_csv), csv);
        return kExitOk;
    });
}

int cmd_analyze(const std::string& config_path, const CommandOptions& opts) {
    return run_guarded([&]() {
        ExperimentConfig cfg = load_config_file(config_path);
        const std::uint64_t seed = opts.seed.value_or(cfg.master_seed);
        if (opts.trials) cfg.n_trials = *opts.trials;

        const DerivedConstants dc = derive_constants(cfg, seed, opts.threads);

        JsonWriter w;
        w.begin_object();
        write_constants(w, dc.constants);
        write_estimates(w, dc);
        write_provenance(w, cfg, seed);
        w.end_object();
        write_file(resolve_output(opts.out_dir, cfg.outputs.report_json), w.str() + "\n");
        return kExitOk;
    });
}

int cmd_verify(const std::string& config_path, const CommandOptions& opts) {
    return run_guarded([&]() {
        ExperimentConfig cfg = load_config_file(config_path);
        const std::uint64_t seed = opts.seed.value_or(cfg.master_seed);
        if (opts.trials) cfg.n_trials = *opts.trials;

        const DerivedConstants dc = derive_constants(cfg, seed, opts.threads);
        const RateConstants& rc = dc.constants;
        if (!rc.admissible)
            throw ValidationError(
                config_path + ": constants are inadmissible (C = " + format_g12(rc.C) +
                ", rho = " + format_g12(rc.rho) + "); verification refuses to run");

        const auto finite = to_finite_family(cfg.family);
        const bool exact = cfg.method ? *cfg.method == "exact" : finite.has_value();
        if (exact && !finite)
            throw ValidationError(config_path +
                                  ": $.method: exact verification needs a finite family");
        if (!exact && cfg.n_trials < 1)
            throw ValidationError(config_path +
                                  ": $.n_trials: monte-carlo verification needs n_trials >= 1");

        const Vec x0 = resolve_x0(cfg, seed);
        const double x0_sq = norm_sq(x0);

        BoundCheck bound;
        std::vector<double> residual_sq, atom_sq;
        if (exact) {
            const EnumerationResult oracle =
                enumerate_expectation(*finite, x0, cfg.n_steps, opts.threads);
            residual_sq = oracle.residual_sq;
            atom_sq = oracle.atom_sq;
            bound = verify_mean_square_bound(residual_sq, rc, x0_sq);
        } else {
            const EnsembleSummary summary =
                run_ensemble(cfg.family, x0, cfg.n_steps, cfg.n_trials,
                             RngStream::substream(seed, kStreamTrials), opts.threads);
            residual_sq = summary.residual_sq_mean;
            atom_sq = summary.atom_sq_mean;
            bound = verify_mean_square_bound(residual_sq, rc, x0_sq, &summary.residual_sq_stderr);
        }

        const FrameEnergyReport frame = frame_energy_report(
            cfg.family, x0, cfg.n_steps, rc,
            exact ? ExpectationMethod::ExactEnumeration : ExpectationMethod::MonteCarlo,
            cfg.n_trials, RngStream::substream(seed, kStreamTrials), opts.threads);

        // Per-trajectory truncation certificates (Monte Carlo regardless of
        // the expectation method; skipped when no trial budget is given).
        bool have_certs = cfg.n_trials > 0 && cfg.n_steps > 0;
        double finite_fraction = 0.0;
        double epsilon = 0.0;
        double theta = 0.0;
        constexpr double kCertThreshold = 0.99;
        if (have_certs) {
            epsilon = cfg.epsilon.value_or(0.1 * rc.gamma);
            if (!(epsilon > 0.0 && epsilon < rc.gamma))
                throw ValidationError(config_path +
                                      ": $.epsilon: must lie in (0, gamma) for certification");
            const auto traces =
                run_trace_ensemble(cfg.family, x0, cfg.n_steps, cfg.n_trials,
                                   RngStream::substream(seed, kStreamCertificates), false,
                                   opts.threads);
            long finite_count = 0;
            for (const IterationTrace& t : traces) {
                const TruncationCertificate cert = certify_truncation(t, rc.gamma, epsilon);
                theta = cert.theta;
                if (cert.first_index) ++finite_count;
            }
            finite_fraction =
                static_cast<double>(finite_count) / static_cast<double>(cfg.n_trials);
        }

        const bool cert_pass = !have_certs || finite_fraction >= kCertThreshold;
        const bool all_pass = bound.pass && frame.passes && cert_pass;

        JsonWriter w;
        w.begin_object();
        write_constants(w, rc);
        w.kv("method", bound.method);
        w.kv("x0_norm_sq", x0_sq);
        w.key("expectations");
        w.begin_object();
        w.kv("residual_sq", residual_sq);
        w.kv("atom_sq", atom_sq);
        w.end_object();
        w.key("frame_energy");
        w.begin_object();
        w.kv("cumulative", frame.cumulative_energy);
        w.kv("lower_bound", frame.lower_bound);
        w.kv("upper_bound", frame.upper_bound);
        w.kv("final", frame.cumulative_energy.empty() ? 0.0 : frame.cumulative_energy.back());
        w.kv("tolerance", frame.tolerance);
        w.kv("passes", frame.passes);
        w.end_object();
        if (have_certs) {
            w.key("truncation");
            w.begin_object();
            w.kv("epsilon", epsilon);
            w.kv("theta", theta);
            w.kv("finite_fraction", finite_fraction);
            w.kv("n_trials", cfg.n_trials);
            w.kv("threshold", kCertThreshold);
            w.kv("passes", cert_pass);
            w.end_object();
        }
        w.key("verdicts");
        w.begin_array();
        w.begin_object();
        w.kv("name", "mean-square-bound");
        w.kv("pass", bound.pass);
        w.kv("min_margin", bound.min_margin);
        w.kv("tight", bound.tight);
        w.kv("tolerance", bound.max_tolerance);
        w.kv("method", bound.method);
        w.end_object();
        w.begin_object();
        w.kv("name", "frame-energy-bounds");
        w.kv("pass", frame.passes);
        w.kv("tolerance", frame.tolerance);
        w.kv("method", frame.method);
        w.end_object();
        if (have_certs) {
            w.begin_object();
            w.kv("name", "truncation-certificate");
            w.kv("pass", cert_pass);
            w.kv("tolerance", kCertThreshold);
            w.kv("method", "monte-carlo");
            w.end_object();
        }
        w.end_array();
        w.kv("all_pass", all_pass);
        write_provenance(w, cfg, seed);
        w.end_object();
        write_file(resolve_output(opts.out_dir, cfg.outputs.report_json), w.str() + "\n");
        return all_pass ? kExitOk : kExitViolation;
    });
}

int cmd_kaczmarz(const KaczmarzOptions& opts) {
    return run_guarded([&]() {
        const LinearSystem system = load_system_file(opts.matrix_path);
        if (opts.start_at_solution && !system.x_true)
            throw ValidationError(opts.matrix_path +
                                  ": --start-at-solution needs an x_true line in the file");

        const Vec x_start = opts.start_at_solution
                                ? *system.x_true
                                : Vec(static_cast<size_t>(system.dim()), 0.0);
        RngStream rng = RngStream::substream(opts.seed, kStreamTrials);
        auto [x_final, trace] =
            solve_rkaczmarz(system, opts.sampling, x_start, opts.n_steps, rng);
        const KaczmarzRates rates = predicted_rates(system, opts.sampling);

        std::string csv = "k,error_norm\n";
        const int k0 = trace.errors_are_true_error ? 0 : 1;
        for (size_t i = 0; i < trace.error_norms.size(); ++i) {
            csv += std::to_string(k0 + static_cast<int>(i));
            csv += ',';
            csv += format_g12(trace.error_norms[i]);
            csv += '\n';
        }
        write_file(resolve_output(opts.out_dir, "error.csv"), csv);

        JsonWriter w;
        w.begin_object();
        w.kv("dimension", system.dim());
        w.kv("n_rows", system.n_rows());
        w.kv("sampling",
             opts.sampling == RowSampling::Uniform ? "uniform" : "rownorm-squared");
        w.kv("n_steps", opts.n_steps);
        w.kv("C", rates.C);
        w.kv("gamma", rates.gamma);
        w.kv("solver_rate", rates.solver_rate);
        w.kv("note_C",
             "C = 1 - lambda_max(Sigma) bounds the residual-atom decomposition; "
             "gamma = 0.5 log(1/(1-C)) is its a.s. truncation rate");
        w.kv("note_solver_rate",
             "solver_rate = 1 - lambda_min(Sigma) bounds the classical error contraction "
             "E||e_{k+1}||^2 <= solver_rate * E||e_k||^2; the two coincide only for "
             "isotropic rows");
        w.kv("error_metric", trace.errors_are_true_error
                                 ? "||x_k - x_true||"
                                 : "|<a_i, x_k> - b_i| at the sampled row");
        w.kv("final_error",
             trace.error_norms.empty() ? 0.0 : trace.error_norms.back());
        w.kv("x_final", x_final);
        w.key("provenance");
        w.begin_object();
        w.kv("master_seed", opts.seed);
        w.kv("tool_version", kToolVersion);
        w.end_object();
        w.end_object();
        write_file(resolve_output(opts.out_dir, "summary.json"), w.str() + "\n");
        return kExitOk;
    });
}

} // namespace rnff
