// Acceptance suite: one pass/fail line per criterion, with its runtime
// budget enforced. Exits nonzero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "rnff/analysis.hpp"
#include "rnff/ensemble.hpp"
#include "rnff/experiment.hpp"
#include "rnff/kaczmarz.hpp"

using namespace rnff;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<bool(std::string&)> body;
};

bool expect(bool ok, std::string& detail, const std::string& msg) {
    if (!ok && detail.empty()) detail = msg;
    return ok;
}

Vec random_vec(RngStream& rng, int d, double scale) {
    Vec v(static_cast<size_t>(d));
    for (double& x : v) x = scale * rng.next_normal();
    return v;
}

// ---- criterion 1: lemma slack over 10^4 sampled triples ------------------

bool criterion_lemma_slack(std::string& detail) {
    RngStream rng = RngStream::substream(1001, 0);
    const std::vector<double> alphas = {0.1, 0.25, 0.5, 0.75, 0.9};
    const int d = 4;
    long checked = 0;
    double worst = 0.0;
    while (checked < 10000) {
        const double alpha = alphas[rng.next_below(alphas.size())];

        OperatorInstance inner = make_identity(d);
        switch (rng.next_below(4)) {
            case 0: inner = make_ortho_projection_span({random_vec(rng, d, 1.0)}); break;
            case 1: inner = make_hyperplane_projection(rng.next_unit_vector(d)); break;
            case 2: inner = make_soft_threshold(2.0 * rng.next_unit(), d); break;
            default: break;
        }
        // alpha < 1/2: only explicit averaged constructions are alpha-averaged;
        // alpha >= 1/2: firmly nonexpansive instances qualify as well.
        OperatorInstance op =
            (alpha < 0.5 || rng.next_below(2) == 0) ? averaged_wrap(alpha, inner) : inner;

        const Vec u = random_vec(rng, d, 3.0);
        const double slack = check_lemma31(op, alpha, u);
        worst = std::min(worst, slack / (1.0 + norm_sq(u)));
        ++checked;
    }
    return expect(worst >= -1e-9, detail,
                  "worst normalized slack " + std::to_string(worst));
}

// ---- criterion 2: telescoping exactness ----------------------------------

bool criterion_telescoping(std::string& detail) {
    std::vector<OperatorFamily> families;
    families.push_back(make_gaussian_hyperplane(5));
    families.push_back(make_averaged_family(0.7, make_uniform_coordinate_projection(3)));
    RngStream mix_rng = RngStream::substream(1002, 0);
    families.push_back(make_finite_family(
        {make_ortho_projection_span({random_vec(mix_rng, 4, 1.0), random_vec(mix_rng, 4, 1.0)}),
         make_hyperplane_projection(mix_rng.next_unit_vector(4))},
        {0.5, 0.5}));

    int trace_count = 0;
    for (size_t f = 0; f < families.size(); ++f) {
        const int d = family_dim(families[f]);
        for (int trial = 0; trial < 34 && trace_count < 100; ++trial, ++trace_count) {
            RngStream rng = RngStream::substream(1002, 1 + f * 100 + trial);
            const Vec x0 = random_vec(rng, d, 2.0);
            const auto trace = run_iteration(families[f], x0, 50, rng, true);
            const double tol = 1e-10 * (1.0 + norm(x0));

            Vec residual = x0; // replay R_n from the stored atoms
            for (int n = 0; n <= trace.n_steps(); ++n) {
                if (n > 0) axpy(-1.0, trace.atoms[static_cast<size_t>(n - 1)], residual);
                Vec gap = x0;
                axpy(-1.0, synthesize(trace, n), gap);
                axpy(-1.0, residual, gap);
                if (!expect(norm(gap) <= tol, detail,
                            "telescoping gap " + std::to_string(norm(gap)) + " at n = " +
                                std::to_string(n)))
                    return false;
            }
            Vec final_gap = residual;
            axpy(-1.0, trace.final_residual, final_gap);
            if (!expect(norm(final_gap) <= tol, detail, "final residual mismatch"))
                return false;
        }
    }
    return expect(trace_count >= 100, detail, "trace count");
}

// ---- criterion 3: exact tightness on the coordinate family ---------------

bool criterion_enumeration_tightness(std::string& detail) {
    const auto finite = to_finite_family(make_uniform_coordinate_projection(2));
    const Vec x0 = {1.0, 1.0};
    const auto oracle = enumerate_expectation(*finite, x0, 12);
    for (int n = 0; n <= 12; ++n) {
        const double expected = std::pow(0.5, n) * 2.0; // rho^n ||x0||^2, rho = 1/2
        if (!expect(std::abs(oracle.residual_sq[static_cast<size_t>(n)] - expected) <= 1e-12,
                    detail, "E||R_" + std::to_string(n) + "||^2 off"))
            return false;
    }
    return true;
}

// ---- criterion 4: frame-energy bounds -------------------------------------

bool criterion_frame_energy(std::string& detail) {
    const Vec x0 = {1.0, 1.0};
    const auto coord = make_uniform_coordinate_projection(2);
    const auto rc = rate_constants(0.5, 0.5);
    const auto report = frame_energy_report(coord, x0, 12, rc,
                                            ExpectationMethod::ExactEnumeration, 0,
                                            RngStream::substream(1004, 0));
    const double expected_final = 2.0 - std::pow(2.0, -11.0);
    if (!expect(std::abs(report.cumulative_energy.back() - expected_final) <= 1e-10, detail,
                "coordinate cumulative energy"))
        return false;
    if (!expect(report.lower_bound == 1.0 && report.upper_bound == 2.0 && report.passes, detail,
                "coordinate bounds [1,2]"))
        return false;

    const auto averaged = make_averaged_family(0.5, coord);
    const double C = predicted_averaged_C(0.5, 0.5); // 0.625
    const auto rc2 = rate_constants(0.5, C);
    if (!expect(std::abs(rc2.rho - 0.375) <= 1e-12, detail, "averaged rho")) return false;
    const auto report2 = frame_energy_report(averaged, x0, 12, rc2,
                                             ExpectationMethod::ExactEnumeration, 0,
                                             RngStream::substream(1004, 1));
    if (!expect(report2.cumulative_energy[0] >= report2.lower_bound - 1e-9, detail,
                "averaged lower bound at k = 1"))
        return false;
    if (!expect(std::abs(report2.cumulative_energy[0] - 0.625 * 2.0) <= 1e-9, detail,
                "averaged E||F_1||^2 = 1.25"))
        return false;
    return expect(report2.passes, detail, "averaged report passes");
}

// ---- criterion 5: isotropic Kaczmarz mean-square rate ---------------------

bool criterion_isotropic_rate(std::string& detail) {
    for (int d : {2, 5, 10}) {
        const auto family = make_gaussian_hyperplane(d);
        RngStream x0_rng = RngStream::substream(1005, static_cast<std::uint64_t>(d));
        const Vec x0 = x0_rng.next_unit_vector(d);
        const auto mc = run_ensemble(family, x0, 4, 200000,
                                     RngStream::substream(1005, 100 + d));
        for (int n = 1; n <= 4; ++n) {
            const double expected = std::pow(static_cast<double>(d), -n);
            const double got = mc.residual_sq_mean[static_cast<size_t>(n)];
            if (!expect(std::abs(got - expected) <= 0.10 * expected, detail,
                        "d = " + std::to_string(d) + ", n = " + std::to_string(n) +
                            ": " + std::to_string(got) + " vs " + std::to_string(expected)))
                return false;
        }
    }
    return true;
}

// ---- criterion 6: almost-sure rate and truncation certificates ------------

bool criterion_as_rate(std::string& detail) {
    const int d = 4;
    const double gamma = 0.5 * std::log(static_cast<double>(d));
    const auto family = make_gaussian_hyperplane(d);
    RngStream x0_rng = RngStream::substream(1006, 0);
    const Vec x0 = x0_rng.next_unit_vector(d);
    const auto traces =
        run_trace_ensemble(family, x0, 200, 1000, RngStream::substream(1006, 1), false);

    const auto slopes = estimate_as_rate(traces, 100);
    long slope_ok = 0;
    for (double s : slopes)
        if (s <= -gamma + 0.05) ++slope_ok;
    if (!expect(slope_ok >= 990, detail,
                "only " + std::to_string(slope_ok) + "/1000 tail slopes below -gamma + 0.05"))
        return false;

    long finite_count = 0;
    for (const auto& t : traces)
        if (certify_truncation(t, gamma, 0.1 * gamma).first_index) ++finite_count;
    return expect(finite_count >= 990, detail,
                  "only " + std::to_string(finite_count) + "/1000 certificates finite");
}

// ---- criterion 7: constant formulas ---------------------------------------

bool criterion_constants(std::string& detail) {
    for (double C = 0.05; C < 1.0; C += 0.05) {
        const auto rc = rate_constants(0.5, C);
        if (!expect(std::abs(rc.rho - (1.0 - C)) <= 1e-12 && rc.U_alpha == 1.0, detail,
                    "rho_{1/2}(C) = 1 - C or U_{1/2} = 1 failed"))
            return false;
    }
    const auto rc = rate_constants(0.75, 0.9);
    if (!expect(std::abs(rc.U_alpha - 1.285714) <= 1e-6, detail, "U_{3/4}(0.9)")) return false;
    const auto bad = rate_constants(0.75, 0.5);
    return expect(!bad.admissible, detail, "(alpha=3/4, C=0.5) must be inadmissible");
}

// ---- criterion 8: coercivity estimators ------------------------------------

bool criterion_estimators(std::string& detail) {
    const auto sigma = estimate_sigma(make_gaussian_hyperplane(5), 100000,
                                      RngStream::substream(1008, 0));
    if (!expect(std::abs(sigma.derived_C - 0.8) <= 0.01, detail,
                "sigma derived_C = " + std::to_string(sigma.derived_C)))
        return false;

    const auto circle = make_custom_direction(2, {}, CustomDirection::Projection::Line);
    const auto g = estimate_mean_projection(circle, 100000, RngStream::substream(1008, 1));
    if (!expect(std::abs(g.derived_C - 0.5) <= 0.01, detail,
                "circle derived_C = " + std::to_string(g.derived_C)))
        return false;

    const auto st = make_finite_family({make_soft_threshold(1.0, 3)}, {1.0});
    const auto probe =
        coercivity_probe(st, 8, 10000, RngStream::substream(1008, 2), 0.5);
    return expect(probe.empirical_C == 0.0, detail, "soft-threshold probe must be exactly 0");
}

// ---- criterion 9: kaczmarz solver ------------------------------------------

bool criterion_kaczmarz(std::string& detail) {
    LinearSystem id3;
    for (int i = 0; i < 3; ++i) id3.rows.push_back(unit_axis(3, i));
    id3.rhs = {1.0, -2.0, 0.5};
    id3.x_true = Vec{1.0, -2.0, 0.5};

    RngStream probe = RngStream::substream(1009, 0);
    std::set<std::uint64_t> seen;
    int cover_time = 0;
    for (int k = 1; k <= 80; ++k) {
        seen.insert(probe.next_below(3));
        if (seen.size() == 3) {
            cover_time = k;
            break;
        }
    }
    if (!expect(cover_time > 0, detail, "rows never covered in 80 draws")) return false;

    RngStream rng = RngStream::substream(1009, 0);
    auto [x, trace] = solve_rkaczmarz(id3, RowSampling::Uniform, Vec(3, 0.0), 80, rng);
    if (!expect(trace.error_norms[static_cast<size_t>(cover_time)] <= 1e-10, detail,
                "error after coupon collection"))
        return false;

    LinearSystem id2;
    id2.rows = {unit_axis(2, 0), unit_axis(2, 1)};
    id2.rhs = {1.0, 1.0};
    id2.x_true = Vec{1.0, 1.0};
    const auto ens = kaczmarz_error_ensemble(id2, RowSampling::Uniform, Vec(2, 0.0), 10, 10000,
                                             RngStream::substream(1009, 2));
    for (int k = 0; k <= 10; ++k) {
        const double expected = std::pow(2.0, -k) * 2.0;
        const double tol = 3.0 * ens.error_sq_stderr[static_cast<size_t>(k)] + 1e-12;
        if (!expect(std::abs(ens.error_sq_mean[static_cast<size_t>(k)] - expected) <= tol,
                    detail, "E||e_" + std::to_string(k) + "||^2 outside 3 standard errors"))
            return false;
    }
    return true;
}

// ---- criterion 10: byte-identical command outputs --------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool run_cli(const std::string& args) {
    const std::string cmd = std::string(RNFF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return status != -1 && WEXITSTATUS(status) == 0;
}

bool criterion_determinism(std::string& detail) {
    const fs::path dir =
        fs::temp_directory_path() / ("rnff_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);

    const fs::path sim_cfg = dir / "sim.json";
    {
        std::ofstream out(sim_cfg);
        out << "{\"dimension\": 3, \"family\": {\"type\": \"gaussian-hyperplane\", \"dim\": 3},"
            << " \"x0\": \"random-unit\", \"n_steps\": 20, \"n_trials\": 50,"
            << " \"master_seed\": 314}\n";
    }
    const fs::path ver_cfg = dir / "ver.json";
    {
        std::ofstream out(ver_cfg);
        out << "{\"dimension\": 2, \"family\": {\"type\": \"uniform-coordinate-projection\","
            << " \"dim\": 2}, \"x0\": [1.0, 1.0], \"n_steps\": 10, \"n_trials\": 400,"
            << " \"epsilon\": 0.03, \"master_seed\": 2718}\n";
    }

    for (const char* run : {"a", "b"}) {
        if (!run_cli("simulate --config " + sim_cfg.string() + " --threads 1 --out " +
                     (dir / (std::string("sim1") + run)).string()))
            return expect(false, detail, "simulate run failed");
        if (!run_cli("verify --config " + ver_cfg.string() + " --threads 1 --out " +
                     (dir / (std::string("ver1") + run)).string()))
            return expect(false, detail, "verify run failed");
    }
    if (!run_cli("simulate --config " + sim_cfg.string() + " --threads 4 --out " +
                 (dir / "sim4").string()))
        return expect(false, detail, "parallel simulate failed");
    if (!run_cli("verify --config " + ver_cfg.string() + " --threads 4 --out " +
                 (dir / "ver4").string()))
        return expect(false, detail, "parallel verify failed");

    const std::string sim_ref = slurp(dir / "sim1a" / "trace.csv");
    if (!expect(!sim_ref.empty(), detail, "simulate wrote nothing")) return false;
    if (!expect(sim_ref == slurp(dir / "sim1b" / "trace.csv"), detail,
                "simulate differs across identical runs"))
        return false;
    if (!expect(sim_ref == slurp(dir / "sim4" / "trace.csv"), detail,
                "simulate differs between serial and parallel"))
        return false;

    const std::string ver_ref = slurp(dir / "ver1a" / "report.json");
    if (!expect(!ver_ref.empty(), detail, "verify wrote nothing")) return false;
    if (!expect(ver_ref == slurp(dir / "ver1b" / "report.json"), detail,
                "verify differs across identical runs"))
        return false;
    return expect(ver_ref == slurp(dir / "ver4" / "report.json"), detail,
                  "verify differs between serial and parallel");
}

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "lemma-3.1 slack over 10^4 sampled (operator, alpha, u) triples", 5.0,
         criterion_lemma_slack},
        {2, "telescoping exactness on 100 stored-atom traces of length 50", 5.0,
         criterion_telescoping},
        {3, "enumeration tightness: E||R_n||^2 = 0.5^n * 2 on the coordinate family", 1.0,
         criterion_enumeration_tightness},
        {4, "frame-energy bounds: coordinate and averaged-projection families", 2.0,
         criterion_frame_energy},
        {5, "isotropic mean-square rate d^{-n} within 10% (d = 2, 5, 10; 2*10^5 trials)", 60.0,
         criterion_isotropic_rate},
        {6, "almost-sure rate and truncation certificates (d = 4, 1000 x 200)", 30.0,
         criterion_as_rate},
        {7, "closed-form constants: rho_{1/2}, U_{1/2}, U_{3/4}(0.9), inadmissibility", 1.0,
         criterion_constants},
        {8, "coercivity estimators: sigma, mean projection, soft-threshold probe", 30.0,
         criterion_estimators},
        {9, "kaczmarz solver: coupon-collection finish and 2^{-k} contraction", 10.0,
         criterion_kaczmarz},
        {10, "byte-identical simulate/verify across runs and thread counts", 10.0,
         criterion_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.body(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = elapsed < c.limit_s;
        if (ok && !in_budget) detail = "runtime budget exceeded";
        const bool pass = ok && in_budget;
        if (!pass) ++failures;
        std::printf("[%s] %2d. %s (%.2fs < %.0fs)%s%s\n", pass ? "PASS" : "FAIL", c.id,
                    c.name.c_str(), elapsed, c.limit_s, detail.empty() ? "" : " -- ",
                    detail.c_str());
    }
    std::printf("acceptance: %zu/%zu criteria passed\n", criteria.size() - failures,
                criteria.size());
    return failures == 0 ? 0 : 1;
}
