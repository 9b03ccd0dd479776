#include "rnff/analysis.hpp"

#include <cmath>
#include <functional>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rnff {

RateConstants rate_constants(double alpha, double C) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("rate_constants: alpha must lie strictly inside (0,1)");
    if (!(C > 0.0 && C < 1.0))
        throw ValidationError("rate_constants: C must lie strictly inside (0,1)");

    RateConstants rc;
    rc.alpha = alpha;
    rc.C = C;
    rc.rho = alpha / (1.0 - alpha) * (1.0 - C);
    rc.admissible = rc.rho < 1.0;
    if (rc.admissible) {
        rc.gamma = -0.5 * std::log(rc.rho);
        rc.U_alpha = alpha <= 0.5
                         ? 1.0
                         : 1.0 + (2.0 * alpha - 1.0) / alpha * (rc.rho / (1.0 - rc.rho));
    } else {
        rc.gamma = std::numeric_limits<double>::quiet_NaN();
        rc.U_alpha = std::numeric_limits<double>::quiet_NaN();
    }
    return rc;
}

namespace {

constexpr long kBlockSamples = 4096;

// Accumulates sample matrices block by block; merged in block order so the
// result is bitwise independent of the thread count.
struct MatrixMoments {
    int dim;
    std::vector<double> sum;   // row-major
    std::vector<double> sumsq; // entrywise

    explicit MatrixMoments(int d)
        : dim(d),
          sum(static_cast<size_t>(d) * d, 0.0),
          sumsq(static_cast<size_t>(d) * d, 0.0) {}

    void add(const std::vector<double>& entries) {
        for (size_t i = 0; i < sum.size(); ++i) {
            sum[i] += entries[i];
            sumsq[i] += entries[i] * entries[i];
        }
    }

    void merge(const MatrixMoments& o) {
        for (size_t i = 0; i < sum.size(); ++i) {
            sum[i] += o.sum[i];
            sumsq[i] += o.sumsq[i];
        }
    }
};

void outer_into(std::vector<double>& entries, const Vec& v, int dim) {
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            entries[static_cast<size_t>(i) * dim + j] += v[static_cast<size_t>(i)] *
                                                         v[static_cast<size_t>(j)];
}

// Row-major entries of the sampled instance, as a projection matrix
// (for G) or normalized outer product (for Sigma).
std::vector<double> instance_matrix(const OperatorInstance& op, int dim, bool want_projection,
                                    const char* caller) {
    std::vector<double> entries(static_cast<size_t>(dim) * dim, 0.0);
    if (want_projection) {
        if (const auto* p = std::get_if<OrthoProjection>(&op.v)) {
            for (const Vec& b : p->basis) outer_into(entries, b, dim);
            return entries;
        }
        if (std::holds_alternative<Identity>(op.v)) {
            for (int i = 0; i < dim; ++i) entries[static_cast<size_t>(i) * dim + i] = 1.0;
            return entries;
        }
        throw CapabilityError(std::string(caller) +
                              ": family must produce orthogonal-projection instances");
    }
    if (const auto* h = std::get_if<HyperplaneProjection>(&op.v)) {
        outer_into(entries, h->direction, dim);
        return entries;
    }
    throw CapabilityError(std::string(caller) +
                          ": family must produce hyperplane-projection instances "
                          "(directions recoverable)");
}

// Rejects families whose samples cannot feed the requested estimator, so
// the parallel sampling loop below never throws.
void validate_family_kind(const OperatorFamily& family, bool want_projection,
                          const char* caller) {
    bool ok = false;
    if (const auto* ff = std::get_if<FiniteFamily>(&family.v)) {
        ok = true;
        for (const auto& op : ff->instances) {
            const bool is_proj = std::holds_alternative<OrthoProjection>(op.v) ||
                                 std::holds_alternative<Identity>(op.v);
            const bool is_hyp = std::holds_alternative<HyperplaneProjection>(op.v);
            if (want_projection ? !is_proj : !is_hyp) ok = false;
        }
    } else if (std::holds_alternative<UniformCoordinateProjection>(family.v)) {
        ok = want_projection;
    } else if (std::holds_alternative<GaussianHyperplane>(family.v)) {
        ok = !want_projection;
    } else if (const auto* cd = std::get_if<CustomDirection>(&family.v)) {
        ok = want_projection == (cd->projection == CustomDirection::Projection::Line);
    }
    if (!ok)
        throw CapabilityError(
            std::string(caller) +
            (want_projection
                 ? ": family must produce orthogonal-projection instances"
                 : ": family must produce hyperplane-projection instances (directions "
                   "recoverable)"));
}

MeanOperatorEstimate estimate_mean_matrix(const OperatorFamily& family, long n_samples,
                                          RngStream rng, int threads, bool want_projection,
                                          const char* caller) {
    validate_family_kind(family, want_projection, caller);
    const int dim = family_dim(family);
    MeanOperatorEstimate est{SymMatrix(dim), 0.0, 0.0, 0.0, 0, 0.0};

    if (n_samples == 0) {
        auto finite = to_finite_family(family);
        if (!finite)
            throw CapabilityError(std::string(caller) +
                                  ": exact mode (n_samples = 0) needs a finite family");
        std::vector<double> mean(static_cast<size_t>(dim) * dim, 0.0);
        for (size_t i = 0; i < finite->instances.size(); ++i) {
            const auto entries =
                instance_matrix(finite->instances[i], dim, want_projection, caller);
            for (size_t k = 0; k < mean.size(); ++k) mean[k] += finite->probs[i] * entries[k];
        }
        est.matrix = SymMatrix(dim, std::move(mean));
    } else {
        const long n_blocks = (n_samples + kBlockSamples - 1) / kBlockSamples;
        std::vector<MatrixMoments> blocks(static_cast<size_t>(n_blocks), MatrixMoments(dim));

        const int nt = effective_threads(threads);
        detail::ParallelErrors errors;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#else
        (void)nt;
#endif
        for (long b = 0; b < n_blocks; ++b) {
            errors.capture([&, b] {
                const long lo = b * kBlockSamples;
                const long hi = std::min(n_samples, lo + kBlockSamples);
                for (long s = lo; s < hi; ++s) {
                    RngStream stream = rng.split(static_cast<std::uint64_t>(s));
                    const OperatorInstance op = sample(family, stream);
                    blocks[static_cast<size_t>(b)].add(
                        instance_matrix(op, dim, want_projection, caller));
                }
            });
        }
        errors.rethrow();

        MatrixMoments total(dim);
        for (const MatrixMoments& b : blocks) total.merge(b);

        const double t = static_cast<double>(n_samples);
        std::vector<double> mean(total.sum);
        double max_se = 0.0;
        for (size_t k = 0; k < mean.size(); ++k) {
            mean[k] /= t;
            const double var = std::max(0.0, total.sumsq[k] / t - mean[k] * mean[k]);
            max_se = std::max(max_se, std::sqrt(var / t));
        }
        // mirror the upper triangle so the estimate is exactly symmetric
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j)
                mean[static_cast<size_t>(j) * dim + i] = mean[static_cast<size_t>(i) * dim + j];
        est.matrix = SymMatrix(dim, std::move(mean));
        est.n_samples = n_samples;
        est.std_error = max_se;
    }

    const EigExtremes eig = sym_eig_extremes(est.matrix);
    est.lambda_min = eig.lambda_min;
    est.lambda_max = eig.lambda_max;
    est.derived_C = want_projection ? eig.lambda_min : 1.0 - eig.lambda_max;
    return est;
}

} // namespace

MeanOperatorEstimate estimate_mean_projection(const OperatorFamily& family, long n_samples,
                                              RngStream rng, int threads) {
    return estimate_mean_matrix(family, n_samples, rng, threads, true,
                                "estimate_mean_projection");
}

MeanOperatorEstimate estimate_sigma(const OperatorFamily& family, long n_samples, RngStream rng,
                                    int threads) {
    return estimate_mean_matrix(family, n_samples, rng, threads, false, "estimate_sigma");
}

double predicted_averaged_C(double alpha, double lambda_min_G) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ValidationError("predicted_averaged_C: alpha must lie in (0,1]");
    if (!(lambda_min_G >= -1e-9 && lambda_min_G <= 1.0 + 1e-9))
        throw ValidationError("predicted_averaged_C: lambda_min(G) must lie in [0,1]");
    const double lam = std::min(1.0, std::max(0.0, lambda_min_G));
    return (1.0 - alpha) * (1.0 - alpha) + (2.0 * alpha - alpha * alpha) * lam;
}

ProbeResult coercivity_probe(const OperatorFamily& family, int n_directions, long n_samples,
                             RngStream rng, double probe_norm, int threads) {
    if (n_directions < 1)
        throw ValidationError("coercivity_probe: n_directions must be >= 1");
    if (n_samples < 1)
        throw ValidationError("coercivity_probe: n_samples must be >= 1");
    if (!(probe_norm > 0.0))
        throw ValidationError("coercivity_probe: probe_norm must be positive");

    const int dim = family_dim(family);
    std::vector<Vec> probes;
    for (int i = 0; i < dim; ++i) probes.push_back(scaled(unit_axis(dim, i), probe_norm));
    RngStream dir_rng = rng.split(0);
    for (int i = 0; i < n_directions; ++i)
        probes.push_back(scaled(dir_rng.next_unit_vector(dim), probe_norm));

    ProbeResult out;
    out.n_probes = static_cast<int>(probes.size());
    out.empirical_C = std::numeric_limits<double>::infinity();

    const long n_blocks = (n_samples + kBlockSamples - 1) / kBlockSamples;
    const int nt = effective_threads(threads);

    for (size_t p = 0; p < probes.size(); ++p) {
        const Vec& u = probes[p];
        const double usq = norm_sq(u);
        RngStream probe_rng = rng.split(1 + static_cast<std::uint64_t>(p));

        std::vector<double> block_sum(static_cast<size_t>(n_blocks), 0.0);
        std::vector<double> block_sumsq(static_cast<size_t>(n_blocks), 0.0);
        detail::ParallelErrors errors;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#else
        (void)nt;
#endif
        for (long b = 0; b < n_blocks; ++b) {
            errors.capture([&, b] {
                const long lo = b * kBlockSamples;
                const long hi = std::min(n_samples, lo + kBlockSamples);
                for (long s = lo; s < hi; ++s) {
                    RngStream stream = probe_rng.split(static_cast<std::uint64_t>(s));
                    // per-sample ratio: exact for degenerate cases (0 or 1)
                    const double v = norm_sq(apply_op(sample(family, stream), u)) / usq;
                    block_sum[static_cast<size_t>(b)] += v;
                    block_sumsq[static_cast<size_t>(b)] += v * v;
                }
            });
        }
        errors.rethrow();
        double sum = 0.0, sumsq = 0.0;
        for (long b = 0; b < n_blocks; ++b) {
            sum += block_sum[static_cast<size_t>(b)];
            sumsq += block_sumsq[static_cast<size_t>(b)];
        }
        const double t = static_cast<double>(n_samples);
        const double ratio = sum / t;
        const double var = std::max(0.0, sumsq / t - ratio * ratio);
        if (ratio < out.empirical_C) {
            out.empirical_C = ratio;
            out.std_error = std::sqrt(var / t);
        }
    }
    return out;
}

namespace {

std::uint64_t leaf_count_or_throw(size_t m, int n) {
    std::uint64_t leaves = 1;
    for (int k = 0; k < n; ++k) {
        if (leaves > kEnumerationBudget / m + 1) {
            throw CapabilityError("enumerate_expectation: budget exceeded, " +
                                  std::to_string(m) + "^" + std::to_string(n) +
                                  " leaf sequences > " + std::to_string(kEnumerationBudget));
        }
        leaves *= m;
    }
    if (leaves > kEnumerationBudget)
        throw CapabilityError("enumerate_expectation: budget exceeded, " + std::to_string(m) +
                              "^" + std::to_string(n) + " = " + std::to_string(leaves) +
                              " leaf sequences > " + std::to_string(kEnumerationBudget));
    return leaves;
}

void validate_enumeration_input(const FiniteFamily& family, const Vec& x0, int n) {
    if (n < 0)
        throw ValidationError("enumerate_expectation: n must be >= 0");
    if (family.instances.empty())
        throw ValidationError("enumerate_expectation: family must be nonempty");
    check_finite(x0, "enumerate_expectation x0");
    if (static_cast<int>(x0.size()) != op_dim(family.instances.front()))
        throw ValidationError("enumerate_expectation: x0 dimension does not match family");
    leaf_count_or_throw(family.instances.size(), n);
}

// Walks every operator sequence below (residual r, weight w) from depth
// `depth`+1 to `n`, adding weighted contributions. Subtrees with an exactly
// zero residual are pruned: they contribute nothing at any deeper level.
void enumerate_subtree(const FiniteFamily& family, const Vec& r, double w, int depth, int n,
                       std::vector<double>& residual_sq, std::vector<double>& atom_sq) {
    if (depth == n || norm_sq(r) == 0.0) return;
    for (size_t i = 0; i < family.instances.size(); ++i) {
        const double wi = w * family.probs[i];
        Vec atom = apply_op(family.instances[i], r);
        Vec next = r;
        axpy(-1.0, atom, next);
        atom_sq[static_cast<size_t>(depth)] += wi * norm_sq(atom);
        residual_sq[static_cast<size_t>(depth) + 1] += wi * norm_sq(next);
        enumerate_subtree(family, next, wi, depth + 1, n, residual_sq, atom_sq);
    }
}

} // namespace

EnumerationResult enumerate_expectation(const FiniteFamily& family, const Vec& x0, int n,
                                        int threads) {
    validate_enumeration_input(family, x0, n);
    const size_t m = family.instances.size();

    EnumerationResult res;
    res.residual_sq.assign(static_cast<size_t>(n) + 1, 0.0);
    res.atom_sq.assign(static_cast<size_t>(n), 0.0);
    res.residual_sq[0] = norm_sq(x0);

    // Fixed prefix depth: enough subtree tasks to parallelize, chosen
    // independently of the thread count so merges are reproducible.
    int prefix = 0;
    std::uint64_t tasks = 1;
    while (prefix < n && tasks < 64) {
        tasks *= m;
        ++prefix;
    }

    struct Task {
        Vec residual;
        double weight;
    };
    std::vector<Task> frontier;

    // Serial walk of the prefix tree; contributions for depths <= prefix are
    // accumulated here exactly once per node.
    std::function<void(const Vec&, double, int)> walk = [&](const Vec& r, double w, int depth) {
        if (depth == prefix) {
            frontier.push_back(Task{r, w});
            return;
        }
        if (norm_sq(r) == 0.0) {
            frontier.push_back(Task{r, w});
            return;
        }
        for (size_t i = 0; i < m; ++i) {
            const double wi = w * family.probs[i];
            Vec atom = apply_op(family.instances[i], r);
            Vec next = r;
            axpy(-1.0, atom, next);
            res.atom_sq[static_cast<size_t>(depth)] += wi * norm_sq(atom);
            res.residual_sq[static_cast<size_t>(depth) + 1] += wi * norm_sq(next);
            walk(next, wi, depth + 1);
        }
    };
    walk(x0, 1.0, 0);

    const size_t n_tasks = frontier.size();
    const size_t tail = static_cast<size_t>(n - prefix);
    std::vector<std::vector<double>> task_res(n_tasks), task_atom(n_tasks);

    const int nt = effective_threads(threads);
    detail::ParallelErrors errors;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#else
    (void)nt;
#endif
    for (size_t t = 0; t < n_tasks; ++t) {
        errors.capture([&, t] {
            std::vector<double> sub_res(static_cast<size_t>(n) + 1, 0.0);
            std::vector<double> sub_atom(static_cast<size_t>(n), 0.0);
            if (tail > 0)
                enumerate_subtree(family, frontier[t].residual, frontier[t].weight, prefix, n,
                                  sub_res, sub_atom);
            task_res[t] = std::move(sub_res);
            task_atom[t] = std::move(sub_atom);
        });
    }
    errors.rethrow();

    for (size_t t = 0; t < n_tasks; ++t) {
        for (size_t k = 0; k <= static_cast<size_t>(n); ++k)
            res.residual_sq[k] += task_res[t][k];
        for (size_t k = 0; k < static_cast<size_t>(n); ++k) res.atom_sq[k] += task_atom[t][k];
    }
    return res;
}

namespace serial_ref {

EnumerationResult enumerate_expectation(const FiniteFamily& family, const Vec& x0, int n) {
    validate_enumeration_input(family, x0, n);
    EnumerationResult res;
    res.residual_sq.assign(static_cast<size_t>(n) + 1, 0.0);
    res.atom_sq.assign(static_cast<size_t>(n), 0.0);
    res.residual_sq[0] = norm_sq(x0);
    enumerate_subtree(family, x0, 1.0, 0, n, res.residual_sq, res.atom_sq);
    return res;
}

} // namespace serial_ref

BoundCheck verify_mean_square_bound(const std::vector<double>& residual_sq_expect,
                                    const RateConstants& constants, double x0_norm_sq,
                                    const std::vector<double>* std_errors) {
    if (!constants.admissible)
        throw ValidationError(
            "verify_mean_square_bound: constants are inadmissible (rho >= 1), refusing to "
            "verify a vacuous bound");
    if (std_errors && std_errors->size() != residual_sq_expect.size())
        throw ValidationError("verify_mean_square_bound: std_errors length mismatch");

    BoundCheck check;
    check.method = std_errors ? "monte-carlo" : "exact-enumeration";
    check.margins.resize(residual_sq_expect.size());
    check.pass = true;
    check.min_margin = std::numeric_limits<double>::infinity();
    double bound = x0_norm_sq; // rho^0 ||x0||^2
    for (size_t k = 0; k < residual_sq_expect.size(); ++k) {
        const double tol = std_errors ? 3.0 * (*std_errors)[k] : 1e-9;
        const double margin = bound - residual_sq_expect[k];
        check.margins[k] = margin;
        check.min_margin = std::min(check.min_margin, margin);
        check.max_tolerance = std::max(check.max_tolerance, tol);
        if (margin < -tol) check.pass = false;
        if (std::abs(margin) <= tol) check.tight = true;
        bound *= constants.rho;
    }
    return check;
}

FrameEnergyReport frame_energy_report(const OperatorFamily& family, const Vec& x0, int n,
                                      const RateConstants& constants, ExpectationMethod method,
                                      long n_trials, RngStream rng, int threads) {
    if (!constants.admissible)
        throw ValidationError("frame_energy_report: constants are inadmissible (rho >= 1)");

    FrameEnergyReport report;
    report.x0_norm_sq = norm_sq(x0);
    report.lower_bound = constants.C * report.x0_norm_sq;
    report.upper_bound = constants.U_alpha * report.x0_norm_sq;

    std::vector<double> atom_sq;
    std::vector<double> cum_stderr;
    if (method == ExpectationMethod::ExactEnumeration) {
        auto finite = to_finite_family(family);
        if (!finite)
            throw CapabilityError("frame_energy_report: exact enumeration needs a finite family");
        atom_sq = enumerate_expectation(*finite, x0, n, threads).atom_sq;
        report.method = "exact-enumeration";
        report.tolerance = 1e-9;
    } else {
        const EnsembleSummary summary =
            run_ensemble(family, x0, n, n_trials, rng, threads);
        atom_sq = summary.atom_sq_mean;
        cum_stderr = summary.cum_energy_stderr;
        report.method = "monte-carlo";
    }

    const double stop_increment = 1e-12 * report.x0_norm_sq;
    double cum = 0.0;
    for (size_t k = 0; k < atom_sq.size(); ++k) {
        cum += atom_sq[k];
        report.cumulative_energy.push_back(cum);
        if (k > 0 && atom_sq[k] < stop_increment) break;
    }

    if (report.cumulative_energy.empty()) { // n = 0
        report.passes = report.x0_norm_sq == 0.0;
        return report;
    }
    const size_t last = report.cumulative_energy.size() - 1;
    if (method == ExpectationMethod::MonteCarlo)
        report.tolerance = 3.0 * cum_stderr[last];
    const double final_energy = report.cumulative_energy[last];
    const double first_tol = method == ExpectationMethod::MonteCarlo
                                 ? 3.0 * cum_stderr[0]
                                 : report.tolerance;
    report.passes = final_energy >= report.lower_bound - report.tolerance &&
                    final_energy <= report.upper_bound + report.tolerance &&
                    report.cumulative_energy[0] >= report.lower_bound - first_tol;
    return report;
}

} // namespace rnff
