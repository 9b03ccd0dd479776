#include "rnff/kaczmarz.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rnff {

void validate_system(const LinearSystem& system) {
    if (system.rows.empty())
        throw ValidationError("LinearSystem: needs at least one row");
    if (system.rows.size() != system.rhs.size())
        throw ValidationError("LinearSystem: rows and rhs length mismatch");
    const size_t d = system.rows.front().size();
    for (const Vec& a : system.rows) {
        check_finite(a, "LinearSystem row");
        if (a.size() != d)
            throw ValidationError("LinearSystem: rows have mismatched dimensions");
        if (norm(a) < 1e-300)
            throw ValidationError("LinearSystem: zero rows are not allowed");
    }
    for (double b : system.rhs)
        if (!std::isfinite(b))
            throw ValidationError("LinearSystem: rhs entries must be finite");
    if (system.x_true) {
        check_finite(*system.x_true, "LinearSystem x_true");
        if (system.x_true->size() != d)
            throw ValidationError("LinearSystem: x_true dimension mismatch");
        for (size_t i = 0; i < system.rows.size(); ++i)
            if (std::abs(dot(system.rows[i], *system.x_true) - system.rhs[i]) > 1e-10)
                throw ValidationError("LinearSystem: x_true does not satisfy row " +
                                      std::to_string(i) + " (inconsistent system)");
    }
}

LinearSystem load_system(std::istream& in) {
    int d = 0, m = 0;
    if (!(in >> d >> m))
        throw ValidationError("system file: expected header line \"d m\"");
    if (d < 1 || m < 1)
        throw ValidationError("system file: d and m must be >= 1");

    LinearSystem sys;
    sys.rows.reserve(static_cast<size_t>(m));
    sys.rhs.reserve(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        Vec row(static_cast<size_t>(d));
        for (double& x : row)
            if (!(in >> x))
                throw ValidationError("system file: row " + std::to_string(i) + " is truncated");
        double b;
        if (!(in >> b))
            throw ValidationError("system file: row " + std::to_string(i) + " is missing b_i");
        sys.rows.push_back(std::move(row));
        sys.rhs.push_back(b);
    }

    std::string tag;
    if (in >> tag) {
        if (tag != "x_true")
            throw ValidationError("system file: unexpected trailing token \"" + tag + "\"");
        Vec xt(static_cast<size_t>(d));
        for (double& x : xt)
            if (!(in >> x))
                throw ValidationError("system file: x_true line is truncated");
        sys.x_true = std::move(xt);
        if (in >> tag)
            throw ValidationError("system file: unexpected trailing token \"" + tag + "\"");
    }

    validate_system(sys);
    return sys;
}

LinearSystem load_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("system file: cannot open " + path);
    return load_system(in);
}

namespace {

std::vector<double> row_probs(const LinearSystem& system, RowSampling sampling) {
    std::vector<double> probs(system.rows.size());
    if (sampling == RowSampling::Uniform) {
        for (double& p : probs) p = 1.0 / static_cast<double>(system.rows.size());
    } else {
        double total = 0.0;
        for (size_t i = 0; i < system.rows.size(); ++i) {
            probs[i] = norm_sq(system.rows[i]);
            total += probs[i];
        }
        for (double& p : probs) p /= total;
    }
    return probs;
}

} // namespace

std::pair<Vec, SolveTrace> solve_rkaczmarz(const LinearSystem& system, RowSampling sampling,
                                           const Vec& x_start, int n_steps, RngStream& rng) {
    validate_system(system);
    if (n_steps < 0)
        throw ValidationError("solve_rkaczmarz: n_steps must be >= 0");
    check_finite(x_start, "solve_rkaczmarz x_start");
    if (static_cast<int>(x_start.size()) != system.dim())
        throw ValidationError("solve_rkaczmarz: x_start dimension mismatch");

    const size_t m = system.rows.size();
    std::vector<double> row_nsq(m);
    for (size_t i = 0; i < m; ++i) row_nsq[i] = norm_sq(system.rows[i]);
    const std::vector<double> probs = row_probs(system, sampling);

    SolveTrace trace;
    trace.sampling = sampling;
    trace.errors_are_true_error = system.x_true.has_value();
    trace.master_seed = rng.master_seed();
    trace.trial_index = rng.stream_index();

    Vec x = x_start;
    auto record_error = [&]() {
        Vec e = x;
        axpy(-1.0, *system.x_true, e);
        trace.error_norms.push_back(norm(e));
    };
    if (trace.errors_are_true_error) record_error();

    for (int k = 0; k < n_steps; ++k) {
        const size_t i = sampling == RowSampling::Uniform
                             ? static_cast<size_t>(rng.next_below(m))
                             : rng.next_categorical(probs);
        const double resid = system.rhs[i] - dot(system.rows[i], x);
        axpy(resid / row_nsq[i], system.rows[i], x);
        if (trace.errors_are_true_error)
            record_error();
        else
            trace.error_norms.push_back(std::abs(resid));
    }
    return {std::move(x), std::move(trace)};
}

KaczmarzRates predicted_rates(const LinearSystem& system, RowSampling sampling) {
    validate_system(system);
    const int d = system.dim();
    const std::vector<double> probs = row_probs(system, sampling);

    KaczmarzRates rates{0.0, 0.0, 0.0, SymMatrix(d)};
    for (size_t i = 0; i < system.rows.size(); ++i)
        rates.sigma.add_outer(system.rows[i], probs[i] / norm_sq(system.rows[i]));

    const EigExtremes eig = sym_eig_extremes(rates.sigma);
    rates.C = 1.0 - eig.lambda_max;
    rates.solver_rate = 1.0 - eig.lambda_min;
    rates.gamma = rates.C > 0.0 ? 0.5 * std::log(1.0 / (1.0 - rates.C)) : 0.0;
    return rates;
}

namespace {

constexpr long kBlockTrials = 1024;

struct ErrAcc {
    std::vector<double> sum, sumsq;
    explicit ErrAcc(int n_steps)
        : sum(static_cast<size_t>(n_steps) + 1, 0.0),
          sumsq(static_cast<size_t>(n_steps) + 1, 0.0) {}
    void add(const SolveTrace& t) {
        for (size_t k = 0; k < sum.size(); ++k) {
            const double esq = t.error_norms[k] * t.error_norms[k];
            sum[k] += esq;
            sumsq[k] += esq * esq;
        }
    }
    void merge(const ErrAcc& o) {
        for (size_t k = 0; k < sum.size(); ++k) {
            sum[k] += o.sum[k];
            sumsq[k] += o.sumsq[k];
        }
    }
};

ErrorEnsemble finalize_errors(const ErrAcc& total, long n_trials) {
    ErrorEnsemble out;
    out.n_trials = n_trials;
    const double t = static_cast<double>(n_trials);
    out.error_sq_mean.resize(total.sum.size());
    out.error_sq_stderr.resize(total.sum.size());
    for (size_t k = 0; k < total.sum.size(); ++k) {
        out.error_sq_mean[k] = total.sum[k] / t;
        const double var =
            std::max(0.0, total.sumsq[k] / t - out.error_sq_mean[k] * out.error_sq_mean[k]);
        out.error_sq_stderr[k] = std::sqrt(var / t);
    }
    return out;
}

void require_x_true(const LinearSystem& system) {
    if (!system.x_true)
        throw ValidationError("kaczmarz_error_ensemble: x_true is required");
}

} // namespace

ErrorEnsemble kaczmarz_error_ensemble(const LinearSystem& system, RowSampling sampling,
                                      const Vec& x_start, int n_steps, long n_trials,
                                      RngStream trials_root, int threads) {
    require_x_true(system);
    if (n_trials < 1)
        throw ValidationError("kaczmarz_error_ensemble: n_trials must be >= 1");

    const long n_blocks = (n_trials + kBlockTrials - 1) / kBlockTrials;
    std::vector<ErrAcc> blocks(static_cast<size_t>(n_blocks), ErrAcc(n_steps));

    const int nt = effective_threads(threads);
    detail::ParallelErrors errors;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#else
    (void)nt;
#endif
    for (long b = 0; b < n_blocks; ++b) {
        errors.capture([&, b] {
            const long lo = b * kBlockTrials;
            const long hi = std::min(n_trials, lo + kBlockTrials);
            for (long t = lo; t < hi; ++t) {
                RngStream rng = trials_root.split(static_cast<std::uint64_t>(t));
                blocks[static_cast<size_t>(b)].add(
                    solve_rkaczmarz(system, sampling, x_start, n_steps, rng).second);
            }
        });
    }
    errors.rethrow();

    ErrAcc total(n_steps);
    for (const ErrAcc& b : blocks) total.merge(b);
    return finalize_errors(total, n_trials);
}

namespace serial_ref {

ErrorEnsemble kaczmarz_error_ensemble(const LinearSystem& system, RowSampling sampling,
                                      const Vec& x_start, int n_steps, long n_trials,
                                      RngStream trials_root) {
    require_x_true(system);
    if (n_trials < 1)
        throw ValidationError("kaczmarz_error_ensemble: n_trials must be >= 1");
    ErrAcc total(n_steps);
    for (long t = 0; t < n_trials; ++t) {
        RngStream rng = trials_root.split(static_cast<std::uint64_t>(t));
        total.add(solve_rkaczmarz(system, sampling, x_start, n_steps, rng).second);
    }
    return finalize_errors(total, n_trials);
}

} // namespace serial_ref

} // namespace rnff
