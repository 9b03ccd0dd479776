#include "rnff/ensemble.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rnff {

namespace {

constexpr long kBlockTrials = 1024;

// Running sums for one block of trials, accumulated in trial order.
struct BlockAcc {
    std::vector<double> res_sum, res_sumsq;   // n = 0..N
    std::vector<double> atom_sum, atom_sumsq; // n = 1..N
    std::vector<double> cum_sum, cum_sumsq;   // n = 1..N

    explicit BlockAcc(int n_steps)
        : res_sum(static_cast<size_t>(n_steps) + 1, 0.0),
          res_sumsq(static_cast<size_t>(n_steps) + 1, 0.0),
          atom_sum(static_cast<size_t>(n_steps), 0.0),
          atom_sumsq(static_cast<size_t>(n_steps), 0.0),
          cum_sum(static_cast<size_t>(n_steps), 0.0),
          cum_sumsq(static_cast<size_t>(n_steps), 0.0) {}

    void add_trace(const IterationTrace& t) {
        for (size_t n = 0; n < res_sum.size(); ++n) {
            const double v = t.residual_norms_sq[n];
            res_sum[n] += v;
            res_sumsq[n] += v * v;
        }
        double cum = 0.0;
        for (size_t n = 0; n < atom_sum.size(); ++n) {
            const double v = t.atom_norms_sq[n];
            atom_sum[n] += v;
            atom_sumsq[n] += v * v;
            cum += v;
            cum_sum[n] += cum;
            cum_sumsq[n] += cum * cum;
        }
    }

    void merge(const BlockAcc& o) {
        for (size_t n = 0; n < res_sum.size(); ++n) {
            res_sum[n] += o.res_sum[n];
            res_sumsq[n] += o.res_sumsq[n];
        }
        for (size_t n = 0; n < atom_sum.size(); ++n) {
            atom_sum[n] += o.atom_sum[n];
            atom_sumsq[n] += o.atom_sumsq[n];
            cum_sum[n] += o.cum_sum[n];
            cum_sumsq[n] += o.cum_sumsq[n];
        }
    }
};

void finalize(std::vector<double>& mean, std::vector<double>& se, const std::vector<double>& sum,
              const std::vector<double>& sumsq, long trials) {
    const double t = static_cast<double>(trials);
    mean.resize(sum.size());
    se.resize(sum.size());
    for (size_t n = 0; n < sum.size(); ++n) {
        mean[n] = sum[n] / t;
        const double var = std::max(0.0, sumsq[n] / t - mean[n] * mean[n]);
        se[n] = std::sqrt(var / t);
    }
}

EnsembleSummary summarize(BlockAcc& total, long n_trials) {
    EnsembleSummary s;
    s.n_trials = n_trials;
    finalize(s.residual_sq_mean, s.residual_sq_stderr, total.res_sum, total.res_sumsq, n_trials);
    finalize(s.atom_sq_mean, s.atom_sq_stderr, total.atom_sum, total.atom_sumsq, n_trials);
    finalize(s.cum_energy_mean, s.cum_energy_stderr, total.cum_sum, total.cum_sumsq, n_trials);
    return s;
}

} // namespace

int effective_threads(int requested) {
#ifdef _OPENMP
    return requested > 0 ? requested : omp_get_max_threads();
#else
    (void)requested;
    return 1;
#endif
}

EnsembleSummary run_ensemble(const OperatorFamily& family, const Vec& x0, int n_steps,
                             long n_trials, RngStream trials_root, int threads) {
    if (n_trials < 1)
        throw ValidationError("run_ensemble: n_trials must be >= 1");
    const long n_blocks = (n_trials + kBlockTrials - 1) / kBlockTrials;
    std::vector<BlockAcc> blocks(static_cast<size_t>(n_blocks), BlockAcc(n_steps));

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
                blocks[static_cast<size_t>(b)].add_trace(
                    run_iteration(family, x0, n_steps, rng, false));
            }
        });
    }
    errors.rethrow();

    BlockAcc total(n_steps);
    for (const BlockAcc& b : blocks) total.merge(b);
    return summarize(total, n_trials);
}

std::vector<IterationTrace> run_trace_ensemble(const OperatorFamily& family, const Vec& x0,
                                               int n_steps, long n_trials, RngStream trials_root,
                                               bool store_atoms, int threads) {
    if (n_trials < 1)
        throw ValidationError("run_trace_ensemble: n_trials must be >= 1");
    std::vector<IterationTrace> traces(static_cast<size_t>(n_trials));

    const int nt = effective_threads(threads);
    detail::ParallelErrors errors;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#else
    (void)nt;
#endif
    for (long t = 0; t < n_trials; ++t) {
        errors.capture([&, t] {
            RngStream rng = trials_root.split(static_cast<std::uint64_t>(t));
            traces[static_cast<size_t>(t)] =
                run_iteration(family, x0, n_steps, rng, store_atoms);
        });
    }
    errors.rethrow();
    return traces;
}

namespace serial_ref {

EnsembleSummary run_ensemble(const OperatorFamily& family, const Vec& x0, int n_steps,
                             long n_trials, RngStream trials_root) {
    if (n_trials < 1)
        throw ValidationError("run_ensemble: n_trials must be >= 1");
    BlockAcc total(n_steps);
    for (long t = 0; t < n_trials; ++t) {
        RngStream rng = trials_root.split(static_cast<std::uint64_t>(t));
        total.add_trace(run_iteration(family, x0, n_steps, rng, false));
    }
    return summarize(total, n_trials);
}

} // namespace serial_ref

} // namespace rnff
