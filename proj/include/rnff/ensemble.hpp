#pragma once

#include <cstdint>
#include <vector>

#include "rnff/iteration.hpp"
#include "rnff/parallel.hpp"

namespace rnff {

/// Monte Carlo statistics over independent trajectories. Trial t always
/// draws from trials_root.split(t), and partial sums are merged in a fixed
/// block order, so every field is bitwise identical for any thread count.
struct EnsembleSummary {
    long n_trials = 0;
    std::vector<double> residual_sq_mean;   // E||R_n||^2, n = 0..N
    std::vector<double> residual_sq_stderr; // n = 0..N (0 at n = 0)
    std::vector<double> atom_sq_mean;       // E||F_n||^2, n = 1..N
    std::vector<double> atom_sq_stderr;     // n = 1..N
    std::vector<double> cum_energy_mean;    // E[sum_{k<=n} ||F_k||^2], n = 1..N
    std::vector<double> cum_energy_stderr;  // n = 1..N
};

/// Parallel kernel (OpenMP across fixed trial blocks).
EnsembleSummary run_ensemble(const OperatorFamily& family, const Vec& x0, int n_steps,
                             long n_trials, RngStream trials_root, int threads = 0);

/// All trajectories as traces, one slot per trial (parallel fill).
std::vector<IterationTrace> run_trace_ensemble(const OperatorFamily& family, const Vec& x0,
                                               int n_steps, long n_trials, RngStream trials_root,
                                               bool store_atoms, int threads = 0);

namespace serial_ref {

/// Plain sequential loop over trials; kept as the reference the parallel
/// kernel is tested and benchmarked against.
EnsembleSummary run_ensemble(const OperatorFamily& family, const Vec& x0, int n_steps,
                             long n_trials, RngStream trials_root);

} // namespace serial_ref

} // namespace rnff
