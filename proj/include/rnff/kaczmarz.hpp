#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rnff/analysis.hpp"

namespace rnff {

/// Consistent linear system given by rows a_i and right-hand sides b_i.
/// When x_true is present it must satisfy every equation to 1e-10.
struct LinearSystem {
    std::vector<Vec> rows;
    std::vector<double> rhs;
    std::optional<Vec> x_true;

    int dim() const { return static_cast<int>(rows.front().size()); }
    int n_rows() const { return static_cast<int>(rows.size()); }
};

/// Validates row dims, nonzero rows, and consistency of x_true.
void validate_system(const LinearSystem& system);

/// Plain-text format: first line "d m", then m lines of d+1 reals
/// (row entries then b_i), optionally a final line "x_true" followed by
/// d reals.
LinearSystem load_system(std::istream& in);
LinearSystem load_system_file(const std::string& path);

enum class RowSampling { Uniform, SquaredNorm };

/// Per-step error record: ||x_k - x_true|| for k = 0..N when x_true is
/// known, otherwise the sampled-row residual |<a_i, x_k> - b_i| for
/// k = 1..N.
struct SolveTrace {
    std::vector<double> error_norms;
    RowSampling sampling = RowSampling::Uniform;
    bool errors_are_true_error = false;
    std::uint64_t master_seed = 0;
    std::uint64_t trial_index = 0;
};

/// Randomized Kaczmarz sweep x <- x + ((b_i - <a_i,x>)/||a_i||^2) a_i with
/// row i drawn per `sampling`; one rng draw per step.
std::pair<Vec, SolveTrace> solve_rkaczmarz(const LinearSystem& system, RowSampling sampling,
                                           const Vec& x_start, int n_steps, RngStream& rng);

/// Rates implied by the row second-moment operator
/// Sigma = sum_i p_i a_i a_i^T / ||a_i||^2:
///   C           = 1 - lambda_max(Sigma)   residual-atom coercivity
///   gamma       = 0.5 log(1/(1-C))        a.s. truncation rate of the
///                                         residual decomposition
///   solver_rate = 1 - lambda_min(Sigma)   classical per-step mean-square
///                                         contraction of the error e_k
/// The two rates govern different sequences and coincide only when Sigma
/// is a multiple of the identity.
struct KaczmarzRates {
    double C = 0.0;
    double gamma = 0.0;
    double solver_rate = 0.0;
    SymMatrix sigma;
};

KaczmarzRates predicted_rates(const LinearSystem& system, RowSampling sampling);

/// Monte Carlo E||x_k - x_true||^2 over independent solver runs (requires
/// x_true). Trial t draws from trials_root.split(t); block-merged sums keep
/// the result bitwise stable across thread counts.
struct ErrorEnsemble {
    std::vector<double> error_sq_mean;   // k = 0..N
    std::vector<double> error_sq_stderr; // k = 0..N
    long n_trials = 0;
};

ErrorEnsemble kaczmarz_error_ensemble(const LinearSystem& system, RowSampling sampling,
                                      const Vec& x_start, int n_steps, long n_trials,
                                      RngStream trials_root, int threads = 0);

namespace serial_ref {
ErrorEnsemble kaczmarz_error_ensemble(const LinearSystem& system, RowSampling sampling,
                                      const Vec& x_start, int n_steps, long n_trials,
                                      RngStream trials_root);
} // namespace serial_ref

} // namespace rnff
