#pragma once

#include <string>
#include <vector>

#include "rnff/ensemble.hpp"
#include "rnff/operators.hpp"

namespace rnff {

/// Closed-form constants for an alpha-averaged family with mean-square
/// coercivity constant C:
///   rho   = (alpha/(1-alpha)) (1-C)        per-step mean-square factor
///   gamma = -0.5 log(rho)                  a.s. exponential rate
///   U     = 1                              for alpha <= 1/2
///         = 1 + ((2a-1)/a) rho/(1-rho)     for alpha  > 1/2
/// gamma and U_alpha are NaN unless rho < 1.
struct RateConstants {
    double alpha = 0.0;
    double C = 0.0;
    double rho = 0.0;
    double gamma = 0.0;
    double U_alpha = 0.0;
    bool admissible = false;
};

RateConstants rate_constants(double alpha, double C);

/// Mean operator G = E[P] (projection families) or Sigma = E[a a^T / ||a||^2]
/// (hyperplane families), with spectral extremes and the coercivity constant
/// they imply. n_samples = 0 marks an exact probability-weighted sum.
struct MeanOperatorEstimate {
    SymMatrix matrix;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double derived_C = 0.0;
    long n_samples = 0;
    double std_error = 0.0; // max entrywise standard error, 0 when exact
};

/// G = E[P] over a family of orthogonal projections; derived_C = lambda_min(G).
/// Exact (probability-weighted) when n_samples = 0 and the family is finite;
/// otherwise a Monte Carlo average of sampled projection matrices.
MeanOperatorEstimate estimate_mean_projection(const OperatorFamily& family, long n_samples,
                                              RngStream rng, int threads = 0);

/// Sigma = E[a a^T] over normalized hyperplane directions;
/// derived_C = 1 - lambda_max(Sigma).
MeanOperatorEstimate estimate_sigma(const OperatorFamily& family, long n_samples, RngStream rng,
                                    int threads = 0);

/// Coercivity of the averaged projection family (1-alpha) I + alpha P:
/// (1-alpha)^2 + (2 alpha - alpha^2) lambda_min_G. alpha = 1 is allowed here
/// and reduces to lambda_min_G.
double predicted_averaged_C(double alpha, double lambda_min_G);

/// Statistical lower-envelope estimate of inf_u E||T u||^2 / ||u||^2 over a
/// finite probe set (all coordinate axes plus n_directions random unit
/// vectors, scaled to probe_norm). An upper estimate of the true infimum;
/// rigorous constants come from the spectral routes above.
struct ProbeResult {
    double empirical_C = 0.0;
    double std_error = 0.0;
    int n_probes = 0;
};

ProbeResult coercivity_probe(const OperatorFamily& family, int n_directions, long n_samples,
                             RngStream rng, double probe_norm = 1.0, int threads = 0);

/// Exact E||R_k||^2 and E||F_k||^2 for k <= n over all m^n operator
/// sequences of a finite family, each weighted by its product probability.
struct EnumerationResult {
    std::vector<double> residual_sq; // k = 0..n
    std::vector<double> atom_sq;     // k = 1..n
};

constexpr std::uint64_t kEnumerationBudget = 10'000'000;

/// Parallel oracle: subtree tasks below a fixed prefix depth, merged in
/// lexicographic order (bitwise reproducible for any thread count).
/// Throws CapabilityError when m^n exceeds kEnumerationBudget leaves.
EnumerationResult enumerate_expectation(const FiniteFamily& family, const Vec& x0, int n,
                                        int threads = 0);

namespace serial_ref {
/// Straight depth-first walk; reference for the parallel oracle.
EnumerationResult enumerate_expectation(const FiniteFamily& family, const Vec& x0, int n);
} // namespace serial_ref

/// Margins rho^k ||x0||^2 - E||R_k||^2 against Theorem-style mean-square
/// decay. Tolerance is 1e-9 for exact expectations or 3 standard errors
/// per step for Monte Carlo input. Inadmissible constants are refused.
struct BoundCheck {
    std::vector<double> margins;
    double min_margin = 0.0;
    double max_tolerance = 0.0; // largest per-step tolerance applied
    bool pass = false;
    bool tight = false; // some margin within tolerance of zero
    std::string method; // "exact-enumeration" | "monte-carlo"
};

BoundCheck verify_mean_square_bound(const std::vector<double>& residual_sq_expect,
                                    const RateConstants& constants, double x0_norm_sq,
                                    const std::vector<double>* std_errors = nullptr);

/// Cumulative expected atom energy sum_{k<=n} E||F_k||^2 against the
/// two-sided bounds [C ||x0||^2, U_alpha ||x0||^2]; passes when the final
/// value lies inside (within tolerance) and the lower bound already holds
/// at k = 1. The cumulative list stops early once an increment falls below
/// 1e-12 ||x0||^2.
struct FrameEnergyReport {
    double x0_norm_sq = 0.0;
    std::vector<double> cumulative_energy;
    double lower_bound = 0.0;
    double upper_bound = 0.0;
    std::string method;
    double tolerance = 0.0;
    bool passes = false;
};

enum class ExpectationMethod { ExactEnumeration, MonteCarlo };

FrameEnergyReport frame_energy_report(const OperatorFamily& family, const Vec& x0, int n,
                                      const RateConstants& constants, ExpectationMethod method,
                                      long n_trials, RngStream rng, int threads = 0);

} // namespace rnff
