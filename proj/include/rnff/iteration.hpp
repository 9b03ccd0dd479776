#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rnff/operators.hpp"

namespace rnff {

/// Per-step record of one trajectory of the residual recursion
///   R_0 = x0,  F_n = T_n(R_{n-1}),  R_n = R_{n-1} - F_n.
/// Norms are always recorded; atom vectors only when requested.
struct IterationTrace {
    Vec x0;
    std::vector<double> residual_norms_sq; // ||R_n||^2 for n = 0..N
    std::vector<double> atom_norms_sq;     // ||F_n||^2 for n = 1..N
    std::vector<Vec> atoms;                // F_n when stored, else empty
    Vec final_residual;                    // R_N
    std::uint64_t master_seed = 0;
    std::uint64_t trial_index = 0;

    int n_steps() const { return static_cast<int>(atom_norms_sq.size()); }
    bool has_atoms() const { return atoms.size() == atom_norms_sq.size(); }
};

/// Eventual per-trajectory guarantee ||R_n|| <= theta^n ||x0|| with
/// theta = exp(-(gamma - epsilon)), realized from `first_index` onward
/// (empty when the trace never settles below the envelope by `horizon`).
struct TruncationCertificate {
    double gamma = 0.0;
    double epsilon = 0.0;
    double theta = 0.0;
    std::optional<int> first_index;
    int horizon = 0;
};

/// Runs n_steps of the recursion with operators drawn i.i.d. from `family`.
/// Once the residual hits exactly zero the loop short-circuits: every later
/// atom and residual is zero since all variants fix the origin.
IterationTrace run_iteration(const OperatorFamily& family, const Vec& x0, int n_steps,
                             RngStream& rng, bool store_atoms);

/// Partial synthesis S_n = sum_{k<=n} F_k; requires stored atoms.
/// The trace satisfies x0 - S_n = R_n up to roundoff.
Vec synthesize(const IterationTrace& trace, int n);

/// Tail-window log slope (1/window) log(||R_N|| / ||R_{N-window}||) per
/// trace; -inf when the window tail reaches an exact zero.
std::vector<double> estimate_as_rate(const std::vector<IterationTrace>& traces, int window);

/// Smallest N with ||R_n|| <= theta^n ||x0|| for all n in [N, horizon].
TruncationCertificate certify_truncation(const IterationTrace& trace, double gamma,
                                         double epsilon);

} // namespace rnff
