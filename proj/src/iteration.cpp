#include "rnff/iteration.hpp"

#include <cmath>
#include <limits>

namespace rnff {

IterationTrace run_iteration(const OperatorFamily& family, const Vec& x0, int n_steps,
                             RngStream& rng, bool store_atoms) {
    if (n_steps < 0)
        throw ValidationError("run_iteration: n_steps must be >= 0");
    check_finite(x0, "run_iteration x0");
    if (static_cast<int>(x0.size()) != family_dim(family))
        throw ValidationError("run_iteration: x0 dimension does not match family");

    IterationTrace trace;
    trace.x0 = x0;
    trace.master_seed = rng.master_seed();
    trace.trial_index = rng.stream_index();
    trace.residual_norms_sq.reserve(static_cast<size_t>(n_steps) + 1);
    trace.atom_norms_sq.reserve(static_cast<size_t>(n_steps));
    if (store_atoms) trace.atoms.reserve(static_cast<size_t>(n_steps));

    Vec residual = x0;
    double rsq = norm_sq(residual);
    trace.residual_norms_sq.push_back(rsq);

    for (int n = 1; n <= n_steps; ++n) {
        if (rsq == 0.0) {
            trace.atom_norms_sq.push_back(0.0);
            trace.residual_norms_sq.push_back(0.0);
            if (store_atoms) trace.atoms.emplace_back(x0.size(), 0.0);
            continue;
        }
        const OperatorInstance op = sample(family, rng);
        Vec atom = apply_op(op, residual);
        axpy(-1.0, atom, residual);
        rsq = norm_sq(residual);
        trace.atom_norms_sq.push_back(norm_sq(atom));
        trace.residual_norms_sq.push_back(rsq);
        if (store_atoms) trace.atoms.push_back(std::move(atom));
    }

    trace.final_residual = std::move(residual);
    return trace;
}

Vec synthesize(const IterationTrace& trace, int n) {
    if (n < 0 || n > trace.n_steps())
        throw ValidationError("synthesize: n out of range for this trace");
    if (n > 0 && !trace.has_atoms())
        throw CapabilityError("synthesize: trace was recorded without stored atoms");
    Vec sum(trace.x0.size(), 0.0);
    for (int k = 0; k < n; ++k) axpy(1.0, trace.atoms[static_cast<size_t>(k)], sum);
    return sum;
}

std::vector<double> estimate_as_rate(const std::vector<IterationTrace>& traces, int window) {
    if (window <= 0)
        throw ValidationError("estimate_as_rate: window must be positive");
    std::vector<double> slopes;
    slopes.reserve(traces.size());
    for (const IterationTrace& t : traces) {
        const int n = t.n_steps();
        if (n < window)
            throw ValidationError("estimate_as_rate: trace shorter than window");
        const double tail = t.residual_norms_sq[static_cast<size_t>(n)];
        const double head = t.residual_norms_sq[static_cast<size_t>(n - window)];
        if (tail == 0.0) {
            slopes.push_back(-std::numeric_limits<double>::infinity());
        } else {
            // (1/w) log(||R_N||/||R_{N-w}||), in squared norms
            slopes.push_back(std::log(tail / head) / (2.0 * window));
        }
    }
    return slopes;
}

TruncationCertificate certify_truncation(const IterationTrace& trace, double gamma,
                                         double epsilon) {
    if (!(epsilon > 0.0 && epsilon < gamma))
        throw ValidationError("certify_truncation: epsilon must lie in (0, gamma)");

    TruncationCertificate cert;
    cert.gamma = gamma;
    cert.epsilon = epsilon;
    cert.theta = std::exp(-(gamma - epsilon));
    cert.horizon = trace.n_steps();

    const double x0_sq = trace.residual_norms_sq.front();
    const double theta_sq = cert.theta * cert.theta;
    int last_violation = -1;
    for (int n = 0; n <= cert.horizon; ++n) {
        const double bound = std::pow(theta_sq, static_cast<double>(n)) * x0_sq;
        if (trace.residual_norms_sq[static_cast<size_t>(n)] > bound) last_violation = n;
    }
    if (last_violation < 0)
        cert.first_index = 0;
    else if (last_violation < cert.horizon)
        cert.first_index = last_violation + 1;
    // else: envelope still violated at the horizon, leave empty
    return cert;
}

} // namespace rnff
