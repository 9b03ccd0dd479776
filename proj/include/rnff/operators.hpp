#pragma once

#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "rnff/linalg.hpp"
#include "rnff/rng.hpp"

namespace rnff {

struct OperatorInstance;

/// The identity map on R^dim.
struct Identity {
    int dim = 0;
};

/// Orthogonal projection onto span(basis); basis is orthonormal
/// (pairwise inner products within 1e-10 of delta_ij).
struct OrthoProjection {
    std::vector<Vec> basis;
};

/// Projection onto the hyperplane through the origin orthogonal to
/// `direction` (stored normalized): u -> u - <a,u> a.
struct HyperplaneProjection {
    Vec direction;
};

/// Componentwise shrinkage sign(u_i) * max(|u_i| - lambda, 0).
struct SoftThreshold {
    double lambda = 0.0;
    int dim = 0;
};

/// Convex combination (1-alpha) I + alpha * inner, alpha strictly in (0,1).
struct Averaged {
    double alpha = 0.0;
    std::shared_ptr<const OperatorInstance> inner;
};

/// A concrete map H -> H with T(0) = 0. Immutable once built; construct
/// through the make_* factories, which validate the variant invariants.
struct OperatorInstance {
    std::variant<Identity, OrthoProjection, HyperplaneProjection, SoftThreshold, Averaged> v;
};

OperatorInstance make_identity(int dim);
OperatorInstance make_ortho_projection(std::vector<Vec> basis);
OperatorInstance make_ortho_projection_span(const std::vector<Vec>& span);
OperatorInstance make_hyperplane_projection(Vec direction); // normalizes; zero direction rejected
OperatorInstance make_soft_threshold(double lambda, int dim);

/// (1-alpha) I + alpha * inner for alpha in (0,1). The alpha = 1 endpoint is
/// rejected: the mean-square theory needs strict averaging.
OperatorInstance averaged_wrap(double alpha, OperatorInstance inner);

int op_dim(const OperatorInstance& op);

/// Evaluates T(u). Dimension mismatch is a ValidationError.
Vec apply_op(const OperatorInstance& op, const Vec& u);

/// One-point averagedness slack ||u||^2 - ||Tu||^2 - ((1-alpha)/alpha)||u - Tu||^2.
/// Nonnegative (up to roundoff) whenever op is alpha-averaged; class
/// membership is the caller's assertion.
double check_lemma31(const OperatorInstance& op, double alpha, const Vec& u);

struct OperatorFamily;

/// Discrete distribution over explicit instances.
struct FiniteFamily {
    std::vector<OperatorInstance> instances;
    std::vector<double> probs;
};

/// Hyperplane projections with isotropic (standard Gaussian) directions.
struct GaussianHyperplane {
    int dim = 0;
};

/// Projection onto a uniformly chosen coordinate axis.
struct UniformCoordinateProjection {
    int dim = 0;
};

/// Wraps every sample of `base` as (1-alpha) I + alpha * sample.
struct AveragedFamily {
    double alpha = 0.0;
    std::shared_ptr<const OperatorFamily> base;
};

/// Directions drawn isotropically within span{e_i : i in axes} of R^dim
/// (axes empty = all of R^dim), turned into either rank-one projections
/// onto the drawn line or projections onto its orthogonal hyperplane.
struct CustomDirection {
    enum class Projection { Line, Hyperplane };
    int dim = 0;
    std::vector<int> axes;
    Projection projection = Projection::Hyperplane;
};

/// A probability distribution over operator instances. Immutable and
/// freely shareable; sampling requires an exclusively owned RngStream.
struct OperatorFamily {
    std::variant<FiniteFamily, GaussianHyperplane, UniformCoordinateProjection, AveragedFamily,
                 CustomDirection>
        v;
};

OperatorFamily make_finite_family(std::vector<OperatorInstance> instances,
                                  std::vector<double> probs);
OperatorFamily make_gaussian_hyperplane(int dim);
OperatorFamily make_uniform_coordinate_projection(int dim);
OperatorFamily make_averaged_family(double alpha, OperatorFamily base);
OperatorFamily make_custom_direction(int dim, std::vector<int> axes,
                                     CustomDirection::Projection projection);

int family_dim(const OperatorFamily& family);

/// Draws one instance. Each variant consumes a fixed number of rng draws
/// per sample, so traces built from a stream are reproducible.
OperatorInstance sample(const OperatorFamily& family, RngStream& rng);

/// Expands families with finite sample spaces (finite, coordinate, and
/// averaged wrappers thereof) into an explicit FiniteFamily; nullopt for
/// continuous families.
std::optional<FiniteFamily> to_finite_family(const OperatorFamily& family);

} // namespace rnff
