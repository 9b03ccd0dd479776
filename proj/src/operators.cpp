#include "rnff/operators.hpp"

#include <cmath>

namespace rnff {

namespace {

void check_dim_positive(int dim, const char* what) {
    if (dim < 1)
        throw ValidationError(std::string(what) + ": dimension must be >= 1");
}

} // namespace

OperatorInstance make_identity(int dim) {
    check_dim_positive(dim, "Identity");
    return OperatorInstance{Identity{dim}};
}

OperatorInstance make_ortho_projection(std::vector<Vec> basis) {
    if (basis.empty())
        throw ValidationError("OrthoProjection: basis must be nonempty");
    const size_t d = basis.front().size();
    for (const Vec& b : basis) {
        check_finite(b, "OrthoProjection basis");
        if (b.size() != d)
            throw ValidationError("OrthoProjection: basis vectors have mismatched dimensions");
    }
    for (size_t i = 0; i < basis.size(); ++i) {
        for (size_t j = i; j < basis.size(); ++j) {
            const double expect = (i == j) ? 1.0 : 0.0;
            if (std::abs(dot(basis[i], basis[j]) - expect) > 1e-10)
                throw ValidationError("OrthoProjection: basis is not orthonormal");
        }
    }
    return OperatorInstance{OrthoProjection{std::move(basis)}};
}

OperatorInstance make_ortho_projection_span(const std::vector<Vec>& span) {
    return OperatorInstance{OrthoProjection{gram_schmidt(span)}};
}

OperatorInstance make_hyperplane_projection(Vec direction) {
    check_finite(direction, "HyperplaneProjection direction");
    const double nd = norm(direction);
    if (nd < 1e-12)
        throw ValidationError("HyperplaneProjection: direction must be nonzero");
    for (double& x : direction) x /= nd;
    return OperatorInstance{HyperplaneProjection{std::move(direction)}};
}

OperatorInstance make_soft_threshold(double lambda, int dim) {
    check_dim_positive(dim, "SoftThreshold");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ValidationError("SoftThreshold: lambda must be nonnegative and finite");
    return OperatorInstance{SoftThreshold{lambda, dim}};
}

OperatorInstance averaged_wrap(double alpha, OperatorInstance inner) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError(
            "averaged_wrap: alpha must lie strictly inside (0,1); the alpha=1 endpoint "
            "needs a strict-contraction-in-mean assumption and is not supported");
    return OperatorInstance{
        Averaged{alpha, std::make_shared<const OperatorInstance>(std::move(inner))}};
}

int op_dim(const OperatorInstance& op) {
    return std::visit(
        [](const auto& o) -> int {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, Identity>) {
                return o.dim;
            } else if constexpr (std::is_same_v<T, OrthoProjection>) {
                return static_cast<int>(o.basis.front().size());
            } else if constexpr (std::is_same_v<T, HyperplaneProjection>) {
                return static_cast<int>(o.direction.size());
            } else if constexpr (std::is_same_v<T, SoftThreshold>) {
                return o.dim;
            } else {
                return op_dim(*o.inner);
            }
        },
        op.v);
}

Vec apply_op(const OperatorInstance& op, const Vec& u) {
    if (static_cast<int>(u.size()) != op_dim(op))
        throw ValidationError("apply: dimension mismatch between operator and input");
    return std::visit(
        [&u](const auto& o) -> Vec {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, Identity>) {
                return u;
            } else if constexpr (std::is_same_v<T, OrthoProjection>) {
                Vec out(u.size(), 0.0);
                for (const Vec& b : o.basis) axpy(dot(b, u), b, out);
                return out;
            } else if constexpr (std::is_same_v<T, HyperplaneProjection>) {
                Vec out = u;
                axpy(-dot(o.direction, u), o.direction, out);
                return out;
            } else if constexpr (std::is_same_v<T, SoftThreshold>) {
                Vec out(u.size());
                for (size_t i = 0; i < u.size(); ++i) {
                    const double m = std::abs(u[i]) - o.lambda;
                    out[i] = m > 0.0 ? (u[i] > 0.0 ? m : -m) : 0.0;
                }
                return out;
            } else {
                Vec out = apply_op(*o.inner, u);
                for (size_t i = 0; i < u.size(); ++i)
                    out[i] = (1.0 - o.alpha) * u[i] + o.alpha * out[i];
                return out;
            }
        },
        op.v);
}

double check_lemma31(const OperatorInstance& op, double alpha, const Vec& u) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("check_lemma31: alpha must lie strictly inside (0,1)");
    const Vec tu = apply_op(op, u);
    Vec diff = u;
    axpy(-1.0, tu, diff);
    return norm_sq(u) - norm_sq(tu) - (1.0 - alpha) / alpha * norm_sq(diff);
}

OperatorFamily make_finite_family(std::vector<OperatorInstance> instances,
                                  std::vector<double> probs) {
    if (instances.empty())
        throw ValidationError("FiniteFamily: instance list must be nonempty");
    if (instances.size() != probs.size())
        throw ValidationError("FiniteFamily: instances and probs must have equal length");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw ValidationError("FiniteFamily: probabilities must be nonnegative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw ValidationError("FiniteFamily: probabilities must sum to 1");
    const int d = op_dim(instances.front());
    for (const OperatorInstance& op : instances)
        if (op_dim(op) != d)
            throw ValidationError("FiniteFamily: instance dimensions must all be equal");
    return OperatorFamily{FiniteFamily{std::move(instances), std::move(probs)}};
}

OperatorFamily make_gaussian_hyperplane(int dim) {
    check_dim_positive(dim, "GaussianHyperplane");
    return OperatorFamily{GaussianHyperplane{dim}};
}

OperatorFamily make_uniform_coordinate_projection(int dim) {
    check_dim_positive(dim, "UniformCoordinateProjection");
    return OperatorFamily{UniformCoordinateProjection{dim}};
}

OperatorFamily make_averaged_family(double alpha, OperatorFamily base) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("AveragedFamily: alpha must lie strictly inside (0,1)");
    return OperatorFamily{
        AveragedFamily{alpha, std::make_shared<const OperatorFamily>(std::move(base))}};
}

OperatorFamily make_custom_direction(int dim, std::vector<int> axes,
                                     CustomDirection::Projection projection) {
    check_dim_positive(dim, "CustomDirection");
    for (int a : axes)
        if (a < 0 || a >= dim)
            throw ValidationError("CustomDirection: axis index out of range");
    return OperatorFamily{CustomDirection{dim, std::move(axes), projection}};
}

int family_dim(const OperatorFamily& family) {
    return std::visit(
        [](const auto& f) -> int {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, FiniteFamily>) {
                return op_dim(f.instances.front());
            } else if constexpr (std::is_same_v<T, AveragedFamily>) {
                return family_dim(*f.base);
            } else {
                return f.dim;
            }
        },
        family.v);
}

OperatorInstance sample(const OperatorFamily& family, RngStream& rng) {
    return std::visit(
        [&rng](const auto& f) -> OperatorInstance {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, FiniteFamily>) {
                return f.instances[rng.next_categorical(f.probs)];
            } else if constexpr (std::is_same_v<T, GaussianHyperplane>) {
                return OperatorInstance{HyperplaneProjection{rng.next_unit_vector(f.dim)}};
            } else if constexpr (std::is_same_v<T, UniformCoordinateProjection>) {
                const int axis = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(f.dim)));
                return OperatorInstance{OrthoProjection{{unit_axis(f.dim, axis)}}};
            } else if constexpr (std::is_same_v<T, AveragedFamily>) {
                return averaged_wrap(f.alpha, sample(*f.base, rng));
            } else {
                Vec dir(static_cast<size_t>(f.dim), 0.0);
                if (f.axes.empty()) {
                    dir = rng.next_unit_vector(f.dim);
                } else {
                    Vec sub = rng.next_unit_vector(static_cast<int>(f.axes.size()));
                    for (size_t i = 0; i < f.axes.size(); ++i)
                        dir[static_cast<size_t>(f.axes[i])] = sub[i];
                }
                if (f.projection == CustomDirection::Projection::Line)
                    return OperatorInstance{OrthoProjection{{std::move(dir)}}};
                return OperatorInstance{HyperplaneProjection{std::move(dir)}};
            }
        },
        family.v);
}

std::optional<FiniteFamily> to_finite_family(const OperatorFamily& family) {
    return std::visit(
        [](const auto& f) -> std::optional<FiniteFamily> {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, FiniteFamily>) {
                return f;
            } else if constexpr (std::is_same_v<T, UniformCoordinateProjection>) {
                FiniteFamily out;
                for (int i = 0; i < f.dim; ++i) {
                    out.instances.push_back(
                        OperatorInstance{OrthoProjection{{unit_axis(f.dim, i)}}});
                    out.probs.push_back(1.0 / f.dim);
                }
                return out;
            } else if constexpr (std::is_same_v<T, AveragedFamily>) {
                auto base = to_finite_family(*f.base);
                if (!base) return std::nullopt;
                FiniteFamily out;
                out.probs = base->probs;
                for (OperatorInstance& op : base->instances)
                    out.instances.push_back(averaged_wrap(f.alpha, std::move(op)));
                return out;
            } else {
                return std::nullopt;
            }
        },
        family.v);
}

} // namespace rnff
