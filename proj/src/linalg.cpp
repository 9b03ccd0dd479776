#include "rnff/linalg.hpp"

#include <cmath>
#include <cstddef>

namespace rnff {

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw ValidationError("dot: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm_sq(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double norm(const Vec& v) { return std::sqrt(norm_sq(v)); }

void axpy(double a, const Vec& x, Vec& y) {
    if (x.size() != y.size())
        throw ValidationError("axpy: dimension mismatch");
    for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Vec scaled(const Vec& v, double a) {
    Vec out(v);
    for (double& x : out) x *= a;
    return out;
}

Vec unit_axis(int dim, int axis) {
    if (axis < 0 || axis >= dim)
        throw ValidationError("unit_axis: axis out of range");
    Vec e(static_cast<size_t>(dim), 0.0);
    e[static_cast<size_t>(axis)] = 1.0;
    return e;
}

void check_finite(const Vec& v, const std::string& what) {
    if (v.empty())
        throw ValidationError(what + ": dimension must be >= 1");
    for (double x : v)
        if (!std::isfinite(x))
            throw ValidationError(what + ": entries must be finite");
}

SymMatrix::SymMatrix(int dim) : dim_(dim) {
    if (dim < 1)
        throw ValidationError("SymMatrix: dimension must be >= 1");
    a_.assign(static_cast<size_t>(dim) * dim, 0.0);
}

SymMatrix::SymMatrix(int dim, std::vector<double> row_major) : dim_(dim), a_(std::move(row_major)) {
    if (dim < 1)
        throw ValidationError("SymMatrix: dimension must be >= 1");
    if (a_.size() != static_cast<size_t>(dim) * dim)
        throw ValidationError("SymMatrix: entry count does not match dimension");
    double mx = 0.0;
    for (double x : a_) {
        if (!std::isfinite(x))
            throw ValidationError("SymMatrix: entries must be finite");
        mx = std::max(mx, std::abs(x));
    }
    const double tol = 1e-12 * (1.0 + mx);
    for (int i = 0; i < dim_; ++i)
        for (int j = i + 1; j < dim_; ++j)
            if (std::abs((*this)(i, j) - (*this)(j, i)) > tol)
                throw ValidationError("SymMatrix: input is not symmetric");
}

void SymMatrix::set(int i, int j, double v) {
    a_[static_cast<size_t>(i) * dim_ + j] = v;
    a_[static_cast<size_t>(j) * dim_ + i] = v;
}

void SymMatrix::add_outer(const Vec& v, double w) {
    if (static_cast<int>(v.size()) != dim_)
        throw ValidationError("SymMatrix::add_outer: dimension mismatch");
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
            a_[static_cast<size_t>(i) * dim_ + j] += w * v[i] * v[j];
}

void SymMatrix::add_projection(const std::vector<Vec>& basis, double w) {
    for (const Vec& b : basis) add_outer(b, w);
}

void SymMatrix::add_identity(double w) {
    for (int i = 0; i < dim_; ++i) a_[static_cast<size_t>(i) * dim_ + i] += w;
}

void SymMatrix::scale(double s) {
    for (double& x : a_) x *= s;
}

double SymMatrix::max_abs() const {
    double mx = 0.0;
    for (double x : a_) mx = std::max(mx, std::abs(x));
    return mx;
}

EigExtremes sym_eig_extremes(const SymMatrix& m) {
    const int n = m.dim();
    std::vector<double> a(m.data());
    auto at = [&](int i, int j) -> double& { return a[static_cast<size_t>(i) * n + j]; };

    double fro_sq = 0.0;
    for (double x : a) fro_sq += x * x;
    const double tol = 1e-13 * (1.0 + std::sqrt(fro_sq));

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off_sq = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off_sq += 2.0 * at(p, q) * at(p, q);
        if (std::sqrt(off_sq) <= tol) break;

        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (apq == 0.0) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 1.0 / (2.0 * theta);
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                const double app = at(p, p), aqq = at(q, q);
                at(p, p) = app - t * apq;
                at(q, q) = aqq + t * apq;
                at(p, q) = 0.0;
                at(q, p) = 0.0;
                for (int k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = akp - s * (akq + tau * akp);
                    at(p, k) = at(k, p);
                    at(k, q) = akq + s * (akp - tau * akq);
                    at(q, k) = at(k, q);
                }
            }
        }
    }

    EigExtremes e{at(0, 0), at(0, 0)};
    for (int i = 1; i < n; ++i) {
        e.lambda_min = std::min(e.lambda_min, at(i, i));
        e.lambda_max = std::max(e.lambda_max, at(i, i));
    }
    return e;
}

std::vector<Vec> gram_schmidt(const std::vector<Vec>& vectors) {
    if (vectors.empty())
        throw ValidationError("gram_schmidt: input list is empty");
    const size_t d = vectors.front().size();
    for (const Vec& v : vectors) {
        check_finite(v, "gram_schmidt");
        if (v.size() != d)
            throw ValidationError("gram_schmidt: vectors have mismatched dimensions");
    }

    std::vector<Vec> basis;
    for (const Vec& v : vectors) {
        Vec w = v;
        // second pass cleans up cancellation from the first
        for (int pass = 0; pass < 2; ++pass)
            for (const Vec& b : basis) axpy(-dot(b, w), b, w);
        const double nw = norm(w);
        if (nw < 1e-10) continue; // rank-deficient direction
        for (double& x : w) x /= nw;
        basis.push_back(std::move(w));
    }
    if (basis.empty())
        throw ValidationError("gram_schmidt: input spans only the zero subspace");
    return basis;
}

} // namespace rnff
