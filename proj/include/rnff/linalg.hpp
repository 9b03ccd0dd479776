#pragma once

#include <string>
#include <vector>

#include "rnff/errors.hpp"

namespace rnff {

/// Dense real vector; all routines assume finite entries and matching dims.
using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b);
double norm_sq(const Vec& v);
double norm(const Vec& v);

/// y += a * x
void axpy(double a, const Vec& x, Vec& y);

Vec scaled(const Vec& v, double a);
Vec unit_axis(int dim, int axis);

/// Throws ValidationError if v is empty or contains NaN/Inf.
void check_finite(const Vec& v, const std::string& what);

/// Dense symmetric matrix, row-major full storage. Construction from raw
/// entries validates symmetry to 1e-12 * (1 + max|M|) and finiteness;
/// accumulation helpers keep both triangles in sync.
class SymMatrix {
  public:
    explicit SymMatrix(int dim);
    SymMatrix(int dim, std::vector<double> row_major);

    int dim() const { return dim_; }
    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * dim_ + j]; }
    const std::vector<double>& data() const { return a_; }

    void set(int i, int j, double v); // sets (i,j) and (j,i)
    void add_outer(const Vec& v, double w);                     // M += w v v^T
    void add_projection(const std::vector<Vec>& basis, double w); // M += w sum b b^T
    void add_identity(double w);
    void scale(double s);
    double max_abs() const;

  private:
    int dim_;
    std::vector<double> a_;
};

struct EigExtremes {
    double lambda_min;
    double lambda_max;
};

/// Smallest and largest eigenvalue of a symmetric matrix via cyclic Jacobi
/// sweeps (off-diagonal mass tolerance 1e-13 * (1 + ||M||_F), at most 100
/// sweeps). Accurate to ~1e-10 absolute for dim <= 512.
EigExtremes sym_eig_extremes(const SymMatrix& m);

/// Orthonormalizes the span of `vectors` (two-pass modified Gram-Schmidt).
/// Vectors whose residual drops below 1e-10 are dropped as rank-deficient;
/// an input spanning only {0} is a ValidationError.
std::vector<Vec> gram_schmidt(const std::vector<Vec>& vectors);

} // namespace rnff
