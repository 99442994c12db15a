#ifndef LISEST_LINALG_HPP
#define LISEST_LINALG_HPP

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lisest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BlockMatrices = std::vector<Matrix>;
using BlockVectors = std::vector<Vector>;

/// Raised when a factorization or eigensolver cannot produce a usable result.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline Matrix symmetrize(const Matrix& x) { return 0.5 * (x + x.transpose()); }

bool all_finite(const Matrix& x);

double min_eig_sym(const Matrix& x);
double max_eig_sym(const Matrix& x);

/// True when the symmetric part of x has no eigenvalue below -tol.
bool is_psd(const Matrix& x, double tol = 1e-10);

/// Largest eigenvalue modulus of a general square matrix.
double spectral_radius(const Matrix& x);

/// Largest singular value.
double spectral_norm(const Matrix& x);

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// within rounding are clipped to zero.
Matrix sqrt_psd(const Matrix& x);

Matrix pinv(const Matrix& x, double rel_tol = 1e-12);

Matrix kron(const Matrix& a, const Matrix& b);

/// Column-major vectorization, matching (B^T kron A) vec(X) = vec(A X B).
Vector vec(const Matrix& x);
Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols);

Matrix block_diag(std::span<const Matrix> blocks);
std::vector<int> offsets_of(std::span<const int> dims);

/// Inner product <X, Y> = tr(X^T Y).
inline double frobenius_inner(const Matrix& x, const Matrix& y) {
  return (x.array() * y.array()).sum();
}

/// Solves S^{-1} B for symmetric positive definite S using LLT; throws
/// NumericalError when S is not numerically positive definite.
Matrix spd_solve(const Matrix& s, const Matrix& b, const char* what);

/// Stabilizing solution of the filter-form discrete algebraic Riccati
/// equation  P = A P A^T - A P C^T (C P C^T + R)^{-1} C P A^T + Q
/// by the structured doubling algorithm.
struct DareResult {
  Matrix p;
  int iterations = 0;
  bool converged = false;
};
DareResult solve_filter_dare(const Matrix& a, const Matrix& c, const Matrix& q,
                             const Matrix& r, double tol = 1e-13,
                             int max_iter = 200);

/// Matrix exponential by scaling and squaring with a Pade approximant.
Matrix expm(const Matrix& x);

}  // namespace lisest

#endif  // LISEST_LINALG_HPP
