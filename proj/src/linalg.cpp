#include "lisest/linalg.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace lisest {

bool all_finite(const Matrix& x) { return x.allFinite(); }

double min_eig_sym(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(x), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return es.eigenvalues()(0);
}

double max_eig_sym(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(x), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

bool is_psd(const Matrix& x, double tol) { return min_eig_sym(x) >= -tol; }

double spectral_radius(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  if (x.rows() == 1) return std::abs(x(0, 0));
  Eigen::EigenSolver<Matrix> es(x, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(x);
  return svd.singularValues()(0);
}

Matrix sqrt_psd(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(x));
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Matrix pinv(const Matrix& x, double rel_tol) {
  if (x.size() == 0) return Matrix::Zero(x.cols(), x.rows());
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cutoff = rel_tol * std::max(x.rows(), x.cols()) * (sv.size() ? sv(0) : 0.0);
  Vector inv = Vector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Vector vec(const Matrix& x) { return Eigen::Map<const Vector>(x.data(), x.size()); }

Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw std::invalid_argument("unvec: size mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Matrix block_diag(std::span<const Matrix> blocks) {
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    r += b.rows();
    c += b.cols();
  }
  Matrix out = Matrix::Zero(r, c);
  r = c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

std::vector<int> offsets_of(std::span<const int> dims) {
  std::vector<int> off(dims.size() + 1, 0);
  for (std::size_t i = 0; i < dims.size(); ++i) off[i + 1] = off[i] + dims[i];
  return off;
}

Matrix spd_solve(const Matrix& s, const Matrix& b, const char* what) {
  Eigen::LLT<Matrix> llt(symmetrize(s));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": matrix is not positive definite");
  }
  return llt.solve(b);
}

DareResult solve_filter_dare(const Matrix& a, const Matrix& c, const Matrix& q,
                             const Matrix& r, double tol, int max_iter) {
  // Control-form doubling on the dual pair (A^T, C^T).
  const Eigen::Index n = a.rows();
  Matrix ak = a.transpose();
  Matrix gk = c.transpose() * spd_solve(r, c, "solve_filter_dare");
  Matrix hk = q;
  const Matrix eye = Matrix::Identity(n, n);
  DareResult res;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::PartialPivLU<Matrix> lu(eye + gk * hk);
    const Matrix w_a = lu.solve(ak);
    const Matrix w_g = lu.solve(gk);
    Matrix h_next = hk + ak.transpose() * hk * w_a;
    gk = symmetrize(gk + ak * w_g * ak.transpose());
    ak = ak * w_a;
    h_next = symmetrize(h_next);
    const double delta = (h_next - hk).cwiseAbs().maxCoeff();
    hk = std::move(h_next);
    res.iterations = it;
    if (!hk.allFinite()) break;
    if (delta <= tol * std::max(1.0, hk.cwiseAbs().maxCoeff())) {
      res.converged = true;
      break;
    }
  }
  res.p = hk;
  return res;
}

Matrix expm(const Matrix& x) { return x.exp(); }

}  // namespace lisest
