#include "lisest/stability.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>

namespace lisest {

ReachabilityResult reachability_check(const Matrix& x, const Matrix& y, double tol) {
  if (!all_finite(x) || !all_finite(y)) throw std::invalid_argument("reachability_check: nonfinite input");
  if (x.rows() != x.cols() || y.rows() != x.rows()) {
    throw std::invalid_argument("reachability_check: X must be n x n and Y n x q");
  }
  const Eigen::Index n = x.rows();
  ReachabilityResult out;
  out.gramian = Matrix::Zero(n, n);
  Matrix term = y;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.gramian.noalias() += term * term.transpose();
    term = x * term;
  }
  out.gramian = symmetrize(out.gramian);
  out.gramian_min_eig = n ? min_eig_sym(out.gramian) : 0.0;
  out.reachable = n == 0 || out.gramian_min_eig > tol;
  return out;
}

DetectabilityResult detectability_check(const Matrix& y, const Matrix& x, double tol) {
  if (x.rows() != x.cols() || y.cols() != x.rows()) {
    throw std::invalid_argument("detectability_check: X must be n x n and Y m x n");
  }
  const Eigen::Index n = x.rows();
  DetectabilityResult out;
  if (n == 0) {
    out.detectable = true;
    out.witness_k = Matrix::Zero(0, y.rows());
    return out;
  }
  Eigen::EigenSolver<Matrix> es(x, false);
  if (es.info() != Eigen::Success) throw NumericalError("detectability_check: eigensolver failed");
  const double scale = std::max(1.0, spectral_norm(x));
  using CMatrix = Eigen::MatrixXcd;
  out.detectable = true;
  for (Eigen::Index e = 0; e < n; ++e) {
    const std::complex<double> lambda = es.eigenvalues()(e);
    if (std::abs(lambda) < 1.0 - 1e-12) continue;
    CMatrix pbh(n + y.rows(), n);
    pbh.topRows(n) = lambda * CMatrix::Identity(n, n) - x.cast<std::complex<double>>();
    pbh.bottomRows(y.rows()) = y.cast<std::complex<double>>();
    Eigen::JacobiSVD<CMatrix> svd(pbh);
    const double smin = svd.singularValues()(n - 1);
    if (smin <= tol * scale) {
      out.detectable = false;
      out.diagnostics = "mode lambda = " + std::to_string(lambda.real()) +
                        (lambda.imag() != 0.0 ? "+" + std::to_string(lambda.imag()) + "i" : "") +
                        " with |lambda| >= 1 is unobservable";
      break;
    }
  }
  if (!out.detectable) {
    out.closed_loop_radius = spectral_radius(x);
    return out;
  }
  const Matrix eye_n = Matrix::Identity(n, n);
  const Matrix eye_m = Matrix::Identity(y.rows(), y.rows());
  const DareResult dare = solve_filter_dare(x, y, eye_n, eye_m);
  if (!dare.converged || !all_finite(dare.p)) {
    out.detectable = false;
    out.closed_loop_radius = spectral_radius(x);
    out.diagnostics = "modal test passed but the Riccati witness did not converge";
    return out;
  }
  const Matrix yp = y * dare.p;
  const Matrix k = -(x * spd_solve(yp * y.transpose() + eye_m, yp, "detectability witness").transpose());
  out.closed_loop_radius = spectral_radius(x + k * y);
  if (out.closed_loop_radius < 1.0) {
    out.witness_k = k;
  } else {
    out.detectable = false;
    out.diagnostics = "Riccati witness failed re-verification (rho = " +
                      std::to_string(out.closed_loop_radius) + ")";
  }
  return out;
}

Matrix transition_product(const std::vector<MatrixPair>& seq, int k, int t) {
  if (k < 0 || t < 0 || seq.empty() || k + t > static_cast<int>(seq.size())) {
    throw std::out_of_range("transition_product: window exceeds the sequence");
  }
  // k may equal seq.size() when t = 0; every X has the same size.
  const Eigen::Index n = seq[std::min<std::size_t>(k, seq.size() - 1)].x.rows();
  Matrix phi = Matrix::Identity(n, n);
  for (int j = k; j < k + t; ++j) phi = seq[j].x * phi;
  return phi;
}

UniformReachabilityReport uniform_reachability_gramian(const std::vector<MatrixPair>& seq, int t,
                                                       double r, int horizon) {
  if (t < 0 || horizon < 0) throw std::invalid_argument("uniform_reachability_gramian: negative window");
  if (horizon + t >= static_cast<int>(seq.size())) {
    throw std::out_of_range("uniform_reachability_gramian: window exceeds the sequence (need " +
                            std::to_string(horizon + t + 1) + " entries, have " +
                            std::to_string(seq.size()) + ")");
  }
  UniformReachabilityReport rep;
  rep.horizon = horizon;
  rep.min_eig = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= horizon; ++k) {
    const Eigen::Index n = seq[k].x.rows();
    Matrix g = Matrix::Zero(n, n);
    for (int i = 0; i <= t; ++i) {
      // Phi(k+t+1, k+i+1) = X(k+t) ... X(k+i+1)
      const Matrix b = transition_product(seq, k + i + 1, t - i) * seq[k + i].y;
      g.noalias() += b * b.transpose();
    }
    const double e = n ? min_eig_sym(symmetrize(g)) : 0.0;
    if (e < rep.min_eig) {
      rep.min_eig = e;
      rep.worst_k = k;
    }
  }
  rep.passes = rep.min_eig >= r;
  return rep;
}

std::string to_string(DetectabilityVerdict verdict) {
  switch (verdict) {
    case DetectabilityVerdict::certified_on_horizon: return "certified-on-horizon";
    case DetectabilityVerdict::falsified: return "falsified";
    case DetectabilityVerdict::inconclusive: return "inconclusive";
  }
  return "?";
}

namespace {

/// max over tau >= 0 of lambda_min(base + tau * dir); concave in tau.
double best_certificate_margin(const Matrix& base, const Matrix& dir) {
  auto f = [&](double tau) { return min_eig_sym(base + tau * dir); };
  double best_tau = 0.0;
  double best = f(0.0);
  for (int e = -8; e <= 10; ++e) {
    const double tau = std::pow(10.0, e);
    const double v = f(tau);
    if (v > best) {
      best = v;
      best_tau = tau;
    }
  }
  if (best >= 0.0) return best;
  // golden-section refinement around the best grid point
  double lo = best_tau == 0.0 ? 0.0 : best_tau / 10.0;
  double hi = best_tau == 0.0 ? 1e-8 : best_tau * 10.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = f(a), fb = f(b);
  for (int it = 0; it < 80; ++it) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = f(b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = f(a);
    }
  }
  return std::max({best, fa, fb});
}

}  // namespace

DetectabilityProbeReport uniform_detectability_probe(const std::vector<MatrixPair>& seq,
                                                     const DetectabilityProbeOptions& o) {
  if (!(o.nu >= o.mu && o.mu >= 0 && o.gamma >= 0.0 && o.gamma < 1.0 && o.sigma > 0.0)) {
    throw std::invalid_argument("uniform_detectability_probe: need nu >= mu >= 0, 0 <= gamma < 1, sigma > 0");
  }
  if (o.horizon + o.nu >= static_cast<int>(seq.size())) {
    throw std::out_of_range("uniform_detectability_probe: window exceeds the sequence");
  }
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> nd;
  DetectabilityProbeReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  bool all_certified = true;
  for (int k = 0; k <= o.horizon; ++k) {
    const Eigen::Index n = seq[k].x.rows();
    const Matrix phi_mu = transition_product(seq, k, o.mu);
    Matrix obs = Matrix::Zero(n, n);
    for (int i = 0; i <= o.nu; ++i) {
      const Matrix yphi = seq[k + i].y * transition_product(seq, k, i);
      obs.noalias() += yphi.transpose() * yphi;
    }
    obs = symmetrize(obs);
    const Matrix growth = symmetrize(phi_mu.transpose() * phi_mu);
    const Matrix eye = Matrix::Identity(n, n);

    // falsification: a unit xi meeting the premise but not the conclusion
    std::vector<Vector> candidates;
    Eigen::SelfAdjointEigenSolver<Matrix> eo(obs), eg(growth);
    for (Eigen::Index c = 0; c < n; ++c) {
      candidates.push_back(eo.eigenvectors().col(c));
      candidates.push_back(eg.eigenvectors().col(c));
    }
    for (int sidx = 0; sidx < o.samples; ++sidx) {
      Vector v(n);
      for (Eigen::Index c = 0; c < n; ++c) v(c) = nd(rng);
      if (v.norm() > 0.0) candidates.push_back(v.normalized());
    }
    for (const Vector& xi : candidates) {
      if ((phi_mu * xi).norm() >= o.gamma && xi.dot(obs * xi) < o.sigma * (1.0 - 1e-12)) {
        rep.verdict = DetectabilityVerdict::falsified;
        rep.failing_k = k;
        rep.worst_margin = std::min(rep.worst_margin, xi.dot(obs * xi) - o.sigma);
        return rep;
      }
    }
    const double margin = best_certificate_margin(obs - o.sigma * eye, o.gamma * o.gamma * eye - growth);
    if (margin < rep.worst_margin) rep.worst_margin = margin;
    if (margin < 0.0) {
      all_certified = false;
      if (rep.failing_k < 0) rep.failing_k = k;
    }
  }
  rep.verdict = all_certified ? DetectabilityVerdict::certified_on_horizon : DetectabilityVerdict::inconclusive;
  return rep;
}

LiftedOperator::LiftedOperator(std::vector<Matrix> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw std::invalid_argument("LiftedOperator needs at least one term");
  dim_ = static_cast<int>(terms_[0].rows());
  for (const auto& m : terms_) {
    if (m.rows() != dim_ || m.cols() != dim_) throw std::invalid_argument("LiftedOperator terms must be n x n");
  }
}

Matrix LiftedOperator::apply(const Matrix& x) const {
  Matrix out = Matrix::Zero(dim_, dim_);
  for (const auto& m : terms_) out.noalias() += m * x * m.transpose();
  return out;
}

Matrix LiftedOperator::adjoint(const Matrix& x) const {
  Matrix out = Matrix::Zero(dim_, dim_);
  for (const auto& m : terms_) out.noalias() += m.transpose() * x * m;
  return out;
}

Matrix LiftedOperator::kron_matrix() const {
  Matrix k = Matrix::Zero(dim_ * dim_, dim_ * dim_);
  for (const auto& m : terms_) k += kron(m, m);
  return k;
}

namespace {

/// Row-selected, theta-scaled transition matrices theta_i E_i A.
std::vector<Matrix> scaled_rows(const LisModel& model, std::span<const double> theta) {
  const Matrix a = model.global_a(0);
  const auto off = model.pattern().state_offsets();
  std::vector<Matrix> rows;
  for (int i = 0; i < model.s(); ++i) {
    Matrix ai = Matrix::Zero(a.rows(), a.cols());
    ai.middleRows(off[i], model.state_dim(i)) = theta[i] * a.middleRows(off[i], model.state_dim(i));
    rows.push_back(std::move(ai));
  }
  return rows;
}

void require_time_invariant(const LisModel& model, const char* what) {
  if (!model.is_time_invariant()) throw std::invalid_argument(std::string(what) + " requires a time-invariant model");
}

}  // namespace

LiftedOperator build_lifted_operator(const LisModel& model, std::span<const double> theta,
                                     const std::vector<Matrix>& gains) {
  if (static_cast<int>(theta.size()) != model.s() || static_cast<int>(gains.size()) != model.s()) {
    throw std::invalid_argument("build_lifted_operator: need one theta and one gain per subsystem");
  }
  const Matrix c = model.global_c(0);
  auto rows = scaled_rows(model, theta);
  for (int i = 0; i < model.s(); ++i) {
    if (gains[i].rows() != model.n() || gains[i].cols() != model.m()) {
      throw std::invalid_argument("build_lifted_operator: gain " + std::to_string(i) + " must be n x m");
    }
    rows[i] -= gains[i] * c;
  }
  return LiftedOperator(std::move(rows));
}

std::vector<Matrix> steady_gain_terms(const LisModel& model, std::span<const double> theta,
                                      const Matrix& p_bar) {
  const Matrix c = model.global_c(0);
  const Matrix cp = c * p_bar;
  // P_bar C^T S^{-1}
  const Matrix l = spd_solve(cp * c.transpose() + model.global_r(0), cp, "steady gain").transpose();
  std::vector<Matrix> out;
  for (const Matrix& ai : scaled_rows(model, theta)) out.push_back(ai * l);
  return out;
}

std::vector<Matrix> row_gain_terms(const LisModel& model, const std::vector<BlockMatrices>& rows,
                                   const std::vector<std::vector<int>>& columns) {
  const auto xo = model.pattern().state_offsets();
  const auto mo = model.pattern().meas_offsets();
  std::vector<Matrix> out;
  for (int i = 0; i < model.s(); ++i) {
    Matrix g = Matrix::Zero(model.n(), model.m());
    for (std::size_t c = 0; c < columns[i].size(); ++c) {
      const int j = columns[i][c];
      g.block(xo[i], mo[j], model.state_dim(i), model.meas_dim(j)) = rows[i][c];
    }
    out.push_back(std::move(g));
  }
  return out;
}

SpectralRadius power_iteration_radius(const LiftedOperator& op, double tol, int max_iter) {
  const int n = op.dim();
  Matrix x = Matrix::Identity(n, n) / std::sqrt(static_cast<double>(n));
  SpectralRadius out;
  out.method = "power-iteration";
  out.converged = false;
  double prev = -1.0;
  int stable = 0;
  std::vector<double> recent;
  for (int it = 0; it < max_iter; ++it) {
    Matrix y = symmetrize(op.apply(x));
    const double norm = y.norm();
    if (norm == 0.0 || !std::isfinite(norm)) {
      out.value = norm == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      out.converged = true;
      return out;
    }
    out.value = norm;
    recent.push_back(norm);
    if (recent.size() > 64) recent.erase(recent.begin());
    stable = std::abs(norm - prev) <= tol * norm ? stable + 1 : 0;
    if (stable >= 20) {
      out.converged = true;
      return out;
    }
    prev = norm;
    x = y / norm;
  }
  // oscillating peripheral spectrum: report the geometric mean of recent ratios
  double logsum = 0.0;
  for (double r : recent) logsum += std::log(r);
  out.value = std::exp(logsum / static_cast<double>(recent.size()));
  return out;
}

SpectralRadius arnoldi_radius(const LiftedOperator& op, int krylov_dim, double tol, int max_restarts) {
  const int n = op.dim();
  const Eigen::Index big = static_cast<Eigen::Index>(n) * n;
  SpectralRadius out;
  out.method = "arnoldi";
  out.converged = false;
  if (big == 0) {
    out.converged = true;
    return out;
  }
  const Eigen::Index m = std::min<Eigen::Index>(big, std::max(2, krylov_dim));
  Vector start = vec(Matrix::Identity(n, n));
  for (int restart = 0; restart <= max_restarts; ++restart) {
    Matrix v(big, m + 1);
    Matrix h = Matrix::Zero(m + 1, m);
    v.col(0) = start.normalized();
    Eigen::Index steps = m;
    for (Eigen::Index j = 0; j < m; ++j) {
      Vector w = vec(op.apply(unvec(v.col(j), n, n)));
      if (!w.allFinite()) {
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i <= j; ++i) {
          const double c = v.col(i).dot(w);
          h(i, j) += c;
          w -= c * v.col(i);
        }
      }
      h(j + 1, j) = w.norm();
      if (h(j + 1, j) <= 1e-14 * std::max(1.0, h.col(j).norm())) {
        steps = j + 1;  // invariant subspace found
        break;
      }
      v.col(j + 1) = w / h(j + 1, j);
    }
    Eigen::EigenSolver<Matrix> es(h.topLeftCorner(steps, steps), true);
    if (es.info() != Eigen::Success) break;
    Eigen::Index best = 0;
    es.eigenvalues().cwiseAbs().maxCoeff(&best);
    const double theta = std::abs(es.eigenvalues()(best));
    const Eigen::VectorXcd y = es.eigenvectors().col(best);
    const double resid = std::abs(h(steps, steps - 1)) * std::abs(y(steps - 1)) / y.norm();
    out.value = theta;
    if (steps < m || resid <= tol * std::max(theta, 1e-300)) {
      out.converged = true;
      return out;
    }
    Vector next = v.leftCols(steps) * y.real();
    if (next.norm() < 1e-8 * y.norm()) next = v.leftCols(steps) * y.imag();
    start = next;
  }
  return out;
}

SpectralRadius operator_spectral_radius(const LiftedOperator& op, const SpectralRadiusOptions& options) {
  if (op.dim() <= options.dense_limit) {
    Eigen::EigenSolver<Matrix> es(op.kron_matrix(), false);
    if (es.info() == Eigen::Success) {
      return {es.eigenvalues().cwiseAbs().maxCoeff(), "dense-kronecker", true};
    }
  }
  SpectralRadius r = arnoldi_radius(op, options.krylov_dim, options.arnoldi_tol, options.arnoldi_restarts);
  if (r.converged || !std::isfinite(r.value)) return r;
  return power_iteration_radius(op, options.power_tol, options.power_max_iter);
}

Matrix adjoint_apply(const LiftedOperator& op, const Matrix& x) { return op.adjoint(x); }

Matrix lyapunov_solve(const LiftedOperator& op, const Matrix& rhs, int dense_limit) {
  const int n = op.dim();
  if (n <= dense_limit) {
    const Matrix lhs = Matrix::Identity(n * n, n * n) - op.kron_matrix();
    Eigen::PartialPivLU<Matrix> lu(lhs);
    return symmetrize(unvec(lu.solve(vec(rhs)), n, n));
  }
  Matrix w = rhs;
  for (int it = 0; it < 1000000; ++it) {
    Matrix next = rhs + op.apply(w);
    const double delta = (next - w).cwiseAbs().maxCoeff();
    w = std::move(next);
    if (!all_finite(w)) break;
    if (delta <= 1e-14 * std::max(1.0, w.cwiseAbs().maxCoeff())) return symmetrize(w);
  }
  throw NumericalError("lyapunov_solve: fixed-point iteration did not converge");
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::yes: return "yes";
    case Verdict::no: return "no";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

bool local_reachability(const LisModel& model, double tol) {
  for (const auto& e : model.epochs()) {
    for (int i = 0; i < model.s(); ++i) {
      if (!reachability_check(e.params.a[i * model.s() + i], sqrt_psd(e.params.q[i]), tol).reachable) {
        return false;
      }
    }
  }
  return true;
}

StabilityReport boundedness_check(const LisModel& model, std::span<const double> theta,
                                  const StabilityOptions& options) {
  require_time_invariant(model, "boundedness_check");
  StabilityReport rep;
  rep.theta.assign(theta.begin(), theta.end());
  rep.condition1 = local_reachability(model);
  rep.method = "steady-state + spectral radius";
  const SteadyState steady = steady_state_solve(model, theta, options.steady);
  rep.iterations = steady.iterations;

  std::optional<SpectralRadius> rad;
  std::vector<Matrix> gains;
  if (all_finite(steady.p_bar)) {
    try {
      gains = steady_gain_terms(model, theta, steady.p_bar);
      rad = operator_spectral_radius(build_lifted_operator(model, theta, gains), options.radius);
      rep.spectral_radius = rad->value;
      if (!rad->converged) rep.diagnostics += "spectral radius from unconverged power iteration; ";
    } catch (const NumericalError& e) {
      rep.diagnostics += std::string("spectral radius unavailable: ") + e.what() + "; ";
    }
  }

  switch (steady.status) {
    case SolveStatus::converged:
      if (rad && rad->value < 1.0 - options.rho_tol) {
        rep.bounded = Verdict::yes;
        rep.witness_gains = std::move(gains);
        rep.diagnostics += "steady state reached after " + std::to_string(steady.iterations) + " iterations";
      } else {
        rep.bounded = Verdict::inconclusive;
        rep.diagnostics += "steady state reached but the steady-gain operator is not contractive";
      }
      break;
    case SolveStatus::diverged:
      rep.bounded = Verdict::no;
      rep.diagnostics += "covariance trace passed the divergence ceiling after " +
                         std::to_string(steady.iterations) + " iterations";
      break;
    case SolveStatus::max_iterations:
      rep.bounded = Verdict::inconclusive;
      rep.diagnostics += "no convergence within " + std::to_string(steady.iterations) + " iterations";
      break;
  }
  if (!rep.condition1) {
    rep.diagnostics += "; local reachability of (A_ii, sqrt(Q_i)) fails, so the spectral test is sufficient only";
  }
  return rep;
}

DistributedLmiRow distributed_lmi_check(const LisModel& model, int i, double theta_i) {
  require_time_invariant(model, "distributed_lmi_check");
  DistributedLmiRow row;
  row.row = i;
  row.columns = model.topology(0).in[i];
  row.columns.push_back(i);
  std::sort(row.columns.begin(), row.columns.end());
  const int ni = model.state_dim(i);
  Matrix acc = Matrix::Zero(ni, ni);
  for (int j : row.columns) {
    const Matrix& cj = model.c(j, 0);
    const Matrix cp = pinv(cj);
    const Matrix aij = theta_i * model.a(i, j, 0);
    row.x_blocks.push_back(aij * cp);
    const Matrix residual = aij * (Matrix::Identity(cj.cols(), cj.cols()) - cp * cj);
    acc.noalias() += residual * residual.transpose();
  }
  row.residual_radius = ni ? max_eig_sym(symmetrize(acc)) : 0.0;
  row.feasible = row.residual_radius < 1.0;
  return row;
}

double lmi_block_min_eig(const Matrix& x, const std::vector<Matrix>& rows, const std::vector<Matrix>& y,
                         const Matrix& c) {
  const Eigen::Index n = x.rows();
  const Eigen::Index s = static_cast<Eigen::Index>(rows.size());
  Matrix big = Matrix::Zero((s + 1) * n, (s + 1) * n);
  big.topLeftCorner(n, n) = x;
  for (Eigen::Index i = 0; i < s; ++i) {
    const Matrix off = x * rows[i] - y[i] * c;
    big.block(0, (i + 1) * n, n, n) = off;
    big.block((i + 1) * n, 0, n, n) = off.transpose();
    big.block((i + 1) * n, (i + 1) * n, n, n) = x;
  }
  return min_eig_sym(symmetrize(big));
}

StabilityReport centralized_lmi_feasibility(const LisModel& model, std::span<const double> theta,
                                            const StabilityOptions& options) {
  require_time_invariant(model, "centralized_lmi_feasibility");
  const Matrix c = model.global_c(0);
  const auto rows = scaled_rows(model, theta);

  std::vector<BlockMatrices> xs;
  std::vector<std::vector<int>> cols;
  bool all_rows = true;
  for (int i = 0; i < model.s(); ++i) {
    auto r = distributed_lmi_check(model, i, theta[i]);
    all_rows = all_rows && r.feasible;
    xs.push_back(std::move(r.x_blocks));
    cols.push_back(std::move(r.columns));
  }
  if (all_rows) {
    StabilityReport rep;
    rep.theta.assign(theta.begin(), theta.end());
    rep.condition1 = local_reachability(model);
    rep.method = "distributed rows (X = I)";
    rep.witness_gains = row_gain_terms(model, xs, cols);
    rep.lmi_x = Matrix::Identity(model.n(), model.n());
    rep.lmi_y = rep.witness_gains;
    rep.lmi_min_eig = lmi_block_min_eig(*rep.lmi_x, rows, rep.lmi_y, c);
    const auto rad = operator_spectral_radius(build_lifted_operator(model, theta, rep.witness_gains), options.radius);
    rep.spectral_radius = rad.value;
    if (rep.lmi_min_eig > 0.0) {
      rep.bounded = Verdict::yes;
      rep.diagnostics = "every row LMI is feasible";
      return rep;
    }
  }

  StabilityReport rep = boundedness_check(model, theta, options);
  rep.method = "steady gains + Lyapunov reconstruction";
  if (rep.bounded == Verdict::yes) {
    const LiftedOperator op = build_lifted_operator(model, theta, rep.witness_gains);
    try {
      const Matrix w = lyapunov_solve(op, Matrix::Identity(model.n(), model.n()), options.radius.dense_limit);
      const Matrix x = spd_solve(w, Matrix::Identity(model.n(), model.n()), "Lyapunov solution");
      rep.lmi_x = symmetrize(x);
      rep.lmi_y.clear();
      for (const auto& g : rep.witness_gains) rep.lmi_y.push_back(*rep.lmi_x * g);
      rep.lmi_min_eig = lmi_block_min_eig(*rep.lmi_x, rows, rep.lmi_y, c);
      if (rep.lmi_min_eig <= 0.0) {
        rep.diagnostics += "; reconstructed LMI matrix is only semidefinite numerically";
      }
    } catch (const NumericalError& e) {
      rep.diagnostics += std::string("; LMI reconstruction failed: ") + e.what();
    }
  } else if (rep.bounded == Verdict::no && !rep.condition1) {
    rep.bounded = Verdict::inconclusive;
    rep.diagnostics += "; infeasibility not implied without local reachability";
  }
  return rep;
}

DmreProbe dmre_probe(const LisModel& model, DecouplingPolicy policy, const DmreProbeOptions& options) {
  DmreProbe probe;
  int steps = options.horizon;
  if (model.horizon()) steps = std::min(steps, *model.horizon());
  probe.p_max_eig.assign(model.s(), 0.0);
  DmreState st = DmreState::initial(model, options.p0_scale);
  double q_trace = 0.0;
  for (int k = 0; k <= steps; ++k) {
    double t = 0.0;
    for (int i = 0; i < model.s(); ++i) t += model.q(i, std::min(k, steps)).trace();
    q_trace = std::max(q_trace, t);
  }
  const double ceiling = options.ceiling_ratio * std::max(q_trace, 1e-300);
  probe.bounded = true;
  for (int k = 0; k < steps; ++k) {
    try {
      st = dmre_step(st, model, decoupling_variables(model, policy, k));
    } catch (const NumericalError& e) {
      probe.bounded = false;
      probe.reason = e.what();
      break;
    }
    double tr = 0.0;
    for (int i = 0; i < model.s(); ++i) {
      tr += st.p_bar[i].trace();
      if (st.p[i].size()) probe.p_max_eig[i] = std::max(probe.p_max_eig[i], max_eig_sym(st.p[i]));
    }
    probe.steps = k + 1;
    if (!std::isfinite(tr) || tr > ceiling) {
      probe.bounded = false;
      probe.sup_trace = std::isfinite(tr) ? tr : std::numeric_limits<double>::infinity();
      probe.reason = "trace passed the divergence ceiling at k = " + std::to_string(k + 1);
      break;
    }
    probe.sup_trace = std::max(probe.sup_trace, tr);
    if (2 * (k + 1) <= steps) {
      probe.early_sup = std::max(probe.early_sup, tr);
    } else {
      probe.late_sup = std::max(probe.late_sup, tr);
    }
  }
  if (probe.bounded && probe.late_sup > options.growth_ratio * probe.early_sup) {
    probe.bounded = false;
    probe.reason = "trace still growing: late peak exceeds " + std::to_string(options.growth_ratio) +
                   " times the early peak";
  }
  if (probe.bounded) probe.reason = "trace stayed below the ceiling for " + std::to_string(probe.steps) + " steps";
  return probe;
}

SweepReport weak_coupling_sweep(const LisModel& model, std::span<const double> grid,
                                DecouplingPolicy policy, const DmreProbeOptions& options) {
  SweepReport rep;
  bool seen_unbounded = false;
  for (double a : grid) {
    const LisModel scaled = model.with_coupling_scale(a);
    const DmreProbe probe = dmre_probe(scaled, policy, options);
    rep.rows.push_back({a, probe.bounded, probe.sup_trace, probe.reason});
    if (!probe.bounded && !seen_unbounded) {
      seen_unbounded = true;
      rep.first_unbounded = a;
    } else if (probe.bounded && seen_unbounded) {
      rep.prefix = false;
    }
  }
  rep.precondition = true;
  const int s = model.s();
  for (const auto& e : model.epochs()) {
    const int k = e.start;
    if (model.horizon() && k + 1 > *model.horizon() && policy == DecouplingPolicy::out_neighbor) continue;
    const auto theta = decoupling_variables(model, policy, k);
    for (int i = 0; i < s; ++i) {
      const Matrix x = std::sqrt(2.0) * theta[i] * e.params.a[i * s + i];
      const auto d = detectability_check(e.params.c[i], x);
      if (!d.detectable) {
        rep.precondition = false;
        rep.diagnostics += "subsystem " + std::to_string(i) + " at k = " + std::to_string(k) +
                           ": (C_i, sqrt(2) theta_i A_ii) not detectable; ";
      }
    }
  }
  return rep;
}

ConditionReport verify_conditions(const LisModel& model, DecouplingPolicy policy, int horizon,
                                  const std::vector<DmreState>* trace) {
  ConditionReport rep;
  const int s = model.s();
  int last = horizon;
  if (model.horizon()) last = std::min(last, *model.horizon());

  rep.c1 = true;
  rep.c1_min_eig = std::numeric_limits<double>::infinity();
  for (int i = 0; i < s; ++i) {
    const int t = model.state_dim(i) - 1;
    const int check_h = last - t;
    if (check_h < 0) {
      rep.c1 = false;
      continue;
    }
    std::vector<MatrixPair> seq;
    for (int k = 0; k <= last; ++k) seq.push_back({model.a(i, i, k), sqrt_psd(model.q(i, k))});
    const auto g = uniform_reachability_gramian(seq, t, 1e-9, check_h);
    rep.c1 = rep.c1 && g.passes;
    rep.c1_min_eig = std::min(rep.c1_min_eig, g.min_eig);
  }

  rep.c2 = true;
  rep.q_u.assign(s, 0.0);
  rep.r_l.assign(s, std::numeric_limits<double>::infinity());
  rep.r_u.assign(s, 0.0);
  for (const auto& e : model.epochs()) {
    if (e.start > last) break;
    for (int i = 0; i < s; ++i) {
      if (e.params.q[i].size()) rep.q_u[i] = std::max(rep.q_u[i], max_eig_sym(e.params.q[i]));
      if (e.params.r[i].size()) {
        rep.r_l[i] = std::min(rep.r_l[i], min_eig_sym(e.params.r[i]));
        rep.r_u[i] = std::max(rep.r_u[i], max_eig_sym(e.params.r[i]));
      }
    }
  }
  for (int i = 0; i < s; ++i) rep.c2 = rep.c2 && std::isfinite(rep.q_u[i]) && rep.r_l[i] > 0.0;

  if (trace) {
    std::vector<double> pu(s, 0.0);
    for (const auto& st : *trace) {
      for (int i = 0; i < s && i < static_cast<int>(st.p.size()); ++i) {
        if (st.p[i].size()) pu[i] = std::max(pu[i], max_eig_sym(st.p[i]));
      }
    }
    rep.p_u = pu;
  }

  rep.theta_l.assign(s, std::numeric_limits<double>::infinity());
  rep.theta_u.assign(s, 0.0);
  const int theta_last = policy == DecouplingPolicy::out_neighbor ? last - 1 : last;
  for (int k = 0; k <= theta_last; ++k) {
    const auto th = decoupling_variables(model, policy, k);
    for (int i = 0; i < s; ++i) {
      rep.theta_l[i] = std::min(rep.theta_l[i], std::abs(th[i]));
      rep.theta_u[i] = std::max(rep.theta_u[i], std::abs(th[i]));
    }
  }
  rep.c4 = theta_last >= 0;
  for (int i = 0; i < s; ++i) rep.c4 = rep.c4 && rep.theta_l[i] > 0.0 && std::isfinite(rep.theta_u[i]);
  return rep;
}

}  // namespace lisest
