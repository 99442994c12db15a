#ifndef LISEST_STABILITY_HPP
#define LISEST_STABILITY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lisest/estimator.hpp"

namespace lisest {

// ---------------------------------------------------------------------------
// Time-invariant reachability and detectability.

struct ReachabilityResult {
  bool reachable = false;
  double gramian_min_eig = 0.0;
  Matrix gramian;
};

/// Gramian sum_{i=0}^{n-1} X^i Y Y^T (X^i)^T; reachable iff its least
/// eigenvalue exceeds tol.
ReachabilityResult reachability_check(const Matrix& x, const Matrix& y, double tol = 1e-9);

struct DetectabilityResult {
  bool detectable = false;
  /// K with rho(X + K Y) < 1, present when the pair is detectable.
  std::optional<Matrix> witness_k;
  double closed_loop_radius = 0.0;
  std::string diagnostics;
};

/// PBH test over the eigenvalues of X with |lambda| >= 1, plus a Riccati
/// output-injection witness whose closed loop is re-verified.
DetectabilityResult detectability_check(const Matrix& y, const Matrix& x, double tol = 1e-9);

// ---------------------------------------------------------------------------
// Time-varying pairs, checked on a finite horizon.

struct MatrixPair {
  Matrix x;
  Matrix y;
};

/// Phi_X(k + t, k) = X(k+t-1) ... X(k), identity for t = 0.
Matrix transition_product(const std::vector<MatrixPair>& seq, int k, int t);

struct UniformReachabilityReport {
  double min_eig = 0.0;  ///< min over k of the windowed Gramian's least eigenvalue
  int worst_k = 0;
  bool passes = false;   ///< min_eig >= r on the checked horizon
  int horizon = 0;
};

/// Windowed Gramian sum_{i=0}^{t} Phi(k+t+1, k+i+1) Y(k+i) Y(k+i)^T Phi^T at
/// every k in [0, horizon].  seq[k] = (X(k), Y(k)) must cover k <= horizon + t.
UniformReachabilityReport uniform_reachability_gramian(const std::vector<MatrixPair>& seq, int t,
                                                       double r, int horizon);

enum class DetectabilityVerdict { certified_on_horizon, falsified, inconclusive };
std::string to_string(DetectabilityVerdict verdict);

struct DetectabilityProbeOptions {
  int mu = 1;
  int nu = 1;
  double gamma = 0.9;
  double sigma = 1e-3;
  int horizon = 0;
  int samples = 200;
  std::uint64_t seed = 1;
};

struct DetectabilityProbeReport {
  DetectabilityVerdict verdict = DetectabilityVerdict::inconclusive;
  int failing_k = -1;
  /// Smallest certificate margin max_tau lambda_min(...) over k.
  double worst_margin = 0.0;
};

/// seq[k] = (X(k), Y(k)) for the pair (Y(k), X(k)); must cover k <= horizon + nu.
DetectabilityProbeReport uniform_detectability_probe(const std::vector<MatrixPair>& seq,
                                                     const DetectabilityProbeOptions& options);

// ---------------------------------------------------------------------------
// Lifted operator X -> sum_i M_i X M_i^T.

class LiftedOperator {
 public:
  explicit LiftedOperator(std::vector<Matrix> terms);

  const std::vector<Matrix>& terms() const { return terms_; }
  int dim() const { return dim_; }

  Matrix apply(const Matrix& x) const;
  Matrix adjoint(const Matrix& x) const;
  /// n^2 x n^2 matrix sum_i M_i kron M_i, built on demand.
  Matrix kron_matrix() const;

 private:
  std::vector<Matrix> terms_;
  int dim_ = 0;
};

/// Terms M_i = theta_i E_i A - G_i C with A, C from epoch 0.
LiftedOperator build_lifted_operator(const LisModel& model, std::span<const double> theta,
                                     const std::vector<Matrix>& gains);

/// Steady-state gains  G_i = theta_i E_i A P_bar C^T (C P_bar C^T + R)^{-1}.
std::vector<Matrix> steady_gain_terms(const LisModel& model, std::span<const double> theta,
                                      const Matrix& p_bar);

/// Gains built from per-row blocks X_ij (n_i x m_j), placed in block row i.
std::vector<Matrix> row_gain_terms(const LisModel& model, const std::vector<BlockMatrices>& rows,
                                   const std::vector<std::vector<int>>& columns);

struct SpectralRadiusOptions {
  /// Dense Kronecker eigenvalues are used when n <= dense_limit, restarted
  /// Arnoldi above it, power iteration if Arnoldi stalls.
  int dense_limit = 24;
  int krylov_dim = 60;
  double arnoldi_tol = 1e-10;
  int arnoldi_restarts = 50;
  double power_tol = 1e-13;
  int power_max_iter = 200000;
};

struct SpectralRadius {
  double value = 0.0;
  std::string method;
  bool converged = true;
};

SpectralRadius operator_spectral_radius(const LiftedOperator& op, const SpectralRadiusOptions& options = {});

/// Explicitly restarted Arnoldi on vec(X); the restart vector is the
/// dominant Ritz vector.
SpectralRadius arnoldi_radius(const LiftedOperator& op, int krylov_dim = 60, double tol = 1e-10,
                              int max_restarts = 50);

/// Normalized power iteration on the map form (for cross-checks).
SpectralRadius power_iteration_radius(const LiftedOperator& op, double tol = 1e-13,
                                      int max_iter = 200000);

Matrix adjoint_apply(const LiftedOperator& op, const Matrix& x);

/// Solves W - L(W) = rhs (requires rho(L) < 1).
Matrix lyapunov_solve(const LiftedOperator& op, const Matrix& rhs, int dense_limit = 24);

// ---------------------------------------------------------------------------
// Boundedness verdicts.

enum class Verdict { yes, no, inconclusive };
std::string to_string(Verdict verdict);

struct StabilityOptions {
  SteadyStateOptions steady;
  SpectralRadiusOptions radius;
  double rho_tol = 1e-9;
};

struct StabilityReport {
  Verdict bounded = Verdict::inconclusive;
  std::optional<double> spectral_radius;
  std::string method;
  std::string diagnostics;
  /// Gains G_i of the certified operator.
  std::vector<Matrix> witness_gains;
  /// LMI variables (X, Y_i = X G_i), present when reconstructed.
  std::optional<Matrix> lmi_x;
  std::vector<Matrix> lmi_y;
  double lmi_min_eig = 0.0;
  bool condition1 = false;
  int iterations = 0;
  std::vector<double> theta;
};

/// Local reachability of every (A_ii, sqrt(Q_i)) on every epoch.
bool local_reachability(const LisModel& model, double tol = 1e-9);

/// Steady-state solve, then rho(L_K) < 1 with the steady gains.
StabilityReport boundedness_check(const LisModel& model, std::span<const double> theta,
                                  const StabilityOptions& options = {});

struct DistributedLmiRow {
  int row = 0;
  bool feasible = false;
  std::vector<int> columns;  ///< I_i plus i, ascending
  BlockMatrices x_blocks;    ///< X_ij = theta_i A_ij C_j^+
  double residual_radius = 0.0;
};

/// Exact test of  sum_j (theta_i A_ij - X_ij C_j)(...)^T < I  over X_ij.
DistributedLmiRow distributed_lmi_check(const LisModel& model, int i, double theta_i);

/// Minimum eigenvalue of the block LMI matrix [X, X M_i terms; *, diag(X)].
double lmi_block_min_eig(const Matrix& x, const std::vector<Matrix>& scaled_rows,
                         const std::vector<Matrix>& y, const Matrix& c);

/// Tries the distributed rows first (X = I), then the steady gains.
StabilityReport centralized_lmi_feasibility(const LisModel& model, std::span<const double> theta,
                                            const StabilityOptions& options = {});

// ---------------------------------------------------------------------------
// Finite-horizon DMRE probe and the coupling sweep.

struct DmreProbeOptions {
  int horizon = 500;
  double p0_scale = 1.0;
  double ceiling_ratio = 1e12;
  /// Unbounded when the late-half peak trace exceeds growth_ratio times the
  /// early-half peak.
  double growth_ratio = 10.0;
};

struct DmreProbe {
  bool bounded = false;
  double sup_trace = 0.0;
  double early_sup = 0.0;
  double late_sup = 0.0;
  int steps = 0;
  std::string reason;
  /// Largest eigenvalue of each P_i over the run.
  std::vector<double> p_max_eig;
};

DmreProbe dmre_probe(const LisModel& model, DecouplingPolicy policy, const DmreProbeOptions& options = {});

struct SweepRow {
  double a = 0.0;
  bool bounded = false;
  double sup_trace = 0.0;
  std::string reason;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  /// First grid value at which the probe reported unbounded.
  std::optional<double> first_unbounded;
  /// True when the bounded scales form a prefix of the grid.
  bool prefix = true;
  /// Detectability of (C_i, sqrt(2) theta_i A_ii) for every i.
  bool precondition = false;
  std::string diagnostics;
};

SweepReport weak_coupling_sweep(const LisModel& model, std::span<const double> grid,
                                DecouplingPolicy policy, const DmreProbeOptions& options = {});

struct ConditionReport {
  bool c1 = false;
  double c1_min_eig = 0.0;
  bool c2 = false;
  std::vector<double> q_u;
  std::vector<double> r_l;
  std::vector<double> r_u;
  std::optional<std::vector<double>> p_u;  ///< empirical, from a DMRE trace
  bool c4 = false;
  std::vector<double> theta_l;
  std::vector<double> theta_u;
};

/// Checks Conditions on epochs and time indices up to `horizon`.  The DMRE
/// trace, when given, supplies the observed posterior ceilings.
ConditionReport verify_conditions(const LisModel& model, DecouplingPolicy policy, int horizon,
                                  const std::vector<DmreState>* trace = nullptr);

}  // namespace lisest

#endif  // LISEST_STABILITY_HPP
