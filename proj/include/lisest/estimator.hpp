#ifndef LISEST_ESTIMATOR_HPP
#define LISEST_ESTIMATOR_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lisest/model.hpp"

namespace lisest {

/// Per-subsystem posterior (P) and prior (P_bar) covariance blocks at time k.
/// At k = 0 only the posterior is meaningful; P_bar is set equal to it.
struct DmreState {
  int k = 0;
  BlockMatrices p;
  BlockMatrices p_bar;

  /// P_i(0) = scale * I for every subsystem.
  static DmreState initial(const LisModel& model, double scale = 1.0);
  static DmreState initial(BlockMatrices p0);

  Matrix global_p() const { return block_diag(p); }
  Matrix global_p_bar() const { return block_diag(p_bar); }
};

struct GainSet {
  BlockMatrices k;
  Matrix global() const { return block_diag(k); }
};

struct EstimatorState {
  int k = 0;
  BlockVectors x_hat;
  BlockVectors x_bar;

  static EstimatorState initial(BlockVectors x_hat0);
};

// ---------------------------------------------------------------------------
// Per-subsystem kernels.  Each reads only its own blocks and, through the
// supplied accessor, the blocks of its in-neighbors.

/// Posterior update  P = P_bar - P_bar C^T (C P_bar C^T + R)^{-1} C P_bar.
Matrix posterior_block(const Matrix& p_bar, const Matrix& c, const Matrix& r);

/// Kalman-like gain  K = P_bar C^T (C P_bar C^T + R)^{-1}.
Matrix gain_block(const Matrix& p_bar, const Matrix& c, const Matrix& r);

/// Prior  P_bar_i(k+1) = theta_i^2 sum_{j in I_i(k) + i} A_ij P_j A_ij^T + Q_i.
/// `posterior_of(j)` must return P_j(k) as a const Matrix&.
template <class PosteriorOf>
Matrix prior_block(const LisModel& model, int k, int i, double theta, PosteriorOf&& posterior_of) {
  const Matrix& aii = model.a(i, i, k);
  Matrix acc = aii * posterior_of(i) * aii.transpose();
  for (int j : model.topology(k).in[i]) {
    const Matrix& aij = model.a(i, j, k);
    acc.noalias() += aij * posterior_of(j) * aij.transpose();
  }
  return symmetrize(theta * theta * acc + model.q(i, k));
}

/// Prediction  x_bar_i(k+1) = sum_{j in I_i(k) + i} A_ij(k) x_hat_j(k).
/// `estimate_of(j)` must return x_hat_j(k) as a const Vector&.
template <class EstimateOf>
Vector predict_block(const LisModel& model, int k, int i, EstimateOf&& estimate_of) {
  Vector acc = model.a(i, i, k) * estimate_of(i);
  for (int j : model.topology(k).in[i]) acc.noalias() += model.a(i, j, k) * estimate_of(j);
  return acc;
}

// ---------------------------------------------------------------------------
// Round operations.  Subsystem updates within a round run concurrently;
// `reference::` holds the serial versions kept for testing.

/// One DMRE round: P(k) -> P_bar(k+1) with theta(k), then P(k+1) with
/// C(k+1), R(k+1).  Throws NumericalError if an innovation matrix is not PD.
DmreState dmre_step(const DmreState& state, const LisModel& model, std::span<const double> theta);

/// Gains K_i(k) from P_bar_i(k) of `state`.
GainSet local_gains(const DmreState& state, const LisModel& model);

/// One estimator round: x_hat(k) -> x_hat(k+1) with measurements z(k+1)
/// and gains K(k+1).
EstimatorState estimator_step(const EstimatorState& est, const BlockVectors& z,
                              const LisModel& model, const GainSet& gains);

/// Steady-state estimator round with constant gains.
EstimatorState steady_estimator_step(const EstimatorState& est, const BlockVectors& z,
                                     const LisModel& model, const GainSet& k_star);

namespace reference {
DmreState dmre_step(const DmreState& state, const LisModel& model, std::span<const double> theta);
EstimatorState estimator_step(const EstimatorState& est, const BlockVectors& z,
                              const LisModel& model, const GainSet& gains);
}  // namespace reference

// ---------------------------------------------------------------------------
// Global (stacked) forms.

/// Row-scaled transition matrix: block row i of A(k) multiplied by theta_i.
Matrix scaled_transition(const LisModel& model, int k, std::span<const double> theta);

/// Block-diagonal all-ones mask.
Matrix block_mask(std::span<const int> dims);

/// Riccati measurement map  X - X C^T (C X C^T + R)^{-1} C X.
Matrix riccati_update_map(const Matrix& x, const Matrix& c, const Matrix& r);

/// Prediction map  sum_i scaledA_i X scaledA_i^T + Q, with scaledA_i the
/// i-th block row of the row-scaled transition matrix.
Matrix prediction_map(const Matrix& x, const Matrix& scaled_a, const Matrix& q,
                      std::span<const int> dims);

/// Hadamard-masked DMRE step on global matrices:
///   Omega o (As X As^T + Q - As X C^T (C X C^T + R)^{-1} C X As^T).
Matrix compact_dmre_step(const Matrix& p_bar, const Matrix& scaled_a, const Matrix& c,
                         const Matrix& q, const Matrix& r, std::span<const int> dims);

/// Same, with the matrices taken from the model at time k.
Matrix compact_dmre_step(const Matrix& p_bar, const LisModel& model, int k,
                         std::span<const double> theta);

// ---------------------------------------------------------------------------
// Time-invariant steady state.

enum class SolveStatus { converged, diverged, max_iterations };
std::string to_string(SolveStatus status);

struct SteadyStateOptions {
  /// Stop when max|P_bar(k+1) - P_bar(k)| <= tol * max(1, max|P_bar(k+1)|).
  double tol = 1e-12;
  int max_iter = 10000;
  /// Declare divergence when trace(P_bar) > ceiling_ratio * trace(Q).
  double ceiling_ratio = 1e12;
  /// Starting P_bar(1); defaults to Q.
  std::optional<Matrix> initial;
};

struct SteadyState {
  Matrix p_bar;  ///< global block-diagonal fixed point (last iterate on failure)
  GainSet k;
  int iterations = 0;
  double residual = 0.0;
  SolveStatus status = SolveStatus::max_iterations;
  std::vector<double> theta;
  bool converged() const { return status == SolveStatus::converged; }
};

SteadyState steady_state_solve(const LisModel& model, std::span<const double> theta,
                               const SteadyStateOptions& options = {});

/// Block gains P_bar_i C_i^T (C_i P_bar_i C_i^T + R_i)^{-1} from a global
/// block-diagonal P_bar.
GainSet gains_from_global(const Matrix& p_bar, const LisModel& model, int k);

// ---------------------------------------------------------------------------
// Driver objects.

/// Distributed estimator with online DMRE: holds both recursions and
/// advances them one round at a time.
class DistributedFilter {
 public:
  DistributedFilter(const LisModel& model, DecouplingPolicy policy, BlockVectors x_hat0,
                    double p0_scale = 1.0);

  /// Consumes z(k+1) and advances to k+1.
  void step(const BlockVectors& z);

  const DmreState& covariance() const { return dmre_; }
  const EstimatorState& estimate() const { return est_; }
  const GainSet& gains() const { return gains_; }

 private:
  const LisModel* model_;
  DecouplingPolicy policy_;
  DmreState dmre_;
  EstimatorState est_;
  GainSet gains_;
};

/// Precomputed gains K(1..horizon) plus the DMRE trajectory.  The DMRE does
/// not depend on measurements, so Monte Carlo trials can share it.
struct GainSchedule {
  std::vector<GainSet> gains;      ///< gains[k-1] = K(k)
  std::vector<DmreState> states;   ///< states[k] = DMRE state at k, k = 0..horizon
};

GainSchedule distributed_gain_schedule(const LisModel& model, DecouplingPolicy policy,
                                       int horizon, double p0_scale = 1.0);

}  // namespace lisest

#endif  // LISEST_ESTIMATOR_HPP
