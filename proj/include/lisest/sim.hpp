#ifndef LISEST_SIM_HPP
#define LISEST_SIM_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lisest/estimator.hpp"

namespace lisest {

enum class NoiseKind { none, uniform, gaussian };
std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& text);

/// Process/measurement noise.  Empty covariance lists mean "use the model's
/// Q_i(k) and R_i(k)".  Uniform noise is L u with u_j ~ U(-sqrt 3, sqrt 3)
/// and L L^T the declared covariance, so the covariance matches exactly.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  BlockMatrices w_cov;
  BlockMatrices v_cov;
};

/// Draws one zero-mean vector with covariance l l^T.
Vector draw_noise(NoiseKind kind, const Matrix& l, std::mt19937_64& rng);

/// splitmix64 finalizer; per-trial streams are seeded with
/// mix_seed(master, trial).
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream);

enum class EstimatorKind { distributed, steady, centralized };
std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(const std::string& text);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::distributed;
  DecouplingPolicy policy = DecouplingPolicy::out_neighbor;
  double p0_scale = 1.0;
  /// Constant gains for the steady kind; solved from the model when absent.
  std::optional<GainSet> steady_gains;
  std::string label;

  std::string name() const;
};

enum class InitialKind {
  random_unit,  ///< x_i(0) uniform on the unit sphere, x_hat(0) = 0
  exact,        ///< x(0) = x_hat(0) = 0
};

/// Gains are noise-independent, so they are computed once per config and
/// shared by every trial.
struct PreparedEstimator {
  EstimatorConfig config;
  std::vector<GainSet> block_gains;    ///< distributed: block_gains[k-1] = K(k)
  GainSet steady;                      ///< steady kind
  std::vector<Matrix> global_gains;    ///< centralized: global_gains[k-1]
};

PreparedEstimator prepare_estimator(const LisModel& model, const EstimatorConfig& config, int horizon);

/// Covariances of the standard Kalman filter on the assembled model;
/// p[k] posterior, p_bar[k] prior (p_bar[0] = p[0]).
struct GlobalKalmanCovariances {
  std::vector<Matrix> p;
  std::vector<Matrix> p_bar;
  std::vector<Matrix> gains;  ///< gains[k-1] = K(k)
};
GlobalKalmanCovariances centralized_covariances(const LisModel& model, int horizon, double p0_scale);

struct TrialOutput {
  std::vector<Vector> x;                       ///< x(0..H), global
  std::vector<std::vector<Vector>> x_hat;      ///< per config, x_hat(0..H)
  std::vector<std::vector<double>> sq_error;   ///< per config, sum_i ||e_i(k)||^2
  std::vector<bool> diverged;                  ///< per config
};

/// One trial: the same state and measurement trajectory is fed to every
/// estimator.  Deterministic in `seed`.
TrialOutput simulate_trial(const LisModel& model, const std::vector<PreparedEstimator>& estimators,
                           const NoiseSpec& noise, int horizon, std::uint64_t seed,
                           InitialKind init = InitialKind::random_unit, bool keep_trajectories = true);

struct TrialEnsemble {
  std::string label;
  int trials = 0;
  int horizon = 0;
  int subsystems = 0;
  int trials_used = 0;
  int diverged = 0;
  std::vector<double> rmse;                ///< rmse[k], k = 0..H
  std::vector<std::vector<double>> sq_error;  ///< per trial, sum_i ||e_i(k)||^2
  std::vector<bool> trial_diverged;
};

struct MonteCarloOptions {
  int trials = 500;
  int horizon = 500;
  std::uint64_t seed = 1;
  InitialKind init = InitialKind::random_unit;
};

/// RMSE(k) = sqrt( sum over subsystems and used trials of ||e_i(k)||^2 / (s M_used) ).
/// Trials run concurrently; results do not depend on the thread count.
std::vector<TrialEnsemble> monte_carlo_rmse(const LisModel& model, const std::vector<EstimatorConfig>& configs,
                                            const NoiseSpec& noise, const MonteCarloOptions& options);

namespace reference {
std::vector<TrialEnsemble> monte_carlo_rmse(const LisModel& model, const std::vector<EstimatorConfig>& configs,
                                            const NoiseSpec& noise, const MonteCarloOptions& options);
}  // namespace reference

/// Ensemble of the global Kalman filter alone.
TrialEnsemble centralized_baseline(const LisModel& model, const NoiseSpec& noise, const MonteCarloOptions& options);

enum class DecayVerdict { exponential, marginal, divergent };
std::string to_string(DecayVerdict verdict);

struct DecayResult {
  std::vector<double> rmse;
  double ratio = 0.0;  ///< fitted per-step factor b over the tail half
  DecayVerdict verdict = DecayVerdict::marginal;
  double initial = 0.0;
  double final_value = 0.0;
  double peak = 0.0;
  /// First k with rmse(k) <= 1e-6 rmse(0), or -1.
  int first_below_1e6 = -1;
};

/// Noise-free error run from a nonzero initial error.
DecayResult noise_free_decay(const LisModel& model, const EstimatorConfig& config, int horizon,
                             std::uint64_t seed = 1);

/// Fits log(series) ~ a + k log(b) over the tail half of the entries above
/// the rounding floor (1e-12 times the first entry).
double fit_decay_ratio(const std::vector<double>& series);

struct BootstrapResult {
  double mean_difference = 0.0;  ///< mean_k rmse_b - mean_k rmse_a on the full sample
  double lower = 0.0;            ///< one-sided lower confidence bound
  double confidence = 0.95;
  int replicates = 0;
  bool a_not_worse = false;      ///< lower >= 0
};

/// Paired trial bootstrap of mean_k (RMSE_b(k) - RMSE_a(k)) over k = 1..H.
BootstrapResult bootstrap_mean_rmse_difference(const TrialEnsemble& a, const TrialEnsemble& b,
                                               int replicates = 2000, double confidence = 0.95,
                                               std::uint64_t seed = 7);

/// CSV: config,k,rmse,trials_used,diverged.
void write_rmse_csv(std::ostream& os, const std::vector<TrialEnsemble>& ensembles);

}  // namespace lisest

#endif  // LISEST_SIM_HPP
