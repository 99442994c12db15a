#include "lisest/sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <ostream>

namespace lisest {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::uniform: return "uniform";
    case NoiseKind::gaussian: return "gaussian";
  }
  return "?";
}

NoiseKind parse_noise_kind(const std::string& text) {
  if (text == "none") return NoiseKind::none;
  if (text == "uniform") return NoiseKind::uniform;
  if (text == "gaussian") return NoiseKind::gaussian;
  throw std::invalid_argument("unknown noise kind '" + text + "' (expected none, uniform or gaussian)");
}

Vector draw_noise(NoiseKind kind, const Matrix& l, std::mt19937_64& rng) {
  const Eigen::Index n = l.cols();
  Vector u(n);
  switch (kind) {
    case NoiseKind::none:
      return Vector::Zero(l.rows());
    case NoiseKind::uniform: {
      const double h = std::sqrt(3.0);
      std::uniform_real_distribution<double> ud(-h, h);
      for (Eigen::Index i = 0; i < n; ++i) u(i) = ud(rng);
      break;
    }
    case NoiseKind::gaussian: {
      std::normal_distribution<double> nd(0.0, 1.0);
      for (Eigen::Index i = 0; i < n; ++i) u(i) = nd(rng);
      break;
    }
  }
  return l * u;
}

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::distributed: return "distributed";
    case EstimatorKind::steady: return "steady";
    case EstimatorKind::centralized: return "centralized";
  }
  return "?";
}

EstimatorKind parse_estimator_kind(const std::string& text) {
  if (text == "distributed") return EstimatorKind::distributed;
  if (text == "steady") return EstimatorKind::steady;
  if (text == "centralized") return EstimatorKind::centralized;
  throw std::invalid_argument("unknown estimator '" + text + "' (expected distributed, steady or centralized)");
}

std::string EstimatorConfig::name() const {
  if (!label.empty()) return label;
  if (kind == EstimatorKind::centralized) return "centralized";
  return to_string(kind) + "-" + to_string(policy);
}

GlobalKalmanCovariances centralized_covariances(const LisModel& model, int horizon, double p0_scale) {
  GlobalKalmanCovariances out;
  Matrix p = p0_scale * Matrix::Identity(model.n(), model.n());
  out.p.push_back(p);
  out.p_bar.push_back(p);
  for (int k = 0; k < horizon; ++k) {
    const Matrix a = model.global_a(k);
    const Matrix c = model.global_c(k + 1);
    const Matrix pb = symmetrize(a * p * a.transpose() + model.global_q(k));
    const Matrix cp = c * pb;
    const Matrix gain = spd_solve(cp * c.transpose() + model.global_r(k + 1), cp, "global innovation matrix").transpose();
    p = symmetrize(pb - gain * cp);
    out.p_bar.push_back(pb);
    out.p.push_back(p);
    out.gains.push_back(gain);
  }
  return out;
}

PreparedEstimator prepare_estimator(const LisModel& model, const EstimatorConfig& config, int horizon) {
  PreparedEstimator prep;
  prep.config = config;
  switch (config.kind) {
    case EstimatorKind::distributed:
      prep.block_gains = distributed_gain_schedule(model, config.policy, horizon, config.p0_scale).gains;
      break;
    case EstimatorKind::steady: {
      if (config.steady_gains) {
        prep.steady = *config.steady_gains;
      } else {
        const auto theta = decoupling_variables(model, config.policy, 0);
        const SteadyState st = steady_state_solve(model, theta);
        if (!st.converged()) {
          throw NumericalError("steady estimator: no steady state (" + to_string(st.status) + ")");
        }
        prep.steady = st.k;
      }
      if (static_cast<int>(prep.steady.k.size()) != model.s()) {
        throw std::invalid_argument("steady gains do not match the model's subsystem count");
      }
      for (int i = 0; i < model.s(); ++i) {
        if (prep.steady.k[i].rows() != model.state_dim(i) || prep.steady.k[i].cols() != model.meas_dim(i)) {
          throw std::invalid_argument("steady gain block " + std::to_string(i) + " has wrong dimensions");
        }
      }
      break;
    }
    case EstimatorKind::centralized:
      prep.global_gains = centralized_covariances(model, horizon, config.p0_scale).gains;
      break;
  }
  return prep;
}

namespace {

constexpr double kDivergenceNorm = 1e100;

BlockVectors split(const Vector& v, const std::vector<int>& dims, const std::vector<int>& off) {
  BlockVectors out;
  for (std::size_t i = 0; i < dims.size(); ++i) out.push_back(v.segment(off[i], dims[i]));
  return out;
}

Vector join(const BlockVectors& blocks, int n, const std::vector<int>& off) {
  Vector v(n);
  for (std::size_t i = 0; i < blocks.size(); ++i) v.segment(off[i], blocks[i].size()) = blocks[i];
  return v;
}

/// Lower Cholesky-like factors of the noise covariances, cached per epoch.
struct NoiseFactors {
  std::vector<BlockMatrices> w;  // per epoch, per subsystem
  std::vector<BlockMatrices> v;

  NoiseFactors(const LisModel& model, const NoiseSpec& noise) {
    for (const auto& e : model.epochs()) {
      BlockMatrices wf, vf;
      for (int i = 0; i < model.s(); ++i) {
        wf.push_back(sqrt_psd(noise.w_cov.empty() ? e.params.q[i] : noise.w_cov.at(i)));
        vf.push_back(sqrt_psd(noise.v_cov.empty() ? e.params.r[i] : noise.v_cov.at(i)));
      }
      w.push_back(std::move(wf));
      v.push_back(std::move(vf));
    }
  }
};

}  // namespace

TrialOutput simulate_trial(const LisModel& model, const std::vector<PreparedEstimator>& estimators,
                           const NoiseSpec& noise, int horizon, std::uint64_t seed, InitialKind init,
                           bool keep_trajectories) {
  if (horizon < 0) throw std::invalid_argument("simulate_trial: negative horizon");
  const int s = model.s();
  const int n = model.n();
  const auto& dims = model.pattern().state_dims;
  const auto off = model.pattern().state_offsets();
  const auto& mdims = model.pattern().meas_dims;
  const auto moff = model.pattern().meas_offsets();
  const NoiseFactors factors(model, noise);
  std::mt19937_64 rng(seed);

  Vector x = Vector::Zero(n);
  if (init == InitialKind::random_unit) {
    std::normal_distribution<double> nd;
    for (int i = 0; i < s; ++i) {
      Vector d(dims[i]);
      for (int c = 0; c < dims[i]; ++c) d(c) = nd(rng);
      if (d.norm() > 0.0) x.segment(off[i], dims[i]) = d.normalized();
    }
  }

  const std::size_t nc = estimators.size();
  TrialOutput out;
  out.sq_error.assign(nc, std::vector<double>(horizon + 1, std::numeric_limits<double>::quiet_NaN()));
  out.diverged.assign(nc, false);
  out.x_hat.resize(nc);
  std::vector<EstimatorState> block_est(nc, EstimatorState::initial(split(Vector::Zero(n), dims, off)));
  std::vector<Vector> global_est(nc, Vector::Zero(n));
  for (std::size_t c = 0; c < nc; ++c) {
    out.sq_error[c][0] = x.squaredNorm();
    if (keep_trajectories) out.x_hat[c].push_back(Vector::Zero(n));
  }
  if (keep_trajectories) out.x.push_back(x);

  std::vector<int> epoch_of(horizon + 1);
  for (int k = 0; k <= horizon; ++k) epoch_of[k] = model.epoch_index(k);
  std::vector<Matrix> ga, gc;
  for (int e = 0; e < static_cast<int>(model.epochs().size()); ++e) {
    const int start = model.epochs()[e].start;
    ga.push_back(model.global_a(start));
    gc.push_back(model.global_c(start));
  }

  bool state_diverged = false;
  for (int k = 0; k < horizon; ++k) {
    const int ek = epoch_of[k];
    const int ek1 = epoch_of[k + 1];
    Vector w(n);
    for (int i = 0; i < s; ++i) w.segment(off[i], dims[i]) = draw_noise(noise.kind, factors.w[ek][i], rng);
    x = ga[ek] * x + w;
    Vector z = gc[ek1] * x;
    for (int i = 0; i < s; ++i) z.segment(moff[i], mdims[i]) += draw_noise(noise.kind, factors.v[ek1][i], rng);
    if (!x.allFinite() || x.norm() > kDivergenceNorm) state_diverged = true;
    if (keep_trajectories) out.x.push_back(x);

    const BlockVectors zb = split(z, mdims, moff);
    for (std::size_t c = 0; c < nc; ++c) {
      if (out.diverged[c]) continue;
      if (state_diverged) {
        out.diverged[c] = true;
        continue;
      }
      const PreparedEstimator& pe = estimators[c];
      Vector xh;
      switch (pe.config.kind) {
        case EstimatorKind::distributed:
          block_est[c] = estimator_step(block_est[c], zb, model, pe.block_gains.at(k));
          xh = join(block_est[c].x_hat, n, off);
          break;
        case EstimatorKind::steady:
          block_est[c] = steady_estimator_step(block_est[c], zb, model, pe.steady);
          xh = join(block_est[c].x_hat, n, off);
          break;
        case EstimatorKind::centralized: {
          const Vector xb = ga[ek] * global_est[c];
          global_est[c] = xb + pe.global_gains.at(k) * (z - gc[ek1] * xb);
          xh = global_est[c];
          break;
        }
      }
      const double err = (x - xh).squaredNorm();
      if (!std::isfinite(err) || err > kDivergenceNorm * kDivergenceNorm) {
        out.diverged[c] = true;
        continue;
      }
      out.sq_error[c][k + 1] = err;
      if (keep_trajectories) out.x_hat[c].push_back(std::move(xh));
    }
  }
  return out;
}

namespace {

std::vector<TrialEnsemble> run_monte_carlo(const LisModel& model, const std::vector<EstimatorConfig>& configs,
                                           const NoiseSpec& noise, const MonteCarloOptions& options,
                                           bool parallel) {
  if (options.trials < 1) throw std::invalid_argument("monte_carlo_rmse: need at least one trial (M >= 1)");
  if (options.horizon < 0) throw std::invalid_argument("monte_carlo_rmse: negative horizon");
  if (configs.empty()) throw std::invalid_argument("monte_carlo_rmse: no estimator configs");
  std::vector<PreparedEstimator> prepared;
  for (const auto& c : configs) prepared.push_back(prepare_estimator(model, c, options.horizon));

  const int m = options.trials;
  std::vector<TrialOutput> outs(m);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int t = 0; t < m; ++t) {
    try {
      outs[t] = simulate_trial(model, prepared, noise, options.horizon, mix_seed(options.seed, t), options.init,
                               false);
    } catch (...) {
#pragma omp critical(lisest_mc_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  std::vector<TrialEnsemble> result;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    TrialEnsemble ens;
    ens.label = configs[c].name();
    ens.trials = m;
    ens.horizon = options.horizon;
    ens.subsystems = model.s();
    ens.rmse.assign(options.horizon + 1, 0.0);
    for (int t = 0; t < m; ++t) {
      const bool div = outs[t].diverged[c];
      ens.trial_diverged.push_back(div);
      ens.sq_error.push_back(std::move(outs[t].sq_error[c]));
      if (div) {
        ++ens.diverged;
        continue;
      }
      ++ens.trials_used;
      for (int k = 0; k <= options.horizon; ++k) ens.rmse[k] += ens.sq_error.back()[k];
    }
    if (ens.trials_used == 0) {
      throw NumericalError("monte_carlo_rmse: every trial diverged for '" + ens.label + "'");
    }
    const double denom = static_cast<double>(model.s()) * ens.trials_used;
    for (double& v : ens.rmse) v = std::sqrt(v / denom);
    result.push_back(std::move(ens));
  }
  return result;
}

}  // namespace

std::vector<TrialEnsemble> monte_carlo_rmse(const LisModel& model, const std::vector<EstimatorConfig>& configs,
                                            const NoiseSpec& noise, const MonteCarloOptions& options) {
  return run_monte_carlo(model, configs, noise, options, true);
}

namespace reference {
std::vector<TrialEnsemble> monte_carlo_rmse(const LisModel& model, const std::vector<EstimatorConfig>& configs,
                                            const NoiseSpec& noise, const MonteCarloOptions& options) {
  return run_monte_carlo(model, configs, noise, options, false);
}
}  // namespace reference

TrialEnsemble centralized_baseline(const LisModel& model, const NoiseSpec& noise, const MonteCarloOptions& options) {
  EstimatorConfig c;
  c.kind = EstimatorKind::centralized;
  return monte_carlo_rmse(model, {c}, noise, options).front();
}

std::string to_string(DecayVerdict verdict) {
  switch (verdict) {
    case DecayVerdict::exponential: return "exponential";
    case DecayVerdict::marginal: return "marginal";
    case DecayVerdict::divergent: return "divergent";
  }
  return "?";
}

double fit_decay_ratio(const std::vector<double>& series) {
  // Entries at or below the rounding floor relative to the start are not
  // informative; the fit stops where the series reaches it.
  const double floor = series.empty() ? 0.0 : 1e-12 * std::abs(series.front());
  std::vector<int> idx;
  for (int k = 0; k < static_cast<int>(series.size()); ++k) {
    if (std::isfinite(series[k]) && series[k] > std::max(floor, 1e-280)) idx.push_back(k);
  }
  if (idx.size() < 2) return 0.0;
  const std::size_t first = idx.size() / 2;
  const std::size_t count = idx.size() - first;
  if (count < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t p = first; p < idx.size(); ++p) {
    const double xk = idx[p];
    const double yk = std::log(series[idx[p]]);
    sx += xk;
    sy += yk;
    sxx += xk * xk;
    sxy += xk * yk;
  }
  const double nn = static_cast<double>(count);
  const double denom = nn * sxx - sx * sx;
  if (denom == 0.0) return 0.0;
  return std::exp((nn * sxy - sx * sy) / denom);
}

DecayResult noise_free_decay(const LisModel& model, const EstimatorConfig& config, int horizon, std::uint64_t seed) {
  const PreparedEstimator prep = prepare_estimator(model, config, horizon);
  NoiseSpec none;
  none.kind = NoiseKind::none;
  const TrialOutput out = simulate_trial(model, {prep}, none, horizon, seed, InitialKind::random_unit, false);
  DecayResult res;
  for (double sq : out.sq_error[0]) res.rmse.push_back(std::sqrt(sq / model.s()));
  res.initial = res.rmse.front();
  res.final_value = res.rmse.back();
  for (int k = 0; k <= horizon; ++k) {
    const double v = res.rmse[k];
    res.peak = std::max(res.peak, std::isfinite(v) ? v : std::numeric_limits<double>::infinity());
    if (res.first_below_1e6 < 0 && v <= 1e-6 * res.initial) res.first_below_1e6 = k;
  }
  res.ratio = fit_decay_ratio(res.rmse);
  if (out.diverged[0] || !std::isfinite(res.final_value)) {
    res.verdict = DecayVerdict::divergent;
  } else if (res.ratio < 1.0 - 1e-3) {
    res.verdict = DecayVerdict::exponential;
  } else if (res.ratio <= 1.0 + 1e-3) {
    res.verdict = DecayVerdict::marginal;
  } else {
    res.verdict = DecayVerdict::divergent;
  }
  return res;
}

BootstrapResult bootstrap_mean_rmse_difference(const TrialEnsemble& a, const TrialEnsemble& b, int replicates,
                                               double confidence, std::uint64_t seed) {
  if (a.trials != b.trials || a.horizon != b.horizon) {
    throw std::invalid_argument("bootstrap: ensembles must come from the same paired run");
  }
  std::vector<int> common;
  for (int t = 0; t < a.trials; ++t) {
    if (!a.trial_diverged[t] && !b.trial_diverged[t]) common.push_back(t);
  }
  if (common.empty()) throw std::invalid_argument("bootstrap: no trial is valid in both ensembles");
  const int m = static_cast<int>(common.size());
  const int h = a.horizon;
  Matrix sa(m, h), sb(m, h);  // k = 1..H
  for (int r = 0; r < m; ++r) {
    for (int k = 1; k <= h; ++k) {
      sa(r, k - 1) = a.sq_error[common[r]][k];
      sb(r, k - 1) = b.sq_error[common[r]][k];
    }
  }
  const double denom = static_cast<double>(a.subsystems) * m;
  auto statistic = [&](const Vector& w) {
    const Vector ra = ((sa.transpose() * w) / denom).cwiseSqrt();
    const Vector rb = ((sb.transpose() * w) / denom).cwiseSqrt();
    return (rb - ra).mean();
  };
  BootstrapResult res;
  res.confidence = confidence;
  res.replicates = replicates;
  res.mean_difference = statistic(Vector::Ones(m));
  std::vector<double> stats(replicates);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < replicates; ++r) {
    std::mt19937_64 rng(mix_seed(seed, r));
    std::uniform_int_distribution<int> pick(0, m - 1);
    Vector w = Vector::Zero(m);
    for (int t = 0; t < m; ++t) w(pick(rng)) += 1.0;
    stats[r] = statistic(w);
  }
  std::sort(stats.begin(), stats.end());
  const int q = std::clamp(static_cast<int>(std::floor((1.0 - confidence) * replicates)), 0, replicates - 1);
  res.lower = replicates ? stats[q] : res.mean_difference;
  res.a_not_worse = res.lower >= 0.0;
  return res;
}

void write_rmse_csv(std::ostream& os, const std::vector<TrialEnsemble>& ensembles) {
  os << "config,k,rmse,trials_used,diverged\n";
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17);
  for (const auto& e : ensembles) {
    for (int k = 0; k <= e.horizon; ++k) {
      os << e.label << ',' << k << ',' << e.rmse[k] << ',' << e.trials_used << ',' << e.diverged << '\n';
    }
  }
  os.flags(flags);
  os.precision(prec);
}

}  // namespace lisest
