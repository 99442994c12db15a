#include "lisest/power_system.hpp"

#include <cmath>

namespace lisest {

void PowerSystemParams::validate() const {
  const int s = areas();
  if (s == 0) throw ModelError("power system: no areas");
  if (regulation.size() != inertia.size() || turbine_time.size() != inertia.size() ||
      governor_time.size() != inertia.size() || damping.size() != inertia.size()) {
    throw ModelError("power system: per-area parameter lists differ in length");
  }
  if (tie.rows() != s || tie.cols() != s) throw ModelError("power system: tie matrix must be s x s");
  auto positive = [](const std::vector<double>& v, const char* name) {
    for (double x : v) {
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw ModelError(std::string("power system: ") + name + " must be strictly positive");
      }
    }
  };
  positive(inertia, "inertia H");
  positive(regulation, "speed regulation R");
  positive(turbine_time, "turbine time constant T_t");
  positive(governor_time, "governor time constant T_g");
  for (double d : damping) {
    if (d < 0.0 || !std::isfinite(d)) throw ModelError("power system: damping must be >= 0");
  }
  if (!(sampling_period > 0.0)) throw ModelError("power system: sampling period must be > 0");
  for (int i = 0; i < s; ++i) {
    if (tie(i, i) != 0.0) throw ModelError("power system: tie matrix diagonal must be zero");
    for (int j = 0; j < s; ++j) {
      if ((tie(i, j) == 0.0) != (tie(j, i) == 0.0)) {
        throw ModelError("power system: tie sparsity must be symmetric");
      }
    }
  }
}

double Range::sample(std::mt19937_64& rng) const {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

ContinuousBlocks power_system_continuous(const PowerSystemParams& p) {
  p.validate();
  const int s = p.areas();
  ContinuousBlocks cb;
  cb.state_dims.assign(s, kAreaStates);
  cb.a.assign(s * s, Matrix::Zero(kAreaStates, kAreaStates));
  cb.b.assign(s, Matrix::Zero(kAreaStates, 2));
  for (int i = 0; i < s; ++i) {
    const double h2 = 2.0 * p.inertia[i];
    double tie_sum = 0.0;
    for (int j = 0; j < s; ++j) {
      if (j == i || p.tie(i, j) == 0.0) continue;
      tie_sum += p.tie(i, j);
      Matrix& aij = cb.a[i * s + j];
      aij(1, 0) = p.tie(i, j) / h2;
    }
    Matrix& aii = cb.a[i * s + i];
    aii(0, 1) = 1.0;
    aii(1, 0) = -tie_sum / h2;
    aii(1, 1) = -p.damping[i] / h2;
    aii(1, 2) = 1.0 / h2;
    aii(2, 2) = -1.0 / p.turbine_time[i];
    aii(2, 3) = 1.0 / p.turbine_time[i];
    aii(3, 1) = -1.0 / (p.regulation[i] * p.governor_time[i]);
    aii(3, 3) = -1.0 / p.governor_time[i];
    Matrix& bi = cb.b[i];
    bi(1, 1) = -1.0 / h2;
    bi(3, 0) = 1.0 / p.governor_time[i];
  }
  return cb;
}

Matrix power_system_measurement() {
  Matrix c = Matrix::Zero(kAreaOutputs, kAreaStates);
  c(0, 0) = 1.0;
  c(1, 1) = 1.0;
  return c;
}

std::vector<std::pair<int, int>> tie_pairs_for(const PowerSystemConfig& config) {
  if (!config.tie_pairs.empty()) return config.tie_pairs;
  std::vector<std::pair<int, int>> pairs;
  const int s = config.areas;
  switch (config.topology) {
    case TieTopology::none:
      break;
    case TieTopology::ring:
      if (s == 2) {
        pairs.emplace_back(0, 1);
      } else if (s > 2) {
        for (int i = 0; i < s; ++i) pairs.emplace_back(std::min(i, (i + 1) % s), std::max(i, (i + 1) % s));
      }
      break;
    case TieTopology::mesh:
      for (int i = 0; i < s; ++i) {
        for (int j = i + 1; j < s; ++j) pairs.emplace_back(i, j);
      }
      break;
  }
  return pairs;
}

PowerSystemParams sample_power_system_params(const PowerSystemConfig& config, std::mt19937_64& rng) {
  const int s = config.areas;
  PowerSystemParams p;
  p.sampling_period = config.sampling_period;
  for (int i = 0; i < s; ++i) {
    p.inertia.push_back(config.inertia.sample(rng));
    p.damping.push_back(config.damping.sample(rng));
    p.turbine_time.push_back(config.turbine_time.sample(rng));
    p.governor_time.push_back(config.governor_time.sample(rng));
    p.regulation.push_back(config.regulation.sample(rng));
  }
  p.tie = Matrix::Zero(s, s);
  for (const auto& [i, j] : tie_pairs_for(config)) {
    const double v = config.tie_strength.sample(rng);
    p.tie(i, j) = v;
    p.tie(j, i) = v;
  }
  return p;
}

namespace {

BlockPattern power_pattern(int s, const std::vector<std::pair<int, int>>& pairs) {
  BlockPattern pattern;
  pattern.state_dims.assign(s, kAreaStates);
  pattern.meas_dims.assign(s, kAreaOutputs);
  for (const auto& [i, j] : pairs) {
    pattern.nonzero_offdiag.insert({i, j});
    pattern.nonzero_offdiag.insert({j, i});
  }
  return pattern;
}

BlockPattern pattern_from_tie(const Matrix& tie) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < tie.rows(); ++i) {
    for (int j = i + 1; j < tie.cols(); ++j) {
      if (tie(i, j) != 0.0) pairs.emplace_back(i, j);
    }
  }
  return power_pattern(static_cast<int>(tie.rows()), pairs);
}

}  // namespace

ParameterSet power_system_parameter_set(const PowerSystemParams& params,
                                        const PowerSystemConfig& config) {
  const ContinuousBlocks cb = power_system_continuous(params);
  const DiscreteBlocks db = discretize(cb, params.sampling_period, config.discretization);
  const int s = params.areas();
  ParameterSet ps;
  ps.a = db.a;
  for (int i = 0; i < s; ++i) {
    ps.c.push_back(power_system_measurement());
    ps.q.push_back(config.process_noise * Matrix::Identity(kAreaStates, kAreaStates));
    ps.r.push_back(config.measurement_noise * Matrix::Identity(kAreaOutputs, kAreaOutputs));
  }
  return ps;
}

LisModel generate_power_system(const PowerSystemConfig& config, std::uint64_t seed) {
  if (config.areas <= 0) throw ModelError("power system: areas must be positive");
  std::mt19937_64 rng(seed);
  const BlockPattern pattern = power_pattern(config.areas, tie_pairs_for(config));
  std::vector<Epoch> epochs;
  const bool switching = config.switch_period > 0;
  for (int start = 0;; start += config.switch_period) {
    PowerSystemParams p = sample_power_system_params(config, rng);
    epochs.push_back({start, power_system_parameter_set(p, config)});
    if (!switching || start + config.switch_period > config.horizon) break;
  }
  return LisModel(pattern, std::move(epochs));
}

LisModel generate_power_system(const PowerSystemParams& params, const PowerSystemConfig& config) {
  params.validate();
  return LisModel::time_invariant(pattern_from_tie(params.tie),
                                  power_system_parameter_set(params, config));
}

}  // namespace lisest
