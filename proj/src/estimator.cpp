#include "lisest/estimator.hpp"

#include <cmath>
#include <exception>

#include <omp.h>

namespace lisest {

DmreState DmreState::initial(const LisModel& model, double scale) {
  BlockMatrices p0;
  for (int i = 0; i < model.s(); ++i) {
    p0.push_back(scale * Matrix::Identity(model.state_dim(i), model.state_dim(i)));
  }
  return initial(std::move(p0));
}

DmreState DmreState::initial(BlockMatrices p0) {
  DmreState st;
  st.k = 0;
  for (auto& b : p0) b = symmetrize(b);
  st.p_bar = p0;
  st.p = std::move(p0);
  return st;
}

EstimatorState EstimatorState::initial(BlockVectors x_hat0) {
  EstimatorState est;
  est.k = 0;
  est.x_bar = x_hat0;
  est.x_hat = std::move(x_hat0);
  return est;
}

Matrix posterior_block(const Matrix& p_bar, const Matrix& c, const Matrix& r) {
  if (c.rows() == 0) return p_bar;
  const Matrix cp = c * p_bar;
  const Matrix innovation = cp * c.transpose() + r;
  return symmetrize(p_bar - cp.transpose() * spd_solve(innovation, cp, "innovation matrix"));
}

Matrix gain_block(const Matrix& p_bar, const Matrix& c, const Matrix& r) {
  if (c.rows() == 0) return Matrix::Zero(p_bar.rows(), 0);
  const Matrix cp = c * p_bar;
  const Matrix innovation = cp * c.transpose() + r;
  // K^T = S^{-1} C P_bar since S and P_bar are symmetric
  return spd_solve(innovation, cp, "innovation matrix").transpose();
}

namespace {

void check_theta(const LisModel& model, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != model.s()) {
    throw std::invalid_argument("decoupling variable count " + std::to_string(theta.size()) +
                                " does not match s = " + std::to_string(model.s()));
  }
}

void check_dmre_state(const DmreState& st, const LisModel& model) {
  if (static_cast<int>(st.p.size()) != model.s()) {
    throw std::invalid_argument("DMRE state has the wrong number of blocks");
  }
  for (int i = 0; i < model.s(); ++i) {
    if (st.p[i].rows() != model.state_dim(i) || st.p[i].cols() != model.state_dim(i)) {
      throw std::invalid_argument("DMRE block " + std::to_string(i) + " has wrong dimensions");
    }
  }
}

void check_estimator_inputs(const EstimatorState& est, const BlockVectors& z, const LisModel& model,
                            const GainSet& gains) {
  const int s = model.s();
  if (static_cast<int>(est.x_hat.size()) != s) {
    throw std::invalid_argument("missing estimate blocks: have " + std::to_string(est.x_hat.size()) +
                                ", need " + std::to_string(s));
  }
  if (static_cast<int>(z.size()) != s || static_cast<int>(gains.k.size()) != s) {
    throw std::invalid_argument("measurement or gain block count does not match s");
  }
  for (int i = 0; i < s; ++i) {
    if (est.x_hat[i].size() != model.state_dim(i)) {
      throw std::invalid_argument("estimate block " + std::to_string(i) + " has wrong size");
    }
    if (z[i].size() != model.meas_dim(i) || gains.k[i].rows() != model.state_dim(i) ||
        gains.k[i].cols() != model.meas_dim(i)) {
      throw std::invalid_argument("measurement/gain block " + std::to_string(i) + " has wrong size");
    }
  }
}

/// Runs body(i) for i in [0, s) across threads and rethrows the first
/// exception after the loop.
template <class Body>
void parallel_for_subsystems(int s, Body&& body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < s; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(lisest_subsystem_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

DmreState dmre_step(const DmreState& state, const LisModel& model, std::span<const double> theta) {
  check_theta(model, theta);
  check_dmre_state(state, model);
  const int k = state.k;
  DmreState next;
  next.k = k + 1;
  next.p.resize(model.s());
  next.p_bar.resize(model.s());
  auto posterior_of = [&state](int j) -> const Matrix& { return state.p[j]; };
  parallel_for_subsystems(model.s(), [&](int i) {
    next.p_bar[i] = prior_block(model, k, i, theta[i], posterior_of);
    next.p[i] = posterior_block(next.p_bar[i], model.c(i, k + 1), model.r(i, k + 1));
  });
  return next;
}

GainSet local_gains(const DmreState& state, const LisModel& model) {
  check_dmre_state(state, model);
  GainSet g;
  g.k.resize(model.s());
  parallel_for_subsystems(model.s(), [&](int i) {
    g.k[i] = gain_block(state.p_bar[i], model.c(i, state.k), model.r(i, state.k));
  });
  return g;
}

EstimatorState estimator_step(const EstimatorState& est, const BlockVectors& z, const LisModel& model,
                              const GainSet& gains) {
  check_estimator_inputs(est, z, model, gains);
  const int k = est.k;
  EstimatorState next;
  next.k = k + 1;
  next.x_bar.resize(model.s());
  next.x_hat.resize(model.s());
  auto estimate_of = [&est](int j) -> const Vector& { return est.x_hat[j]; };
  parallel_for_subsystems(model.s(), [&](int i) {
    next.x_bar[i] = predict_block(model, k, i, estimate_of);
    next.x_hat[i] = next.x_bar[i] + gains.k[i] * (z[i] - model.c(i, k + 1) * next.x_bar[i]);
  });
  return next;
}

EstimatorState steady_estimator_step(const EstimatorState& est, const BlockVectors& z,
                                     const LisModel& model, const GainSet& k_star) {
  return estimator_step(est, z, model, k_star);
}

namespace reference {

DmreState dmre_step(const DmreState& state, const LisModel& model, std::span<const double> theta) {
  check_theta(model, theta);
  check_dmre_state(state, model);
  const int k = state.k;
  DmreState next;
  next.k = k + 1;
  for (int i = 0; i < model.s(); ++i) {
    next.p_bar.push_back(
        prior_block(model, k, i, theta[i], [&state](int j) -> const Matrix& { return state.p[j]; }));
    next.p.push_back(posterior_block(next.p_bar[i], model.c(i, k + 1), model.r(i, k + 1)));
  }
  return next;
}

EstimatorState estimator_step(const EstimatorState& est, const BlockVectors& z, const LisModel& model,
                              const GainSet& gains) {
  check_estimator_inputs(est, z, model, gains);
  const int k = est.k;
  EstimatorState next;
  next.k = k + 1;
  for (int i = 0; i < model.s(); ++i) {
    Vector xb = predict_block(model, k, i, [&est](int j) -> const Vector& { return est.x_hat[j]; });
    next.x_hat.push_back(xb + gains.k[i] * (z[i] - model.c(i, k + 1) * xb));
    next.x_bar.push_back(std::move(xb));
  }
  return next;
}

}  // namespace reference

Matrix scaled_transition(const LisModel& model, int k, std::span<const double> theta) {
  check_theta(model, theta);
  Matrix a = model.global_a(k);
  const auto off = model.pattern().state_offsets();
  for (int i = 0; i < model.s(); ++i) a.middleRows(off[i], model.state_dim(i)) *= theta[i];
  return a;
}

Matrix block_mask(std::span<const int> dims) {
  BlockMatrices ones;
  for (int d : dims) ones.push_back(Matrix::Ones(d, d));
  return block_diag(ones);
}

Matrix riccati_update_map(const Matrix& x, const Matrix& c, const Matrix& r) {
  if (c.rows() == 0) return x;
  const Matrix cx = c * x;
  return symmetrize(x - cx.transpose() * spd_solve(cx * c.transpose() + r, cx, "innovation matrix"));
}

Matrix prediction_map(const Matrix& x, const Matrix& scaled_a, const Matrix& q,
                      std::span<const int> dims) {
  const auto off = offsets_of(dims);
  Matrix out = q;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    // A_i = E_i * scaledA keeps only block row i
    Matrix ai = Matrix::Zero(scaled_a.rows(), scaled_a.cols());
    ai.middleRows(off[i], dims[i]) = scaled_a.middleRows(off[i], dims[i]);
    out.noalias() += ai * x * ai.transpose();
  }
  return symmetrize(out);
}

Matrix compact_dmre_step(const Matrix& p_bar, const Matrix& scaled_a, const Matrix& c,
                         const Matrix& q, const Matrix& r, std::span<const int> dims) {
  const Matrix cp = c * p_bar;
  const Matrix innovation = cp * c.transpose() + r;
  const Matrix correction = (scaled_a * cp.transpose()) *
                            spd_solve(innovation, cp * scaled_a.transpose(), "global innovation matrix");
  const Matrix full = scaled_a * p_bar * scaled_a.transpose() + q - correction;
  return symmetrize(block_mask(dims).cwiseProduct(full));
}

Matrix compact_dmre_step(const Matrix& p_bar, const LisModel& model, int k,
                         std::span<const double> theta) {
  return compact_dmre_step(p_bar, scaled_transition(model, k, theta), model.global_c(k),
                           model.global_q(k), model.global_r(k), model.pattern().state_dims);
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::max_iterations: return "max-iterations";
  }
  return "?";
}

GainSet gains_from_global(const Matrix& p_bar, const LisModel& model, int k) {
  const auto off = model.pattern().state_offsets();
  GainSet g;
  for (int i = 0; i < model.s(); ++i) {
    const int ni = model.state_dim(i);
    g.k.push_back(gain_block(p_bar.block(off[i], off[i], ni, ni), model.c(i, k), model.r(i, k)));
  }
  return g;
}

SteadyState steady_state_solve(const LisModel& model, std::span<const double> theta,
                               const SteadyStateOptions& options) {
  if (!model.is_time_invariant()) {
    throw std::invalid_argument("steady_state_solve requires a time-invariant model");
  }
  check_theta(model, theta);
  for (double t : theta) {
    if (t == 0.0) throw std::invalid_argument("decoupling variables must be nonzero");
  }
  const Matrix as = scaled_transition(model, 0, theta);
  const Matrix c = model.global_c(0);
  const Matrix q = model.global_q(0);
  const Matrix r = model.global_r(0);
  const auto& dims = model.pattern().state_dims;
  const double ceiling = options.ceiling_ratio * std::max(q.trace(), 1e-300);

  SteadyState out;
  out.theta.assign(theta.begin(), theta.end());
  Matrix x = options.initial ? symmetrize(*options.initial) : q;
  if (x.rows() != model.n() || x.cols() != model.n()) {
    throw std::invalid_argument("steady_state_solve: initial P_bar must be n x n");
  }
  out.status = SolveStatus::max_iterations;
  for (int it = 1; it <= options.max_iter; ++it) {
    Matrix next = compact_dmre_step(x, as, c, q, r, dims);
    out.iterations = it;
    if (!next.allFinite() || next.trace() > ceiling) {
      out.status = SolveStatus::diverged;
      x = std::move(next);
      break;
    }
    const double delta = (next - x).cwiseAbs().maxCoeff();
    x = std::move(next);
    if (delta <= options.tol * std::max(1.0, x.cwiseAbs().maxCoeff())) {
      out.status = SolveStatus::converged;
      break;
    }
  }
  out.p_bar = x;
  if (x.allFinite()) {
    out.residual = (compact_dmre_step(x, as, c, q, r, dims) - x).cwiseAbs().maxCoeff();
    out.k = gains_from_global(x, model, 0);
  } else {
    out.residual = std::numeric_limits<double>::infinity();
  }
  return out;
}

DistributedFilter::DistributedFilter(const LisModel& model, DecouplingPolicy policy, BlockVectors x_hat0,
                                     double p0_scale)
    : model_(&model),
      policy_(policy),
      dmre_(DmreState::initial(model, p0_scale)),
      est_(EstimatorState::initial(std::move(x_hat0))) {}

void DistributedFilter::step(const BlockVectors& z) {
  const auto theta = decoupling_variables(*model_, policy_, dmre_.k);
  dmre_ = dmre_step(dmre_, *model_, theta);
  gains_ = local_gains(dmre_, *model_);
  est_ = estimator_step(est_, z, *model_, gains_);
}

GainSchedule distributed_gain_schedule(const LisModel& model, DecouplingPolicy policy, int horizon,
                                       double p0_scale) {
  GainSchedule sched;
  sched.states.reserve(horizon + 1);
  sched.gains.reserve(horizon);
  sched.states.push_back(DmreState::initial(model, p0_scale));
  for (int k = 0; k < horizon; ++k) {
    const auto theta = decoupling_variables(model, policy, k);
    sched.states.push_back(dmre_step(sched.states.back(), model, theta));
    sched.gains.push_back(local_gains(sched.states.back(), model));
  }
  return sched;
}

}  // namespace lisest
