// Acceptance run: one PASS/FAIL line per criterion.  Exit status is the
// number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "helpers.hpp"
#include "lisest/markov.hpp"
#include "lisest/power_system.hpp"
#include "lisest/sim.hpp"
#include "lisest/stability.hpp"
#include "oracles.hpp"

using namespace lisest;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Matrix blocks_psd(const std::vector<int>& dims, std::mt19937_64& rng, double scale) {
  BlockMatrices b;
  for (int d : dims) b.push_back(random_psd(d, rng, scale));
  return block_diag(b);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// s = 1, theta = 1 DMRE against the plain Kalman covariance recursion.
Outcome ac1() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> nd(1, 6);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int n = nd(rng);
    const int m = std::uniform_int_distribution<int>(1, n)(rng);
    const Matrix a = random_with_radius(n, 1.1, rng);
    const Matrix c = random_matrix(m, n, rng);
    const Matrix q = random_psd(n, rng) + 0.1 * Matrix::Identity(n, n);
    const Matrix r = random_psd(m, rng) + 0.5 * Matrix::Identity(m, m);
    const LisModel model = testing_util::model_from_global(a, {n}, {c}, {q}, {r});
    const auto ref = oracle::kalman_covariances(a, c, q, r, Matrix::Identity(n, n), 100);
    DmreState st = DmreState::initial(model, 1.0);
    const std::vector<double> theta{1.0};
    for (int k = 1; k <= 100; ++k) {
      st = dmre_step(st, model, theta);
      worst = std::max({worst, oracle::rel_dev(st.p[0], ref.p[k]), oracle::rel_dev(st.p_bar[0], ref.p_bar[k])});
    }
  }
  return {worst < 1e-10, fmt("max relative deviation %.3g over 20 models", worst)};
}

Outcome ac2() {
  const LisModel m = scalar_model(1.0, 1.0, 1.0, 1.0);
  const std::vector<double> theta{1.0};
  const SteadyState st = steady_state_solve(m, theta);
  const double p = st.p_bar(0, 0);
  const double k = st.k.k[0](0, 0);
  const LiftedOperator op = build_lifted_operator(m, theta, steady_gain_terms(m, theta, st.p_bar));
  const double rho = operator_spectral_radius(op).value;
  const bool ok = st.converged() && std::abs(p - 1.6180339887) <= 1e-8 && std::abs(k - 0.6180) <= 1e-4 &&
                  std::abs(rho - 0.1459) <= 1e-3;
  return {ok, fmt("P_bar* %.10f, K* %.6f, rho %.6f", p, k, rho)};
}

Outcome ac3() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    RandomLisSpec spec;
    spec.subsystems = 1 + t % 5;
    spec.max_dim = 3;
    spec.coupling_scale = 0.5;
    spec.epochs = 3;
    spec.switch_period = 8;
    const LisModel model = random_lis(spec, rng);
    const auto off = model.pattern().state_offsets();
    BlockVectors xi;
    Vector global = random_matrix(model.n(), 1, rng);
    for (int i = 0; i < model.s(); ++i) xi.push_back(global.segment(off[i], model.state_dim(i)));
    for (int k = 0; k < 25; ++k) {
      xi = mean_recursion_step(markov_from_model(model, k), xi);
      global = model.global_a(k) * global;
      for (int i = 0; i < model.s(); ++i) {
        worst = std::max(worst, oracle::max_abs(xi[i] - global.segment(off[i], model.state_dim(i))));
      }
    }
  }
  return {worst < 1e-11, fmt("max abs deviation %.3g over 50 models", worst)};
}

// Half weakly coupled, half with an unstable mode that C_0 cannot see.
LisModel dichotomy_model(int t, std::mt19937_64& rng) {
  const int s = 2 + t % 3;
  const int n = 2 * s;
  Matrix a = Matrix::Zero(n, n);
  std::vector<Matrix> c, q, r;
  for (int i = 0; i < s; ++i) {
    a.block(2 * i, 2 * i, 2, 2) = random_with_radius(2, 0.5, rng);
    for (int j = 0; j < s; ++j) {
      if (j != i && std::bernoulli_distribution(0.5)(rng)) a.block(2 * i, 2 * j, 2, 2) = random_matrix(2, 2, rng, 0.05);
    }
    c.push_back(random_matrix(1, 2, rng));
    q.push_back(Matrix::Identity(2, 2));
    r.push_back(Matrix::Identity(1, 1));
  }
  if (t % 2 == 1) {
    Matrix blk(2, 2);
    blk << 1.5, 0.0, 0.0, 0.3;
    a.block(0, 0, 2, 2) = blk;
    c[0] << 0.0, 1.0;
  }
  return testing_util::model_from_global(a, std::vector<int>(s, 2), c, q, r);
}

Outcome ac4() {
  std::mt19937_64 rng(404);
  int agree = 0;
  int bounded = 0;
  int c1 = 0;
  for (int t = 0; t < 30; ++t) {
    const LisModel m = dichotomy_model(t, rng);
    const auto theta = decoupling_variables(m, DecouplingPolicy::out_neighbor, 0);
    const ConditionReport cond = verify_conditions(m, DecouplingPolicy::out_neighbor, 50);
    c1 += cond.c1 ? 1 : 0;
    const StabilityReport rep = boundedness_check(m, theta);
    const bool rho_ok = rep.spectral_radius && *rep.spectral_radius < 1.0;
    const bool probe = dmre_probe(m, DecouplingPolicy::out_neighbor).bounded;
    agree += (rho_ok == probe) ? 1 : 0;
    bounded += probe ? 1 : 0;
  }
  return {agree == 30 && c1 == 30,
          fmt("%g of 30 agree (%g bounded, %g uniformly reachable from the noise)", agree, bounded, c1)};
}

Outcome ac5() {
  std::mt19937_64 rng(505);
  int models = 0;
  double spread = 0.0;
  double worst_rho = 0.0;
  bool all_converged = true;
  for (std::uint64_t seed = 1; models < 10 && seed < 1000; ++seed) {
    const LisModel m = testing_util::random_model(seed, 3, 3, 0.2, 0.8);
    const auto theta = decoupling_variables(m, DecouplingPolicy::out_neighbor, 0);
    if (boundedness_check(m, theta).bounded != Verdict::yes) continue;
    ++models;
    std::vector<Matrix> fixed;
    for (int init = 0; init < 5; ++init) {
      SteadyStateOptions o;
      o.initial = blocks_psd(m.pattern().state_dims, rng, 10.0 * init);
      const SteadyState st = steady_state_solve(m, theta, o);
      all_converged = all_converged && st.converged();
      fixed.push_back(st.p_bar);
      if (init == 0) {
        const Matrix a = m.global_a(0);
        const Matrix k = st.k.global();
        worst_rho = std::max(worst_rho, oracle::rho(a - k * m.global_c(0) * a));
      }
    }
    for (const auto& f : fixed) spread = std::max(spread, oracle::max_abs(f - fixed.front()));
  }
  const bool ok = models == 10 && all_converged && spread <= 1e-8 && worst_rho < 1.0;
  return {ok, fmt("fixed-point spread %.3g, max rho(A - KCA) %.4f, %g models", spread, worst_rho, models)};
}

Outcome ac6() {
  int found = 0;
  int counter = 0;
  for (std::uint64_t seed = 1; found < 20 && seed < 5000; ++seed) {
    const LisModel m = testing_util::random_model(seed, 4, 3, 0.2, 0.6);
    const auto theta = decoupling_variables(m, DecouplingPolicy::out_neighbor, 0);
    bool rows = true;
    for (int i = 0; i < m.s() && rows; ++i) rows = distributed_lmi_check(m, i, theta[i]).feasible;
    if (!rows) continue;
    ++found;
    if (boundedness_check(m, theta).bounded != Verdict::yes) ++counter;
  }
  return {found == 20 && counter == 0, fmt("%g models with all rows feasible, %g counterexamples", found, counter)};
}

Outcome ac7() {
  std::mt19937_64 rng(707);
  double adj = 0.0;
  for (int t = 0; t < 100; ++t) {
    const LisModel m = testing_util::random_model(1000 + t, 3, 3, 0.3);
    const auto theta = decoupling_variables(m, DecouplingPolicy::out_neighbor, 0);
    const int mm = m.global_c(0).rows();
    std::vector<Matrix> gains;
    for (int i = 0; i < m.s(); ++i) gains.push_back(random_matrix(m.n(), mm, rng, 0.5));
    const LiftedOperator op = build_lifted_operator(m, theta, gains);
    const Matrix x = testing_util::random_sym(m.n(), rng);
    const Matrix y = testing_util::random_sym(m.n(), rng);
    const double lhs = frobenius_inner(op.apply(x), y);
    adj = std::max(adj, std::abs(lhs - frobenius_inner(x, adjoint_apply(op, y))) / std::max(1.0, std::abs(lhs)));
  }
  double slack = -1e300;
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t % 5;
    Matrix prod = Matrix::Identity(n, n);
    Matrix lifted = Matrix::Identity(n * n, n * n);
    for (int k = 0; k < 1 + t % 7; ++k) {
      const Matrix x = random_matrix(n, n, rng, 0.7);
      prod = x * prod;
      lifted = kron(x, x) * lifted;
    }
    const double alpha = spectral_norm(prod);
    slack = std::max(slack, spectral_norm(lifted) - (std::sqrt(static_cast<double>(n)) * alpha * alpha + 1e-9));
  }
  double mono = 1e300;
  for (int t = 0; t < 50; ++t) {
    const LisModel m = testing_util::random_model(2000 + t, 3, 3, 0.4);
    const auto theta = decoupling_variables(m, DecouplingPolicy::out_neighbor, 0);
    BlockMatrices lo, hi;
    for (int i = 0; i < m.s(); ++i) {
      lo.push_back(random_psd(m.state_dim(i), rng));
      hi.push_back(lo.back() + random_psd(m.state_dim(i), rng));
    }
    const DmreState a = dmre_step(DmreState::initial(lo), m, theta);
    const DmreState b = dmre_step(DmreState::initial(hi), m, theta);
    for (int i = 0; i < m.s(); ++i) {
      mono = std::min({mono, oracle::lambda_min(b.p[i] - a.p[i]), oracle::lambda_min(b.p_bar[i] - a.p_bar[i])});
    }
  }
  const bool ok = adj < 1e-10 && slack <= 0.0 && mono > -1e-9;
  return {ok, fmt("adjoint gap %.3g, norm-bound slack %.3g, min Loewner eig %.3g", adj, slack, mono)};
}

Outcome ac8() {
  PowerSystemConfig cfg;
  cfg.areas = 10;
  cfg.switch_period = 100;
  cfg.horizon = 500;
  const LisModel ps = generate_power_system(cfg, 42);
  EstimatorConfig dist;
  dist.kind = EstimatorKind::distributed;
  EstimatorConfig cen;
  cen.kind = EstimatorKind::centralized;
  NoiseSpec noise;
  noise.kind = NoiseKind::uniform;
  MonteCarloOptions o;
  o.trials = 500;
  o.horizon = 500;
  o.seed = 2024;
  const auto ens = monte_carlo_rmse(ps, {dist, cen}, noise, o);
  bool finite = ens[0].diverged == 0;
  double peak = 0.0;
  for (double v : ens[0].rmse) {
    finite = finite && std::isfinite(v);
    peak = std::max(peak, v);
  }
  finite = finite && peak < 1e6;
  const BootstrapResult boot = bootstrap_mean_rmse_difference(ens[1], ens[0], 2000, 0.95, 7);
  const DecayResult decay = noise_free_decay(ps, dist, 500, 3);
  const bool ok = finite && boot.a_not_worse && decay.first_below_1e6 >= 0;
  return {ok, fmt("(a) peak RMSE %.4g; (b) bootstrap lower bound %.4g; (c) below 1e-6 at k = %g", peak, boot.lower,
                  decay.first_below_1e6)};
}

Outcome ac9() {
  Matrix a = Matrix::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    a.block(2 * i, 2 * i, 2, 2) = 0.3 * Matrix::Identity(2, 2);
    a(2 * i + 1, 2 * ((i + 1) % 3) + 1) = 1.0;
    a(2 * i, 2 * ((i + 2) % 3)) = 0.5;
  }
  Matrix c(1, 2);
  c << 1.0, 0.0;
  const LisModel m = testing_util::model_from_global(a, {2, 2, 2}, std::vector<Matrix>(3, c),
                                                     std::vector<Matrix>(3, Matrix::Identity(2, 2)),
                                                     std::vector<Matrix>(3, Matrix::Identity(1, 1)));
  std::vector<double> grid;
  for (int g = 0; g <= 20; ++g) grid.push_back(0.05 * g);
  const SweepReport rep = weak_coupling_sweep(m, grid, DecouplingPolicy::out_neighbor);
  const bool ok = rep.precondition && rep.rows.front().bounded && rep.prefix;
  return {ok, fmt("precondition %g, a = 0 bounded %g, first unbounded scale %.3g", rep.precondition,
                  rep.rows.front().bounded, rep.first_unbounded ? *rep.first_unbounded : -1.0)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {"AC1 classical reduction", 5, ac1},      {"AC2 golden-ratio fixed point", 1, ac2},
      {"AC3 Markov mean equivalence", 5, ac3}, {"AC4 boundedness dichotomy", 60, ac4},
      {"AC5 steady-state uniqueness", 30, ac5}, {"AC6 rows imply boundedness", 30, ac6},
      {"AC7 operator properties", 10, ac7},     {"AC8 power-system experiment", 600, ac8},
      {"AC9 weak-coupling sweep", 60, ac9},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs <= c.limit_s;
    if (!pass) ++failed;
    std::printf("%s %s: %s (%.2f s, limit %.0f s)\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.limit_s);
    std::fflush(stdout);
  }
  return failed;
}
