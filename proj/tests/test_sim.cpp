#include <omp.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "lisest/power_system.hpp"
#include "lisest/sim.hpp"
#include "oracles.hpp"

using namespace lisest;

namespace {

EstimatorConfig config_of(EstimatorKind kind, DecouplingPolicy policy = DecouplingPolicy::out_neighbor) {
  EstimatorConfig c;
  c.kind = kind;
  c.policy = policy;
  return c;
}

double tail_mean_square(const std::vector<double>& rmse, int from) {
  double acc = 0.0;
  for (std::size_t k = from; k < rmse.size(); ++k) acc += rmse[k] * rmse[k];
  return acc / static_cast<double>(rmse.size() - from);
}

}  // namespace

TEST_CASE("noise draws have the declared covariance") {
  std::mt19937_64 rng(1);
  Matrix l(2, 2);
  l << 1.0, 0.0, 0.6, 0.8;
  const Matrix target = l * l.transpose();
  for (NoiseKind kind : {NoiseKind::gaussian, NoiseKind::uniform}) {
    Matrix acc = Matrix::Zero(2, 2);
    Vector mean = Vector::Zero(2);
    const int n = 1000000;
    for (int t = 0; t < n; ++t) {
      const Vector v = draw_noise(kind, l, rng);
      acc += v * v.transpose();
      mean += v;
    }
    acc /= n;
    mean /= n;
    CHECK(oracle::max_abs(acc - target) <= 0.02 * oracle::max_abs(target));
    CHECK(mean.cwiseAbs().maxCoeff() < 0.01);
  }
  // uniform draws stay inside the stretched cube
  for (int t = 0; t < 1000; ++t) {
    const Vector u = draw_noise(NoiseKind::uniform, Matrix::Identity(3, 3), rng);
    CHECK(u.cwiseAbs().maxCoeff() <= std::sqrt(3.0));
  }
  CHECK(draw_noise(NoiseKind::none, l, rng).isZero(0.0));
  CHECK(parse_noise_kind("uniform") == NoiseKind::uniform);
  CHECK_THROWS(parse_noise_kind("laplace"));
}

TEST_CASE("per-trial seeds are distinct and stable") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t t = 0; t < 10000; ++t) seen.insert(mix_seed(42, t));
  CHECK(seen.size() == 10000);
  CHECK(mix_seed(42, 3) == mix_seed(42, 3));
  CHECK(mix_seed(42, 3) != mix_seed(43, 3));
}

TEST_CASE("perfect start without noise gives zero error") {
  const LisModel m = testing_util::random_model(3, 3, 3, 0.3);
  std::vector<PreparedEstimator> prep;
  for (auto kind : {EstimatorKind::distributed, EstimatorKind::steady, EstimatorKind::centralized}) {
    prep.push_back(prepare_estimator(m, config_of(kind), 40));
  }
  NoiseSpec none;
  none.kind = NoiseKind::none;
  const auto out = simulate_trial(m, prep, none, 40, 5, InitialKind::exact);
  for (const auto& series : out.sq_error)
    for (double v : series) CHECK(v == 0.0);
}

TEST_CASE("trials replay exactly from their seed") {
  const LisModel m = testing_util::random_model(4, 3, 2, 0.3);
  const std::vector<PreparedEstimator> prep{prepare_estimator(m, config_of(EstimatorKind::distributed), 30)};
  const NoiseSpec noise;
  const auto a = simulate_trial(m, prep, noise, 30, 99);
  const auto b = simulate_trial(m, prep, noise, 30, 99);
  const auto c = simulate_trial(m, prep, noise, 30, 100);
  CHECK(a.sq_error == b.sq_error);
  REQUIRE(a.x.size() == 31);
  for (std::size_t k = 0; k < a.x.size(); ++k) CHECK((a.x[k] - b.x[k]).isZero(0.0));
  CHECK(a.sq_error != c.sq_error);
}

TEST_CASE("paired trials: estimators share one trajectory") {
  const LisModel m = testing_util::random_model(5, 3, 2, 0.3);
  auto c1 = config_of(EstimatorKind::distributed);
  c1.label = "first";
  auto c2 = c1;
  c2.label = "second";
  MonteCarloOptions o;
  o.trials = 20;
  o.horizon = 25;
  const auto ens = monte_carlo_rmse(m, {c1, c2}, NoiseSpec{}, o);
  CHECK(ens[0].rmse == ens[1].rmse);
  CHECK(ens[0].label == "first");
}

TEST_CASE("rmse is the root of the pooled squared error") {
  const LisModel m = testing_util::random_model(6, 4, 2, 0.3);
  MonteCarloOptions o;
  o.trials = 12;
  o.horizon = 15;
  const auto ens = monte_carlo_rmse(m, {config_of(EstimatorKind::distributed)}, NoiseSpec{}, o).front();
  REQUIRE(ens.sq_error.size() == 12);
  for (int k = 0; k <= 15; ++k) {
    double acc = 0.0;
    for (int t = 0; t < 12; ++t) {
      // each trial also stands alone
      const std::vector<PreparedEstimator> prep{
          prepare_estimator(m, config_of(EstimatorKind::distributed), 15)};
      if (k == 0) {
        const auto single = simulate_trial(m, prep, NoiseSpec{}, 15, mix_seed(o.seed, t), o.init, false);
        CHECK(single.sq_error[0] == ens.sq_error[t]);
      }
      acc += ens.sq_error[t][k];
    }
    CHECK(ens.rmse[k] == doctest::Approx(std::sqrt(acc / (4.0 * 12.0))).epsilon(1e-14));
  }
}

TEST_CASE("empirical error variance matches the steady Riccati value") {
  // three decoupled scalar subsystems a = 1, c = q = r = 1: P = 1/golden
  const LisModel m = testing_util::scalar_network(Matrix::Identity(3, 3));
  MonteCarloOptions o;
  o.trials = 4000;
  o.horizon = 60;
  for (NoiseKind kind : {NoiseKind::gaussian, NoiseKind::uniform}) {
    NoiseSpec noise;
    noise.kind = kind;
    const auto ens = monte_carlo_rmse(m, {config_of(EstimatorKind::distributed)}, noise, o).front();
    const double expected = 1.0 / oracle::golden();
    CHECK(std::abs(tail_mean_square(ens.rmse, 20) - expected) <= 0.1 * expected);
  }
}

TEST_CASE("decoupled distributed filter equals the centralized one") {
  std::mt19937_64 rng(7);
  Matrix a = Matrix::Zero(5, 5);
  a.block(0, 0, 2, 2) = random_matrix(2, 2, rng, 0.7);
  a.block(2, 2, 3, 3) = random_matrix(3, 3, rng, 0.5);
  std::vector<Matrix> c{random_matrix(1, 2, rng), random_matrix(2, 3, rng)};
  std::vector<Matrix> q{Matrix::Identity(2, 2), 0.5 * Matrix::Identity(3, 3)};
  std::vector<Matrix> r{Matrix::Identity(1, 1), Matrix::Identity(2, 2)};
  const LisModel m = testing_util::model_from_global(a, {2, 3}, c, q, r);
  const std::vector<PreparedEstimator> prep{prepare_estimator(m, config_of(EstimatorKind::distributed), 50),
                                            prepare_estimator(m, config_of(EstimatorKind::centralized), 50)};
  const auto out = simulate_trial(m, prep, NoiseSpec{}, 50, 3);
  for (int k = 0; k <= 50; ++k) {
    CHECK(oracle::max_abs(out.x_hat[0][k] - out.x_hat[1][k]) <= 1e-10 * std::max(1.0, out.x_hat[1][k].norm()));
  }
}

TEST_CASE("centralized covariances follow the textbook recursion") {
  const LisModel m = testing_util::random_model(8, 3, 2, 0.3);
  const auto cov = centralized_covariances(m, 20, 2.0);
  const auto ref = oracle::kalman_covariances(m.global_a(0), m.global_c(0), m.global_q(0), m.global_r(0),
                                              2.0 * Matrix::Identity(m.n(), m.n()), 20);
  for (int k = 0; k <= 20; ++k) {
    CHECK(oracle::rel_dev(cov.p[k], ref.p[k]) < 1e-10);
    CHECK(oracle::rel_dev(cov.p_bar[k], ref.p_bar[k]) < 1e-10);
  }
  CHECK(cov.gains.size() == 20);
}

TEST_CASE("serial and parallel Monte Carlo agree bitwise for any thread count") {
  const LisModel m = testing_util::random_model(9, 4, 2, 0.3);
  MonteCarloOptions o;
  o.trials = 37;
  o.horizon = 20;
  o.seed = 11;
  const std::vector<EstimatorConfig> cfg{config_of(EstimatorKind::distributed),
                                         config_of(EstimatorKind::centralized)};
  const auto serial = reference::monte_carlo_rmse(m, cfg, NoiseSpec{}, o);
  const int saved = omp_get_max_threads();
  for (int threads : {1, 3, 8}) {
    omp_set_num_threads(threads);
    const auto par = monte_carlo_rmse(m, cfg, NoiseSpec{}, o);
    for (std::size_t e = 0; e < cfg.size(); ++e) CHECK(par[e].rmse == serial[e].rmse);
  }
  omp_set_num_threads(saved);
}

TEST_CASE("invalid Monte Carlo requests are rejected") {
  const LisModel m = testing_util::random_model(10, 2, 2);
  MonteCarloOptions o;
  o.trials = 0;
  CHECK_THROWS_AS(monte_carlo_rmse(m, {config_of(EstimatorKind::distributed)}, NoiseSpec{}, o),
                  std::invalid_argument);
  o.trials = 2;
  CHECK_THROWS_AS(monte_carlo_rmse(m, {}, NoiseSpec{}, o), std::invalid_argument);
}

TEST_CASE("decay ratio fit") {
  std::vector<double> geo;
  for (int k = 0; k < 100; ++k) geo.push_back(3.0 * std::pow(0.9, k));
  CHECK(fit_decay_ratio(geo) == doctest::Approx(0.9).epsilon(1e-10));
  std::vector<double> flat(50, 2.0);
  CHECK(fit_decay_ratio(flat) == doctest::Approx(1.0));
}

TEST_CASE("noise-free decay verdicts") {
  const auto golden = noise_free_decay(scalar_model(1.0, 1.0, 1.0, 1.0), config_of(EstimatorKind::distributed), 60);
  CHECK(golden.verdict == DecayVerdict::exponential);
  CHECK(golden.ratio == doctest::Approx(1.0 / (oracle::golden() * oracle::golden())).epsilon(1e-3));

  const auto stuck = noise_free_decay(scalar_model(1.0, 0.0, 1.0, 1.0), config_of(EstimatorKind::distributed), 60);
  CHECK(stuck.verdict == DecayVerdict::marginal);

  const auto blowup = noise_free_decay(scalar_model(2.0, 0.0, 1.0, 1.0), config_of(EstimatorKind::distributed), 60);
  CHECK(blowup.verdict == DecayVerdict::divergent);

  PowerSystemConfig cfg;
  cfg.areas = 5;
  const LisModel ps = generate_power_system(cfg, 42);
  const auto res = noise_free_decay(ps, config_of(EstimatorKind::distributed), 300);
  CHECK(res.verdict == DecayVerdict::exponential);
  CHECK(res.final_value < 1e-6 * res.initial);

  const auto in_policy = noise_free_decay(testing_util::random_model(11, 4, 3, 0.2),
                                          config_of(EstimatorKind::distributed, DecouplingPolicy::in_neighbor), 200);
  CHECK(in_policy.verdict == DecayVerdict::exponential);
}

TEST_CASE("paired bootstrap") {
  const LisModel m = testing_util::random_model(12, 4, 2, 0.4);
  MonteCarloOptions o;
  o.trials = 60;
  o.horizon = 40;
  const auto ens = monte_carlo_rmse(
      m, {config_of(EstimatorKind::centralized), config_of(EstimatorKind::distributed)}, NoiseSpec{}, o);
  const auto same = bootstrap_mean_rmse_difference(ens[0], ens[0], 500);
  CHECK(same.mean_difference == 0.0);
  CHECK(same.lower == 0.0);
  CHECK(same.a_not_worse);

  const auto cmp = bootstrap_mean_rmse_difference(ens[0], ens[1], 2000, 0.95, 7);
  CHECK(cmp.replicates == 2000);
  CHECK(cmp.lower <= cmp.mean_difference);
  // the optimal filter is not worse than the distributed one
  CHECK(cmp.a_not_worse);
  CHECK(cmp.mean_difference > 0.0);
  const auto again = bootstrap_mean_rmse_difference(ens[0], ens[1], 2000, 0.95, 7);
  CHECK(again.lower == cmp.lower);

  std::ostringstream csv;
  write_rmse_csv(csv, ens);
  CHECK(csv.str().rfind("config,k,rmse,trials_used,diverged\n", 0) == 0);
}
