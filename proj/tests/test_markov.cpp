#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "lisest/markov.hpp"
#include "oracles.hpp"

using namespace lisest;

namespace {

BlockMatrices random_gamma(const std::vector<int>& dims, std::mt19937_64& rng, double scale,
                           const std::vector<std::pair<int, int>>& links) {
  const int s = static_cast<int>(dims.size());
  BlockMatrices g(s * s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) g[i * s + j] = Matrix::Zero(dims[i], dims[j]);
  for (int i = 0; i < s; ++i) g[i * s + i] = random_matrix(dims[i], dims[i], rng, scale);
  for (auto [i, j] : links) g[i * s + j] = random_matrix(dims[i], dims[j], rng, scale);
  return g;
}

BlockVectors random_blocks(const std::vector<int>& dims, std::mt19937_64& rng) {
  BlockVectors v;
  for (int d : dims) v.push_back(random_matrix(d, 1, rng));
  return v;
}

SecondMomentState initial_moments(const BlockVectors& zeta) {
  SecondMomentState sm;
  const double s = static_cast<double>(zeta.size());
  for (const auto& z : zeta) sm.xi.push_back(s * z * z.transpose());
  return sm;
}

}  // namespace

TEST_CASE("transition tables") {
  std::mt19937_64 rng(1);
  const std::vector<int> dims{2, 1, 3};
  const auto diag = build_markov_equivalent(dims, random_gamma(dims, rng, 1.0, {}));
  CHECK(oracle::max_abs(diag.p - Matrix::Identity(3, 3)) == 0.0);
  CHECK(diag.stochastic());

  const std::vector<int> two{1, 1};
  const auto full = build_markov_equivalent(two, random_gamma(two, rng, 1.0, {{0, 1}, {1, 0}}));
  CHECK(oracle::max_abs(full.p - Matrix::Constant(2, 2, 0.5)) == 0.0);
  CHECK(full.stochastic());

  // one-way coupling: the source column loses mass, the sink column gains it
  const auto one_way = build_markov_equivalent(two, random_gamma(two, rng, 1.0, {{0, 1}}));
  CHECK(one_way.p(0, 0) == 0.5);
  CHECK(one_way.p(0, 1) == 0.5);
  CHECK(one_way.p(1, 1) == 1.0);
  CHECK(one_way.column_sums(0) == 0.5);
  CHECK(one_way.column_sums(1) == 1.5);
  CHECK(one_way.flagged_columns == std::vector<int>{0, 1});
  CHECK_FALSE(one_way.stochastic());
  CHECK(one_way.scale(0) == 2.0);
  CHECK(one_way.scale(1) == 1.0);

  BlockMatrices wrong(4, Matrix::Zero(1, 1));
  wrong[1] = Matrix::Zero(2, 1);
  CHECK_THROWS_AS(build_markov_equivalent(two, wrong), std::invalid_argument);
}

TEST_CASE("tiny blocks below the zero tolerance are absent") {
  const std::vector<int> two{1, 1};
  BlockMatrices g{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1e-14), Matrix::Zero(1, 1),
                  Matrix::Constant(1, 1, 0.5)};
  CHECK(build_markov_equivalent(two, g, 1e-12).in[0].empty());
  CHECK(build_markov_equivalent(two, g, 0.0).in[0] == std::vector<int>{1});
}

TEST_CASE("mean recursion reproduces the interconnected system") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const LisModel m = testing_util::random_model(100 + trial, 4, 3, 0.5, 0.9, 0.5);
    const auto me = markov_from_model(m, 0);
    BlockVectors xi = random_blocks(m.pattern().state_dims, rng);
    BlockVectors zeta = xi;
    Vector global = Vector::Zero(m.n());
    const auto off = offsets_of(m.pattern().state_dims);
    for (int i = 0; i < m.s(); ++i) global.segment(off[i], xi[i].size()) = xi[i];
    for (int k = 0; k < 15; ++k) {
      xi = mean_recursion_step(me, xi);
      zeta = direct_lis_step(me, zeta);
      global = m.global_a(0) * global;
      for (int i = 0; i < m.s(); ++i) {
        const double ref = std::max(1.0, global.segment(off[i], xi[i].size()).cwiseAbs().maxCoeff());
        CHECK(oracle::max_abs(xi[i] - zeta[i]) <= 1e-12 * ref);
        CHECK(oracle::max_abs(xi[i] - global.segment(off[i], xi[i].size())) <= 1e-12 * ref);
      }
    }
  }
}

TEST_CASE("decoupled chain is a set of independent powers") {
  std::mt19937_64 rng(3);
  const std::vector<int> dims{2, 3};
  const auto me = build_markov_equivalent(dims, random_gamma(dims, rng, 0.8, {}));
  const BlockVectors z0 = random_blocks(dims, rng);
  BlockVectors xi = z0;
  for (int k = 1; k <= 6; ++k) {
    xi = mean_recursion_step(me, xi);
    for (int i = 0; i < 2; ++i) {
      Matrix power = Matrix::Identity(dims[i], dims[i]);
      for (int t = 0; t < k; ++t) power = me.block(i, i) * power;
      CHECK(oracle::max_abs(xi[i] - power * z0[i]) < 1e-12);
    }
  }
  BlockVectors zero{Vector::Zero(2), Vector::Zero(3)};
  for (int k = 0; k < 5; ++k) zero = mean_recursion_step(me, zero);
  CHECK(zero[0].isZero(0.0));
  CHECK(zero[1].isZero(0.0));
}

TEST_CASE("second moment recursion") {
  // one scalar subsystem: Xi scales by gamma^2
  const auto single = build_markov_equivalent({1}, {Matrix::Constant(1, 1, 0.7)});
  SecondMomentState sm;
  sm.xi.push_back(Matrix::Constant(1, 1, 2.0));
  sm = second_moment_step(single, sm);
  CHECK(sm.k == 1);
  CHECK(sm.xi[0](0, 0) == doctest::Approx(2.0 * 0.49));

  // closed-loop blocks expanded by hand
  const LisModel m = testing_util::random_model(7, 3, 3, 0.4);
  const auto sched = distributed_gain_schedule(m, DecouplingPolicy::out_neighbor, 3);
  const GainSet& kk = sched.gains[0];
  const auto me = build_markov_equivalent(m.pattern().state_dims, closed_loop_gamma(m, 0, kk),
                                          m.options().zero_tol);
  std::mt19937_64 rng(8);
  SecondMomentState x0;
  for (int i = 0; i < m.s(); ++i) x0.xi.push_back(testing_util::random_psd(m.state_dim(i), rng));
  const auto x1 = second_moment_step(me, x0);
  for (int i = 0; i < m.s(); ++i) {
    Matrix expect = Matrix::Zero(m.state_dim(i), m.state_dim(i));
    int count = 0;
    for (int j = 0; j < m.s(); ++j) {
      if (j != i && !m.pattern().allows(i, j)) continue;
      ++count;
      const Matrix a = m.a(i, j, 0);
      const Matrix kc = kk.k[j] * m.c(j, 0);
      expect += a * x0.xi[j] * a.transpose() - a * kc * x0.xi[j] * a.transpose() -
                a * x0.xi[j] * kc.transpose() * a.transpose() + a * kc * x0.xi[j] * kc.transpose() * a.transpose();
    }
    expect *= static_cast<double>(count);
    CHECK(oracle::rel_dev(x1.xi[i], expect) < 1e-12);
    CHECK(oracle::lambda_min(x1.xi[i]) > -1e-12 * oracle::max_abs(x1.xi[i]));
  }
}

TEST_CASE("sampled jump system matches the moment recursions") {
  std::mt19937_64 rng(9);
  const std::vector<int> dims{2, 1, 2};
  std::vector<MarkovEquivalent> chain;
  for (int k = 0; k < 4; ++k) {
    chain.push_back(build_markov_equivalent(
        dims, random_gamma(dims, rng, 0.4, {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}})));
    REQUIRE(chain.back().stochastic());
  }
  const BlockVectors z0 = random_blocks(dims, rng);
  const int samples = 100000;
  const auto sampled = sample_markov_moments(chain, z0, samples, 77);

  BlockVectors mean = z0;
  SecondMomentState sm = initial_moments(z0);
  int outside = 0;
  int entries = 0;
  for (int k = 0; k <= 4; ++k) {
    for (int i = 0; i < 3; ++i) {
      const Matrix& se = sampled.second_stderr[k][i];
      for (Eigen::Index r = 0; r < se.rows(); ++r) {
        // the mean's standard error is bounded by sqrt(second moment / samples)
        const double mean_se = std::sqrt(sm.xi[i](r, r) / samples);
        CHECK(std::abs(sampled.mean[k][i](r) - mean[i](r)) <= 4.0 * mean_se + 1e-12);
        for (Eigen::Index c = 0; c < se.cols(); ++c) {
          ++entries;
          if (std::abs(sampled.second[k][i](r, c) - sm.xi[i](r, c)) > 3.0 * se(r, c) + 1e-12) ++outside;
        }
      }
    }
    if (k < 4) {
      mean = mean_recursion_step(chain[k], mean);
      sm = second_moment_step(chain[k], sm);
    }
  }
  // about 0.3% of entries may land beyond three standard errors
  CHECK(outside <= 1);
  CHECK(entries == 45);

  std::vector<MarkovEquivalent> bad{
      build_markov_equivalent({1, 1}, random_gamma({1, 1}, rng, 1.0, {{0, 1}}))};
  CHECK_THROWS_AS(sample_markov_moments(bad, {Vector::Ones(1), Vector::Ones(1)}, 10, 1), std::invalid_argument);
}

TEST_CASE("error norm stays under the second-moment trace") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const LisModel m = testing_util::random_model(200 + trial, 4, 3, 0.6, 0.95, 0.4);
    const auto sched = distributed_gain_schedule(m, DecouplingPolicy::out_neighbor, 30);
    BlockVectors e = random_blocks(m.pattern().state_dims, rng);
    SecondMomentState sm = initial_moments(e);
    for (int k = 0; k < 30; ++k) {
      CHECK(error_trace_bound(sm, e).holds);
      const bool closed = trial % 2 == 0;
      const auto me = closed ? build_markov_equivalent(m.pattern().state_dims,
                                                       closed_loop_gamma(m, k, sched.gains[k]),
                                                       m.options().zero_tol)
                             : markov_from_model(m, k);
      e = direct_lis_step(me, e);
      sm = second_moment_step(me, sm);
      for (const auto& x : sm.xi) CHECK(oracle::lambda_min(x) >= -1e-10 * std::max(1.0, oracle::max_abs(x)));
    }
  }
}
