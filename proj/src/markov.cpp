#include "lisest/markov.hpp"

#include <cmath>
#include <random>

namespace lisest {

MarkovEquivalent build_markov_equivalent(std::vector<int> dims, BlockMatrices gamma, double zero_tol) {
  const int s = static_cast<int>(dims.size());
  if (static_cast<int>(gamma.size()) != s * s) {
    throw std::invalid_argument("build_markov_equivalent: need s*s blocks");
  }
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      const Matrix& g = gamma[i * s + j];
      if (g.rows() != dims[i] || g.cols() != dims[j]) {
        throw std::invalid_argument("build_markov_equivalent: block (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ") has wrong dimensions");
      }
    }
  }
  MarkovEquivalent me;
  me.dims = std::move(dims);
  me.gamma = std::move(gamma);
  me.in.assign(s, {});
  me.p = Matrix::Zero(s, s);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      if (i != j && block_magnitude(me.gamma[i * s + j]) > zero_tol) me.in[i].push_back(j);
    }
    const double prob = 1.0 / (static_cast<double>(me.in[i].size()) + 1.0);
    me.p(i, i) = prob;
    for (int j : me.in[i]) me.p(i, j) = prob;
  }
  me.column_sums = me.p.colwise().sum().transpose();
  for (int j = 0; j < s; ++j) {
    if (std::abs(me.column_sums(j) - 1.0) > 1e-12) me.flagged_columns.push_back(j);
  }
  return me;
}

MarkovEquivalent markov_from_model(const LisModel& model, int k) {
  return build_markov_equivalent(model.pattern().state_dims, model.at(k).a, model.options().zero_tol);
}

BlockMatrices closed_loop_gamma(const LisModel& model, int k, const GainSet& gains) {
  const int s = model.s();
  BlockMatrices out(s * s);
  for (int j = 0; j < s; ++j) {
    const Matrix closed = Matrix::Identity(model.state_dim(j), model.state_dim(j)) - gains.k[j] * model.c(j, k);
    for (int i = 0; i < s; ++i) out[i * s + j] = model.a(i, j, k) * closed;
  }
  return out;
}

BlockVectors mean_recursion_step(const MarkovEquivalent& me, const BlockVectors& xi) {
  BlockVectors next;
  for (int i = 0; i < me.s(); ++i) {
    Vector v = me.block(i, i) * xi[i];
    for (int j : me.in[i]) v.noalias() += me.block(i, j) * xi[j];
    next.push_back(std::move(v));
  }
  return next;
}

BlockVectors direct_lis_step(const MarkovEquivalent& me, const BlockVectors& zeta) {
  const auto off = offsets_of(me.dims);
  const int n = off.back();
  Matrix g(n, n);
  Vector z(n);
  for (int i = 0; i < me.s(); ++i) {
    z.segment(off[i], me.dims[i]) = zeta[i];
    for (int j = 0; j < me.s(); ++j) g.block(off[i], off[j], me.dims[i], me.dims[j]) = me.block(i, j);
  }
  const Vector next = g * z;
  BlockVectors out;
  for (int i = 0; i < me.s(); ++i) out.push_back(next.segment(off[i], me.dims[i]));
  return out;
}

SecondMomentState second_moment_step(const MarkovEquivalent& me, const SecondMomentState& sm) {
  SecondMomentState next;
  next.k = sm.k + 1;
  for (int i = 0; i < me.s(); ++i) {
    const Matrix& gii = me.block(i, i);
    Matrix acc = gii * sm.xi[i] * gii.transpose();
    for (int j : me.in[i]) acc.noalias() += me.block(i, j) * sm.xi[j] * me.block(i, j).transpose();
    next.xi.push_back(symmetrize(me.scale(i) * acc));
  }
  return next;
}

TraceBound error_trace_bound(const SecondMomentState& sm, const BlockVectors& ebar) {
  TraceBound b;
  for (const auto& e : ebar) b.lhs += e.squaredNorm();
  for (const auto& x : sm.xi) b.rhs += x.trace();
  b.holds = b.lhs <= b.rhs * (1.0 + 1e-12) + 1e-300;
  return b;
}

SampledMoments sample_markov_moments(const std::vector<MarkovEquivalent>& chain, const BlockVectors& zeta0,
                                     int samples, std::uint64_t seed) {
  for (const auto& me : chain) {
    if (!me.stochastic()) throw std::invalid_argument("sample_markov_moments: transition table is not stochastic");
  }
  if (chain.empty() || samples <= 0) throw std::invalid_argument("sample_markov_moments: empty chain or no samples");
  const int s = chain[0].s();
  const int steps = static_cast<int>(chain.size());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> start(0, s - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<BlockVectors> sum1(steps + 1);
  std::vector<BlockMatrices> sum2(steps + 1), sum4(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    for (int i = 0; i < s; ++i) {
      sum1[k].push_back(Vector::Zero(chain[0].dims[i]));
      sum2[k].push_back(Matrix::Zero(chain[0].dims[i], chain[0].dims[i]));
      sum4[k].push_back(Matrix::Zero(chain[0].dims[i], chain[0].dims[i]));
    }
  }
  for (int smp = 0; smp < samples; ++smp) {
    int mode = start(rng);
    Vector xi = static_cast<double>(s) * zeta0[mode];
    for (int k = 0;; ++k) {
      const Matrix outer = xi * xi.transpose();
      sum1[k][mode] += xi;
      sum2[k][mode] += outer;
      sum4[k][mode] += outer.cwiseProduct(outer);
      if (k == steps) break;
      const MarkovEquivalent& me = chain[k];
      // next mode i with probability p(i, mode)
      const double u = unit(rng);
      double acc = 0.0;
      int next = s - 1;
      for (int i = 0; i < s; ++i) {
        acc += me.p(i, mode);
        if (u < acc) {
          next = i;
          break;
        }
      }
      xi = me.scale(next) * me.block(next, mode) * xi;
      mode = next;
    }
  }
  SampledMoments out;
  const double ns = static_cast<double>(samples);
  for (int k = 0; k <= steps; ++k) {
    BlockVectors m;
    BlockMatrices m2, se;
    for (int i = 0; i < s; ++i) {
      m.push_back(sum1[k][i] / ns);
      const Matrix mean2 = sum2[k][i] / ns;
      m2.push_back(mean2);
      const Matrix var = (sum4[k][i] / ns - mean2.cwiseProduct(mean2)).cwiseMax(0.0);
      se.push_back((var / ns).cwiseSqrt());
    }
    out.mean.push_back(std::move(m));
    out.second.push_back(std::move(m2));
    out.second_stderr.push_back(std::move(se));
  }
  return out;
}

}  // namespace lisest
