#ifndef LISEST_MARKOV_HPP
#define LISEST_MARKOV_HPP

#include <cstdint>
#include <vector>

#include "lisest/estimator.hpp"

namespace lisest {

/// Jump-system view of one step of an interconnected recursion
///   zeta_i(k+1) = Gamma_ii zeta_i + sum_{j in I_i} Gamma_ij zeta_j.
/// p(i, j) = Pr(next = i | current = j) = 1/(|I_i| + 1) for j in I_i + {i}.
/// Columns need not sum to one; they are reported, not normalized.
struct MarkovEquivalent {
  std::vector<int> dims;
  BlockMatrices gamma;  ///< s*s grid, row-major
  std::vector<std::vector<int>> in;
  Matrix p;
  Vector column_sums;
  std::vector<int> flagged_columns;  ///< columns whose sum differs from 1

  int s() const { return static_cast<int>(dims.size()); }
  const Matrix& block(int i, int j) const { return gamma[i * s() + j]; }
  double scale(int i) const { return static_cast<double>(in[i].size()) + 1.0; }
  bool stochastic() const { return flagged_columns.empty(); }
};

/// Blocks with largest magnitude <= zero_tol count as absent.
MarkovEquivalent build_markov_equivalent(std::vector<int> dims, BlockMatrices gamma, double zero_tol = 0.0);

/// Gamma(k) = A(k) as the chain of the open-loop model.
MarkovEquivalent markov_from_model(const LisModel& model, int k);

/// Closed-loop prior-error blocks Gamma_ij(k) = A_ij(k)(I - K_j(k) C_j(k)).
BlockMatrices closed_loop_gamma(const LisModel& model, int k, const GainSet& gains);

/// xi_i(k+1) = Gamma_ii xi_i + sum_{j in I_i} Gamma_ij xi_j.
BlockVectors mean_recursion_step(const MarkovEquivalent& me, const BlockVectors& xi);

/// Same map through the assembled global matrix (independent route).
BlockVectors direct_lis_step(const MarkovEquivalent& me, const BlockVectors& zeta);

struct SecondMomentState {
  int k = 0;
  BlockMatrices xi;
};

/// Xi_i(k+1) = sum_{j in I_i + i} (|I_i| + 1) Gamma_ij Xi_j Gamma_ij^T.
SecondMomentState second_moment_step(const MarkovEquivalent& me, const SecondMomentState& sm);

struct TraceBound {
  double lhs = 0.0;  ///< ||e||^2
  double rhs = 0.0;  ///< sum_i Tr(Xi_i)
  bool holds = false;
};

TraceBound error_trace_bound(const SecondMomentState& sm, const BlockVectors& ebar);

struct SampledMoments {
  std::vector<BlockVectors> mean;             ///< Pr(mode = i) E[xi | mode = i], per step
  std::vector<BlockMatrices> second;          ///< Pr(mode = i) E[xi xi^T | mode = i], per step
  std::vector<BlockMatrices> second_stderr;   ///< entrywise standard errors
};

/// Samples the jump system with the initial mode uniform on {0..s-1} and
/// xi(0) = s * zeta_{mode}(0).  Throws std::invalid_argument when any chain
/// step is not column-stochastic.
SampledMoments sample_markov_moments(const std::vector<MarkovEquivalent>& chain,
                                     const BlockVectors& zeta0, int samples, std::uint64_t seed);

}  // namespace lisest

#endif  // LISEST_MARKOV_HPP
