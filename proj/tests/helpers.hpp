#ifndef LISEST_TESTS_HELPERS_HPP
#define LISEST_TESTS_HELPERS_HPP

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lisest/generators.hpp"
#include "lisest/model.hpp"

namespace testing_util {

using lisest::Matrix;
using lisest::Vector;

/// Time-invariant model from a dense global A and per-block C, Q, R.  Every
/// nonzero off-diagonal block of `a` is declared as a coupling.
inline lisest::LisModel model_from_global(const Matrix& a, const std::vector<int>& dims,
                                          const std::vector<Matrix>& c, const std::vector<Matrix>& q,
                                          const std::vector<Matrix>& r) {
  lisest::BlockPattern pattern;
  pattern.state_dims = dims;
  for (const auto& ci : c) pattern.meas_dims.push_back(static_cast<int>(ci.rows()));
  const int s = static_cast<int>(dims.size());
  const auto off = lisest::offsets_of(dims);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) {
      if (i != j && a.block(off[i], off[j], dims[i], dims[j]).cwiseAbs().maxCoeff() > 0.0) {
        pattern.nonzero_offdiag.insert({i, j});
      }
    }
  lisest::ParameterSet p = lisest::ParameterSet::zeros(pattern);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) p.a[i * s + j] = a.block(off[i], off[j], dims[i], dims[j]);
    p.c[i] = c[i];
    p.q[i] = q[i];
    p.r[i] = r[i];
  }
  return lisest::LisModel::time_invariant(std::move(pattern), std::move(p));
}

/// Scalar subsystems with C_i = Q_i = R_i = 1.
inline lisest::LisModel scalar_network(const Matrix& a) {
  const int s = static_cast<int>(a.rows());
  std::vector<Matrix> ones(s, Matrix::Ones(1, 1));
  return model_from_global(a, std::vector<int>(s, 1), ones, ones, ones);
}

inline lisest::LisModel random_model(std::uint64_t seed, int s, int max_dim, double coupling = 0.2,
                                     double radius = 0.9, double density = 0.5) {
  lisest::RandomLisSpec spec;
  spec.subsystems = s;
  spec.max_dim = max_dim;
  spec.coupling_scale = coupling;
  spec.diag_radius = radius;
  spec.coupling_density = density;
  std::mt19937_64 rng(seed);
  return lisest::random_lis(spec, rng);
}

inline Matrix random_psd(int n, std::mt19937_64& rng, double scale = 1.0) {
  return lisest::random_psd(n, rng, scale);
}

inline Matrix random_sym(int n, std::mt19937_64& rng) {
  const Matrix g = lisest::random_matrix(n, n, rng);
  return 0.5 * (g + g.transpose());
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lisest-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_util

#endif  // LISEST_TESTS_HELPERS_HPP
