#include "lisest/generators.hpp"

namespace lisest {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = scale * nd(rng);
  }
  return m;
}

Matrix random_psd(int n, std::mt19937_64& rng, double scale) {
  const Matrix g = random_matrix(n, n, rng);
  return symmetrize(scale * g * g.transpose() / n);
}

Matrix random_with_radius(int n, double radius, std::mt19937_64& rng) {
  Matrix m = random_matrix(n, n, rng);
  const double rho = spectral_radius(m);
  if (rho > 0.0) m *= radius / rho;
  return m;
}

LisModel random_lis(const RandomLisSpec& spec, std::mt19937_64& rng) {
  if (spec.subsystems <= 0 || spec.min_dim <= 0 || spec.max_dim < spec.min_dim) {
    throw ModelError("random_lis: invalid dimensions");
  }
  const int s = spec.subsystems;
  std::uniform_int_distribution<int> dim(spec.min_dim, spec.max_dim);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  BlockPattern pattern;
  for (int i = 0; i < s; ++i) {
    const int ni = dim(rng);
    pattern.state_dims.push_back(ni);
    pattern.meas_dims.push_back(spec.measured ? std::uniform_int_distribution<int>(1, ni)(rng) : 1);
  }
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      if (i != j && unit(rng) < spec.coupling_density) pattern.nonzero_offdiag.insert({i, j});
    }
  }
  std::vector<Epoch> epochs;
  for (int e = 0; e < std::max(1, spec.epochs); ++e) {
    ParameterSet p = ParameterSet::zeros(pattern);
    for (int i = 0; i < s; ++i) {
      const int ni = pattern.state_dims[i];
      p.a[i * s + i] = random_with_radius(ni, spec.diag_radius, rng);
      for (int j = 0; j < s; ++j) {
        if (i == j || !pattern.allows(i, j)) continue;
        Matrix blk(ni, pattern.state_dims[j]);
        for (Eigen::Index c = 0; c < blk.cols(); ++c) {
          for (Eigen::Index r = 0; r < blk.rows(); ++r) {
            blk(r, c) = spec.coupling_scale * (2.0 * unit(rng) - 1.0);
          }
        }
        p.a[i * s + j] = blk;
      }
      p.c[i] = spec.measured ? random_matrix(pattern.meas_dims[i], ni, rng)
                             : Matrix::Zero(pattern.meas_dims[i], ni);
      p.q[i] = spec.q_scale * Matrix::Identity(ni, ni);
      p.r[i] = spec.r_scale * Matrix::Identity(pattern.meas_dims[i], pattern.meas_dims[i]);
    }
    epochs.push_back({e * spec.switch_period, std::move(p)});
  }
  return LisModel(std::move(pattern), std::move(epochs));
}

LisModel scalar_model(double a, double c, double q, double r) {
  BlockPattern pattern;
  pattern.state_dims = {1};
  pattern.meas_dims = {1};
  ParameterSet p = ParameterSet::zeros(pattern);
  p.a[0](0, 0) = a;
  p.c[0](0, 0) = c;
  p.q[0](0, 0) = q;
  p.r[0](0, 0) = r;
  return LisModel::time_invariant(std::move(pattern), std::move(p));
}

}  // namespace lisest
