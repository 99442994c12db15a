#ifndef LISEST_GENERATORS_HPP
#define LISEST_GENERATORS_HPP

#include <random>

#include "lisest/model.hpp"

namespace lisest {

/// Knobs for random block models used by tests, the acceptance suite and
/// the CLI's `random` generator.
struct RandomLisSpec {
  int subsystems = 3;
  int min_dim = 1;
  int max_dim = 3;
  /// Measurement dims are drawn in [1, n_i]; 0 forces C_i = 0 (m_i = 1).
  bool measured = true;
  double coupling_density = 0.5;  ///< probability of each ordered pair
  double coupling_scale = 0.2;    ///< coupling entries ~ U(-scale, scale)
  double diag_radius = 0.9;       ///< spectral radius of each A_ii
  int epochs = 1;
  int switch_period = 10;
  double q_scale = 1.0;
  double r_scale = 1.0;
};

LisModel random_lis(const RandomLisSpec& spec, std::mt19937_64& rng);

/// One subsystem, one state: x+ = a x + w, z = c x + v.
LisModel scalar_model(double a, double c, double q, double r);

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0);

/// Random symmetric PSD matrix G G^T / cols.
Matrix random_psd(int n, std::mt19937_64& rng, double scale = 1.0);

/// Random square matrix rescaled to the given spectral radius.
Matrix random_with_radius(int n, double radius, std::mt19937_64& rng);

}  // namespace lisest

#endif  // LISEST_GENERATORS_HPP
