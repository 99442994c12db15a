#ifndef LISEST_POWER_SYSTEM_HPP
#define LISEST_POWER_SYSTEM_HPP

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "lisest/model.hpp"

namespace lisest {

/// Load-frequency-control parameters of a multi-area power system.  Area
/// state is [angle, speed, mechanical power, valve position]; the two
/// measured outputs are angle and speed.
struct PowerSystemParams {
  std::vector<double> inertia;          // H_i
  std::vector<double> regulation;       // R_i (speed droop)
  std::vector<double> turbine_time;     // T_t,i
  std::vector<double> governor_time;    // T_g,i
  std::vector<double> damping;          // D_i
  Matrix tie;                           // P_ij, symmetric sparsity, zero diagonal
  double sampling_period = 1.0;         // seconds

  int areas() const { return static_cast<int>(inertia.size()); }
  void validate() const;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double sample(std::mt19937_64& rng) const;
};

enum class TieTopology { ring, mesh, none };

struct PowerSystemConfig {
  int areas = 10;
  TieTopology topology = TieTopology::ring;
  /// Explicit tie pairs (i < j); overrides `topology` when non-empty.
  std::vector<std::pair<int, int>> tie_pairs;
  Range inertia{4.0, 8.0};
  Range damping{0.5, 1.5};
  Range turbine_time{0.3, 0.6};
  Range governor_time{0.1, 0.3};
  Range regulation{0.03, 0.07};
  Range tie_strength{0.05, 0.2};
  double sampling_period = 1.0;
  /// Resample parameters every `switch_period` steps; 0 keeps them fixed.
  int switch_period = 100;
  /// Epochs are generated up to this time index when switching.
  int horizon = 500;
  double process_noise = 1.0;      // Q_i = process_noise * I
  double measurement_noise = 1.0;  // R_i = measurement_noise * I
  DiscretizationMethod discretization = DiscretizationMethod::block_zoh;
};

constexpr int kAreaStates = 4;
constexpr int kAreaOutputs = 2;

/// Continuous-time per-area blocks A^c_ii, A^c_ij and B^c_i.
ContinuousBlocks power_system_continuous(const PowerSystemParams& params);

/// Measurement matrix [1 0 0 0; 0 1 0 0].
Matrix power_system_measurement();

/// Tie pairs implied by the configured topology.
std::vector<std::pair<int, int>> tie_pairs_for(const PowerSystemConfig& config);

PowerSystemParams sample_power_system_params(const PowerSystemConfig& config,
                                             std::mt19937_64& rng);

/// Discrete parameter set for one parameter draw.
ParameterSet power_system_parameter_set(const PowerSystemParams& params,
                                        const PowerSystemConfig& config);

/// Builds the (possibly switching) discrete LIS.  The tie-line sparsity is
/// fixed across epochs; values are redrawn at every switch.
LisModel generate_power_system(const PowerSystemConfig& config, std::uint64_t seed);

/// Same, from an explicit single parameter draw (time-invariant).
LisModel generate_power_system(const PowerSystemParams& params, const PowerSystemConfig& config);

}  // namespace lisest

#endif  // LISEST_POWER_SYSTEM_HPP
