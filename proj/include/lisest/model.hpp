#ifndef LISEST_MODEL_HPP
#define LISEST_MODEL_HPP

#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lisest/linalg.hpp"

namespace lisest {

/// Raised for malformed models: dimension mismatches, undeclared couplings,
/// indefinite noise blocks, nonfinite entries.
class ModelError : public std::invalid_argument {
 public:
  explicit ModelError(const std::string& what) : std::invalid_argument(what) {}
};

/// Partition of the global state/measurement vectors into subsystems, plus
/// the set of (i, j), i != j, where the coupling block A_ij may be nonzero.
struct BlockPattern {
  std::vector<int> state_dims;
  std::vector<int> meas_dims;
  std::set<std::pair<int, int>> nonzero_offdiag;

  int s() const { return static_cast<int>(state_dims.size()); }
  int n() const;
  int m() const;
  std::vector<int> state_offsets() const { return offsets_of(state_dims); }
  std::vector<int> meas_offsets() const { return offsets_of(meas_dims); }
  bool allows(int i, int j) const { return i == j || nonzero_offdiag.contains({i, j}); }
  void validate() const;
};

/// One parameter set of the block model.  `a` is the s*s block grid stored
/// row-major (a[i*s + j] is n_i x n_j); undeclared couplings hold zero blocks.
struct ParameterSet {
  BlockMatrices a;
  BlockMatrices c;
  BlockMatrices q;
  BlockMatrices r;

  static ParameterSet zeros(const BlockPattern& pattern);
};

/// Parameter set in force from time index `start` until the next epoch.
struct Epoch {
  int start = 0;
  ParameterSet params;
};

/// In/out neighbor sets of every subsystem at one time index.
struct Topology {
  std::vector<std::vector<int>> in;
  std::vector<std::vector<int>> out;

  int s() const { return static_cast<int>(in.size()); }
  /// Number of ordered pairs (i, j), i != j, with A_ij nonzero.
  int edge_count() const;
};

/// Largest absolute entry; zero for empty blocks.
double block_magnitude(const Matrix& block);

/// Neighbor sets read off the block sparsity of one parameter set.  A block
/// counts as zero iff its largest magnitude entry is <= zero_tol.
Topology build_topology(const BlockPattern& pattern, const ParameterSet& params,
                        double zero_tol = 0.0);

struct ModelOptions {
  double zero_tol = 0.0;
  /// Last valid time index; unset means the final epoch extends forever.
  std::optional<int> horizon;
  double psd_tol = 1e-10;
};

/// Block-structured, possibly switching, linear interconnected system.
/// Immutable after construction.
class LisModel {
 public:
  LisModel(BlockPattern pattern, std::vector<Epoch> epochs, ModelOptions options = {});

  static LisModel time_invariant(BlockPattern pattern, ParameterSet params,
                                 ModelOptions options = {});

  const BlockPattern& pattern() const { return pattern_; }
  const std::vector<Epoch>& epochs() const { return epochs_; }
  const ModelOptions& options() const { return options_; }
  int s() const { return pattern_.s(); }
  int n() const { return pattern_.n(); }
  int m() const { return pattern_.m(); }
  int state_dim(int i) const { return pattern_.state_dims[i]; }
  int meas_dim(int i) const { return pattern_.meas_dims[i]; }
  bool is_time_invariant() const { return epochs_.size() == 1; }
  std::optional<int> horizon() const { return options_.horizon; }

  /// Index into epochs() of the parameter set active at time k.
  int epoch_index(int k) const;
  const ParameterSet& at(int k) const { return epochs_[epoch_index(k)].params; }

  const Matrix& a(int i, int j, int k) const { return at(k).a[i * s() + j]; }
  const Matrix& c(int i, int k) const { return at(k).c[i]; }
  const Matrix& q(int i, int k) const { return at(k).q[i]; }
  const Matrix& r(int i, int k) const { return at(k).r[i]; }
  const Topology& topology(int k) const { return topologies_[epoch_index(k)]; }

  Matrix global_a(int k) const;
  Matrix global_c(int k) const;
  Matrix global_q(int k) const;
  Matrix global_r(int k) const;

  /// Copy with every off-diagonal block multiplied by `scale`.
  LisModel with_coupling_scale(double scale) const;

 private:
  void check_k(int k) const;

  BlockPattern pattern_;
  std::vector<Epoch> epochs_;
  ModelOptions options_;
  std::vector<Topology> topologies_;
};

/// Topology of the model at time k.
const Topology& build_topology(const LisModel& model, int k);

enum class DecouplingPolicy {
  out_neighbor,  ///< theta_i(k) = sqrt(|O_i(k+1)| + 1)
  in_neighbor,   ///< theta_i(k) = sqrt(|I_i(k)| + 1)
  unit,          ///< theta_i(k) = 1
};

std::string to_string(DecouplingPolicy policy);
DecouplingPolicy parse_policy(const std::string& text);

/// Per-subsystem decoupling variables at time k.
std::vector<double> decoupling_variables(const LisModel& model, DecouplingPolicy policy, int k);

enum class DiscretizationMethod {
  euler,      ///< A = I + Ts A^c, B = Ts B^c
  block_zoh,  ///< exact hold on diagonal blocks, neighbor states held as inputs
};

std::string to_string(DiscretizationMethod method);

/// Continuous-time block dynamics: a is the s*s block grid (row-major),
/// b holds one input matrix per subsystem (may be empty).
struct ContinuousBlocks {
  std::vector<int> state_dims;
  BlockMatrices a;
  BlockMatrices b;
};

struct DiscreteBlocks {
  BlockMatrices a;
  BlockMatrices b;
};

/// Discretizes block dynamics with sampling period ts.  Both methods keep
/// every zero off-diagonal block exactly zero.
DiscreteBlocks discretize(const ContinuousBlocks& blocks, double ts,
                          DiscretizationMethod method = DiscretizationMethod::euler);

}  // namespace lisest

#endif  // LISEST_MODEL_HPP
