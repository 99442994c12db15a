#include "lisest/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lisest {

int BlockPattern::n() const { return std::accumulate(state_dims.begin(), state_dims.end(), 0); }
int BlockPattern::m() const { return std::accumulate(meas_dims.begin(), meas_dims.end(), 0); }

void BlockPattern::validate() const {
  if (state_dims.empty()) throw ModelError("pattern: at least one subsystem is required");
  if (meas_dims.size() != state_dims.size()) {
    throw ModelError("pattern: state and measurement dimension lists differ in length");
  }
  for (int d : state_dims) {
    if (d <= 0) throw ModelError("pattern: state dimensions must be positive");
  }
  for (int d : meas_dims) {
    if (d < 0) throw ModelError("pattern: measurement dimensions must be nonnegative");
  }
  for (const auto& [i, j] : nonzero_offdiag) {
    if (i < 0 || j < 0 || i >= s() || j >= s() || i == j) {
      throw ModelError("pattern: coupling pair (" + std::to_string(i) + "," + std::to_string(j) +
                       ") out of range or on the diagonal");
    }
  }
}

ParameterSet ParameterSet::zeros(const BlockPattern& pattern) {
  const int s = pattern.s();
  ParameterSet p;
  p.a.reserve(s * s);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      p.a.push_back(Matrix::Zero(pattern.state_dims[i], pattern.state_dims[j]));
    }
  }
  for (int i = 0; i < s; ++i) {
    p.c.push_back(Matrix::Zero(pattern.meas_dims[i], pattern.state_dims[i]));
    p.q.push_back(Matrix::Zero(pattern.state_dims[i], pattern.state_dims[i]));
    p.r.push_back(Matrix::Identity(pattern.meas_dims[i], pattern.meas_dims[i]));
  }
  return p;
}

int Topology::edge_count() const {
  int total = 0;
  for (const auto& set : in) total += static_cast<int>(set.size());
  return total;
}

double block_magnitude(const Matrix& block) {
  return block.size() == 0 ? 0.0 : block.cwiseAbs().maxCoeff();
}

Topology build_topology(const BlockPattern& pattern, const ParameterSet& params, double zero_tol) {
  const int s = pattern.s();
  if (static_cast<int>(params.a.size()) != s * s) {
    throw ModelError("topology: A block grid has " + std::to_string(params.a.size()) +
                     " entries, expected " + std::to_string(s * s));
  }
  Topology t;
  t.in.assign(s, {});
  t.out.assign(s, {});
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      const Matrix& blk = params.a[i * s + j];
      if (blk.rows() != pattern.state_dims[i] || blk.cols() != pattern.state_dims[j]) {
        throw ModelError("topology: block A(" + std::to_string(i) + "," + std::to_string(j) +
                         ") has wrong dimensions");
      }
      if (i == j) continue;
      if (block_magnitude(blk) > zero_tol) {
        t.in[i].push_back(j);
        t.out[j].push_back(i);
      }
    }
  }
  return t;
}

namespace {

void check_block(const Matrix& m, int rows, int cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ModelError(name + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!m.allFinite()) throw ModelError(name + " has nonfinite entries");
}

void validate_params(const BlockPattern& pattern, const ParameterSet& p, double zero_tol,
                     double psd_tol, int epoch) {
  const int s = pattern.s();
  const std::string where = " (epoch " + std::to_string(epoch) + ")";
  if (static_cast<int>(p.a.size()) != s * s || static_cast<int>(p.c.size()) != s ||
      static_cast<int>(p.q.size()) != s || static_cast<int>(p.r.size()) != s) {
    throw ModelError("parameter set has the wrong number of blocks" + where);
  }
  for (int i = 0; i < s; ++i) {
    const int ni = pattern.state_dims[i];
    const int mi = pattern.meas_dims[i];
    const std::string si = std::to_string(i);
    for (int j = 0; j < s; ++j) {
      const Matrix& blk = p.a[i * s + j];
      check_block(blk, ni, pattern.state_dims[j], "A(" + si + "," + std::to_string(j) + ")" + where);
      if (i != j && !pattern.allows(i, j) && block_magnitude(blk) > zero_tol) {
        throw ModelError("A(" + si + "," + std::to_string(j) +
                         ") is nonzero but the pair is not a declared coupling" + where);
      }
    }
    check_block(p.c[i], mi, ni, "C(" + si + ")" + where);
    check_block(p.q[i], ni, ni, "Q(" + si + ")" + where);
    check_block(p.r[i], mi, mi, "R(" + si + ")" + where);
    if (!is_psd(p.q[i], psd_tol)) throw ModelError("Q(" + si + ") is not PSD" + where);
    if (mi > 0 && min_eig_sym(p.r[i]) <= 0.0) {
      throw ModelError("R(" + si + ") is not positive definite" + where);
    }
  }
}

}  // namespace

LisModel::LisModel(BlockPattern pattern, std::vector<Epoch> epochs, ModelOptions options)
    : pattern_(std::move(pattern)), epochs_(std::move(epochs)), options_(options) {
  pattern_.validate();
  if (epochs_.empty()) throw ModelError("model needs at least one epoch");
  if (epochs_.front().start != 0) throw ModelError("first epoch must start at k = 0");
  for (std::size_t e = 1; e < epochs_.size(); ++e) {
    if (epochs_[e].start <= epochs_[e - 1].start) {
      throw ModelError("epoch start indices must be strictly increasing");
    }
  }
  if (options_.horizon && *options_.horizon < 0) throw ModelError("horizon must be nonnegative");
  topologies_.reserve(epochs_.size());
  for (std::size_t e = 0; e < epochs_.size(); ++e) {
    auto& p = epochs_[e].params;
    validate_params(pattern_, p, options_.zero_tol, options_.psd_tol, static_cast<int>(e));
    for (auto& q : p.q) q = symmetrize(q);
    for (auto& r : p.r) r = symmetrize(r);
    topologies_.push_back(build_topology(pattern_, p, options_.zero_tol));
  }
}

LisModel LisModel::time_invariant(BlockPattern pattern, ParameterSet params, ModelOptions options) {
  std::vector<Epoch> epochs;
  epochs.push_back({0, std::move(params)});
  return LisModel(std::move(pattern), std::move(epochs), options);
}

void LisModel::check_k(int k) const {
  if (k < 0) throw std::out_of_range("time index " + std::to_string(k) + " is negative");
  if (options_.horizon && k > *options_.horizon) {
    throw std::out_of_range("time index " + std::to_string(k) + " is beyond the model horizon " +
                            std::to_string(*options_.horizon));
  }
}

int LisModel::epoch_index(int k) const {
  check_k(k);
  auto it = std::upper_bound(epochs_.begin(), epochs_.end(), k,
                             [](int value, const Epoch& e) { return value < e.start; });
  return static_cast<int>(std::distance(epochs_.begin(), it)) - 1;
}

Matrix LisModel::global_a(int k) const {
  const auto off = pattern_.state_offsets();
  Matrix g = Matrix::Zero(n(), n());
  for (int i = 0; i < s(); ++i) {
    for (int j = 0; j < s(); ++j) {
      g.block(off[i], off[j], state_dim(i), state_dim(j)) = a(i, j, k);
    }
  }
  return g;
}

Matrix LisModel::global_c(int k) const { return block_diag(at(k).c); }
Matrix LisModel::global_q(int k) const { return block_diag(at(k).q); }
Matrix LisModel::global_r(int k) const { return block_diag(at(k).r); }

LisModel LisModel::with_coupling_scale(double scale) const {
  std::vector<Epoch> scaled = epochs_;
  for (auto& e : scaled) {
    for (int i = 0; i < s(); ++i) {
      for (int j = 0; j < s(); ++j) {
        if (i != j) e.params.a[i * s() + j] *= scale;
      }
    }
  }
  return LisModel(pattern_, std::move(scaled), options_);
}

const Topology& build_topology(const LisModel& model, int k) { return model.topology(k); }

std::string to_string(DecouplingPolicy policy) {
  switch (policy) {
    case DecouplingPolicy::out_neighbor: return "out";
    case DecouplingPolicy::in_neighbor: return "in";
    case DecouplingPolicy::unit: return "unit";
  }
  return "?";
}

DecouplingPolicy parse_policy(const std::string& text) {
  if (text == "out" || text == "out-neighbor") return DecouplingPolicy::out_neighbor;
  if (text == "in" || text == "in-neighbor") return DecouplingPolicy::in_neighbor;
  if (text == "unit" || text == "none") return DecouplingPolicy::unit;
  throw std::invalid_argument("unknown decoupling policy '" + text + "' (expected out, in, unit)");
}

std::vector<double> decoupling_variables(const LisModel& model, DecouplingPolicy policy, int k) {
  std::vector<double> theta(model.s(), 1.0);
  if (policy == DecouplingPolicy::unit) return theta;
  if (policy == DecouplingPolicy::out_neighbor) {
    if (model.horizon() && k + 1 > *model.horizon()) {
      throw std::out_of_range("out-neighbor decoupling at k = " + std::to_string(k) +
                              " needs the topology at k + 1, beyond the model horizon");
    }
    const Topology& t = model.topology(k + 1);
    for (int i = 0; i < model.s(); ++i) theta[i] = std::sqrt(t.out[i].size() + 1.0);
  } else {
    const Topology& t = model.topology(k);
    for (int i = 0; i < model.s(); ++i) theta[i] = std::sqrt(t.in[i].size() + 1.0);
  }
  return theta;
}

std::string to_string(DiscretizationMethod method) {
  return method == DiscretizationMethod::euler ? "euler" : "block-zoh";
}

DiscreteBlocks discretize(const ContinuousBlocks& blocks, double ts, DiscretizationMethod method) {
  if (!(ts > 0.0) || !std::isfinite(ts)) throw ModelError("discretize: sampling period must be > 0");
  const int s = static_cast<int>(blocks.state_dims.size());
  if (static_cast<int>(blocks.a.size()) != s * s) throw ModelError("discretize: A grid size mismatch");
  if (!blocks.b.empty() && static_cast<int>(blocks.b.size()) != s) {
    throw ModelError("discretize: B block count mismatch");
  }
  for (const auto& m : blocks.a) {
    if (!m.allFinite()) throw ModelError("discretize: nonfinite entry in A^c");
  }
  for (const auto& m : blocks.b) {
    if (!m.allFinite()) throw ModelError("discretize: nonfinite entry in B^c");
  }

  DiscreteBlocks out;
  out.a.resize(s * s);
  out.b.resize(blocks.b.size());
  for (int i = 0; i < s; ++i) {
    const int ni = blocks.state_dims[i];
    const Matrix& aii = blocks.a[i * s + i];
    if (aii.rows() != ni || aii.cols() != ni) throw ModelError("discretize: diagonal block dims");
    Matrix input_gain;  // maps held inputs to the next state
    if (method == DiscretizationMethod::euler) {
      out.a[i * s + i] = Matrix::Identity(ni, ni) + ts * aii;
      input_gain = ts * Matrix::Identity(ni, ni);
    } else {
      Matrix aug = Matrix::Zero(2 * ni, 2 * ni);
      aug.topLeftCorner(ni, ni) = aii * ts;
      aug.topRightCorner(ni, ni) = Matrix::Identity(ni, ni) * ts;
      const Matrix e = expm(aug);
      out.a[i * s + i] = e.topLeftCorner(ni, ni);
      input_gain = e.topRightCorner(ni, ni);
    }
    for (int j = 0; j < s; ++j) {
      if (j == i) continue;
      const Matrix& aij = blocks.a[i * s + j];
      if (aij.rows() != ni || aij.cols() != blocks.state_dims[j]) {
        throw ModelError("discretize: coupling block dims");
      }
      // zero stays exactly zero under either map
      out.a[i * s + j] = aij.isZero(0.0) ? Matrix::Zero(ni, blocks.state_dims[j])
                                         : Matrix(input_gain * aij);
    }
    if (!blocks.b.empty()) out.b[i] = input_gain * blocks.b[i];
  }
  return out;
}

}  // namespace lisest
