#include "lisest/checkpoint.hpp"

#include <fstream>

namespace lisest {

Json block_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", matrix_to_json(m)}};
}

Matrix block_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("rows") || !doc.contains("cols")) {
    throw ModelError("matrix entry needs 'rows', 'cols' and 'values'");
  }
  return matrix_from_json(doc.value("values", Json::array()), doc["rows"].get<int>(),
                          doc["cols"].get<int>());
}

namespace {

Json blocks_to_json(const BlockMatrices& blocks) {
  Json out = Json::array();
  for (const auto& b : blocks) out.push_back(block_to_json(b));
  return out;
}

BlockMatrices blocks_from_json(const Json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_array()) {
    throw ModelError(std::string("checkpoint is missing list '") + key + "'");
  }
  BlockMatrices out;
  for (const Json& b : doc[key]) out.push_back(block_from_json(b));
  return out;
}

void expect_format(const Json& doc, const char* format) {
  if (!doc.is_object() || doc.value("format", "") != format) {
    throw ModelError(std::string("expected a '") + format + "' document");
  }
}

}  // namespace

Json dmre_to_json(const DmreState& state) {
  return {{"format", "lisest-dmre"}, {"k", state.k}, {"p", blocks_to_json(state.p)},
          {"p_bar", blocks_to_json(state.p_bar)}};
}

DmreState dmre_from_json(const Json& doc) {
  expect_format(doc, "lisest-dmre");
  DmreState st;
  st.k = doc.value("k", 0);
  st.p = blocks_from_json(doc, "p");
  st.p_bar = blocks_from_json(doc, "p_bar");
  if (st.p.size() != st.p_bar.size()) throw ModelError("checkpoint p and p_bar differ in length");
  return st;
}

Json steady_to_json(const SteadyState& steady, std::span<const int> dims) {
  const auto off = offsets_of(dims);
  BlockMatrices diag;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    diag.push_back(steady.p_bar.block(off[i], off[i], dims[i], dims[i]));
  }
  return {{"format", "lisest-steady"},
          {"dims", std::vector<int>(dims.begin(), dims.end())},
          {"theta", steady.theta},
          {"iterations", steady.iterations},
          {"residual", steady.residual},
          {"status", to_string(steady.status)},
          {"p_bar", blocks_to_json(diag)},
          {"gains", blocks_to_json(steady.k.k)}};
}

SteadyState steady_from_json(const Json& doc) {
  expect_format(doc, "lisest-steady");
  SteadyState st;
  st.p_bar = block_diag(blocks_from_json(doc, "p_bar"));
  st.k.k = blocks_from_json(doc, "gains");
  st.theta = doc.value("theta", std::vector<double>{});
  st.iterations = doc.value("iterations", 0);
  st.residual = doc.value("residual", 0.0);
  const std::string status = doc.value("status", "converged");
  st.status = status == "converged"  ? SolveStatus::converged
              : status == "diverged" ? SolveStatus::diverged
                                     : SolveStatus::max_iterations;
  return st;
}

void save_json(const std::filesystem::path& path, const Json& doc) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << doc.dump(1) << '\n';
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ModelError("cannot read " + path.string());
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ModelError(path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace lisest
