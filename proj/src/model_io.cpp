#include "lisest/model_io.hpp"

#include <fstream>
#include <sstream>

namespace lisest {

Json matrix_to_json(const Matrix& m) {
  Json values = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  }
  return values;
}

Matrix matrix_from_json(const Json& values, int rows, int cols) {
  if (!values.is_array() || static_cast<int>(values.size()) != rows * cols) {
    throw ModelError("block has " + std::to_string(values.is_array() ? values.size() : 0) +
                     " values, expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Json& v = values[r * cols + c];
      if (!v.is_number()) throw ModelError("block value is not a number");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

namespace {

Json block_json(int i, int j, const char* kind, const Matrix& m) {
  Json b = {{"i", i}, {"kind", kind}, {"values", matrix_to_json(m)}};
  if (kind[0] == 'A') b["j"] = j;
  return b;
}

/// Blocks of `cur` that differ from `prev` (all blocks when prev is null,
/// skipping those equal to the defaults).
Json diff_blocks(const BlockPattern& pattern, const ParameterSet& cur, const ParameterSet* prev) {
  const int s = pattern.s();
  const ParameterSet defaults = ParameterSet::zeros(pattern);
  const ParameterSet& base = prev ? *prev : defaults;
  Json blocks = Json::array();
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      if (cur.a[i * s + j] != base.a[i * s + j]) blocks.push_back(block_json(i, j, "A", cur.a[i * s + j]));
    }
  }
  for (int i = 0; i < s; ++i) {
    if (cur.c[i] != base.c[i]) blocks.push_back(block_json(i, i, "C", cur.c[i]));
    if (cur.q[i] != base.q[i]) blocks.push_back(block_json(i, i, "Q", cur.q[i]));
    if (cur.r[i] != base.r[i]) blocks.push_back(block_json(i, i, "R", cur.r[i]));
  }
  return blocks;
}

int get_index(const Json& b, const char* key, int s) {
  if (!b.contains(key) || !b[key].is_number_integer()) {
    throw ModelError(std::string("block is missing integer field '") + key + "'");
  }
  const int v = b[key].get<int>();
  if (v < 0 || v >= s) throw ModelError(std::string("block index '") + key + "' out of range");
  return v;
}

void apply_blocks(const BlockPattern& pattern, const Json& blocks, ParameterSet& p) {
  if (!blocks.is_array()) throw ModelError("'blocks' / 'param_set' must be a list");
  const int s = pattern.s();
  for (const Json& b : blocks) {
    const std::string kind = b.value("kind", "");
    const int i = get_index(b, "i", s);
    const int ni = pattern.state_dims[i];
    const int mi = pattern.meas_dims[i];
    if (!b.contains("values")) throw ModelError("block is missing 'values'");
    if (kind == "A") {
      const int j = get_index(b, "j", s);
      p.a[i * s + j] = matrix_from_json(b["values"], ni, pattern.state_dims[j]);
    } else if (kind == "C") {
      p.c[i] = matrix_from_json(b["values"], mi, ni);
    } else if (kind == "Q") {
      p.q[i] = matrix_from_json(b["values"], ni, ni);
    } else if (kind == "R") {
      p.r[i] = matrix_from_json(b["values"], mi, mi);
    } else {
      throw ModelError("unknown block kind '" + kind + "' (expected A, C, Q or R)");
    }
  }
}

std::vector<int> int_list(const Json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_array()) {
    throw ModelError(std::string("model document is missing list '") + key + "'");
  }
  std::vector<int> out;
  for (const Json& v : doc[key]) {
    if (!v.is_number_integer()) throw ModelError(std::string("'") + key + "' must hold integers");
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace

Json model_to_json(const LisModel& model) {
  const BlockPattern& pattern = model.pattern();
  Json doc;
  doc["format"] = "lisest-model";
  doc["version"] = 1;
  doc["s"] = pattern.s();
  doc["dims"] = pattern.state_dims;
  doc["mdims"] = pattern.meas_dims;
  Json couplings = Json::array();
  for (const auto& [i, j] : pattern.nonzero_offdiag) couplings.push_back({i, j});
  doc["couplings"] = couplings;
  doc["zero_tol"] = model.options().zero_tol;
  doc["horizon"] = model.horizon() ? Json(*model.horizon()) : Json(nullptr);
  const auto& epochs = model.epochs();
  doc["blocks"] = diff_blocks(pattern, epochs[0].params, nullptr);
  Json schedule = Json::array();
  for (std::size_t e = 1; e < epochs.size(); ++e) {
    schedule.push_back({{"start_k", epochs[e].start},
                        {"param_set", diff_blocks(pattern, epochs[e].params, &epochs[e - 1].params)}});
  }
  doc["schedule"] = schedule;
  return doc;
}

LisModel model_from_json(const Json& doc) {
  if (!doc.is_object()) throw ModelError("model document must be a JSON object");
  if (doc.contains("format") && doc["format"] != "lisest-model") {
    throw ModelError("unexpected document format " + doc["format"].dump());
  }
  BlockPattern pattern;
  pattern.state_dims = int_list(doc, "dims");
  pattern.meas_dims = int_list(doc, "mdims");
  if (doc.contains("s") && doc["s"].get<int>() != pattern.s()) {
    throw ModelError("'s' disagrees with the length of 'dims'");
  }
  const bool declared = doc.contains("couplings");
  if (declared) {
    for (const Json& pr : doc["couplings"]) {
      if (!pr.is_array() || pr.size() != 2) throw ModelError("couplings entries must be [i, j] pairs");
      pattern.nonzero_offdiag.insert({pr[0].get<int>(), pr[1].get<int>()});
    }
  }
  pattern.validate();

  ModelOptions opts;
  opts.zero_tol = doc.value("zero_tol", 0.0);
  if (doc.contains("horizon") && !doc["horizon"].is_null()) opts.horizon = doc["horizon"].get<int>();

  std::vector<Epoch> epochs;
  ParameterSet current = ParameterSet::zeros(pattern);
  apply_blocks(pattern, doc.value("blocks", Json::array()), current);
  epochs.push_back({0, current});
  for (const Json& entry : doc.value("schedule", Json::array())) {
    if (!entry.contains("start_k")) throw ModelError("schedule entry is missing 'start_k'");
    apply_blocks(pattern, entry.value("param_set", Json::array()), current);
    epochs.push_back({entry["start_k"].get<int>(), current});
  }
  if (!declared) {
    const int s = pattern.s();
    for (const auto& e : epochs) {
      for (int i = 0; i < s; ++i) {
        for (int j = 0; j < s; ++j) {
          if (i != j && block_magnitude(e.params.a[i * s + j]) > opts.zero_tol) {
            pattern.nonzero_offdiag.insert({i, j});
          }
        }
      }
    }
  }
  return LisModel(std::move(pattern), std::move(epochs), opts);
}

void write_model(std::ostream& os, const LisModel& model) { os << model_to_json(model).dump(1) << '\n'; }

LisModel read_model(std::istream& is) {
  Json doc;
  try {
    doc = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ModelError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    return model_from_json(doc);
  } catch (const Json::exception& e) {
    throw ModelError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const LisModel& model) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_model(os, model);
}

LisModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ModelError("cannot read model file " + path.string());
  return read_model(is);
}

}  // namespace lisest
