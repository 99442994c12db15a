#ifndef LISEST_MODEL_IO_HPP
#define LISEST_MODEL_IO_HPP

#include <filesystem>
#include <iosfwd>

#include "json.hpp"
#include "lisest/model.hpp"

namespace lisest {

using Json = nlohmann::json;

/// Model document layout (JSON, UTF-8):
///
///   { "format": "lisest-model", "version": 1,
///     "s": 2, "dims": [2, 1], "mdims": [1, 1],
///     "couplings": [[0, 1]],              // optional declared pattern
///     "zero_tol": 0.0, "horizon": null,   // optional
///     "blocks": [ {"i": 0, "j": 1, "kind": "A", "values": [...]}, ... ],
///     "schedule": [ {"start_k": 100, "param_set": [ <blocks> ]} ] }
///
/// `values` are row-major.  C/Q/R blocks take only "i".  Blocks not listed
/// in `blocks` default to zero (A, C, Q) or identity (R); each schedule
/// entry overrides the blocks of the previous epoch it lists.  When
/// "couplings" is absent the pattern is read off the nonzero A blocks.
Json model_to_json(const LisModel& model);
LisModel model_from_json(const Json& doc);

Json matrix_to_json(const Matrix& m);  // row-major flat list
Matrix matrix_from_json(const Json& values, int rows, int cols);

void write_model(std::ostream& os, const LisModel& model);
LisModel read_model(std::istream& is);
void save_model(const std::filesystem::path& path, const LisModel& model);
LisModel load_model(const std::filesystem::path& path);

}  // namespace lisest

#endif  // LISEST_MODEL_IO_HPP
