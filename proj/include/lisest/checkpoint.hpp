#ifndef LISEST_CHECKPOINT_HPP
#define LISEST_CHECKPOINT_HPP

#include <filesystem>

#include "lisest/estimator.hpp"
#include "lisest/model_io.hpp"

namespace lisest {

/// Checkpoint documents are JSON.  Matrices are stored as
/// {"rows": r, "cols": c, "values": [row-major]}.
///
///   DMRE:   {"format": "lisest-dmre", "k": 12, "p": [...], "p_bar": [...]}
///   Steady: {"format": "lisest-steady", "dims": [...], "theta": [...],
///            "iterations": 40, "residual": 1e-15, "status": "converged",
///            "p_bar": [diagonal blocks], "gains": [...]}
Json block_to_json(const Matrix& m);
Matrix block_from_json(const Json& doc);

Json dmre_to_json(const DmreState& state);
DmreState dmre_from_json(const Json& doc);

Json steady_to_json(const SteadyState& steady, std::span<const int> dims);
/// Restores p_bar as the global block-diagonal matrix.
SteadyState steady_from_json(const Json& doc);

void save_json(const std::filesystem::path& path, const Json& doc);
Json load_json(const std::filesystem::path& path);

}  // namespace lisest

#endif  // LISEST_CHECKPOINT_HPP
