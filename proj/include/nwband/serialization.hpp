#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "json.hpp"
#include "nwband/benchmark.hpp"
#include "nwband/cross_validation.hpp"

namespace nwband {

/// {"dim": p, "halfvec": [...]}.
nlohmann::json to_json(const SymmetricBandwidth& h);
SymmetricBandwidth bandwidth_from_json(const nlohmann::json& j);

nlohmann::json to_json(const IterationRecord& record);
/// One JSON object per line, one line per iteration.
void write_trace_jsonl(const OptimizerTrace& trace, std::ostream& out);

/// Everything needed to reproduce predictions of a fitted kernel estimator.
struct ModelBundle {
  PreprocessSpec spec;
  SymmetricBandwidth bandwidth;
  /// Encoded training covariates and outcome.
  Dataset train;
  nlohmann::json metadata;
};

/// Writes `<path>` (JSON) and the training-data sidecar `<path>.data.csv`,
/// whose values are printed with 17 significant digits so they read back
/// exactly.
void save_model(const ModelBundle& model, const std::filesystem::path& path);
/// Throws InvalidInput on a malformed bundle or sidecar.
ModelBundle load_model(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& model_path);

}  // namespace nwband
