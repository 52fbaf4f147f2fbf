#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nwband/cross_validation.hpp"
#include "nwband/kernel_estimator.hpp"

namespace nwband {

struct RawColumn {
  std::string name;
  bool categorical = false;
  /// Trimmed cell text, one entry per row.
  std::vector<std::string> text;
  /// Parsed value; NaN for missing cells and for categorical columns.
  std::vector<double> numeric;
  std::vector<bool> missing;
};

/// Rectangular table read from a CSV file with a header row.
struct RawTable {
  std::vector<RawColumn> columns;
  /// Empty when the table has no outcome column (prediction queries).
  std::string target;

  int rows() const;
  /// Throws InvalidInput for an unknown name.
  const RawColumn& column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  /// Indices of rows without a missing cell, ascending.
  std::vector<int> complete_rows() const;
  RawTable select_rows(std::span<const int> rows) const;
};

struct IngestOptions {
  /// Forced categorical even when every entry parses as a number.
  std::vector<std::string> categorical;
  /// Dropped on read, e.g. free-text identifiers.
  std::vector<std::string> exclude;
};

/// Cells "", "?" and "NA" (after trimming) count as missing.
bool is_missing_marker(const std::string& cell);

/// RFC-4180 style CSV: comma separated, optional double quotes with ""
/// escapes, LF or CRLF line ends. A column is categorical when any
/// non-missing entry fails to parse as a number or it is listed in
/// options.categorical. `target` may be empty; otherwise it must name a
/// numeric column. Errors are IngestError with row/column context.
RawTable parse_csv(std::istream& in, const std::string& target, const IngestOptions& options = {},
                   const std::string& source = "<stream>");
RawTable ingest_csv(const std::filesystem::path& path, const std::string& target, const IngestOptions& options = {});

struct ColumnSpec {
  std::string name;
  bool categorical = false;
  /// Continuous columns: x -> (x - center) / scale.
  double center = 0.0;
  double scale = 1.0;
  /// Categorical columns: levels[0] is the reference; levels[k] maps to
  /// indicator column k - 1.
  std::vector<std::string> levels;

  int width() const { return categorical ? static_cast<int>(levels.size()) - 1 : 1; }
};

struct PreprocessSpec {
  std::string target;
  /// Feature columns in output order.
  std::vector<ColumnSpec> columns;
  std::string missing_policy = "drop-rows";

  int p() const;
  std::vector<std::string> feature_names() const;
  const ColumnSpec& column(const std::string& name) const;
};

bool operator==(const ColumnSpec& a, const ColumnSpec& b);
bool operator==(const PreprocessSpec& a, const PreprocessSpec& b);

/// Minimum number of fitting rows left after dropping missing rows.
inline constexpr int kMinPreprocessRows = 10;

/// Estimates standardization (sample mean, n - 1 variance) and level
/// dictionaries from `rows`, which must be complete. Levels are ordered by
/// first appearance among those rows. Throws PreprocessError on a
/// zero-variance continuous column (naming it) or fewer than
/// kMinPreprocessRows rows.
PreprocessSpec fit_preprocess(const RawTable& raw, std::span<const int> rows);

/// Encodes `rows` with the stored parameters. Continuous columns are
/// standardized; a v-level categorical becomes v - 1 indicators, and a level
/// unseen while fitting encodes as the reference. The outcome comes from the
/// spec's target column when the table has it, otherwise it is zero.
Dataset apply_preprocess(const PreprocessSpec& spec, const RawTable& raw, std::span<const int> rows);

struct Preprocessed {
  Dataset data;
  PreprocessSpec spec;
  /// Rows of the raw table that survived the missing-row policy.
  std::vector<int> rows;
};

/// Fits a new spec on every complete row and encodes those rows.
Preprocessed preprocess(const RawTable& raw);
/// Encodes every complete row of `raw` with an existing spec. Throws
/// PreprocessError if a spec column is absent or a continuous cell is not
/// numeric.
Preprocessed preprocess(const RawTable& raw, const PreprocessSpec& spec);

/// Recovers the category a row's indicators encode.
std::string decode_category(const ColumnSpec& column, std::span<const double> indicators);

/// Least squares with intercept; the minimum-norm solution when the design
/// is rank deficient.
Vector ols_fit_predict(const Dataset& train, const Matrix& test_x);

struct BenchmarkConfig {
  int outer_splits = 4;
  int inner_folds = 10;
  int inner_repeats = 1;
  std::uint64_t seed = 0;
  GdConfig gd;
  double V = 1.0;
  std::optional<double> lambda_override;
  /// Fit one spec on every complete row instead of per training portion.
  bool global_preprocess = false;
  std::vector<double> scalar_grid = default_scalar_grid();
  /// Optional fixed assignments over the complete rows, in their order.
  /// outer_assignment gives each row's test group; inner_assignment gives
  /// its validation fold whenever it is in a training portion.
  std::vector<int> outer_assignment;
  std::vector<int> inner_assignment;
};

struct SplitResult {
  int group = 0;
  int n_train = 0;
  int n_test = 0;
  int p = 0;
  double scalar_h = 0.0;
  double matrix_rmse = 0.0;
  double scalar_rmse = 0.0;
  double linear_rmse = 0.0;
  std::string stop_reason;
  int iterations = 0;
};

struct BenchmarkReport {
  std::string dataset;
  int n = 0;
  int p = 0;
  double matrix_rmse = 0.0;
  double scalar_rmse = 0.0;
  double linear_rmse = 0.0;
  std::vector<SplitResult> splits;
  nlohmann::json metadata;
};

/// Partitions the complete rows into outer groups; each group is tested once
/// against scalar (grid search), matrix (projected gradient descent) and OLS
/// fits on the remaining rows, with inner K-fold CV for the kernel
/// bandwidths. Per-method RMSE is the mean over groups. Splits run
/// concurrently.
BenchmarkReport run_benchmark(const RawTable& raw, const BenchmarkConfig& config = {},
                              const std::string& dataset = "dataset");

/// dataset,n,p,matrix_rmse,scalar_rmse,linear_rmse
void write_csv(const BenchmarkReport& report, std::ostream& out);
nlohmann::json to_json(const BenchmarkReport& report);
/// Seeds, configuration and coding of the run.
nlohmann::json sidecar_json(const BenchmarkReport& report);

nlohmann::json to_json(const PreprocessSpec& spec);
PreprocessSpec preprocess_spec_from_json(const nlohmann::json& j);

}  // namespace nwband
