#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nwband/cross_validation.hpp"
#include "nwband/kernel_estimator.hpp"
#include "nwband/report.hpp"

namespace nwband {

enum class IndexModel { single_index, two_index };

std::string to_string(IndexModel model);
/// Accepts "single-index"/"single_index" and "two-index"/"two_index".
IndexModel parse_index_model(const std::string& name);

enum class Sample { train, test };

struct SimulationScenario {
  IndexModel model = IndexModel::single_index;
  int n = 250;
  int p = 5;
  double sigma = 0.15;
  int reps = 20;
  int test_size = 10000;
  std::uint64_t seed = 0;

  int index_count() const { return model == IndexModel::single_index ? 1 : 2; }
  void validate() const;
};

/// Rows are orthonormal index directions, padded with zeros for the noise
/// covariates. Single index: (2, 2, 1, 1)/sqrt(10). Two index:
/// T1 = (1, 2, 0)/sqrt(5), T2 = (-2, 1, 2)/3.
Matrix index_matrix(IndexModel model, int p);

/// Noise-free regression function:
///   single index  2 x1 + 2 x2 + x3 + x4
///   two index     T1 sin(sqrt(5) T2) + T2 sin(sqrt(5) T1)
double regression_function(IndexModel model, std::span<const double> x);

struct SimulatedSample {
  Dataset data;
  /// regression_function at every row.
  Vector truth;
};

/// Seed of the independent stream for (seed, replication, sample).
std::uint64_t stream_seed(std::uint64_t seed, int rep_index, Sample which);

/// Standard normal covariates, outcome = regression function + N(0, sigma^2).
/// Deterministic in (scenario.seed, which, rep_index).
SimulatedSample generate_with_truth(const SimulationScenario& scenario, Sample which, int rep_index);
Dataset generate(const SimulationScenario& scenario, Sample which, int rep_index);

struct OracleFit {
  Vector predictions;
  /// One bandwidth per true index (H = diag(bandwidths) in index space).
  Vector bandwidths;
  double test_rmse = 0.0;
};

/// Kernel regression on the true index coordinates T x with an axis-wise
/// bandwidth tuned on the test set. With one index the grid is searched
/// exhaustively; with two, a coordinate search over the product grid starts
/// at the best isotropic point and alternates axis-wise sweeps until no axis
/// improves.
OracleFit oracle_fit(const SimulationScenario& scenario, const Dataset& train, const Dataset& test,
                     std::span<const double> grid);

/// sqrt(mean((pred - truth)^2)). Throws InvalidInput on empty or mismatched input.
double rmse(const Vector& pred, const Vector& truth);

struct SimulationOptions {
  int cv_folds = 10;
  int cv_repeats = 1;
  GdConfig gd;
  double V = 1.0;
  /// Replaces lambda_schedule(n, p, V) as the feasible-set radius.
  std::optional<double> lambda_override;
  std::vector<double> scalar_grid = default_scalar_grid();
  std::vector<double> oracle_grid = default_scalar_grid();
  bool include_oracle = true;
};

/// Per replication: generate train and test samples, fit the scalar-bandwidth
/// (grid search), matrix-bandwidth (projected gradient descent) and oracle
/// estimators, and record each method's test RMSE. Replications run
/// concurrently; the report does not depend on completion order.
ExperimentReport run_scenario(const SimulationScenario& scenario, const SimulationOptions& options = {});

nlohmann::json to_json(const SimulationScenario& scenario);
nlohmann::json to_json(const GdConfig& cfg);

}  // namespace nwband
