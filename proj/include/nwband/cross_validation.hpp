#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nwband/errors.hpp"
#include "nwband/kernel_estimator.hpp"
#include "nwband/psd_matrix.hpp"

namespace nwband {

/// R independent K-way partitions of n observations. assignment[r][i] is the
/// 0-based validation fold of observation i in repeat r.
struct FoldPlan {
  int n = 0;
  int k_folds = 0;
  std::uint64_t seed = 0;
  int repeats = 1;
  std::vector<std::vector<int>> assignment;

  /// floor(n / K) / n.
  double validation_fraction() const;
  std::vector<int> validation_rows(int repeat, int fold) const;
  std::vector<int> training_rows(int repeat, int fold) const;
  std::vector<int> fold_sizes(int repeat) const;
};

/// Uniformly random balanced partitions (fold sizes differ by at most one),
/// reproducible from `seed`. Throws InvalidInput unless 2 <= K <= n and
/// repeats >= 1.
FoldPlan make_fold_plan(int n, int k_folds, std::uint64_t seed, int repeats = 1);

struct GdConfig {
  int max_iters = 200;
  double tol_rel = 1e-6;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double eta0 = 1.0;
  /// Suboptimality declared for the returned point; carried into reports.
  double gamma_subopt = 0.0;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double cv_value = 0.0;
  double step_size = 0.0;
  double gradient_norm = 0.0;
  bool projection_active = false;
};

struct OptimizerTrace {
  std::vector<IterationRecord> records;
  SymmetricBandwidth final_bandwidth;
  double final_cv_value = 0.0;
  double gamma_subopt = 0.0;
  std::string stop_reason;
};

struct BandwidthOptimum {
  SymmetricBandwidth bandwidth;
  OptimizerTrace trace;
};

/// Non-finite criterion during optimization; carries the trace so far.
class OptimizationFailure : public NumericalFailure {
 public:
  OptimizationFailure(const std::string& what, OptimizerTrace trace)
      : NumericalFailure(what), trace_(std::move(trace)) {}
  const OptimizerTrace& trace() const { return trace_; }

 private:
  OptimizerTrace trace_;
};

struct CvEvaluation {
  double value = 0.0;
  /// Half-vector-coordinate gradient, same layout as loss_gradient().
  Matrix gradient;
};

/// K-fold criterion for one dataset and fold plan. Fold matrices are
/// extracted once; each evaluation computes all validation/training kernel
/// weights of a fold with dense products. Folds are evaluated concurrently
/// and combined in fold order.
class CrossValidator {
 public:
  CrossValidator(const Dataset& data, const FoldPlan& plan);

  int dim() const { return dim_; }

  double criterion(const SymmetricBandwidth& h) const;
  CvEvaluation evaluate(const SymmetricBandwidth& h) const;

 private:
  struct Fold {
    Matrix train_x;
    Vector train_y;
    Matrix valid_x;
    Vector valid_y;
    bool constant_train_y = false;
    double weight = 0.0;
  };

  double fold_value(const Fold& fold, const Matrix& h, Matrix* gradient) const;
  CvEvaluation run(const SymmetricBandwidth& h, bool with_gradient) const;

  int dim_;
  std::vector<Fold> folds_;
};

/// (1/R) sum_r (1/K) sum_j mean over fold j of (y - psi_H(x | other folds))^2.
double cv_criterion(const Dataset& data, const SymmetricBandwidth& h, const FoldPlan& plan);

/// Average of loss_gradient() over all validation points with the
/// criterion's weights.
Matrix cv_gradient(const Dataset& data, const SymmetricBandwidth& h, const FoldPlan& plan);

/// Projected gradient descent over the feasible set with Armijo backtracking.
/// Each step moves along the Frobenius gradient, projects back onto the set
/// and accepts the first step length with sufficient decrease. The first
/// trial length is eta0, later ones the Barzilai-Borwein ratio of the last
/// move (or the previous step divided by shrink when that ratio is not
/// positive). Stops after max_iters, when the relative decrease drops below
/// tol_rel, or at a stationary point.
BandwidthOptimum optimize_bandwidth(const Dataset& data, const FeasibleSet& set, const FoldPlan& plan,
                                    const GdConfig& cfg, const SymmetricBandwidth& h0);

struct ScalarSelection {
  double h = 0.0;
  double cv_value = 0.0;
  /// Criterion at every grid point, in grid order.
  std::vector<double> grid_values;
};

/// Minimizes the criterion over H = h I for h in `grid`; ties go to the
/// smaller h. Throws InvalidInput on an empty or non-positive grid.
ScalarSelection grid_search_scalar(const Dataset& data, const FoldPlan& plan, std::span<const double> grid);

/// `count` log-spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

/// 61 points in [1e-3, 1e3], used for the scalar-bandwidth estimator.
std::vector<double> default_scalar_grid();

/// 25 points in [1e-3, 1e3], used to initialize the matrix optimizer.
std::vector<double> coarse_scalar_grid();

/// h* I for the coarse-grid winner h*, projected into the feasible set.
SymmetricBandwidth scalar_initialization(const Dataset& data, const FoldPlan& plan, const FeasibleSet& set);

}  // namespace nwband
