#include "nwband/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "nwband/parallel.hpp"

namespace nwband {

double FoldPlan::validation_fraction() const {
  return static_cast<double>(n / k_folds) / static_cast<double>(n);
}

std::vector<int> FoldPlan::validation_rows(int repeat, int fold) const {
  std::vector<int> rows;
  const auto& a = assignment.at(static_cast<std::size_t>(repeat));
  for (int i = 0; i < n; ++i)
    if (a[static_cast<std::size_t>(i)] == fold) rows.push_back(i);
  return rows;
}

std::vector<int> FoldPlan::training_rows(int repeat, int fold) const {
  std::vector<int> rows;
  const auto& a = assignment.at(static_cast<std::size_t>(repeat));
  for (int i = 0; i < n; ++i)
    if (a[static_cast<std::size_t>(i)] != fold) rows.push_back(i);
  return rows;
}

std::vector<int> FoldPlan::fold_sizes(int repeat) const {
  std::vector<int> sizes(static_cast<std::size_t>(k_folds), 0);
  for (int f : assignment.at(static_cast<std::size_t>(repeat))) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

FoldPlan make_fold_plan(int n, int k_folds, std::uint64_t seed, int repeats) {
  if (k_folds < 2) throw InvalidInput("K-fold cross-validation needs K >= 2");
  if (k_folds > n) {
    throw InvalidInput("K = " + std::to_string(k_folds) + " exceeds the number of observations n = " +
                       std::to_string(n));
  }
  if (repeats < 1) throw InvalidInput("fold plan needs at least one repeat");

  FoldPlan plan{n, k_folds, seed, repeats, {}};
  std::mt19937_64 rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int r = 0; r < repeats; ++r) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> folds(static_cast<std::size_t>(n));
    for (int pos = 0; pos < n; ++pos) folds[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos % k_folds;
    plan.assignment.push_back(std::move(folds));
  }
  return plan;
}

void GdConfig::validate() const {
  if (max_iters < 1) throw InvalidInput("max_iters must be positive");
  if (!(tol_rel > 0.0)) throw InvalidInput("tol_rel must be positive");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw InvalidInput("armijo_c must lie in (0, 1)");
  if (!(shrink > 0.0 && shrink < 1.0)) throw InvalidInput("shrink must lie in (0, 1)");
  if (!(eta0 > 0.0)) throw InvalidInput("eta0 must be positive");
  if (!(gamma_subopt >= 0.0)) throw InvalidInput("gamma_subopt must be non-negative");
}

CrossValidator::CrossValidator(const Dataset& data, const FoldPlan& plan) : dim_(data.p()) {
  if (plan.n != data.n()) {
    throw InvalidInput("fold plan covers " + std::to_string(plan.n) + " observations, dataset has " +
                       std::to_string(data.n()));
  }
  // Kernel weights depend only on differences X_i - x; centering keeps the
  // expanded quadratic forms well conditioned.
  const Eigen::RowVectorXd center = data.x().colwise().mean();
  const double weight = 1.0 / (static_cast<double>(plan.repeats) * plan.k_folds);
  for (int r = 0; r < plan.repeats; ++r) {
    for (int k = 0; k < plan.k_folds; ++k) {
      const auto train = plan.training_rows(r, k);
      const auto valid = plan.validation_rows(r, k);
      if (train.empty()) throw InvalidInput("fold " + std::to_string(k) + " leaves no training observations");
      if (valid.empty()) continue;
      Fold fold;
      fold.train_x.resize(static_cast<Eigen::Index>(train.size()), dim_);
      fold.train_y.resize(static_cast<Eigen::Index>(train.size()));
      for (std::size_t i = 0; i < train.size(); ++i) {
        fold.train_x.row(static_cast<Eigen::Index>(i)) = data.x().row(train[i]) - center;
        fold.train_y[static_cast<Eigen::Index>(i)] = data.y()[train[i]];
      }
      fold.valid_x.resize(static_cast<Eigen::Index>(valid.size()), dim_);
      fold.valid_y.resize(static_cast<Eigen::Index>(valid.size()));
      for (std::size_t i = 0; i < valid.size(); ++i) {
        fold.valid_x.row(static_cast<Eigen::Index>(i)) = data.x().row(valid[i]) - center;
        fold.valid_y[static_cast<Eigen::Index>(i)] = data.y()[valid[i]];
      }
      fold.constant_train_y = (fold.train_y.array() == fold.train_y[0]).all();
      fold.weight = weight;
      folds_.push_back(std::move(fold));
    }
  }
}

double CrossValidator::fold_value(const Fold& fold, const Matrix& h, Matrix* gradient) const {
  const Matrix& xt = fold.train_x;
  const Matrix& xv = fold.valid_x;
  const Matrix ht = xt * h;
  const Vector quad_t = (ht.array() * xt.array()).rowwise().sum();
  const Vector quad_v = ((xv * h).array() * xv.array()).rowwise().sum();

  // log k = -(X_i - x)' H (X_i - x), one row per validation point.
  Matrix logk = 2.0 * (xv * ht.transpose());
  logk.colwise() -= quad_v;
  logk.rowwise() -= quad_t.transpose();
  const Vector row_max = logk.rowwise().maxCoeff();
  Matrix w = (logk.colwise() - row_max).array().exp().matrix();
  const Vector totals = w.rowwise().sum();
  w = totals.asDiagonal().inverse() * w;

  Vector psi;
  if (fold.constant_train_y) {
    psi = Vector::Constant(xv.rows(), fold.train_y[0]);
  } else {
    psi = w * fold.train_y;
  }
  const Vector residual = psi - fold.valid_y;
  const double nv = static_cast<double>(xv.rows());
  const double value = residual.squaredNorm() / nv;

  if (gradient != nullptr) {
    // a(x, i) = (psi_x - y_x) w_xi (psi_x - Y_i); the gradient is
    // sum_x sum_i a(x, i) (X_i - x)(X_i - x)', expanded into products.
    Matrix a = w;
    for (Eigen::Index i = 0; i < a.cols(); ++i) a.col(i).array() *= (psi.array() - fold.train_y[i]);
    a = residual.asDiagonal() * a;
    const Vector col_sum = a.colwise().sum().transpose();
    const Vector row_sum = a.rowwise().sum();
    const Matrix cross = xt.transpose() * a.transpose() * xv;
    Matrix s = xt.transpose() * col_sum.asDiagonal() * xt + xv.transpose() * row_sum.asDiagonal() * xv;
    s -= cross + cross.transpose();
    *gradient = s / nv;
  }
  return value;
}

CvEvaluation CrossValidator::run(const SymmetricBandwidth& h, bool with_gradient) const {
  if (h.dim() != dim_) throw InvalidInput("bandwidth dimension does not match the data");
  const Matrix dense = h.dense();
  std::vector<double> values(folds_.size());
  std::vector<Matrix> grads(with_gradient ? folds_.size() : 0);
  parallel_for(folds_.size(), [&](std::size_t f) {
    values[f] = fold_value(folds_[f], dense, with_gradient ? &grads[f] : nullptr);
  });

  CvEvaluation out;
  for (std::size_t f = 0; f < folds_.size(); ++f) out.value += folds_[f].weight * values[f];
  if (with_gradient) {
    Matrix s = Matrix::Zero(dim_, dim_);
    for (std::size_t f = 0; f < folds_.size(); ++f) s += folds_[f].weight * grads[f];
    // d/dh_uu picks up 2 (psi - y) ... and d/dh_uv (u != v) twice that.
    out.gradient = 4.0 * symmetrized(s);
    out.gradient.diagonal() *= 0.5;
  }
  return out;
}

double CrossValidator::criterion(const SymmetricBandwidth& h) const { return run(h, false).value; }

CvEvaluation CrossValidator::evaluate(const SymmetricBandwidth& h) const { return run(h, true); }

double cv_criterion(const Dataset& data, const SymmetricBandwidth& h, const FoldPlan& plan) {
  return CrossValidator(data, plan).criterion(h);
}

Matrix cv_gradient(const Dataset& data, const SymmetricBandwidth& h, const FoldPlan& plan) {
  return CrossValidator(data, plan).evaluate(h).gradient;
}

namespace {

double frobenius_inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

}  // namespace

namespace {
constexpr double kMinTrialStep = 1e-8;
constexpr double kMaxTrialStep = 1e8;
}  // namespace

BandwidthOptimum optimize_bandwidth(const Dataset& data, const FeasibleSet& set, const FoldPlan& plan,
                                    const GdConfig& cfg, const SymmetricBandwidth& h0) {
  cfg.validate();
  if (h0.dim() != data.p() || set.dim() != data.p()) throw InvalidInput("bandwidth dimension does not match the data");
  if (!set.contains(h0)) throw InvalidInput("initial bandwidth lies outside the feasible set");

  const CrossValidator cv(data, plan);
  OptimizerTrace trace;
  trace.gamma_subopt = cfg.gamma_subopt;

  SymmetricBandwidth current = h0;
  CvEvaluation eval = cv.evaluate(current);
  auto fail = [&](const std::string& why) {
    trace.final_bandwidth = current;
    trace.final_cv_value = eval.value;
    trace.stop_reason = "numerical-failure";
    throw OptimizationFailure(why, trace);
  };
  trace.records.push_back({0, eval.value, 0.0, eval.gradient.norm(), false});
  if (!std::isfinite(eval.value) || !eval.gradient.allFinite()) fail("cross-validation criterion is not finite at H0");

  double step = cfg.eta0;
  Matrix previous_point;
  Matrix previous_direction;
  trace.stop_reason = "max-iterations";
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Matrix direction = frobenius_gradient(eval.gradient);
    if (direction.isZero(0.0)) {
      trace.records.push_back({it, eval.value, 0.0, 0.0, false});
      trace.stop_reason = "stationary";
      break;
    }

    const Matrix base = current.dense();
    double trial = it == 1 ? step : step / cfg.shrink;
    if (it > 1) {
      // Barzilai-Borwein step from the last accepted move, when curvature is positive.
      const Matrix s = base - previous_point;
      const double sy = frobenius_inner(s, direction - previous_direction);
      if (sy > 0.0) trial = std::clamp(frobenius_inner(s, s) / sy, kMinTrialStep, kMaxTrialStep);
    }
    bool accepted = false;
    bool stalled = false;
    Projection candidate;
    double candidate_value = 0.0;
    while (true) {
      candidate = project_with_info(base - trial * direction, set);
      const Matrix moved = candidate.value.dense() - base;
      if (moved.isZero(0.0)) {
        stalled = true;
        break;
      }
      candidate_value = cv.criterion(candidate.value);
      const double expected = cfg.armijo_c * frobenius_inner(direction, moved);
      if (std::isfinite(candidate_value) && candidate_value <= eval.value + expected &&
          candidate_value <= eval.value) {
        accepted = true;
        break;
      }
      trial *= cfg.shrink;
      if (trial < 1e-300) {
        stalled = true;
        break;
      }
    }
    if (!accepted) {
      trace.records.push_back({it, eval.value, 0.0, eval.gradient.norm(), false});
      trace.stop_reason = stalled ? "stationary" : "line-search";
      break;
    }

    const double previous = eval.value;
    previous_point = base;
    previous_direction = direction;
    current = candidate.value;
    step = trial;
    eval = cv.evaluate(current);
    if (!std::isfinite(eval.value) || !eval.gradient.allFinite()) fail("cross-validation criterion became non-finite");
    trace.records.push_back({it, eval.value, trial, eval.gradient.norm(), candidate.active});

    const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
    if ((previous - eval.value) / scale < cfg.tol_rel) {
      trace.stop_reason = "tolerance";
      break;
    }
  }

  trace.final_bandwidth = current;
  trace.final_cv_value = eval.value;
  return {current, std::move(trace)};
}

ScalarSelection grid_search_scalar(const Dataset& data, const FoldPlan& plan, std::span<const double> grid) {
  if (grid.empty()) throw InvalidInput("scalar bandwidth grid is empty");
  for (double h : grid)
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("scalar bandwidth grid values must be positive");

  const CrossValidator cv(data, plan);
  ScalarSelection out;
  out.grid_values.reserve(grid.size());
  bool first = true;
  for (double h : grid) {
    const double value = cv.criterion(SymmetricBandwidth::scaled_identity(data.p(), h));
    out.grid_values.push_back(value);
    if (first || value < out.cv_value || (value == out.cv_value && h < out.h)) {
      out.h = h;
      out.cv_value = value;
      first = false;
    }
  }
  return out;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw InvalidInput("invalid log grid");
  if (count == 1) return {lo};
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
  return grid;
}

std::vector<double> default_scalar_grid() { return log_grid(1e-3, 1e3, 61); }

std::vector<double> coarse_scalar_grid() { return log_grid(1e-3, 1e3, 25); }

SymmetricBandwidth scalar_initialization(const Dataset& data, const FoldPlan& plan, const FeasibleSet& set) {
  const auto grid = coarse_scalar_grid();
  const ScalarSelection best = grid_search_scalar(data, plan, grid);
  return project(SymmetricBandwidth::scaled_identity(data.p(), best.h).dense(), set);
}

}  // namespace nwband
