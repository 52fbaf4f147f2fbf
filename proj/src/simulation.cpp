#include "nwband/simulation.hpp"

#include <cmath>
#include <random>

#include "nwband/errors.hpp"
#include "nwband/parallel.hpp"
#include "nwband/seeding.hpp"
#include "nwband/theory_constants.hpp"

namespace nwband {

std::string to_string(IndexModel model) {
  return model == IndexModel::single_index ? "single-index" : "two-index";
}

IndexModel parse_index_model(const std::string& name) {
  if (name == "single-index" || name == "single_index") return IndexModel::single_index;
  if (name == "two-index" || name == "two_index") return IndexModel::two_index;
  throw InvalidInput("unknown index model '" + name + "'");
}

void SimulationScenario::validate() const {
  if (model == IndexModel::single_index && p < 4) throw InvalidInput("single-index model needs p >= 4");
  if (model == IndexModel::two_index && p < 3) throw InvalidInput("two-index model needs p >= 3");
  if (n < 2) throw InvalidInput("scenario needs n >= 2");
  if (!(sigma >= 0.0)) throw InvalidInput("sigma must be non-negative");
  if (reps < 1) throw InvalidInput("reps must be at least 1");
  if (test_size < 1) throw InvalidInput("test_size must be at least 1");
}

Matrix index_matrix(IndexModel model, int p) {
  if (model == IndexModel::single_index) {
    if (p < 4) throw InvalidInput("single-index model needs p >= 4");
    Matrix t = Matrix::Zero(1, p);
    t.row(0).head(4) << 2.0, 2.0, 1.0, 1.0;
    return t / std::sqrt(10.0);
  }
  if (p < 3) throw InvalidInput("two-index model needs p >= 3");
  Matrix t = Matrix::Zero(2, p);
  t.row(0).head(3) << 1.0 / std::sqrt(5.0), 2.0 / std::sqrt(5.0), 0.0;
  t.row(1).head(3) << -2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0;
  return t;
}

double regression_function(IndexModel model, std::span<const double> x) {
  if (model == IndexModel::single_index) {
    if (x.size() < 4) throw InvalidInput("single-index model needs p >= 4");
    return 2.0 * x[0] + 2.0 * x[1] + x[2] + x[3];
  }
  if (x.size() < 3) throw InvalidInput("two-index model needs p >= 3");
  const double root5 = std::sqrt(5.0);
  const double t1 = x[0] / root5 + 2.0 * x[1] / root5;
  const double t2 = -2.0 * x[0] / 3.0 + x[1] / 3.0 + 2.0 * x[2] / 3.0;
  return t1 * std::sin(root5 * t2) + t2 * std::sin(root5 * t1);
}

namespace {

// Stream tag for the fold plan of a replication, distinct from the samples.
constexpr std::uint64_t kFoldStream = 3;

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, int rep_index, Sample which) {
  return derive_seed(seed, static_cast<std::uint64_t>(rep_index), which == Sample::train ? 1 : 2);
}

SimulatedSample generate_with_truth(const SimulationScenario& scenario, Sample which, int rep_index) {
  scenario.validate();
  const int rows = which == Sample::train ? scenario.n : scenario.test_size;
  std::mt19937_64 rng(stream_seed(scenario.seed, rep_index, which));
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix x(rows, scenario.p);
  Vector y(rows);
  Vector truth(rows);
  std::vector<double> row(static_cast<std::size_t>(scenario.p));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < scenario.p; ++j) {
      row[static_cast<std::size_t>(j)] = normal(rng);
      x(i, j) = row[static_cast<std::size_t>(j)];
    }
    truth[i] = regression_function(scenario.model, row);
    y[i] = truth[i] + scenario.sigma * normal(rng);
  }
  return {Dataset(std::move(x), std::move(y)), std::move(truth)};
}

Dataset generate(const SimulationScenario& scenario, Sample which, int rep_index) {
  return generate_with_truth(scenario, which, rep_index).data;
}

double rmse(const Vector& pred, const Vector& truth) {
  if (pred.size() != truth.size()) throw InvalidInput("rmse inputs differ in length");
  if (pred.size() == 0) throw InvalidInput("rmse needs at least one value");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

namespace {

// Squared index-coordinate differences between every test and training row.
struct AxisDistances {
  std::vector<Matrix> per_axis;  // each test x train
};

AxisDistances axis_distances(const Matrix& t, const Dataset& train, const Dataset& test) {
  const Matrix zt = train.x() * t.transpose();
  const Matrix zq = test.x() * t.transpose();
  AxisDistances out;
  for (Eigen::Index a = 0; a < t.rows(); ++a) {
    Matrix d(zq.rows(), zt.rows());
    for (Eigen::Index j = 0; j < zt.rows(); ++j) d.col(j) = (zq.col(a).array() - zt(j, a)).square().matrix();
    out.per_axis.push_back(std::move(d));
  }
  return out;
}

Vector axis_predict(const AxisDistances& dist, const Vector& y, const Vector& h) {
  Matrix logk = -h[0] * dist.per_axis[0];
  for (std::size_t a = 1; a < dist.per_axis.size(); ++a) logk.noalias() -= h[static_cast<Eigen::Index>(a)] * dist.per_axis[a];
  const Vector row_max = logk.rowwise().maxCoeff();
  const Matrix e = (logk.colwise() - row_max).array().exp().matrix();
  return (e * y).cwiseQuotient(e.rowwise().sum());
}

}  // namespace

OracleFit oracle_fit(const SimulationScenario& scenario, const Dataset& train, const Dataset& test,
                     std::span<const double> grid) {
  if (grid.empty()) throw InvalidInput("oracle grid is empty");
  if (train.p() != scenario.p || test.p() != scenario.p) throw InvalidInput("oracle data do not match the scenario");
  const Matrix t = index_matrix(scenario.model, scenario.p);
  const AxisDistances dist = axis_distances(t, train, test);
  const auto m = static_cast<Eigen::Index>(dist.per_axis.size());

  OracleFit best;
  best.test_rmse = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vector& h) {
    Vector pred = axis_predict(dist, train.y(), h);
    const double r = rmse(pred, test.y());
    if (r < best.test_rmse) {
      best.test_rmse = r;
      best.bandwidths = h;
      best.predictions = std::move(pred);
      return true;
    }
    return false;
  };

  for (double g : grid) consider(Vector::Constant(m, g));
  if (m > 1) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (Eigen::Index a = 0; a < m; ++a) {
        const Vector start = best.bandwidths;
        for (double g : grid) {
          Vector h = start;
          h[a] = g;
          if (h == start) continue;
          if (consider(h)) improved = true;
        }
      }
    }
  }
  return best;
}

nlohmann::json to_json(const SimulationScenario& s) {
  return {{"model", to_string(s.model)}, {"n", s.n},           {"p", s.p},
          {"sigma", s.sigma},            {"reps", s.reps},     {"test_size", s.test_size},
          {"seed", s.seed},              {"index_count", s.index_count()}};
}

nlohmann::json to_json(const GdConfig& c) {
  return {{"max_iters", c.max_iters}, {"tol_rel", c.tol_rel}, {"armijo_c", c.armijo_c},
          {"shrink", c.shrink},       {"eta0", c.eta0},       {"gamma_subopt", c.gamma_subopt}};
}

namespace {

struct ReplicationResult {
  double rmse_scalar = 0.0;
  double rmse_matrix = 0.0;
  double rmse_oracle = 0.0;
  double excess_scalar = 0.0;
  double excess_matrix = 0.0;
  double excess_oracle = 0.0;
};

double mean_squared(const Vector& a, const Vector& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

}  // namespace

ExperimentReport run_scenario(const SimulationScenario& scenario, const SimulationOptions& options) {
  scenario.validate();
  options.gd.validate();
  const double radius = options.lambda_override ? *options.lambda_override
                                                : theory::lambda_schedule(scenario.n, scenario.p, options.V);
  const FeasibleSet set(scenario.p, radius);

  std::vector<ReplicationResult> results(static_cast<std::size_t>(scenario.reps));
  parallel_for(results.size(), [&](std::size_t r) {
    const int rep = static_cast<int>(r);
    const auto train = std::make_shared<const Dataset>(generate(scenario, Sample::train, rep));
    const SimulatedSample test = generate_with_truth(scenario, Sample::test, rep);
    const FoldPlan plan = make_fold_plan(scenario.n, options.cv_folds, derive_seed(scenario.seed, static_cast<std::uint64_t>(rep), kFoldStream),
                                         options.cv_repeats);
    ReplicationResult& out = results[r];

    const ScalarSelection scalar = grid_search_scalar(*train, plan, options.scalar_grid);
    const Vector scalar_pred =
        predict_batch(KernelFit(train, SymmetricBandwidth::scaled_identity(scenario.p, scalar.h)), test.data.x());
    out.rmse_scalar = rmse(scalar_pred, test.data.y());
    out.excess_scalar = mean_squared(scalar_pred, test.truth);

    const SymmetricBandwidth h0 = scalar_initialization(*train, plan, set);
    const BandwidthOptimum matrix = optimize_bandwidth(*train, set, plan, options.gd, h0);
    const Vector matrix_pred = predict_batch(KernelFit(train, matrix.bandwidth), test.data.x());
    out.rmse_matrix = rmse(matrix_pred, test.data.y());
    out.excess_matrix = mean_squared(matrix_pred, test.truth);

    if (options.include_oracle) {
      const OracleFit oracle = oracle_fit(scenario, *train, test.data, options.oracle_grid);
      out.rmse_oracle = oracle.test_rmse;
      out.excess_oracle = mean_squared(oracle.predictions, test.truth);
    }
  });

  auto collect = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : results) v.push_back(r.*field);
    return v;
  };
  ReportRow row;
  row.n = scenario.n;
  row.p = scenario.p;
  row.sd = scenario.sigma;
  row.index_count = scenario.index_count();
  row.methods.push_back(
      summarize("scalar", collect(&ReplicationResult::rmse_scalar), collect(&ReplicationResult::excess_scalar)));
  row.methods.push_back(
      summarize("matrix", collect(&ReplicationResult::rmse_matrix), collect(&ReplicationResult::excess_matrix)));
  if (options.include_oracle) {
    row.methods.push_back(
        summarize("oracle", collect(&ReplicationResult::rmse_oracle), collect(&ReplicationResult::excess_oracle)));
  }

  ExperimentReport report;
  report.rows.push_back(std::move(row));
  report.metadata = {{"scenario", to_json(scenario)},
                     {"cv_folds", options.cv_folds},
                     {"cv_repeats", options.cv_repeats},
                     {"gd", to_json(options.gd)},
                     {"V", options.V},
                     {"lambda", radius},
                     {"lambda_overridden", options.lambda_override.has_value()},
                     {"scalar_grid", {{"lo", options.scalar_grid.front()}, {"hi", options.scalar_grid.back()},
                                      {"count", options.scalar_grid.size()}}},
                     {"oracle_grid", {{"lo", options.oracle_grid.front()}, {"hi", options.oracle_grid.back()},
                                      {"count", options.oracle_grid.size()}}},
                     {"seeds", {{"global", scenario.seed}, {"derivation", "splitmix64(seed, rep, stream)"}}}};
  return report;
}

}  // namespace nwband
