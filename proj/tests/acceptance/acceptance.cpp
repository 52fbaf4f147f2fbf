// Acceptance harness. Run with no arguments for every criterion, or pass
// criterion numbers. Prints one line per criterion; exits nonzero if any
// selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "nwband/benchmark.hpp"
#include "nwband/cross_validation.hpp"
#include "nwband/errors.hpp"
#include "nwband/kernel_estimator.hpp"
#include "nwband/psd_matrix.hpp"
#include "nwband/simulation.hpp"
#include "nwband/theory_constants.hpp"
#include "nwband/version.hpp"

using namespace nwband;

namespace {

constexpr std::uint64_t kSeed = 1;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [fail]");
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Dataset sample_data(int n, int p, std::mt19937_64& rng) {
  const Matrix x = oracle::random_normal(n, p, rng);
  const Vector y = (x.col(0).array().sin() + 0.5 * x.col(1).array() +
                    0.2 * oracle::random_normal(n, 1, rng).col(0).array())
                       .matrix();
  return Dataset(x, y);
}

// --- 1 ------------------------------------------------------------------

Outcome criterion_1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(kSeed);
  double worst_loss = 0.0;
  double worst_cv = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int n = 30 + static_cast<int>(rng() % 21);
    const int p = 3 + static_cast<int>(rng() % 3);
    const Dataset d = sample_data(n, p, rng);
    const Matrix h = oracle::random_psd(p, rng, 0.5);
    const std::vector<double> x = row_copy(oracle::random_normal(1, p, rng), 0);
    const double y = 0.3;
    const std::vector<int> rows = oracle::all_rows(n);

    const Matrix g = loss_gradient(KernelFit(d, SymmetricBandwidth::from_dense(h)), x, y);
    const Matrix fd = oracle::central_differences(
        h,
        [&](const Matrix& hh) {
          const long double r = y - oracle::nw_predict(d.x(), d.y(), rows, hh, oracle::point(x));
          return r * r;
        },
        1e-5);
    worst_loss = std::max(worst_loss, oracle::max_relative_error(g, fd));

    const FoldPlan plan = make_fold_plan(n, 5, kSeed + static_cast<std::uint64_t>(t));
    const Matrix cg = cv_gradient(d, SymmetricBandwidth::from_dense(h), plan);
    const Matrix cfd = oracle::central_differences(
        h, [&](const Matrix& hh) { return oracle::cv_value(d.x(), d.y(), plan.assignment[0], 5, hh); }, 1e-5);
    worst_cv = std::max(worst_cv, oracle::max_relative_error(cg, cfd));
  }
  const double elapsed = seconds_since(t0);
  o.check(worst_loss <= 1e-5, "loss_gradient max rel err " + fmt(worst_loss, 3));
  o.check(worst_cv <= 1e-5, "cv_gradient max rel err " + fmt(worst_cv, 3));
  o.check(elapsed < 10.0, "runtime " + fmt(elapsed, 3) + " s");
  return o;
}

// --- 2 ------------------------------------------------------------------

Outcome criterion_2() {
  Outcome o;
  std::mt19937_64 rng(kSeed);
  const Dataset d = sample_data(37, 4, rng);
  double mean = 0.0;
  for (int i = 0; i < d.n(); ++i) mean += d.y()[i];
  mean /= d.n();
  bool h0_exact = true;
  for (int t = 0; t < 10; ++t) {
    const std::vector<double> x = row_copy(oracle::random_normal(1, 4, rng) * 3.0, 0);
    h0_exact = h0_exact && predict(KernelFit(d, SymmetricBandwidth(4)), x) == mean;
  }
  o.check(h0_exact, "H=0 gives the training mean");

  bool n1_exact = true;
  for (int t = 0; t < 10; ++t) {
    const Dataset one(oracle::random_normal(1, 3, rng), oracle::random_normal(1, 1, rng).col(0));
    const SymmetricBandwidth h = SymmetricBandwidth::from_dense(oracle::random_psd(3, rng, 10.0));
    n1_exact = n1_exact && predict(KernelFit(one, h), row_copy(oracle::random_normal(1, 3, rng), 0)) == one.y()[0];
  }
  o.check(n1_exact, "n=1 gives Y1");

  bool zero = true;
  for (int t = 0; t < 10; ++t) {
    const Dataset c(oracle::random_normal(20, 3, rng), Vector::Constant(20, 0.1 * (t + 1)));
    const SymmetricBandwidth h = SymmetricBandwidth::from_dense(oracle::random_psd(3, rng));
    const KernelFit fit(c, h);
    zero = zero && loss_gradient(fit, row_copy(oracle::random_normal(1, 3, rng), 0), 0.1 * (t + 1)).isZero(0.0);
    zero = zero && cv_gradient(c, h, make_fold_plan(20, 4, static_cast<std::uint64_t>(t))).isZero(0.0);
  }
  o.check(zero, "constant Y gives a zero gradient");
  return o;
}

// --- 3 ------------------------------------------------------------------

Outcome criterion_3() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(kSeed);
  double worst_idem = 0.0;
  double worst_expansion = -1e300;
  int infeasible = 0;
  for (int t = 0; t < 1000; ++t) {
    const int p = 1 + static_cast<int>(rng() % 10);
    const double scale = std::pow(10.0, static_cast<double>(rng() % 5) - 2.0);
    const FeasibleSet set(p, std::pow(10.0, static_cast<double>(rng() % 5) - 2.0));
    const Matrix a = oracle::random_symmetric(p, rng, scale);
    const Matrix b = oracle::random_symmetric(p, rng, scale);
    const SymmetricBandwidth pa = project(a, set);
    const SymmetricBandwidth pb = project(b, set);
    if (!set.contains(pa)) ++infeasible;
    worst_idem = std::max(worst_idem, (project(pa.dense(), set).dense() - pa.dense()).norm());
    worst_expansion = std::max(worst_expansion, (pa.dense() - pb.dense()).norm() - (a - b).norm());
  }
  const double elapsed = seconds_since(t0);
  o.check(worst_idem <= 1e-10, "idempotence max " + fmt(worst_idem, 3));
  o.check(infeasible == 0, std::to_string(infeasible) + " infeasible");
  o.check(worst_expansion <= 1e-10, "max(|PA-PB| - |A-B|) " + fmt(worst_expansion, 3));
  o.check(elapsed < 5.0, "runtime " + fmt(elapsed, 3) + " s");
  return o;
}

// --- simulation runs shared by 4 and 5 ------------------------------------

struct ScenarioMeans {
  std::map<std::string, double> mean_rmse;
  double seconds = 0.0;
  bool cached = false;
};

std::filesystem::path artifact_dir() {
  const char* env = std::getenv("NWBAND_ACCEPTANCE_DIR");
  std::filesystem::path dir = env ? env : "acceptance_reports";
  std::filesystem::create_directories(dir);
  return dir;
}

// Reports are written next to the harness; a later criterion reuses one
// only when its full configuration matches.
ScenarioMeans run_or_load(const std::string& label, const SimulationScenario& s, const SimulationOptions& opt) {
  const nlohmann::json key = {{"version", kVersion},
                              {"scenario", to_json(s)},
                              {"gd", to_json(opt.gd)},
                              {"cv_folds", opt.cv_folds},
                              {"cv_repeats", opt.cv_repeats},
                              {"include_oracle", opt.include_oracle}};
  const auto path = artifact_dir() / (label + ".json");
  ScenarioMeans out;
  if (std::ifstream in(path); in) {
    try {
      const auto j = nlohmann::json::parse(in);
      if (j.at("key") == key) {
        for (const auto& [m, v] : j.at("mean_rmse").items()) out.mean_rmse[m] = v.get<double>();
        out.seconds = j.at("seconds").get<double>();
        out.cached = true;
        return out;
      }
    } catch (const std::exception&) {
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport report = run_scenario(s, opt);
  out.seconds = seconds_since(t0);
  nlohmann::json means = nlohmann::json::object();
  for (const auto& m : report.rows.front().methods) {
    out.mean_rmse[m.method] = m.mean_rmse;
    means[m.method] = m.mean_rmse;
  }
  std::ofstream(path) << nlohmann::json{{"key", key}, {"mean_rmse", means}, {"seconds", out.seconds},
                                        {"report", to_json(report)}}
                             .dump(2)
                      << '\n';
  return out;
}

SimulationScenario scenario(IndexModel model, int n, int p, double sigma, int reps) {
  SimulationScenario s;
  s.model = model;
  s.n = n;
  s.p = p;
  s.sigma = sigma;
  s.reps = reps;
  s.test_size = 10000;
  s.seed = kSeed;
  return s;
}

const SimulationScenario kSingle500 = scenario(IndexModel::single_index, 500, 10, 0.15, 20);
const SimulationScenario kTwo500 = scenario(IndexModel::two_index, 500, 5, 0.30, 20);
const SimulationScenario kSingle1000 = scenario(IndexModel::single_index, 1000, 5, 0.15, 20);

std::string describe(const ScenarioMeans& m) {
  std::string s;
  for (const auto& [k, v] : m.mean_rmse) s += k + "=" + fmt(v) + " ";
  return s + "(" + fmt(m.seconds, 3) + " s" + (m.cached ? ", reused" : "") + ")";
}

// --- 4 ------------------------------------------------------------------

Outcome criterion_4() {
  Outcome o;
  const ScenarioMeans single = run_or_load("single_n500_p10_sd0.15", kSingle500, {});
  std::cout << "  seed " << kSeed << ", single-index n=500 p=10 sd=0.15: " << describe(single) << '\n';
  o.check(std::abs(single.mean_rmse.at("matrix") - 0.158) <= 0.02,
          "single matrix " + fmt(single.mean_rmse.at("matrix")) + " vs 0.158+-0.02");
  o.check(std::abs(single.mean_rmse.at("scalar") - 1.834) <= 0.05,
          "single scalar " + fmt(single.mean_rmse.at("scalar")) + " vs 1.834+-0.05");

  const ScenarioMeans two = run_or_load("two_n500_p5_sd0.30", kTwo500, {});
  std::cout << "  seed " << kSeed << ", two-index n=500 p=5 sd=0.30: " << describe(two) << '\n';
  o.check(std::abs(two.mean_rmse.at("matrix") - 0.323) <= 0.03,
          "two matrix " + fmt(two.mean_rmse.at("matrix")) + " vs 0.323+-0.03");
  o.check(std::abs(two.mean_rmse.at("oracle") - 0.320) <= 0.02,
          "two oracle " + fmt(two.mean_rmse.at("oracle")) + " vs 0.320+-0.02");
  return o;
}

// --- 5 ------------------------------------------------------------------

Outcome criterion_5() {
  Outcome o;
  const std::vector<std::pair<std::string, SimulationScenario>> runs = {
      {"single_n500_p10_sd0.15", kSingle500}, {"two_n500_p5_sd0.30", kTwo500}, {"single_n1000_p5_sd0.15", kSingle1000}};
  for (const auto& [label, s] : runs) {
    const ScenarioMeans m = run_or_load(label, s, {});
    std::cout << "  seed " << kSeed << ", " << label << ": " << describe(m) << '\n';
    const double matrix = m.mean_rmse.at("matrix");
    o.check(matrix < m.mean_rmse.at("scalar"), label + " matrix < scalar");
    if (s.n == 1000) {
      o.check(matrix <= m.mean_rmse.at("oracle") + 0.015,
              label + " matrix " + fmt(matrix) + " <= oracle " + fmt(m.mean_rmse.at("oracle")) + " + 0.015");
    }
  }
  return o;
}

// --- 6 ------------------------------------------------------------------

Outcome criterion_6() {
  Outcome o;
  SimulationOptions opt;
  opt.include_oracle = false;
  const double sigma = 0.15;
  std::vector<theory::RatePoint> points;
  std::vector<theory::RatePoint> excess_points;
  bool positive = true;
  for (int n : {250, 500, 1000, 2000}) {
    const SimulationScenario s = scenario(IndexModel::single_index, n, 10, sigma, 10);
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentReport r = run_scenario(s, opt);
    const MethodSummary& m = r.rows.front().method("matrix");
    double msq = 0.0;
    for (double v : m.rmse_per_rep) msq += v * v / static_cast<double>(m.rmse_per_rep.size());
    double excess = 0.0;
    for (double v : m.excess_risk_per_rep) excess += v / static_cast<double>(m.excess_risk_per_rep.size());
    std::cout << "  n=" << n << " mean RMSE " << fmt(m.mean_rmse) << ", RMSE^2-sd^2 " << fmt(msq - sigma * sigma)
              << ", excess risk " << fmt(excess) << " (" << fmt(seconds_since(t0), 3) << " s)\n";
    if (!(msq - sigma * sigma > 0.0)) positive = false;
    points.push_back({static_cast<double>(n), msq - sigma * sigma});
    excess_points.push_back({static_cast<double>(n), excess});
  }
  o.check(positive, "RMSE^2 - sd^2 positive at every n");
  if (!positive) return o;
  const double slope = theory::rate_slope(points);
  std::cout << "  slope using excess risk against the noise-free function: " << fmt(theory::rate_slope(excess_points))
            << '\n';
  o.check(slope < -0.4, "slope " + fmt(slope) + " < -0.4");
  return o;
}

// --- 7 ------------------------------------------------------------------

std::string data_file(const std::string& name) { return std::string(NWBAND_DATA_DIR) + "/" + name; }

Outcome criterion_7() {
  Outcome o;
  BenchmarkConfig config;
  config.seed = kSeed;
  struct Case {
    std::string name;
    std::string file;
    std::string target;
    IngestOptions ingest;
  };
  const std::vector<Case> cases = {{"boston", "boston.csv", "medv", {{"chas"}, {}}},
                                   {"concrete", "concrete.csv", "compressive_strength", {}}};
  for (const auto& c : cases) {
    const auto t0 = std::chrono::steady_clock::now();
    const BenchmarkReport r = run_benchmark(ingest_csv(data_file(c.file), c.target, c.ingest), config, c.name);
    std::cout << "  seed " << kSeed << ", " << c.name << " n=" << r.n << " p=" << r.p << ": matrix " << fmt(r.matrix_rmse)
              << ", linear " << fmt(r.linear_rmse) << ", scalar " << fmt(r.scalar_rmse) << " ("
              << fmt(seconds_since(t0), 3) << " s)\n";
    o.check(r.matrix_rmse < r.linear_rmse, c.name + " matrix < linear");
    o.check(r.linear_rmse < r.scalar_rmse, c.name + " linear < scalar");
    if (c.name == "boston")
      o.check(r.matrix_rmse >= 3.4 && r.matrix_rmse <= 5.0, "boston matrix " + fmt(r.matrix_rmse) + " in [3.4, 5.0]");
  }
  return o;
}

// --- 8 ------------------------------------------------------------------

Outcome criterion_8() {
  Outcome o;
  // Independent evaluations: M1 = 8, M2 = 16 at M = 1, delta = 1.
  const double c2_direct = 8.0 * 4.0 * (16.0 / 1.0 + 8.0 / 3.0);
  o.check(std::abs(theory::c2(1.0, 1.0) - 1792.0 / 3.0) <= 1e-9 && std::abs(c2_direct - 1792.0 / 3.0) <= 1e-9,
          "c2(1,1) = " + fmt(theory::c2(1.0, 1.0), 12));
  const double lambda_direct = std::sqrt(10.0) * std::cbrt(1000.0 * std::log(1000.0));
  const double lambda = theory::lambda_schedule(1000, 10, 1.0);
  o.check(std::abs(lambda - lambda_direct) <= 1e-12, "lambda(1000,10,1) = " + fmt(lambda, 8) + " matches direct evaluation");
  o.check(std::abs(lambda - 60.196) <= 1e-3, "lambda(1000,10,1) within 1e-3 of 60.196");

  theory::OracleBoundInputs in;
  in.M = 1.0;
  in.delta = 1.0;
  in.n = 10.0;
  in.pi = 0.1;
  in.d = 6.0;
  in.diam = 10.0;
  in.C = 0.01;
  bool raised = false;
  try {
    theory::c1(in);
  } catch (const PreconditionViolation&) {
    raised = true;
  }
  in.n = 1e5;
  in.C = 2.0;
  in.M = 0.05;
  bool side = false;
  try {
    theory::c1(in);
  } catch (const PreconditionViolation&) {
    side = true;
  }
  o.check(raised && side, "c1 precondition violations raise");
  return o;
}

// --- 9 ------------------------------------------------------------------

Outcome criterion_9() {
  Outcome o;
  int monotone = 0;
  int below = 0;
  for (int t = 0; t < 10; ++t) {
    SimulationScenario s = scenario(t % 2 ? IndexModel::two_index : IndexModel::single_index, 150, 5, 0.15, 1);
    s.seed = kSeed + static_cast<std::uint64_t>(t);
    const Dataset d = generate(s, Sample::train, 0);
    const FoldPlan plan = make_fold_plan(d.n(), 10, s.seed);
    const FeasibleSet set(d.p(), theory::lambda_schedule(d.n(), d.p()));
    GdConfig gd;
    gd.max_iters = 60;
    const BandwidthOptimum opt = optimize_bandwidth(d, set, plan, gd, scalar_initialization(d, plan, set));
    bool ok = true;
    const auto& rec = opt.trace.records;
    for (std::size_t i = 1; i < rec.size(); ++i) ok = ok && rec[i].cv_value <= rec[i - 1].cv_value;
    if (ok) ++monotone;
    if (opt.trace.final_cv_value <= rec.front().cv_value) ++below;
  }
  o.check(monotone == 10, std::to_string(monotone) + "/10 traces non-increasing");
  o.check(below == 10, std::to_string(below) + "/10 final <= initial");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {criterion_1, criterion_2, criterion_3,
                                                          criterion_4, criterion_5, criterion_6,
                                                          criterion_7, criterion_8, criterion_9};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (int i = 1; i <= 9; ++i) selected.push_back(i);

  int failures = 0;
  for (int c : selected) {
    if (c < 1 || c > 9) {
      std::cerr << "unknown criterion " << c << '\n';
      return 2;
    }
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(c - 1)]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << " | " << o.detail << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
