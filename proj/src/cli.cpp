#include "nwband/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "nwband/benchmark.hpp"
#include "nwband/errors.hpp"
#include "nwband/parallel.hpp"
#include "nwband/serialization.hpp"
#include "nwband/simulation.hpp"
#include "nwband/theory_constants.hpp"
#include "nwband/version.hpp"

namespace nwband {
namespace {

// Flag values shared by the subcommands that optimize a bandwidth.
struct OptimizerFlags {
  int max_iters = GdConfig{}.max_iters;
  double tol_rel = GdConfig{}.tol_rel;
  double armijo_c = GdConfig{}.armijo_c;
  double shrink = GdConfig{}.shrink;
  double eta0 = GdConfig{}.eta0;
  double gamma = GdConfig{}.gamma_subopt;
  double V = 1.0;
  std::optional<double> lambda;
  int k_folds = 10;
  int cv_repeats = 1;

  GdConfig config() const { return {max_iters, tol_rel, armijo_c, shrink, eta0, gamma}; }
};

void add_optimizer_flags(CLI::App* app, OptimizerFlags& f) {
  app->add_option("--k-folds", f.k_folds, "Cross-validation folds")->capture_default_str();
  app->add_option("--cv-repeats", f.cv_repeats, "Independent K-fold partitions")->capture_default_str();
  app->add_option("--max-iters", f.max_iters, "Gradient descent iteration cap")->capture_default_str();
  app->add_option("--tol-rel", f.tol_rel, "Relative-decrease stopping threshold")->capture_default_str();
  app->add_option("--armijo-c", f.armijo_c, "Sufficient-decrease constant")->capture_default_str();
  app->add_option("--shrink", f.shrink, "Backtracking factor")->capture_default_str();
  app->add_option("--eta0", f.eta0, "Initial step size")->capture_default_str();
  app->add_option("--gamma", f.gamma, "Declared suboptimality of the returned bandwidth")->capture_default_str();
  app->add_option("--V", f.V, "Scale of the feasible-set radius schedule")->capture_default_str();
  app->add_option("--lambda", f.lambda, "Feasible-set radius, overriding the schedule");
}

nlohmann::json optimizer_json(const OptimizerFlags& f) {
  return {{"k_folds", f.k_folds},
          {"cv_repeats", f.cv_repeats},
          {"gd", to_json(f.config())},
          {"V", f.V},
          {"lambda", f.lambda ? nlohmann::json(*f.lambda) : nullptr}};
}

// Thrown for flag values CLI11 accepts syntactically but the run cannot use.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("NWBAND_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("NWBAND_SEED is not an unsigned integer: '") + env + "'");
  }
  return 0;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

nlohmann::json run_header(const std::string& command, const std::vector<std::string>& args, std::uint64_t seed) {
  return {{"version", kVersion}, {"command", command}, {"argv", args}, {"seed", seed}};
}

void write_failure_trace(const OptimizationFailure& e, const std::string& path, std::ostream& err) {
  std::ofstream out(path);
  if (out) {
    write_trace_jsonl(e.trace(), out);
    err << "optimizer trace written to " << path << '\n';
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kernel regression with a matrix-valued bandwidth selected by cross-validation", "nwband"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::optional<unsigned> threads;
  app.add_option("--threads", threads, "Worker threads (default: machine parallelism)")->check(CLI::PositiveNumber);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run simulation replications and write a report");
  std::string model_name;
  SimulationScenario scenario;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_out;
  bool no_oracle = false;
  OptimizerFlags sim_opt;
  sim->add_option("--model", model_name, "single-index or two-index")
      ->required()
      ->check(CLI::IsMember({"single-index", "two-index", "single_index", "two_index"}));
  sim->add_option("--n", scenario.n, "Training sample size")->required();
  sim->add_option("--p", scenario.p, "Covariate count")->required();
  sim->add_option("--sigma", scenario.sigma, "Noise standard deviation")->required();
  sim->add_option("--reps", scenario.reps, "Replications")->capture_default_str();
  sim->add_option("--test-size", scenario.test_size, "Test sample size")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Global seed (fallback: NWBAND_SEED, then 0)");
  sim->add_option("--out", sim_out, "Output prefix; writes <out>.csv and <out>.json")->required();
  sim->add_flag("--no-oracle", no_oracle, "Skip the oracle comparator");
  add_optimizer_flags(sim, sim_opt);
  sim->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  // bench
  auto* bench = app.add_subcommand("bench", "Run the outer/inner split benchmark on a CSV file");
  std::string bench_csv;
  std::string bench_target;
  std::string bench_name;
  std::vector<std::string> bench_categorical;
  std::vector<std::string> bench_exclude;
  std::optional<std::uint64_t> bench_seed;
  std::string bench_out;
  std::string bench_preprocess = "per-split";
  int outer_splits = 4;
  OptimizerFlags bench_opt;
  bench->add_option("--csv", bench_csv, "Input CSV with header")->required();
  bench->add_option("--target", bench_target, "Outcome column")->required();
  bench->add_option("--dataset", bench_name, "Dataset label (default: file stem)");
  bench->add_option("--categorical", bench_categorical, "Columns coded as categorical")->delimiter(',');
  bench->add_option("--exclude", bench_exclude, "Columns to ignore")->delimiter(',');
  bench->add_option("--seed", bench_seed, "Global seed (fallback: NWBAND_SEED, then 0)");
  bench->add_option("--outer-splits", outer_splits, "Outer groups")->capture_default_str();
  bench->add_option("--preprocess", bench_preprocess, "per-split or global")
      ->check(CLI::IsMember({"per-split", "global"}))
      ->capture_default_str();
  bench->add_option("--out", bench_out, "Output prefix; writes <out>.csv, <out>.json, <out>.sidecar.json")
      ->required();
  add_optimizer_flags(bench, bench_opt);
  bench->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a matrix bandwidth on a CSV file and save a model bundle");
  std::string fit_csv;
  std::string fit_target;
  std::vector<std::string> fit_categorical;
  std::vector<std::string> fit_exclude;
  std::optional<std::uint64_t> fit_seed;
  std::string fit_out;
  std::string fit_trace;
  OptimizerFlags fit_opt;
  fit->add_option("--csv", fit_csv, "Training CSV with header")->required();
  fit->add_option("--target", fit_target, "Outcome column")->required();
  fit->add_option("--categorical", fit_categorical, "Columns coded as categorical")->delimiter(',');
  fit->add_option("--exclude", fit_exclude, "Columns to ignore")->delimiter(',');
  fit->add_option("--seed", fit_seed, "Fold seed (fallback: NWBAND_SEED, then 0)");
  fit->add_option("--out", fit_out, "Model JSON path; training data goes to <out>.data.csv")->required();
  fit->add_option("--trace", fit_trace, "Write the optimizer trace as JSON lines");
  add_optimizer_flags(fit, fit_opt);
  fit->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  // predict
  auto* pred = app.add_subcommand("predict", "Predict from a saved model bundle");
  std::string pred_model;
  std::string pred_csv;
  std::string pred_out;
  pred->add_option("--model", pred_model, "Model JSON written by fit")->required();
  pred->add_option("--csv", pred_csv, "Query CSV with the training covariate columns")->required();
  pred->add_option("--out", pred_out, "Predictions CSV (default: standard output)");
  pred->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  // theory
  auto* theory_cmd = app.add_subcommand("theory", "Evaluate schedules and oracle-inequality constants");
  double t_n = 1000;
  int t_p = 10;
  double t_V = 1.0;
  double t_M = 1.0;
  double t_delta = 1.0;
  int t_K = 10;
  double t_B = 1.0;
  std::string t_out;
  theory_cmd->add_option("--n", t_n, "Sample size")->capture_default_str();
  theory_cmd->add_option("--p", t_p, "Covariate count")->capture_default_str();
  theory_cmd->add_option("--V", t_V, "Schedule scale")->capture_default_str();
  theory_cmd->add_option("--M", t_M, "Bound on |Y|")->capture_default_str();
  theory_cmd->add_option("--delta", t_delta, "Oracle inequality delta")->capture_default_str();
  theory_cmd->add_option("--k-folds", t_K, "Folds, giving pi = floor(n/K)/n")->capture_default_str();
  theory_cmd->add_option("--B", t_B, "Bound on covariate norms")->capture_default_str();
  theory_cmd->add_option("--out", t_out, "Write JSON here instead of standard output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  auto usage = [&](const std::string& what) {
    err << "error: " << what << "\n\n" << app.get_subcommand(command)->help();
    return kExitUsage;
  };

  try {
    if (threads) set_max_threads(*threads);

    if (command == "simulate") {
      scenario.model = parse_index_model(model_name);
      scenario.seed = resolve_seed(sim_seed);
      SimulationOptions options;
      options.cv_folds = sim_opt.k_folds;
      options.cv_repeats = sim_opt.cv_repeats;
      options.gd = sim_opt.config();
      options.V = sim_opt.V;
      options.lambda_override = sim_opt.lambda;
      options.include_oracle = !no_oracle;
      try {
        scenario.validate();
        options.gd.validate();
        if (options.cv_folds < 2 || options.cv_folds > scenario.n) throw InvalidInput("--k-folds must lie in [2, n]");
        if (options.cv_repeats < 1) throw InvalidInput("--cv-repeats must be at least 1");
        if (!(options.V > 0.0)) throw InvalidInput("--V must be positive");
        if (options.lambda_override && !(*options.lambda_override > 0.0)) throw InvalidInput("--lambda must be positive");
      } catch (const InvalidInput& e) {
        return usage(e.what());
      }

      ExperimentReport report;
      try {
        report = run_scenario(scenario, options);
      } catch (const OptimizationFailure& e) {
        write_failure_trace(e, sim_out + ".failure.trace.jsonl", err);
        throw;
      }
      nlohmann::json meta = run_header(command, args, scenario.seed);
      meta["config"] = {{"scenario", to_json(scenario)}, {"optimizer", optimizer_json(sim_opt)},
                        {"include_oracle", options.include_oracle}, {"threads", max_threads()}};
      meta["run"] = report.metadata;
      report.metadata = meta;
      {
        auto f = open_output(sim_out + ".csv");
        write_csv(report, f);
      }
      {
        auto f = open_output(sim_out + ".json");
        f << to_json(report).dump(2) << '\n';
      }
      write_csv(report, out);
      return kExitOk;
    }

    if (command == "bench") {
      BenchmarkConfig config;
      config.outer_splits = outer_splits;
      config.inner_folds = bench_opt.k_folds;
      config.inner_repeats = bench_opt.cv_repeats;
      config.seed = resolve_seed(bench_seed);
      config.gd = bench_opt.config();
      config.V = bench_opt.V;
      config.lambda_override = bench_opt.lambda;
      config.global_preprocess = bench_preprocess == "global";
      try {
        config.gd.validate();
        if (config.outer_splits < 2) throw InvalidInput("--outer-splits must be at least 2");
        if (config.inner_folds < 2) throw InvalidInput("--k-folds must be at least 2");
      } catch (const InvalidInput& e) {
        return usage(e.what());
      }
      const RawTable raw = ingest_csv(bench_csv, bench_target, {bench_categorical, bench_exclude});
      const std::string name = bench_name.empty() ? std::filesystem::path(bench_csv).stem().string() : bench_name;
      BenchmarkReport report = run_benchmark(raw, config, name);
      nlohmann::json meta = run_header(command, args, config.seed);
      meta["config"] = {{"csv", bench_csv},
                        {"target", bench_target},
                        {"categorical", bench_categorical},
                        {"exclude", bench_exclude},
                        {"outer_splits", outer_splits},
                        {"preprocess", bench_preprocess},
                        {"optimizer", optimizer_json(bench_opt)},
                        {"threads", max_threads()}};
      meta["run"] = report.metadata;
      report.metadata = meta;
      {
        auto f = open_output(bench_out + ".csv");
        write_csv(report, f);
      }
      {
        auto f = open_output(bench_out + ".json");
        nlohmann::json j = to_json(report);
        j["metadata"] = report.metadata;
        f << j.dump(2) << '\n';
      }
      {
        auto f = open_output(bench_out + ".sidecar.json");
        f << sidecar_json(report).dump(2) << '\n';
      }
      write_csv(report, out);
      return kExitOk;
    }

    if (command == "fit") {
      const std::uint64_t seed = resolve_seed(fit_seed);
      const GdConfig gd = fit_opt.config();
      try {
        gd.validate();
      } catch (const InvalidInput& e) {
        return usage(e.what());
      }
      const RawTable raw = ingest_csv(fit_csv, fit_target, {fit_categorical, fit_exclude});
      const Preprocessed pre = preprocess(raw);
      const Dataset& data = pre.data;
      if (fit_opt.k_folds < 2 || fit_opt.k_folds > data.n()) return usage("--k-folds must lie in [2, n]");
      const FoldPlan plan = make_fold_plan(data.n(), fit_opt.k_folds, seed, fit_opt.cv_repeats);
      const double radius = fit_opt.lambda ? *fit_opt.lambda : theory::lambda_schedule(data.n(), data.p(), fit_opt.V);
      const FeasibleSet set(data.p(), radius);
      BandwidthOptimum opt;
      try {
        opt = optimize_bandwidth(data, set, plan, gd, scalar_initialization(data, plan, set));
      } catch (const OptimizationFailure& e) {
        write_failure_trace(e, fit_trace.empty() ? fit_out + ".failure.trace.jsonl" : fit_trace, err);
        throw;
      }
      if (!fit_trace.empty()) {
        auto f = open_output(fit_trace);
        write_trace_jsonl(opt.trace, f);
      }
      nlohmann::json meta = run_header(command, args, seed);
      meta["config"] = {{"csv", fit_csv},
                        {"target", fit_target},
                        {"categorical", fit_categorical},
                        {"exclude", fit_exclude},
                        {"optimizer", optimizer_json(fit_opt)},
                        {"lambda", radius}};
      meta["result"] = {{"cv_value", opt.trace.final_cv_value},
                        {"initial_cv_value", opt.trace.records.front().cv_value},
                        {"iterations", static_cast<int>(opt.trace.records.size()) - 1},
                        {"stop_reason", opt.trace.stop_reason},
                        {"gamma_subopt", opt.trace.gamma_subopt},
                        {"rows_read", raw.rows()},
                        {"rows_used", data.n()}};
      save_model({pre.spec, opt.bandwidth, data, meta}, fit_out);
      out << meta["result"].dump() << '\n';
      return kExitOk;
    }

    if (command == "predict") {
      const ModelBundle model = load_model(pred_model);
      std::vector<std::string> categorical;
      for (const auto& c : model.spec.columns)
        if (c.categorical) categorical.push_back(c.name);
      std::ifstream probe(pred_csv);
      if (!probe) throw IngestError(pred_csv + ": cannot open file");
      // Categorical spec columns are read as text; other columns must be numeric.
      RawTable raw;
      {
        std::vector<std::string> known = categorical;
        const RawTable header_only = parse_csv(probe, "", {}, pred_csv);
        for (const auto& c : header_only.columns) {
          const bool expected = c.name == model.spec.target ||
                                std::any_of(model.spec.columns.begin(), model.spec.columns.end(),
                                            [&](const ColumnSpec& s) { return s.name == c.name; });
          if (!expected) throw IngestError(pred_csv + ": column '" + c.name + "' is not part of the model schema");
        }
        for (const auto& s : model.spec.columns)
          if (!header_only.has_column(s.name))
            throw IngestError(pred_csv + ": column '" + s.name + "' required by the model is missing");
        raw = header_only;
        for (auto& c : raw.columns) {
          if (std::find(known.begin(), known.end(), c.name) != known.end()) c.categorical = true;
        }
      }
      const Preprocessed query = preprocess(raw, model.spec);
      const Vector predictions = predict_batch(KernelFit(model.train, model.bandwidth), query.data.x());

      std::ofstream file;
      std::ostream* sink = &out;
      if (!pred_out.empty()) {
        file = open_output(pred_out);
        sink = &file;
      }
      *sink << "row,prediction\n";
      char buf[40];
      for (std::size_t k = 0; k < query.rows.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", predictions[static_cast<Eigen::Index>(k)]);
        *sink << query.rows[k] + 1 << ',' << buf << '\n';
      }
      const int dropped = raw.rows() - static_cast<int>(query.rows.size());
      if (dropped > 0) err << dropped << " rows with missing values were skipped\n";
      return kExitOk;
    }

    if (command == "theory") {
      if (t_n < 2 || t_p < 1 || t_K < 2 || t_K > t_n) return usage("theory needs n >= 2, p >= 1 and 2 <= K <= n");
      const double d = t_p * (t_p + 1) / 2.0;
      const double lambda = theory::lambda_schedule(t_n, t_p, t_V);
      const FeasibleSet set(t_p, lambda);
      nlohmann::json j = {{"version", kVersion},
                          {"inputs", {{"n", t_n}, {"p", t_p}, {"V", t_V}, {"M", t_M}, {"delta", t_delta},
                                      {"k_folds", t_K}, {"B", t_B}}},
                          {"lambda_n", lambda},
                          {"h_n", {{"q=1", theory::h_q(t_n, 1, t_V)}, {"q=2", theory::h_q(t_n, 2, t_V)},
                                   {"q=p", theory::h_q(t_n, t_p, t_V)}}},
                          {"M1", theory::m1(t_M)},
                          {"M2", theory::m2(t_M)},
                          {"c2", theory::c2(t_M, t_delta)},
                          {"d", d},
                          {"diam", set.diameter()},
                          {"C", theory::lipschitz_C(t_p, t_B, t_M)}};
      theory::OracleBoundInputs in;
      in.M = t_M;
      in.delta = t_delta;
      in.n = t_n;
      in.pi = std::floor(t_n / t_K) / t_n;
      in.d = d;
      in.diam = set.diameter();
      in.C = theory::lipschitz_C(t_p, t_B, t_M);
      int status = kExitOk;
      try {
        j["c1"] = theory::c1(in);
        j["bound_term"] = theory::oracle_bound_term(in);
      } catch (const PreconditionViolation& e) {
        j["c1"] = nullptr;
        j["precondition_violation"] = e.what();
        err << "error: " << e.what() << '\n';
        status = kExitFailure;
      }
      if (t_out.empty()) {
        out << j.dump(2) << '\n';
      } else {
        auto f = open_output(t_out);
        f << j.dump(2) << '\n';
      }
      return status;
    }
  } catch (const UsageError& e) {
    return usage(e.what());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace nwband
