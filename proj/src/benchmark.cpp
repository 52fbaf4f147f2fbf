#include "nwband/benchmark.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/QR>

#include "nwband/errors.hpp"
#include "nwband/parallel.hpp"
#include "nwband/report.hpp"
#include "nwband/seeding.hpp"
#include "nwband/theory_constants.hpp"

namespace nwband {

int RawTable::rows() const { return columns.empty() ? 0 : static_cast<int>(columns.front().text.size()); }

bool RawTable::has_column(const std::string& name) const {
  return std::any_of(columns.begin(), columns.end(), [&](const RawColumn& c) { return c.name == name; });
}

const RawColumn& RawTable::column(const std::string& name) const {
  for (const auto& c : columns)
    if (c.name == name) return c;
  throw InvalidInput("table has no column '" + name + "'");
}

std::vector<int> RawTable::complete_rows() const {
  std::vector<int> out;
  for (int i = 0; i < rows(); ++i) {
    const bool complete = std::none_of(columns.begin(), columns.end(),
                                       [&](const RawColumn& c) { return c.missing[static_cast<std::size_t>(i)]; });
    if (complete) out.push_back(i);
  }
  return out;
}

RawTable RawTable::select_rows(std::span<const int> rows_wanted) const {
  RawTable out;
  out.target = target;
  for (const auto& c : columns) {
    RawColumn s;
    s.name = c.name;
    s.categorical = c.categorical;
    for (int r : rows_wanted) {
      if (r < 0 || r >= rows()) throw InvalidInput("row index out of range");
      const auto i = static_cast<std::size_t>(r);
      s.text.push_back(c.text[i]);
      s.numeric.push_back(c.numeric[i]);
      s.missing.push_back(c.missing[i]);
    }
    out.columns.push_back(std::move(s));
  }
  return out;
}

bool is_missing_marker(const std::string& cell) { return cell.empty() || cell == "?" || cell == "NA"; }

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Splits one logical record, which may span lines inside quotes. Returns
// false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, int& line, const std::string& source) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  const int start_line = line + 1;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      ++line;
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
    }
  }
  if (in_quotes) throw IngestError(source + ": unterminated quoted field starting on line " + std::to_string(start_line));
  if (!any) return false;
  ++line;
  fields.push_back(std::move(field));
  return true;
}

bool blank_record(const std::vector<std::string>& fields) {
  return fields.size() == 1 && trim(fields[0]).empty();
}

}  // namespace

RawTable parse_csv(std::istream& in, const std::string& target, const IngestOptions& options,
                   const std::string& source) {
  std::vector<std::string> fields;
  int line = 0;
  if (!read_record(in, fields, line, source) || blank_record(fields)) throw IngestError(source + ": missing header row");

  std::vector<std::string> header;
  for (auto& f : fields) header.push_back(trim(f));
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j].empty()) throw IngestError(source + ": header column " + std::to_string(j + 1) + " has no name");
    for (std::size_t k = 0; k < j; ++k)
      if (header[k] == header[j]) throw IngestError(source + ": duplicate column '" + header[j] + "'");
  }
  for (const auto& name : options.exclude)
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw IngestError(source + ": excluded column '" + name + "' is not in the header");
  for (const auto& name : options.categorical)
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw IngestError(source + ": categorical column '" + name + "' is not in the header");
  if (!target.empty() && std::find(header.begin(), header.end(), target) == header.end())
    throw IngestError(source + ": target column '" + target + "' is not in the header");
  if (!target.empty() && std::find(options.exclude.begin(), options.exclude.end(), target) != options.exclude.end())
    throw IngestError(source + ": target column '" + target + "' is excluded");

  std::vector<std::vector<std::string>> cells(header.size());
  int data_row = 0;
  while (read_record(in, fields, line, source)) {
    if (blank_record(fields)) continue;
    ++data_row;
    if (fields.size() != header.size()) {
      throw IngestError(source + ": data row " + std::to_string(data_row) + " (line " + std::to_string(line) +
                        ") has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    for (std::size_t j = 0; j < fields.size(); ++j) cells[j].push_back(trim(fields[j]));
  }

  RawTable table;
  table.target = target;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (std::find(options.exclude.begin(), options.exclude.end(), header[j]) != options.exclude.end()) continue;
    RawColumn col;
    col.name = header[j];
    col.categorical =
        std::find(options.categorical.begin(), options.categorical.end(), header[j]) != options.categorical.end();
    std::optional<std::size_t> first_text;
    for (std::size_t i = 0; i < cells[j].size(); ++i) {
      const std::string& cell = cells[j][i];
      const bool missing = is_missing_marker(cell);
      col.missing.push_back(missing);
      const auto value = missing ? std::nullopt : parse_number(cell);
      if (!missing && !value && !first_text) first_text = i;
      col.numeric.push_back(value.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    if (first_text) col.categorical = true;
    if (col.categorical) std::fill(col.numeric.begin(), col.numeric.end(), std::numeric_limits<double>::quiet_NaN());
    if (col.name == target && col.categorical) {
      std::string why = first_text ? "value '" + cells[j][*first_text] + "' in data row " +
                                         std::to_string(*first_text + 1) + " is not numeric"
                                   : "it is listed as categorical";
      throw IngestError(source + ": target column '" + target + "' must be numeric; " + why);
    }
    col.text = std::move(cells[j]);
    table.columns.push_back(std::move(col));
  }
  if (table.columns.empty()) throw IngestError(source + ": no columns left after exclusions");
  return table;
}

RawTable ingest_csv(const std::filesystem::path& path, const std::string& target, const IngestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(path.string() + ": cannot open file");
  return parse_csv(in, target, options, path.string());
}

int PreprocessSpec::p() const {
  int total = 0;
  for (const auto& c : columns) total += c.width();
  return total;
}

std::vector<std::string> PreprocessSpec::feature_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns) {
    if (!c.categorical) {
      names.push_back(c.name);
      continue;
    }
    for (std::size_t k = 1; k < c.levels.size(); ++k) names.push_back(c.name + "=" + c.levels[k]);
  }
  return names;
}

const ColumnSpec& PreprocessSpec::column(const std::string& name) const {
  for (const auto& c : columns)
    if (c.name == name) return c;
  throw InvalidInput("preprocessing spec has no column '" + name + "'");
}

bool operator==(const ColumnSpec& a, const ColumnSpec& b) {
  return a.name == b.name && a.categorical == b.categorical && a.center == b.center && a.scale == b.scale &&
         a.levels == b.levels;
}

bool operator==(const PreprocessSpec& a, const PreprocessSpec& b) {
  return a.target == b.target && a.columns == b.columns && a.missing_policy == b.missing_policy;
}

PreprocessSpec fit_preprocess(const RawTable& raw, std::span<const int> rows) {
  if (raw.target.empty()) throw PreprocessError("fitting a preprocessing spec needs a target column");
  if (static_cast<int>(rows.size()) < kMinPreprocessRows) {
    throw PreprocessError("preprocessing needs at least " + std::to_string(kMinPreprocessRows) +
                          " complete rows, got " + std::to_string(rows.size()));
  }
  PreprocessSpec spec;
  spec.target = raw.target;
  for (const auto& col : raw.columns) {
    if (col.name == raw.target) continue;
    ColumnSpec cs;
    cs.name = col.name;
    cs.categorical = col.categorical;
    for (int r : rows)
      if (col.missing[static_cast<std::size_t>(r)])
        throw PreprocessError("column '" + col.name + "' is missing in fitting row " + std::to_string(r + 1));
    if (col.categorical) {
      for (int r : rows) {
        const std::string& level = col.text[static_cast<std::size_t>(r)];
        if (std::find(cs.levels.begin(), cs.levels.end(), level) == cs.levels.end()) cs.levels.push_back(level);
      }
      // A single-level column contributes no indicators.
    } else {
      double sum = 0.0;
      for (int r : rows) sum += col.numeric[static_cast<std::size_t>(r)];
      const double mean = sum / static_cast<double>(rows.size());
      double ss = 0.0;
      for (int r : rows) {
        const double d = col.numeric[static_cast<std::size_t>(r)] - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(rows.size() - 1));
      if (!(sd > 0.0)) throw PreprocessError("continuous column '" + col.name + "' has zero variance");
      cs.center = mean;
      cs.scale = sd;
    }
    spec.columns.push_back(std::move(cs));
  }
  if (spec.p() == 0) throw PreprocessError("no covariate columns remain after coding");
  return spec;
}

Dataset apply_preprocess(const PreprocessSpec& spec, const RawTable& raw, std::span<const int> rows) {
  if (rows.empty()) throw PreprocessError("no rows to encode");
  const int p = spec.p();
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), p);
  Vector y = Vector::Zero(static_cast<Eigen::Index>(rows.size()));
  int offset = 0;
  for (const auto& cs : spec.columns) {
    if (!raw.has_column(cs.name)) throw PreprocessError("input has no column '" + cs.name + "'");
    const RawColumn& col = raw.column(cs.name);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto i = static_cast<std::size_t>(rows[k]);
      const auto row = static_cast<Eigen::Index>(k);
      if (col.missing[i])
        throw PreprocessError("column '" + cs.name + "' is missing in row " + std::to_string(rows[k] + 1));
      if (cs.categorical) {
        const auto it = std::find(cs.levels.begin(), cs.levels.end(), col.text[i]);
        const auto level = it - cs.levels.begin();
        if (it != cs.levels.end() && level > 0) x(row, offset + level - 1) = 1.0;
      } else {
        const auto value = parse_number(col.text[i]);
        if (!value) {
          throw PreprocessError("column '" + cs.name + "' row " + std::to_string(rows[k] + 1) + ": value '" +
                                col.text[i] + "' is not numeric");
        }
        x(row, offset) = (*value - cs.center) / cs.scale;
      }
    }
    offset += cs.width();
  }
  if (raw.has_column(spec.target)) {
    const RawColumn& target = raw.column(spec.target);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto i = static_cast<std::size_t>(rows[k]);
      if (target.missing[i] || target.categorical)
        throw PreprocessError("target '" + spec.target + "' is not numeric in row " + std::to_string(rows[k] + 1));
      y[static_cast<Eigen::Index>(k)] = target.numeric[i];
    }
  }
  return Dataset(std::move(x), std::move(y), spec.feature_names());
}

namespace {

// Complete rows with respect to the spec's columns (and target if present).
std::vector<int> complete_rows_for(const PreprocessSpec& spec, const RawTable& raw) {
  std::vector<const RawColumn*> used;
  for (const auto& cs : spec.columns) {
    if (!raw.has_column(cs.name)) throw PreprocessError("input has no column '" + cs.name + "'");
    used.push_back(&raw.column(cs.name));
  }
  if (raw.has_column(spec.target)) used.push_back(&raw.column(spec.target));
  std::vector<int> out;
  for (int i = 0; i < raw.rows(); ++i)
    if (std::none_of(used.begin(), used.end(), [&](const RawColumn* c) { return c->missing[static_cast<std::size_t>(i)]; }))
      out.push_back(i);
  return out;
}

}  // namespace

Preprocessed preprocess(const RawTable& raw) {
  std::vector<int> rows = raw.complete_rows();
  PreprocessSpec spec = fit_preprocess(raw, rows);
  Dataset data = apply_preprocess(spec, raw, rows);
  return {std::move(data), std::move(spec), std::move(rows)};
}

Preprocessed preprocess(const RawTable& raw, const PreprocessSpec& spec) {
  std::vector<int> rows = complete_rows_for(spec, raw);
  Dataset data = apply_preprocess(spec, raw, rows);
  return {std::move(data), spec, std::move(rows)};
}

std::string decode_category(const ColumnSpec& column, std::span<const double> indicators) {
  if (!column.categorical) throw InvalidInput("column '" + column.name + "' is not categorical");
  if (static_cast<int>(indicators.size()) != column.width())
    throw InvalidInput("indicator count does not match the levels of '" + column.name + "'");
  std::optional<std::size_t> hit;
  for (std::size_t k = 0; k < indicators.size(); ++k) {
    if (indicators[k] == 1.0) {
      if (hit) throw InvalidInput("more than one indicator set for '" + column.name + "'");
      hit = k;
    } else if (indicators[k] != 0.0) {
      throw InvalidInput("indicators must be 0 or 1");
    }
  }
  return hit ? column.levels[*hit + 1] : column.levels.front();
}

Vector ols_fit_predict(const Dataset& train, const Matrix& test_x) {
  if (test_x.cols() != train.p()) throw InvalidInput("query columns do not match the training covariates");
  Matrix design(train.n(), train.p() + 1);
  design.col(0).setOnes();
  design.rightCols(train.p()) = train.x();
  const Vector beta = design.completeOrthogonalDecomposition().solve(train.y());
  return (test_x * beta.tail(train.p())).array() + beta[0];
}

namespace {

constexpr std::uint64_t kOuterStream = 11;
constexpr std::uint64_t kInnerStream = 12;

FoldPlan explicit_plan(const std::vector<int>& assignment, int k_folds, std::uint64_t seed) {
  FoldPlan plan;
  plan.n = static_cast<int>(assignment.size());
  plan.k_folds = k_folds;
  plan.seed = seed;
  plan.repeats = 1;
  plan.assignment.push_back(assignment);
  for (int f : plan.fold_sizes(0))
    if (f == 0) throw InvalidInput("inner fold assignment leaves a fold empty");
  return plan;
}

double rmse_of(const Vector& pred, const Vector& y) {
  return std::sqrt((pred - y).squaredNorm() / static_cast<double>(y.size()));
}

nlohmann::json coding_json(const PreprocessSpec& spec) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : spec.columns) {
    if (c.categorical)
      out.push_back({{"column", c.name}, {"coding", "dummy"}, {"reference", c.levels.empty() ? "" : c.levels.front()},
                     {"levels", c.levels}});
    else
      out.push_back({{"column", c.name}, {"coding", "standardized"}});
  }
  return out;
}

}  // namespace

BenchmarkReport run_benchmark(const RawTable& raw, const BenchmarkConfig& config, const std::string& dataset) {
  if (config.outer_splits < 2) throw InvalidInput("outer_splits must be at least 2");
  if (config.inner_folds < 2) throw InvalidInput("inner_folds must be at least 2");
  config.gd.validate();

  const Preprocessed all = preprocess(raw);
  const std::vector<int>& rows = all.rows;
  const int n = static_cast<int>(rows.size());

  std::vector<int> outer = config.outer_assignment;
  if (outer.empty()) {
    outer = make_fold_plan(n, config.outer_splits, derive_seed(config.seed, 0, kOuterStream)).assignment.front();
  } else if (static_cast<int>(outer.size()) != n) {
    throw InvalidInput("outer assignment length does not match the complete rows");
  }
  for (int g : outer)
    if (g < 0 || g >= config.outer_splits) throw InvalidInput("outer assignment out of range");
  if (!config.inner_assignment.empty() && static_cast<int>(config.inner_assignment.size()) != n)
    throw InvalidInput("inner assignment length does not match the complete rows");

  std::vector<SplitResult> results(static_cast<std::size_t>(config.outer_splits));
  parallel_for(results.size(), [&](std::size_t gi) {
    const int g = static_cast<int>(gi);
    std::vector<int> train_rows;
    std::vector<int> test_rows;
    std::vector<int> inner;
    for (int i = 0; i < n; ++i) {
      if (outer[static_cast<std::size_t>(i)] == g) {
        test_rows.push_back(rows[static_cast<std::size_t>(i)]);
      } else {
        train_rows.push_back(rows[static_cast<std::size_t>(i)]);
        if (!config.inner_assignment.empty()) inner.push_back(config.inner_assignment[static_cast<std::size_t>(i)]);
      }
    }
    if (test_rows.empty()) throw InvalidInput("outer group " + std::to_string(g) + " is empty");

    const PreprocessSpec spec = config.global_preprocess ? all.spec : fit_preprocess(raw, train_rows);
    const auto train = std::make_shared<const Dataset>(apply_preprocess(spec, raw, train_rows));
    const Dataset test = apply_preprocess(spec, raw, test_rows);

    const std::uint64_t inner_seed = derive_seed(config.seed, gi, kInnerStream);
    const FoldPlan plan = inner.empty()
                              ? make_fold_plan(train->n(), config.inner_folds, inner_seed, config.inner_repeats)
                              : explicit_plan(inner, config.inner_folds, inner_seed);

    SplitResult& out = results[gi];
    out.group = g;
    out.n_train = train->n();
    out.n_test = test.n();
    out.p = train->p();

    const ScalarSelection scalar = grid_search_scalar(*train, plan, config.scalar_grid);
    out.scalar_h = scalar.h;
    out.scalar_rmse =
        rmse_of(predict_batch(KernelFit(train, SymmetricBandwidth::scaled_identity(train->p(), scalar.h)), test.x()),
                test.y());

    const double radius =
        config.lambda_override ? *config.lambda_override : theory::lambda_schedule(train->n(), train->p(), config.V);
    const FeasibleSet set(train->p(), radius);
    const BandwidthOptimum opt =
        optimize_bandwidth(*train, set, plan, config.gd, scalar_initialization(*train, plan, set));
    out.matrix_rmse = rmse_of(predict_batch(KernelFit(train, opt.bandwidth), test.x()), test.y());
    out.stop_reason = opt.trace.stop_reason;
    out.iterations = static_cast<int>(opt.trace.records.size()) - 1;

    out.linear_rmse = rmse_of(ols_fit_predict(*train, test.x()), test.y());
  });

  BenchmarkReport report;
  report.dataset = dataset;
  report.n = n;
  report.p = all.spec.p();
  for (const auto& s : results) {
    report.matrix_rmse += s.matrix_rmse;
    report.scalar_rmse += s.scalar_rmse;
    report.linear_rmse += s.linear_rmse;
  }
  const double groups = static_cast<double>(results.size());
  report.matrix_rmse /= groups;
  report.scalar_rmse /= groups;
  report.linear_rmse /= groups;
  report.splits = std::move(results);
  report.metadata = {{"seed", config.seed},
                     {"outer_splits", config.outer_splits},
                     {"outer_seed", derive_seed(config.seed, 0, kOuterStream)},
                     {"inner_folds", config.inner_folds},
                     {"inner_repeats", config.inner_repeats},
                     {"explicit_assignments", !config.outer_assignment.empty()},
                     {"preprocess", config.global_preprocess ? "global" : "per-split"},
                     {"missing_policy", all.spec.missing_policy},
                     {"rows_read", raw.rows()},
                     {"rows_used", n},
                     {"V", config.V},
                     {"lambda_override", config.lambda_override ? nlohmann::json(*config.lambda_override) : nullptr},
                     {"gd",
                      {{"max_iters", config.gd.max_iters},
                       {"tol_rel", config.gd.tol_rel},
                       {"armijo_c", config.gd.armijo_c},
                       {"shrink", config.gd.shrink},
                       {"eta0", config.gd.eta0},
                       {"gamma_subopt", config.gd.gamma_subopt}}},
                     {"scalar_grid",
                      {{"lo", config.scalar_grid.front()},
                       {"hi", config.scalar_grid.back()},
                       {"count", config.scalar_grid.size()}}},
                     {"coding", coding_json(all.spec)}};
  nlohmann::json inner_seeds = nlohmann::json::array();
  for (std::size_t g = 0; g < report.splits.size(); ++g) inner_seeds.push_back(derive_seed(config.seed, g, kInnerStream));
  report.metadata["inner_seeds"] = inner_seeds;
  return report;
}

void write_csv(const BenchmarkReport& report, std::ostream& out) {
  out << "dataset,n,p,matrix_rmse,scalar_rmse,linear_rmse\n";
  out << report.dataset << ',' << report.n << ',' << report.p << ',' << format_double(report.matrix_rmse) << ','
      << format_double(report.scalar_rmse) << ',' << format_double(report.linear_rmse) << '\n';
}

nlohmann::json to_json(const BenchmarkReport& report) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& s : report.splits) {
    splits.push_back({{"group", s.group},
                      {"n_train", s.n_train},
                      {"n_test", s.n_test},
                      {"p", s.p},
                      {"scalar_h", s.scalar_h},
                      {"matrix_rmse", s.matrix_rmse},
                      {"scalar_rmse", s.scalar_rmse},
                      {"linear_rmse", s.linear_rmse},
                      {"optimizer_stop", s.stop_reason},
                      {"optimizer_iterations", s.iterations}});
  }
  return {{"dataset", report.dataset},
          {"n", report.n},
          {"p", report.p},
          {"matrix_rmse", report.matrix_rmse},
          {"scalar_rmse", report.scalar_rmse},
          {"linear_rmse", report.linear_rmse},
          {"splits", splits}};
}

nlohmann::json sidecar_json(const BenchmarkReport& report) {
  return {{"dataset", report.dataset}, {"metadata", report.metadata}};
}

nlohmann::json to_json(const PreprocessSpec& spec) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : spec.columns) {
    nlohmann::json jc = {{"name", c.name}, {"categorical", c.categorical}};
    if (c.categorical)
      jc["levels"] = c.levels;
    else {
      jc["center"] = c.center;
      jc["scale"] = c.scale;
    }
    cols.push_back(std::move(jc));
  }
  return {{"target", spec.target}, {"missing_policy", spec.missing_policy}, {"columns", cols}};
}

PreprocessSpec preprocess_spec_from_json(const nlohmann::json& j) {
  try {
    PreprocessSpec spec;
    spec.target = j.at("target").get<std::string>();
    spec.missing_policy = j.at("missing_policy").get<std::string>();
    for (const auto& jc : j.at("columns")) {
      ColumnSpec c;
      c.name = jc.at("name").get<std::string>();
      c.categorical = jc.at("categorical").get<bool>();
      if (c.categorical) {
        c.levels = jc.at("levels").get<std::vector<std::string>>();
        if (c.levels.empty()) throw InvalidInput("categorical column '" + c.name + "' has no levels");
      } else {
        c.center = jc.at("center").get<double>();
        c.scale = jc.at("scale").get<double>();
        if (!(c.scale > 0.0)) throw InvalidInput("column '" + c.name + "' has a non-positive scale");
      }
      spec.columns.push_back(std::move(c));
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed preprocessing spec: ") + e.what());
  }
}

}  // namespace nwband
