#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace nwband {

/// Mean and normal-approximation 95% interval of per-replication RMSEs.
struct MethodSummary {
  std::string method;
  double mean_rmse = 0.0;
  /// 1.96 sd / sqrt(reps); absent when reps == 1.
  std::optional<double> ci_half_width;
  int reps = 0;
  std::vector<double> rmse_per_rep;
  /// Mean squared distance to the noise-free regression function, when known.
  std::vector<double> excess_risk_per_rep;

  double ci_lo() const { return ci_half_width ? mean_rmse - *ci_half_width : mean_rmse; }
  double ci_hi() const { return ci_half_width ? mean_rmse + *ci_half_width : mean_rmse; }
};

MethodSummary summarize(std::string method, std::vector<double> rmse_per_rep,
                        std::vector<double> excess_risk_per_rep = {});

/// One table row group: a scenario label (key/value pairs in column order)
/// and the per-method summaries.
struct ReportRow {
  double n = 0;
  double p = 0;
  double sd = 0;
  int index_count = 0;
  std::vector<MethodSummary> methods;

  const MethodSummary& method(const std::string& name) const;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  nlohmann::json metadata;
};

/// Columns n, p, sd, index_count, method, mean_rmse, ci_lo, ci_hi, reps. A
/// missing interval is written as NA.
void write_csv(const ExperimentReport& report, std::ostream& out);
nlohmann::json to_json(const ExperimentReport& report);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace nwband
