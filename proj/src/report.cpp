#include "nwband/report.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nwband {

MethodSummary summarize(std::string method, std::vector<double> rmse_per_rep, std::vector<double> excess_risk_per_rep) {
  MethodSummary s;
  s.method = std::move(method);
  s.reps = static_cast<int>(rmse_per_rep.size());
  if (s.reps > 0) {
    s.mean_rmse = std::accumulate(rmse_per_rep.begin(), rmse_per_rep.end(), 0.0) / s.reps;
  }
  if (s.reps > 1) {
    double ss = 0.0;
    for (double v : rmse_per_rep) ss += (v - s.mean_rmse) * (v - s.mean_rmse);
    const double sd = std::sqrt(ss / (s.reps - 1));
    s.ci_half_width = 1.96 * sd / std::sqrt(static_cast<double>(s.reps));
  }
  s.rmse_per_rep = std::move(rmse_per_rep);
  s.excess_risk_per_rep = std::move(excess_risk_per_rep);
  return s;
}

const MethodSummary& ReportRow::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw std::out_of_range("report row has no method " + name);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(const ExperimentReport& report, std::ostream& out) {
  out << "n,p,sd,index_count,method,mean_rmse,ci_lo,ci_hi,reps\n";
  for (const auto& row : report.rows) {
    for (const auto& m : row.methods) {
      out << format_double(row.n) << ',' << format_double(row.p) << ',' << format_double(row.sd) << ','
          << row.index_count << ',' << m.method << ',' << format_double(m.mean_rmse) << ','
          << (m.ci_half_width ? format_double(m.ci_lo()) : "NA") << ','
          << (m.ci_half_width ? format_double(m.ci_hi()) : "NA") << ',' << m.reps << '\n';
    }
  }
}

nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& m : row.methods) {
      nlohmann::json jm = {{"method", m.method},
                           {"mean_rmse", m.mean_rmse},
                           {"reps", m.reps},
                           {"rmse_per_rep", m.rmse_per_rep}};
      if (m.ci_half_width) {
        jm["ci_lo"] = m.ci_lo();
        jm["ci_hi"] = m.ci_hi();
      } else {
        jm["ci_lo"] = nullptr;
        jm["ci_hi"] = nullptr;
      }
      if (!m.excess_risk_per_rep.empty()) jm["excess_risk_per_rep"] = m.excess_risk_per_rep;
      methods.push_back(std::move(jm));
    }
    rows.push_back({{"n", row.n}, {"p", row.p}, {"sd", row.sd}, {"index_count", row.index_count}, {"methods", methods}});
  }
  return {{"rows", rows}, {"metadata", report.metadata}};
}

}  // namespace nwband
