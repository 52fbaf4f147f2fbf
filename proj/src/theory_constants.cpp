#include "nwband/theory_constants.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "nwband/errors.hpp"

namespace nwband::theory {

void OracleBoundInputs::validate() const {
  const struct {
    const char* name;
    double value;
  } fields[] = {{"M", M}, {"delta", delta}, {"n", n}, {"pi", pi}, {"d", d}, {"diam", diam}, {"C", C}};
  for (const auto& f : fields) {
    if (!(f.value > 0.0) || !std::isfinite(f.value)) {
      throw InvalidInput(std::string("oracle bound input ") + f.name + " must be positive and finite");
    }
  }
  const double lhs = 1.0 / c2(M, delta);
  const double rhs = m1(M) * 8.0 * (1.0 / (1.0 + 2.0 * delta) + 1.0 / 3.0);
  if (!(lhs <= rhs)) {
    std::ostringstream msg;
    msg << "(A4) side condition 1/c2(M, delta) <= 8 M1 (1/(1+2 delta) + 1/3) fails: " << lhs << " > " << rhs;
    throw PreconditionViolation(msg.str());
  }
}

double m1(double M) { return 8.0 * M * M; }

double m2(double M) { return 16.0 * M * M; }

double c2(double M, double delta) {
  if (!(M > 0.0) || !(delta > 0.0)) throw InvalidInput("c2 needs M > 0 and delta > 0");
  const double g = 1.0 + delta;
  return 8.0 * g * g * (m2(M) / delta + m1(M) / 3.0);
}

double c1(const OracleBoundInputs& in) {
  in.validate();
  const double c2v = c2(in.M, in.delta);
  const double spread = 4.0 * std::sqrt(in.d) * in.C * in.C * 4.0 * (1.0 + 2.0 * in.delta) * in.diam;
  const double value = in.d * std::log(in.n * in.pi / c2v) + std::log(4.0) + in.d * std::log(spread);
  if (!(value > 1.0)) {
    std::ostringstream msg;
    msg << "(A4) requires n large enough that c1(n pi, d, Xi_n, M, delta) > 1; got c1 = " << value;
    throw PreconditionViolation(msg.str());
  }
  return value;
}

double oracle_bound_term(const OracleBoundInputs& in) {
  return 4.0 * c2(in.M, in.delta) / (in.n * in.pi) * c1(in);
}

double lipschitz_C(int p, double B, double M) {
  if (p < 1) throw InvalidInput("lipschitz_C needs p >= 1");
  return 64.0 * std::sqrt(p * (p + 1) / 2.0) * B * B * M * M;
}

namespace {

double n_log_n(double n) {
  if (!(n >= 2.0)) throw InvalidInput("schedule needs n >= 2");
  return n * std::log(n);
}

}  // namespace

double lambda_schedule(double n, int p, double V) {
  if (p < 1 || !(V > 0.0)) throw InvalidInput("lambda_schedule needs p >= 1 and V > 0");
  if (!(n > 1.0)) throw InvalidInput("lambda_schedule needs n > 1");
  // n = e is a legitimate real-valued evaluation point; integer callers use n >= 2.
  return std::sqrt(static_cast<double>(p)) * V * std::cbrt(n * std::log(n));
}

double h_q(double n, int q, double V) {
  if (q < 1 || !(V > 0.0)) throw InvalidInput("h_q needs q >= 1 and V > 0");
  if (!(n > 1.0)) throw InvalidInput("h_q needs n > 1");
  return V * std::pow(n * std::log(n), 1.0 / (q + 2));
}

namespace {

struct LemmaConstants {
  double a1;
  double a2;
};

LemmaConstants lemma_constants(int p, double R, double B, double sigma, double b, double c_tilde) {
  if (p < 1) throw InvalidInput("needs p >= 1");
  for (double v : {R, B, sigma, b, c_tilde})
    if (!(v > 0.0)) throw InvalidInput("h_star arguments must be positive");
  return {R * R, 2.0 * c_tilde / b * (R * R * B * B + sigma * sigma)};
}

}  // namespace

double h_star(double n, int p, double R, double B, double sigma, double b, double c_tilde) {
  const auto k = lemma_constants(p, R, B, sigma, b, c_tilde);
  return std::pow(k.a1 * n_log_n(n) / (k.a2 * p / 2.0), 2.0 / (p + 2));
}

double h_star_rate_bound(double n, int p, double R, double B, double sigma, double b, double c_tilde) {
  const auto k = lemma_constants(p, R, B, sigma, b, c_tilde);
  n_log_n(n);
  const double pp = p;
  const double half = pp / 2.0;
  const double a = std::pow(k.a1, pp / (pp + 2)) * std::pow(k.a2, 2.0 / (pp + 2)) *
                   (std::pow(half, 2.0 / (pp + 2)) + std::pow(half, pp / (pp + 2)));
  return a * std::pow(std::log(n), pp / (pp + 2)) * std::pow(n, -2.0 / (pp + 2));
}

Matrix oracle_bandwidth(const Matrix& index_matrix, double n, double V) {
  const int m = static_cast<int>(index_matrix.rows());
  if (m < 1) throw InvalidInput("index matrix needs at least one row");
  return h_q(n, m, V) * index_matrix.transpose() * index_matrix;
}

double rate_slope(std::span<const RatePoint> points) {
  if (points.size() < 3) throw InvalidInput("rate_slope needs at least 3 points");
  std::set<double> distinct;
  for (const auto& pt : points) {
    if (!(pt.excess_risk > 0.0) || !std::isfinite(pt.excess_risk)) {
      throw InvalidInput("rate_slope needs positive excess risks");
    }
    if (!(pt.n > 0.0)) throw InvalidInput("rate_slope needs positive sample sizes");
    distinct.insert(pt.n);
  }
  if (distinct.size() != points.size()) throw InvalidInput("rate_slope needs distinct sample sizes");

  double mx = 0.0, my = 0.0;
  for (const auto& pt : points) {
    mx += std::log(pt.n);
    my += std::log(pt.excess_risk);
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& pt : points) {
    const double dx = std::log(pt.n) - mx;
    sxy += dx * (std::log(pt.excess_risk) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace nwband::theory
