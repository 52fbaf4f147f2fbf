#pragma once

#include <span>

#include "nwband/psd_matrix.hpp"

namespace nwband::theory {

/// Inputs of the K-fold oracle inequality.
struct OracleBoundInputs {
  double M = 1.0;      ///< a.s. bound on |Y| and on the estimator
  double delta = 1.0;  ///< delta > 0
  double n = 0.0;      ///< sample size
  double pi = 0.0;     ///< validation fraction floor(n/K)/n
  double d = 1.0;      ///< parameter dimension p(p+1)/2
  double diam = 1.0;   ///< diameter of the feasible set
  double C = 1.0;      ///< Lipschitz constant of the loss in the parameters

  /// Throws InvalidInput on non-positive fields and PreconditionViolation
  /// when 1/c2 <= 8 M1 (1/(1+2 delta) + 1/3) fails.
  void validate() const;
};

/// M1 = 8 M^2.
double m1(double M);
/// M2 = 16 M^2.
double m2(double M);

/// c2(M, delta) = 8 (1 + delta)^2 (M2 / delta + M1 / 3).
double c2(double M, double delta);

/// c1 = log{ (n pi / c2)^d * 4 * (4 sqrt(d) C^2 4 (1 + 2 delta) diam)^d },
/// evaluated in the log domain. Throws PreconditionViolation when c1 <= 1.
double c1(const OracleBoundInputs& in);

/// The cross-validation error term 4 c2 / (n pi) * c1 of the oracle bound.
double oracle_bound_term(const OracleBoundInputs& in);

/// Lipschitz constant of the Gaussian-kernel loss, 64 sqrt(p(p+1)/2) B^2 M^2.
double lipschitz_C(int p, double B, double M);

/// Feasible-set radius lambda_n = sqrt(p) V (n log n)^{1/3}. Requires n > 1, V > 0.
double lambda_schedule(double n, int p, double V = 1.0);

/// h_n(q) = V (n log n)^{1/(q+2)}. Requires n > 1, q >= 1.
double h_q(double n, int q, double V = 1.0);

/// Scalar-bandwidth schedule
///   h*_n = (A1 n log n / (A2 p / 2))^{2/(p+2)},  A1 = R^2,
///   A2 = (2 c_tilde / b)(R^2 B^2 + sigma^2).
double h_star(double n, int p, double R, double B, double sigma, double b, double c_tilde);

/// Rate bound A log(n)^{p/(p+2)} n^{-2/(p+2)} attained by h*_n, with
/// A = A1^{p/(p+2)} A2^{2/(p+2)} ((p/2)^{2/(p+2)} + (p/2)^{p/(p+2)}).
double h_star_rate_bound(double n, int p, double R, double B, double sigma, double b, double c_tilde);

/// T' Lambda T with Lambda = h_n(m) I_m, T the m x p index matrix.
Matrix oracle_bandwidth(const Matrix& index_matrix, double n, double V = 1.0);

struct RatePoint {
  double n = 0.0;
  double excess_risk = 0.0;
};

/// Least-squares slope of log(excess_risk) on log(n). Needs >= 3 points with
/// distinct n and positive risks; throws InvalidInput otherwise.
double rate_slope(std::span<const RatePoint> points);

}  // namespace nwband::theory
