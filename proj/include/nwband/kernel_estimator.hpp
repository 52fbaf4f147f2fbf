#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nwband/psd_matrix.hpp"

namespace nwband {

/// n observations of (X_i in R^p, Y_i).
class Dataset {
 public:
  /// Throws InvalidInput unless n >= 1, p >= 1, sizes agree and every entry
  /// is finite. Missing feature names default to x1..xp.
  Dataset(Matrix x, Vector y, std::vector<std::string> feature_names = {});

  int n() const { return static_cast<int>(x_.rows()); }
  int p() const { return static_cast<int>(x_.cols()); }
  const Matrix& x() const { return x_; }
  const Vector& y() const { return y_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  Dataset subset(std::span<const int> rows) const;

 private:
  Matrix x_;
  Vector y_;
  std::vector<std::string> feature_names_;
};

/// Gaussian-kernel Nadaraya-Watson estimator
///   psi_H(x) = sum_i k_i Y_i / sum_i k_i,   k_i = exp(-(X_i - x)' H (X_i - x)),
/// trained on a retained dataset.
class KernelFit {
 public:
  KernelFit(std::shared_ptr<const Dataset> train, SymmetricBandwidth bandwidth);
  KernelFit(Dataset train, SymmetricBandwidth bandwidth);

  const Dataset& train() const { return *train_; }
  const SymmetricBandwidth& bandwidth() const { return bandwidth_; }

  /// Set when every training outcome is identical; predictions are then that
  /// value exactly, whatever the weights.
  bool constant_outcome() const { return constant_outcome_; }

  /// q_i = -(X_i - x)' H (X_i - x) for every training row.
  Vector log_weights(std::span<const double> x) const;

 private:
  void check_point(std::span<const double> x) const;

  std::shared_ptr<const Dataset> train_;
  SymmetricBandwidth bandwidth_;
  // H = V diag(lambda) V'; training rows are kept in eigen-coordinates so each
  // quadratic form costs O(rank) instead of O(p^2).
  Vector lambda_;
  Matrix basis_;
  Matrix rotated_train_;
  bool constant_outcome_ = false;
};

Vector log_weights(const KernelFit& fit, std::span<const double> x);

/// exp(q - max q) normalized to sum one. Adding a constant to q leaves the
/// result unchanged.
Vector softmax_weights(const Vector& q);

double predict(const KernelFit& fit, std::span<const double> x);

/// Row-wise predict(); rows may be evaluated concurrently, results are
/// identical to the scalar path.
Vector predict_batch(const KernelFit& fit, const Matrix& xs);

/// Gradient of (y - psi_H(x))^2 with respect to the half-vectorized H,
/// returned as a dense symmetric matrix G where G(u, v) is the derivative
/// with respect to the free parameter h_uv:
///   G_uv = c (psi - y) sum_i w_i (psi - Y_i)(X_iu - x_u)(X_iv - x_v),
/// with c = 2 on the diagonal and c = 4 off it.
Matrix loss_gradient(const KernelFit& fit, std::span<const double> x, double y);

/// Converts a half-vector-coordinate gradient (as above) to the gradient in
/// the Frobenius inner product on symmetric matrices: off-diagonal entries
/// are halved.
Matrix frobenius_gradient(const Matrix& halfvec_gradient);

/// Row i of a matrix as a contiguous copy, for the span-based API.
std::vector<double> row_copy(const Matrix& m, Eigen::Index i);

}  // namespace nwband
