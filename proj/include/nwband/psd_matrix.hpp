#pragma once

#include <Eigen/Dense>

namespace nwband {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Slack on eigenvalues when deciding positive semidefiniteness.
inline constexpr double kPsdSlack = 1e-10;

/// Number of free parameters of a symmetric p x p matrix, p(p+1)/2.
int halfvec_size(int dim);

/// Position of entry (u, v) in the half-vectorization. Diagonal entries come
/// first (h11, h22, ..., hpp), followed by the strict lower triangle walked
/// column by column (h21, h31, ..., hp1, h32, ..., hp,p-1).
int halfvec_index(int dim, int u, int v);

/// Symmetric bandwidth matrix H stored as its half-vectorization.
class SymmetricBandwidth {
 public:
  SymmetricBandwidth() = default;

  /// The zero matrix of the given dimension.
  explicit SymmetricBandwidth(int dim);

  SymmetricBandwidth(int dim, Vector halfvec);

  /// Reads the lower triangle of a square matrix. The caller is responsible
  /// for symmetry; use symmetrized() when that is not guaranteed.
  static SymmetricBandwidth from_dense(const Matrix& m);
  static SymmetricBandwidth scaled_identity(int dim, double h);

  int dim() const { return dim_; }
  const Vector& halfvec() const { return halfvec_; }

  double operator()(int u, int v) const { return halfvec_[halfvec_index(dim_, u, v)]; }

  Matrix dense() const;

 private:
  int dim_ = 0;
  Vector halfvec_;
};

bool operator==(const SymmetricBandwidth& a, const SymmetricBandwidth& b);

/// (A + A^T) / 2.
Matrix symmetrized(const Matrix& a);

/// (sum h_ii^2 + 2 sum_{j<i} h_ij^2)^{1/2}, computed from the half-vector.
double frobenius_norm(const SymmetricBandwidth& h);

double min_eigenvalue(const SymmetricBandwidth& h);

/// PSD matrices with Frobenius norm at most `radius`.
class FeasibleSet {
 public:
  FeasibleSet(int dim, double radius);

  int dim() const { return dim_; }
  double radius() const { return radius_; }

  bool contains(const SymmetricBandwidth& h) const;

  /// Largest Frobenius distance between two members: sqrt(2) * radius once
  /// p >= 2 (two orthogonal rank-one matrices on the sphere), radius for p = 1.
  double diameter() const;

 private:
  int dim_;
  double radius_;
};

struct Projection {
  SymmetricBandwidth value;
  /// True when a negative eigenvalue was clamped or the result was rescaled
  /// onto the ball boundary.
  bool active = false;
};

/// Euclidean (Frobenius) projection onto the feasible set: clamp negative
/// eigenvalues, then shrink radially into the ball. `raw` is symmetrized
/// before use. Throws InvalidInput on non-finite entries or a dimension
/// mismatch.
Projection project_with_info(const Matrix& raw, const FeasibleSet& set);

SymmetricBandwidth project(const Matrix& raw, const FeasibleSet& set);

}  // namespace nwband
