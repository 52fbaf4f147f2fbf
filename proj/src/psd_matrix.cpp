#include "nwband/psd_matrix.hpp"

#include <cmath>
#include <string>

#include "nwband/errors.hpp"

namespace nwband {

int halfvec_size(int dim) { return dim * (dim + 1) / 2; }

int halfvec_index(int dim, int u, int v) {
  if (u == v) return u;
  if (u < v) std::swap(u, v);
  // u > v: entry sits in column v of the strict lower triangle.
  const int before = v * (dim - 1) - v * (v - 1) / 2;
  return dim + before + (u - v - 1);
}

SymmetricBandwidth::SymmetricBandwidth(int dim) : dim_(dim), halfvec_(Vector::Zero(halfvec_size(dim))) {
  if (dim < 1) throw InvalidInput("bandwidth dimension must be positive");
}

SymmetricBandwidth::SymmetricBandwidth(int dim, Vector halfvec) : dim_(dim), halfvec_(std::move(halfvec)) {
  if (dim < 1) throw InvalidInput("bandwidth dimension must be positive");
  if (halfvec_.size() != halfvec_size(dim)) {
    throw InvalidInput("half-vector length " + std::to_string(halfvec_.size()) + " does not match dim " +
                       std::to_string(dim));
  }
}

SymmetricBandwidth SymmetricBandwidth::from_dense(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) throw InvalidInput("bandwidth matrix must be square");
  const int p = static_cast<int>(m.rows());
  Vector hv(halfvec_size(p));
  for (int u = 0; u < p; ++u) hv[u] = m(u, u);
  int k = p;
  for (int v = 0; v < p; ++v)
    for (int u = v + 1; u < p; ++u) hv[k++] = m(u, v);
  return SymmetricBandwidth(p, std::move(hv));
}

SymmetricBandwidth SymmetricBandwidth::scaled_identity(int dim, double h) {
  SymmetricBandwidth out(dim);
  out.halfvec_.head(dim).setConstant(h);
  return out;
}

Matrix SymmetricBandwidth::dense() const {
  Matrix m(dim_, dim_);
  for (int u = 0; u < dim_; ++u) m(u, u) = halfvec_[u];
  int k = dim_;
  for (int v = 0; v < dim_; ++v)
    for (int u = v + 1; u < dim_; ++u) {
      m(u, v) = halfvec_[k];
      m(v, u) = halfvec_[k];
      ++k;
    }
  return m;
}

bool operator==(const SymmetricBandwidth& a, const SymmetricBandwidth& b) {
  return a.dim() == b.dim() && a.halfvec() == b.halfvec();
}

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

double frobenius_norm(const SymmetricBandwidth& h) {
  const int p = h.dim();
  const Vector& hv = h.halfvec();
  const double diag = hv.head(p).squaredNorm();
  const double off = hv.tail(hv.size() - p).squaredNorm();
  return std::sqrt(diag + 2.0 * off);
}

double min_eigenvalue(const SymmetricBandwidth& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h.dense(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

FeasibleSet::FeasibleSet(int dim, double radius) : dim_(dim), radius_(radius) {
  if (dim < 1) throw InvalidInput("feasible set dimension must be positive");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidInput("feasible set radius must be positive and finite");
}

bool FeasibleSet::contains(const SymmetricBandwidth& h) const {
  if (h.dim() != dim_) return false;
  if (!h.halfvec().allFinite()) return false;
  if (frobenius_norm(h) > radius_ * (1.0 + 1e-12)) return false;
  return min_eigenvalue(h) >= -kPsdSlack;
}

double FeasibleSet::diameter() const { return dim_ >= 2 ? std::sqrt(2.0) * radius_ : radius_; }

Projection project_with_info(const Matrix& raw, const FeasibleSet& set) {
  if (raw.rows() != set.dim() || raw.cols() != set.dim()) {
    throw InvalidInput("projection input is " + std::to_string(raw.rows()) + "x" + std::to_string(raw.cols()) +
                       ", feasible set has dim " + std::to_string(set.dim()));
  }
  if (!raw.allFinite()) throw InvalidInput("projection input has non-finite entries");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(raw));
  if (eig.info() != Eigen::Success) throw InvalidInput("eigendecomposition failed");

  Vector lambda = eig.eigenvalues();
  bool active = false;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < 0.0) {
      // Round-off sized negatives are not counted as projection activity.
      if (lambda[i] < -kPsdSlack) active = true;
      lambda[i] = 0.0;
    }
  }
  const Matrix& vecs = eig.eigenvectors();
  Matrix cone = vecs * lambda.asDiagonal() * vecs.transpose();
  SymmetricBandwidth result = SymmetricBandwidth::from_dense(symmetrized(cone));

  const double norm = frobenius_norm(result);
  if (norm > set.radius()) {
    result = SymmetricBandwidth(set.dim(), result.halfvec() * (set.radius() / norm));
    active = true;
  }
  return {std::move(result), active};
}

SymmetricBandwidth project(const Matrix& raw, const FeasibleSet& set) { return project_with_info(raw, set).value; }

}  // namespace nwband
