#include "nwband/kernel_estimator.hpp"

#include <cmath>
#include <limits>

#include "nwband/errors.hpp"
#include "nwband/parallel.hpp"

namespace nwband {

Dataset::Dataset(Matrix x, Vector y, std::vector<std::string> feature_names)
    : x_(std::move(x)), y_(std::move(y)), feature_names_(std::move(feature_names)) {
  if (x_.rows() < 1 || x_.cols() < 1) throw InvalidInput("dataset needs n >= 1 and p >= 1");
  if (y_.size() != x_.rows()) {
    throw InvalidInput("dataset has " + std::to_string(x_.rows()) + " covariate rows but " +
                       std::to_string(y_.size()) + " outcomes");
  }
  if (!x_.allFinite() || !y_.allFinite()) throw InvalidInput("dataset entries must be finite");
  if (feature_names_.empty()) {
    for (int j = 0; j < p(); ++j) feature_names_.push_back("x" + std::to_string(j + 1));
  } else if (static_cast<int>(feature_names_.size()) != p()) {
    throw InvalidInput("feature name count does not match covariate columns");
  }
}

Dataset Dataset::subset(std::span<const int> rows) const {
  Matrix sx(static_cast<Eigen::Index>(rows.size()), x_.cols());
  Vector sy(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= n()) throw InvalidInput("subset row index out of range");
    sx.row(static_cast<Eigen::Index>(r)) = x_.row(rows[r]);
    sy[static_cast<Eigen::Index>(r)] = y_[rows[r]];
  }
  return Dataset(std::move(sx), std::move(sy), feature_names_);
}

KernelFit::KernelFit(Dataset train, SymmetricBandwidth bandwidth)
    : KernelFit(std::make_shared<const Dataset>(std::move(train)), std::move(bandwidth)) {}

KernelFit::KernelFit(std::shared_ptr<const Dataset> train, SymmetricBandwidth bandwidth)
    : train_(std::move(train)), bandwidth_(std::move(bandwidth)) {
  if (!train_) throw InvalidInput("kernel fit needs training data");
  if (bandwidth_.dim() != train_->p()) {
    throw InvalidInput("bandwidth dim " + std::to_string(bandwidth_.dim()) + " does not match p = " +
                       std::to_string(train_->p()));
  }
  if (!bandwidth_.halfvec().allFinite()) throw InvalidInput("bandwidth has non-finite entries");
  const Vector& y = train_->y();
  constant_outcome_ = (y.array() == y[0]).all();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(bandwidth_.dense());
  if (eig.info() != Eigen::Success) throw InvalidInput("bandwidth eigendecomposition failed");
  const int p = train_->p();
  std::vector<int> keep;
  for (int k = 0; k < p; ++k)
    if (eig.eigenvalues()[k] != 0.0) keep.push_back(k);
  const auto rank = static_cast<Eigen::Index>(keep.size());
  lambda_.resize(rank);
  basis_.resize(p, rank);
  for (Eigen::Index r = 0; r < rank; ++r) {
    lambda_[r] = eig.eigenvalues()[keep[static_cast<std::size_t>(r)]];
    basis_.col(r) = eig.eigenvectors().col(keep[static_cast<std::size_t>(r)]);
  }

  const Matrix& x = train_->x();
  rotated_train_.resize(x.rows(), rank);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index r = 0; r < rank; ++r) {
      double acc = 0.0;
      for (int u = 0; u < p; ++u) acc += x(i, u) * basis_(u, r);
      rotated_train_(i, r) = acc;
    }
}

void KernelFit::check_point(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != train_->p()) {
    throw InvalidInput("query point has " + std::to_string(x.size()) + " coordinates, expected " +
                       std::to_string(train_->p()));
  }
  for (double v : x)
    if (!std::isfinite(v)) throw InvalidInput("query point has non-finite coordinates");
}

Vector KernelFit::log_weights(std::span<const double> x) const {
  check_point(x);
  const int p = train_->p();
  const Eigen::Index rank = lambda_.size();
  // Rotate the query with the same loop used for the training rows so that a
  // query equal to X_j reproduces X_j's coordinates bit for bit.
  Vector z(rank);
  for (Eigen::Index r = 0; r < rank; ++r) {
    double acc = 0.0;
    for (int u = 0; u < p; ++u) acc += x[static_cast<std::size_t>(u)] * basis_(u, r);
    z[r] = acc;
  }
  const Eigen::Index n = rotated_train_.rows();
  Vector q(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < rank; ++r) {
      const double d = rotated_train_(i, r) - z[r];
      acc += lambda_[r] * d * d;
    }
    q[i] = -acc;
  }
  return q;
}

Vector log_weights(const KernelFit& fit, std::span<const double> x) { return fit.log_weights(x); }

Vector softmax_weights(const Vector& q) {
  const double shift = q.maxCoeff();
  Vector w(q.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    w[i] = std::exp(q[i] - shift);
    total += w[i];
  }
  return w / total;
}

namespace {

// Unnormalized shifted weights e_i and their sum.
struct KernelWeights {
  Vector e;
  double total = 0.0;
};

KernelWeights shifted_weights(const Vector& q) {
  KernelWeights out;
  const double shift = q.maxCoeff();
  out.e.resize(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    out.e[i] = std::exp(q[i] - shift);
    out.total += out.e[i];
  }
  return out;
}

double weighted_mean(const KernelWeights& w, const Vector& y, bool constant) {
  if (constant) return y[0];
  double num = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) num += w.e[i] * y[i];
  return num / w.total;
}

}  // namespace

double predict(const KernelFit& fit, std::span<const double> x) {
  return weighted_mean(shifted_weights(fit.log_weights(x)), fit.train().y(), fit.constant_outcome());
}

Vector predict_batch(const KernelFit& fit, const Matrix& xs) {
  if (xs.rows() > 0 && xs.cols() != fit.train().p()) {
    throw InvalidInput("query matrix has " + std::to_string(xs.cols()) + " columns, expected " +
                       std::to_string(fit.train().p()));
  }
  Vector out(xs.rows());
  parallel_for(static_cast<std::size_t>(xs.rows()), [&](std::size_t i) {
    const auto row = row_copy(xs, static_cast<Eigen::Index>(i));
    out[static_cast<Eigen::Index>(i)] = predict(fit, row);
  });
  return out;
}

Matrix loss_gradient(const KernelFit& fit, std::span<const double> x, double y) {
  const KernelWeights w = shifted_weights(fit.log_weights(x));
  const Dataset& train = fit.train();
  const double psi = weighted_mean(w, train.y(), fit.constant_outcome());
  const int p = train.p();

  Matrix s = Matrix::Zero(p, p);
  Vector d(p);
  for (int i = 0; i < train.n(); ++i) {
    const double a = (w.e[i] / w.total) * (psi - train.y()[i]);
    if (a == 0.0) continue;
    for (int u = 0; u < p; ++u) d[u] = train.x()(i, u) - x[static_cast<std::size_t>(u)];
    for (int v = 0; v < p; ++v)
      for (int u = v; u < p; ++u) s(u, v) += a * d[u] * d[v];
  }

  const double residual = psi - y;
  Matrix g(p, p);
  for (int v = 0; v < p; ++v) {
    g(v, v) = 2.0 * residual * s(v, v);
    for (int u = v + 1; u < p; ++u) {
      g(u, v) = 4.0 * residual * s(u, v);
      g(v, u) = g(u, v);
    }
  }
  return g;
}

Matrix frobenius_gradient(const Matrix& halfvec_gradient) {
  Matrix g = 0.5 * halfvec_gradient;
  g.diagonal() = halfvec_gradient.diagonal();
  return g;
}

std::vector<double> row_copy(const Matrix& m, Eigen::Index i) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

}  // namespace nwband
