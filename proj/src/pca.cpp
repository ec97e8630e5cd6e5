#include "upf/pca.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "upf/errors.hpp"

namespace upf {

namespace {

// Re-orthonormalizes rows in order and appends standard-basis directions for
// rows that collapsed (rank-deficient Gram route).
void orthonormalize_rows(Eigen::MatrixXd& rows, std::size_t valid) {
  const Eigen::Index d = rows.cols();
  Eigen::Index next_basis = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::VectorXd v;
    if (static_cast<std::size_t>(i) < valid) {
      v = rows.row(i).transpose();
    } else {
      v = Eigen::VectorXd::Zero(d);
    }
    while (true) {
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < i; ++k) v -= rows.row(k).dot(v) * rows.row(k).transpose();
      }
      const double norm = v.norm();
      if (norm > 1e-6) {
        rows.row(i) = (v / norm).transpose();
        break;
      }
      if (next_basis >= d) throw InvariantError("cannot complete an orthonormal PCA basis");
      v = Eigen::VectorXd::Unit(d, next_basis++);
    }
  }
}

void fix_signs(Eigen::MatrixXd& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      const double a = std::abs(rows(i, j));
      if (a > best) {
        best = a;
        arg = j;
      }
    }
    if (rows(i, arg) < 0.0) rows.row(i) *= -1.0;
  }
}

}  // namespace

Eigen::VectorXd PcaModel::project(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != mean.size()) {
    throw InvariantError("PCA input has dimension " + std::to_string(v.size()) + ", expected " +
                         std::to_string(mean.size()));
  }
  return components * (v - mean);
}

PcaModel fit_pca(const Eigen::Ref<const Eigen::MatrixXd>& data, std::size_t out_dim) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  if (out_dim == 0 || out_dim > std::min(n, d)) {
    throw InvariantError("PCA out_dim " + std::to_string(out_dim) + " exceeds min(rows, cols) = " +
                         std::to_string(std::min(n, d)));
  }
  if (!data.allFinite()) throw DataError("PCA input contains non-finite values");

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  model.total_variance = centered.squaredNorm() / denom;
  model.components.resize(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(d));
  model.explained_variance.resize(static_cast<Eigen::Index>(out_dim));

  if (n >= d) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw InvariantError("covariance eigendecomposition failed");
    for (std::size_t i = 0; i < out_dim; ++i) {
      const auto idx = static_cast<Eigen::Index>(d - 1 - i);
      model.components.row(static_cast<Eigen::Index>(i)) = es.eigenvectors().col(idx).transpose();
      model.explained_variance(static_cast<Eigen::Index>(i)) =
          std::max(0.0, es.eigenvalues()(idx));
    }
    orthonormalize_rows(model.components, out_dim);
  } else {
    // Gram route: the non-zero spectrum of Xc Xc^T equals that of Xc^T Xc.
    const Eigen::MatrixXd gram = (centered * centered.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw InvariantError("Gram eigendecomposition failed");
    const double top = std::max(0.0, es.eigenvalues()(static_cast<Eigen::Index>(n - 1)));
    const double cutoff = 1e-12 * std::max(1.0, top);
    std::size_t valid = 0;
    for (std::size_t i = 0; i < out_dim; ++i) {
      const auto idx = static_cast<Eigen::Index>(n - 1 - i);
      const double lambda = es.eigenvalues()(idx);
      if (lambda > cutoff && valid == i) {
        const Eigen::VectorXd v =
            centered.transpose() * es.eigenvectors().col(idx) / std::sqrt(denom * lambda);
        model.components.row(static_cast<Eigen::Index>(i)) = v.transpose();
        model.explained_variance(static_cast<Eigen::Index>(i)) = lambda;
        ++valid;
      } else {
        model.explained_variance(static_cast<Eigen::Index>(i)) = 0.0;
      }
    }
    orthonormalize_rows(model.components, valid);
  }
  fix_signs(model.components);
  return model;
}

}  // namespace upf
