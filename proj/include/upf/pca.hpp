#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace upf {

// Rows of `components` are orthonormal and ordered by decreasing explained
// variance; each row's largest-magnitude entry is positive.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;          // out_dim x input_dim
  Eigen::VectorXd explained_variance;  // eigenvalues of the sample covariance
  double total_variance = 0.0;         // trace of the sample covariance

  std::size_t input_dim() const { return static_cast<std::size_t>(mean.size()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(components.rows()); }

  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& v) const;
};

// Requires out_dim <= min(rows, cols) and finite data.
PcaModel fit_pca(const Eigen::Ref<const Eigen::MatrixXd>& data, std::size_t out_dim);

}  // namespace upf
