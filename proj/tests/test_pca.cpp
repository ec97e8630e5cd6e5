#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "upf/errors.hpp"
#include "upf/pca.hpp"
#include "upf/rng.hpp"

using namespace upf;

namespace {

// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-26) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

Eigen::MatrixXd gaussian_data(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double scale = 1.0 + 3.0 * static_cast<double>(d - j);
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = rng.normal() * scale;
  }
  return m;
}

void check_model(const Eigen::MatrixXd& data, const PcaModel& m, std::size_t k) {
  const Eigen::Index n = data.rows();
  const Eigen::MatrixXd c = data.rowwise() - data.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(n - 1);
  const auto oracle = jacobi_eigenvalues(cov);
  REQUIRE(m.out_dim() == k);
  const double top = std::max(1.0, oracle.front());
  for (std::size_t i = 0; i < k; ++i) {
    CHECK(std::abs(m.explained_variance(static_cast<Eigen::Index>(i)) - std::max(0.0, oracle[i])) <=
          1e-8 * top);
  }
  CHECK(std::abs(m.total_variance - cov.trace()) <= 1e-9 * std::max(1.0, cov.trace()));
  const Eigen::MatrixXd gram = m.components * m.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)))
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  for (Eigen::Index i = 0; i < m.components.rows(); ++i) {
    Eigen::Index arg;
    m.components.row(i).cwiseAbs().maxCoeff(&arg);
    CHECK(m.components(i, arg) > 0.0);
  }
  for (std::size_t i = 1; i < k; ++i) {
    CHECK(m.explained_variance(static_cast<Eigen::Index>(i - 1)) >=
          m.explained_variance(static_cast<Eigen::Index>(i)) - 1e-12 * top);
  }
}

}  // namespace

TEST_CASE("covariance route matches Jacobi") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd data = gaussian_data(rng, 60, 8);
    check_model(data, fit_pca(data, 5), 5);
  }
}

TEST_CASE("Gram route matches Jacobi when rows < cols") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd data = gaussian_data(rng, 7, 15);
    check_model(data, fit_pca(data, 7), 7);
  }
}

TEST_CASE("rank-deficient data still yields an orthonormal basis") {
  Eigen::MatrixXd data = Eigen::MatrixXd::Zero(5, 9);
  for (Eigen::Index i = 0; i < 5; ++i) data(i, 0) = static_cast<double>(i);
  const PcaModel m = fit_pca(data, 4);
  check_model(data, m, 4);
  CHECK(m.explained_variance(0) == doctest::Approx(2.5));
  CHECK(m.explained_variance(1) == doctest::Approx(0.0));
}

TEST_CASE("projection") {
  Eigen::MatrixXd data(4, 2);
  data << 1, 0, -1, 0, 3, 0, -3, 0;
  const PcaModel m = fit_pca(data, 1);
  CHECK(m.components(0, 0) == doctest::Approx(1.0));
  Eigen::VectorXd v(2);
  v << 2, 5;
  CHECK(m.project(v)(0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(m.project(Eigen::VectorXd::Zero(3)), InvariantError);
}

TEST_CASE("invalid requests") {
  const Eigen::MatrixXd data = Eigen::MatrixXd::Ones(3, 4);
  CHECK_THROWS_AS(fit_pca(data, 4), InvariantError);
  CHECK_THROWS_AS(fit_pca(data, 0), InvariantError);
  Eigen::MatrixXd bad = data;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(fit_pca(bad, 2), DataError);
}
