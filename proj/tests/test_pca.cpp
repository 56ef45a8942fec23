#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "flowcast/pca.hpp"
#include "oracles.hpp"

using namespace flowcast;

namespace {

// Dense covariance eigendecomposition oracle built on Eigen, independent of
// the Jacobi route used by fit_pca.
struct EigOracle {
  std::vector<double> eigenvalues;  // descending
  std::vector<std::vector<double>> components;  // rows, sign-fixed
};

EigOracle eigen_pca(const Tensor& m) {
  const int64_t rows = m.dim(0), d = m.dim(1);
  Eigen::MatrixXd x(rows, d);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < d; ++j) x(i, j) = m(i, j);
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(rows - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  EigOracle out;
  for (int64_t k = d - 1; k >= 0; --k) {
    out.eigenvalues.push_back(solver.eigenvalues()(k));
    Eigen::VectorXd v = solver.eigenvectors().col(k);
    int imax = 0;
    for (int i = 1; i < d; ++i)
      if (std::fabs(v(i)) > std::fabs(v(imax))) imax = i;
    if (v(imax) < 0) v = -v;
    out.components.emplace_back(v.data(), v.data() + d);
  }
  return out;
}

}  // namespace

TEST_CASE("points in a 2-D affine subspace of 10-D space keep exactly 2 components") {
  std::mt19937_64 g(3);
  const int64_t m = 40, d = 10;
  Tensor basis = oracles::random_tensor(g, {2, d});
  Tensor offset = oracles::random_tensor(g, {d});
  Tensor data({m, d});
  for (int64_t i = 0; i < m; ++i) {
    const double a = oracles::random_tensor(g, {1})(0) * 3.0;
    const double b = oracles::random_tensor(g, {1})(0) * 2.0;
    for (int64_t j = 0; j < d; ++j) data(i, j) = offset(j) + a * basis(0, j) + b * basis(1, j);
  }
  PCAModel model = fit_pca(data, 0.95);
  CHECK(model.d_reduced == 2);
  double cum = 0.0;
  for (double r : model.explained_variance_ratio) cum += r;
  CHECK(std::fabs(cum - 1.0) < 1e-9);
}

TEST_CASE("fit_pca matches the Eigen covariance eigendecomposition oracle to 1e-8") {
  std::mt19937_64 g(11);
  const int64_t m = 50, d = 8;
  Tensor data = oracles::random_tensor(g, {m, d}, -2.0, 2.0);
  PCAModel model = fit_pca(data, 0.95);
  EigOracle oracle = eigen_pca(data);

  double total = 0.0;
  for (double l : oracle.eigenvalues) total += std::max(0.0, l);
  for (int64_t k = 0; k < model.d_reduced; ++k) {
    CHECK(std::fabs(model.explained_variance_ratio[static_cast<size_t>(k)] -
                    oracle.eigenvalues[static_cast<size_t>(k)] / total) < 1e-8);
    for (int64_t j = 0; j < d; ++j)
      CHECK(std::fabs(model.components(k, j) -
                      oracle.components[static_cast<size_t>(k)][static_cast<size_t>(j)]) < 1e-8);
  }
  double cum = 0.0;
  for (double r : model.explained_variance_ratio) cum += r;
  CHECK(cum >= 0.95 - 1e-12);
}

TEST_CASE("variance target 1.0 retains exactly the rank of the centered matrix") {
  std::mt19937_64 g(17);
  const int64_t m = 30, d = 9, rank = 4;
  Tensor left = oracles::random_tensor(g, {m, rank});
  Tensor right = oracles::random_tensor(g, {rank, d});
  Tensor data({m, d});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < rank; ++k) s += left(i, k) * right(k, j);
      data(i, j) = s + 0.5;
    }
  PCAModel model = fit_pca(data, 1.0);
  CHECK(model.d_reduced == rank);
}

TEST_CASE("transform of the mean vector is the zero vector") {
  std::mt19937_64 g(23);
  Tensor data = oracles::random_tensor(g, {25, 6});
  PCAModel model = fit_pca(data, 0.9);
  auto z = model.transform(model.mean);
  for (double v : z) CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("aggregate reconstruction error is bounded by the discarded variance") {
  std::mt19937_64 g(29);
  const int64_t m = 80, d = 12;
  Tensor data = oracles::random_tensor(g, {m, d}, -1.0, 1.0);
  const double target = 0.9;
  PCAModel model = fit_pca(data, target);

  // Pseudo-inverse reconstruction: x_hat = mean + C^T (C (x - mean)).
  double err = 0.0, total = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    std::vector<double> x(static_cast<size_t>(d));
    for (int64_t j = 0; j < d; ++j) x[static_cast<size_t>(j)] = data(i, j);
    auto z = model.transform(x);
    for (int64_t j = 0; j < d; ++j) {
      double xh = model.mean[static_cast<size_t>(j)];
      for (int64_t k = 0; k < model.d_reduced; ++k)
        xh += model.components(k, j) * z[static_cast<size_t>(k)];
      const double c = x[static_cast<size_t>(j)] - model.mean[static_cast<size_t>(j)];
      err += (x[static_cast<size_t>(j)] - xh) * (x[static_cast<size_t>(j)] - xh);
      total += c * c;
    }
  }
  CHECK(err / total <= (1.0 - target) + 1e-9);
}

TEST_CASE("norm of the reduced vector is invariant under a joint rotation") {
  std::mt19937_64 g(31);
  const int64_t m = 60, d = 5;
  Tensor data = oracles::random_tensor(g, {m, d});

  // Householder rotation R = I - 2 u u^T.
  Tensor u = oracles::random_tensor(g, {d});
  double norm = 0.0;
  for (int64_t j = 0; j < d; ++j) norm += u(j) * u(j);
  for (int64_t j = 0; j < d; ++j) u(j) /= std::sqrt(norm);
  auto rotate = [&](const std::vector<double>& x) {
    std::vector<double> y(static_cast<size_t>(d));
    double dot = 0.0;
    for (int64_t j = 0; j < d; ++j) dot += u(j) * x[static_cast<size_t>(j)];
    for (int64_t j = 0; j < d; ++j) y[static_cast<size_t>(j)] = x[static_cast<size_t>(j)] - 2.0 * dot * u(j);
    return y;
  };

  Tensor rotated({m, d});
  for (int64_t i = 0; i < m; ++i) {
    std::vector<double> x(static_cast<size_t>(d));
    for (int64_t j = 0; j < d; ++j) x[static_cast<size_t>(j)] = data(i, j);
    auto y = rotate(x);
    for (int64_t j = 0; j < d; ++j) rotated(i, j) = y[static_cast<size_t>(j)];
  }

  PCAModel m1 = fit_pca(data, 1.0);
  PCAModel m2 = fit_pca(rotated, 1.0);
  std::vector<double> q(static_cast<size_t>(d));
  for (int64_t j = 0; j < d; ++j) q[static_cast<size_t>(j)] = data(0, j) * 0.7 + 0.1;
  auto z1 = m1.transform(q);
  auto z2 = m2.transform(rotate(q));
  double n1 = 0.0, n2 = 0.0;
  for (double v : z1) n1 += v * v;
  for (double v : z2) n2 += v * v;
  CHECK(std::fabs(std::sqrt(n1) - std::sqrt(n2)) < 1e-8);
}

TEST_CASE("fit_pca is bit-reproducible for identical input") {
  std::mt19937_64 g(37);
  Tensor data = oracles::random_tensor(g, {40, 7});
  PCAModel a = fit_pca(data, 0.95);
  PCAModel b = fit_pca(data, 0.95);
  REQUIRE(a.d_reduced == b.d_reduced);
  for (int64_t i = 0; i < a.components.numel(); ++i) CHECK(a.components(i) == b.components(i));
  for (size_t i = 0; i < a.mean.size(); ++i) CHECK(a.mean[i] == b.mean[i]);
}

TEST_CASE("component rows are orthonormal and ratios sum to at most one") {
  std::mt19937_64 g(41);
  Tensor data = oracles::random_tensor(g, {60, 10});
  PCAModel m = fit_pca(data, 1.0);
  for (int64_t a = 0; a < m.d_reduced; ++a)
    for (int64_t b = 0; b < m.d_reduced; ++b) {
      double dot = 0.0;
      for (int64_t j = 0; j < m.d_input; ++j) dot += m.components(a, j) * m.components(b, j);
      CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) < 1e-8);
    }
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (double r : m.explained_variance_ratio) {
    CHECK(r > 0.0);
    CHECK(r <= prev + 1e-12);
    prev = r;
    sum += r;
  }
  CHECK(sum <= 1.0 + 1e-9);
}

TEST_CASE("degenerate inputs: m < 2 errors, zero variance warns with one component") {
  Tensor one({1, 4});
  CHECK_THROWS_AS(fit_pca(one, 0.95), std::invalid_argument);
  Tensor flat = Tensor::full({10, 4}, 3.25);
  PCAModel m = fit_pca(flat, 0.95);
  CHECK(m.zero_variance_warning);
  CHECK(m.d_reduced == 1);
  std::vector<double> probe{3.25, 3.25, 3.25, 3.25};
  for (double v : m.transform(probe)) CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("transform rejects dimension mismatch") {
  std::mt19937_64 g(43);
  PCAModel m = fit_pca(oracles::random_tensor(g, {20, 5}), 0.95);
  std::vector<double> wrong(7, 0.0);
  CHECK_THROWS_AS(m.transform(wrong), std::invalid_argument);
}

TEST_CASE("PCAModel JSON round-trip preserves every coefficient bitwise") {
  std::mt19937_64 g(47);
  PCAModel m = fit_pca(oracles::random_tensor(g, {30, 6}), 0.95);
  PCAModel m2 = PCAModel::from_json(m.to_json());
  REQUIRE(m2.d_reduced == m.d_reduced);
  REQUIRE(m2.d_input == m.d_input);
  for (int64_t i = 0; i < m.components.numel(); ++i) CHECK(m2.components(i) == m.components(i));
  for (size_t i = 0; i < m.mean.size(); ++i) CHECK(m2.mean[i] == m.mean[i]);
  for (size_t i = 0; i < m.explained_variance_ratio.size(); ++i)
    CHECK(m2.explained_variance_ratio[i] == m.explained_variance_ratio[i]);

  const auto path = std::filesystem::temp_directory_path() / "flowcast_pca_rt.json";
  m.save(path.string());
  PCAModel m3 = PCAModel::load(path.string());
  for (int64_t i = 0; i < m.components.numel(); ++i) CHECK(m3.components(i) == m.components(i));
  std::filesystem::remove(path);
}
