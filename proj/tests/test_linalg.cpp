#include <Eigen/Dense>
#include <cmath>

#include "daband/linalg.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace daband;

namespace {

Matrix random_spd(Rng& rng, std::size_t d) {
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = rng.normal();
  Matrix a = matmul(m, m.transpose());
  for (std::size_t i = 0; i < d; ++i) a(i, i) += 0.5;
  return a;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

}  // namespace

TEST_CASE("sherman-morrison closed forms") {
  const Matrix i2 = Matrix::identity(2);
  CHECK(sherman_morrison_update(i2, Vector{0.0, 0.0}) == i2);
  const Matrix one(1, 1, 1.0);
  CHECK(sherman_morrison_update(one, Vector{1.0})(0, 0) == 0.5);
}

TEST_CASE("sherman-morrison matches direct inversion on random SPD") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_spd(rng, 4);
    const Vector x = oracle::random_vector(rng, 4);
    Matrix axx = a;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) axx(i, j) += x[i] * x[j];
    CHECK(max_abs_diff(sherman_morrison_update(oracle::inverse(a), x), oracle::inverse(axx)) <= 1e-10);
  }
}

TEST_CASE("1000 rank-one updates track the direct inverse") {
  for (std::size_t d : {1u, 3u, 8u, 16u}) {
    Rng rng(100 + d);
    Matrix a = Matrix::identity(d);
    Matrix a_inv = Matrix::identity(d);
    for (int t = 0; t < 1000; ++t) {
      const Vector x = oracle::random_vector(rng, d, 0.3);
      sherman_morrison_update_inplace(a_inv, x);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) a(i, j) += x[i] * x[j];
    }
    CHECK(max_abs_diff(a_inv, oracle::inverse(a)) <= 1e-9);
  }
}

TEST_CASE("in-place and pure sherman-morrison agree bit for bit") {
  Rng rng(5);
  Matrix a_inv = oracle::inverse(random_spd(rng, 6));
  const Vector x = oracle::random_vector(rng, 6);
  const Matrix pure = sherman_morrison_update(a_inv, x);
  sherman_morrison_update_inplace(a_inv, x);
  CHECK(pure == a_inv);
}

TEST_CASE("sherman-morrison errors") {
  CHECK_THROWS_AS(sherman_morrison_update(Matrix::identity(3), Vector{1.0, 2.0}), Error);
  try {
    sherman_morrison_update(Matrix::identity(1, -1.0), Vector{1.0});
    FAIL("expected SingularUpdate");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularUpdate);
  }
  try {
    sherman_morrison_update(Matrix::identity(2), Vector{NAN, 0.0});
    FAIL("expected InvalidNumeric");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidNumeric);
  }
}

TEST_CASE("mahalanobis norm") {
  CHECK(mahalanobis_norm(Vector(3), Matrix::identity(3)) == 0.0);
  CHECK(mahalanobis_norm(Vector::unit(3, 0), Matrix::identity(3)) == 1.0);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Matrix a_inv = oracle::inverse(random_spd(rng, 5));
    const Vector x = oracle::random_vector(rng, 5);
    double q = 0.0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) q += x[i] * a_inv(i, j) * x[j];
    CHECK(std::abs(mahalanobis_norm(x, a_inv) - std::sqrt(q)) <= 1e-12);
  }
  try {
    mahalanobis_norm(Vector{1.0}, Matrix::identity(1, -1.0));
    FAIL("expected NotPSD");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotPSD);
  }
}

TEST_CASE("symmetric eigensolver matches Eigen for d <= 6") {
  Rng rng(21);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int t = 0; t < 5; ++t) {
      const Matrix m = oracle::random_symmetric(rng, n);
      const SymmetricEigen mine = symmetric_eigen(m);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(m));
      for (std::size_t j = 0; j < n; ++j) {
        const double lam = ref.eigenvalues()(static_cast<Eigen::Index>(n - 1 - j));
        CHECK(std::abs(mine.values[j] - lam) <= 1e-9);
        // eigenvector up to sign
        double dp = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          dp += mine.vectors(i, j) * ref.eigenvectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n - 1 - j));
        CHECK(std::abs(std::abs(dp) - 1.0) <= 1e-8);
      }
      for (std::size_t j = 1; j < n; ++j) CHECK(mine.values[j - 1] >= mine.values[j]);
    }
  }
}

TEST_CASE("spd inverse matches Gauss-Jordan") {
  Rng rng(8);
  const Matrix a = random_spd(rng, 7);
  CHECK(max_abs_diff(spd_inverse(a), oracle::inverse(a)) <= 1e-9);
}

TEST_CASE("pca on axis-aligned data picks the axis") {
  Rng rng(1);
  std::vector<Vector> samples;
  for (int i = 0; i < 50; ++i) {
    Vector x(4);
    x[2] = rng.normal();
    samples.push_back(x);
  }
  const PcaModel m = pca_fit(samples, 1);
  CHECK(max_abs_diff(m.components.column(0), Vector::unit(4, 2)) <= 1e-12);
}

TEST_CASE("pca with k = d reconstructs centered data") {
  Rng rng(2);
  std::vector<Vector> samples;
  for (int i = 0; i < 40; ++i) samples.push_back(oracle::random_vector(rng, 5));
  const PcaModel m = pca_fit(samples, 5);
  for (const Vector& x : samples) {
    const Vector z = pca_transform(m, x);
    const Vector back = matvec(m.components, z) + m.mean;
    CHECK(max_abs_diff(back, x) <= 1e-8);
  }
}

TEST_CASE("pca first component recovers a known direction") {
  Rng rng(3);
  const Vector u{0.6, 0.8};
  std::vector<Vector> samples;
  for (int i = 0; i < 500; ++i) {
    const double t = 3.0 * rng.normal();
    samples.push_back(Vector{t * u[0] + 1e-4 * rng.normal(), t * u[1] + 1e-4 * rng.normal()});
  }
  const PcaModel m = pca_fit(samples, 1);
  const double cosang = std::abs(dot(m.components.column(0), u));
  CHECK(std::acos(std::min(1.0, cosang)) <= 1e-3);
}

TEST_CASE("pca components match Eigen on the covariance") {
  Rng rng(4);
  for (std::size_t d = 2; d <= 6; ++d) {
    std::vector<Vector> samples;
    Vector scale(d);
    for (std::size_t i = 0; i < d; ++i) scale[i] = 1.0 + static_cast<double>(i);
    for (int n = 0; n < 200; ++n) {
      Vector x = oracle::random_vector(rng, d);
      for (std::size_t i = 0; i < d; ++i) x[i] *= scale[i];
      samples.push_back(x);
    }
    const PcaModel m = pca_fit(samples, d);
    Eigen::MatrixXd data(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < samples.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = samples[r][c];
    const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(samples.size() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(cov);
    for (std::size_t j = 0; j < d; ++j) {
      const auto col = static_cast<Eigen::Index>(d - 1 - j);
      CHECK(std::abs(m.explained_variance[j] - ref.eigenvalues()(col)) <= 1e-9);
      double dp = 0.0;
      for (std::size_t i = 0; i < d; ++i) dp += m.components(i, j) * ref.eigenvectors()(static_cast<Eigen::Index>(i), col);
      CHECK(std::abs(std::abs(dp) - 1.0) <= 1e-8);
    }
  }
}

TEST_CASE("pca transform") {
  Rng rng(6);
  std::vector<Vector> samples;
  for (int i = 0; i < 60; ++i) samples.push_back(oracle::random_vector(rng, 6));
  const PcaModel m = pca_fit(samples, 3);
  CHECK(max_abs_diff(pca_transform(m, m.mean), Vector(3)) == 0.0);
  const Vector z{0.5, -1.25, 2.0};
  CHECK(max_abs_diff(pca_transform(m, matvec(m.components, z) + m.mean), z) <= 1e-10);
  const Vector x = oracle::random_vector(rng, 6);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < 6; ++i) s += m.components(i, c) * (x[i] - m.mean[i]);
    CHECK(std::abs(pca_transform(m, x)[c] - s) <= 1e-12);
  }
}

TEST_CASE("pca errors") {
  std::vector<Vector> same(5, Vector{1.0, 2.0});
  try {
    pca_fit(same, 1);
    FAIL("expected DegenerateVariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateVariance);
  }
  std::vector<Vector> two{Vector{1.0, 0.0}, Vector{0.0, 1.0}};
  CHECK_THROWS_AS(pca_fit(two, 3), Error);
}
