#include "daband/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace daband {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) fail(ErrorKind::DimensionError, std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
}

// Flip each column so that its entry of largest magnitude is positive.
void canonicalize_signs(Matrix& vecs) {
  for (std::size_t c = 0; c < vecs.cols(); ++c) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < vecs.rows(); ++r) {
      if (std::abs(vecs(r, c)) > std::abs(vecs(best, c))) best = r;
    }
    if (vecs(best, c) < 0.0) {
      for (std::size_t r = 0; r < vecs.rows(); ++r) vecs(r, c) = -vecs(r, c);
    }
  }
}

}  // namespace

// ---- Vector ---------------------------------------------------------------

Vector Vector::unit(std::size_t dim, std::size_t axis) {
  Vector v(dim);
  v[axis] = 1.0;
  return v;
}

bool Vector::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Vector& Vector::operator+=(const Vector& other) {
  require_same_dim(dim(), other.dim(), "vector add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Vector& Vector::operator-=(const Vector& other) {
  require_same_dim(dim(), other.dim(), "vector sub");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Vector& Vector::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Vector operator+(Vector a, const Vector& b) { return a += b; }
Vector operator-(Vector a, const Vector& b) { return a -= b; }
Vector operator*(double s, Vector v) { return v *= s; }

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

// ---- Matrix ---------------------------------------------------------------

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  require(data_.size() == rows * cols, ErrorKind::ShapeError, "matrix data length != rows*cols");
}

Matrix Matrix::identity(std::size_t n, double scale) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
  return m;
}

Matrix Matrix::from_columns(std::span<const Vector> columns) {
  if (columns.empty()) return {};
  Matrix m(columns.front().dim(), columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    require_same_dim(columns[c].dim(), m.rows(), "from_columns");
    for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) = columns[c][r];
  }
  return m;
}

Vector Matrix::column(std::size_t c) const {
  Vector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Vector matvec(const Matrix& m, const Vector& x) {
  require_same_dim(m.cols(), x.dim(), "matvec");
  Vector y(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x.span());
  return y;
}

Vector matvec_transposed(const Matrix& m, const Vector& x) {
  require_same_dim(m.rows(), x.dim(), "matvec_transposed");
  Vector y(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double xr = x[r];
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += row[c] * xr;
  }
  return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require_same_dim(a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto brow = b.row(k);
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::ShapeError, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i)
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  require_same_dim(a.dim(), b.dim(), "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

// ---- rank-1 inverse maintenance ----------------------------------------

void sherman_morrison_update_inplace(Matrix& a_inv, const Vector& x) {
  const std::size_t d = x.dim();
  if (a_inv.rows() != d || a_inv.cols() != d)
    fail(ErrorKind::DimensionError, "sherman_morrison: a_inv is " + std::to_string(a_inv.rows()) + "x" +
              std::to_string(a_inv.cols()) + ", x has dim " + std::to_string(d));
  require(d >= 1, ErrorKind::DimensionError, "sherman_morrison: empty vector");
  require(x.all_finite() && a_inv.all_finite(), ErrorKind::InvalidNumeric,
          "sherman_morrison: non-finite input");

  // a_inv is symmetric, so A⁻¹x xᵀA⁻¹ = u uᵀ with u = A⁻¹x.
  const Vector u = matvec(a_inv, x);
  const double denom = 1.0 + dot(x, u);
  if (denom <= 1e-15)
    fail(ErrorKind::SingularUpdate, "sherman_morrison: denominator " + std::to_string(denom));
  for (std::size_t i = 0; i < d; ++i) {
    auto row = a_inv.row(i);
    for (std::size_t j = 0; j < d; ++j) row[j] -= (u[i] * u[j]) / denom;
  }
}

Matrix sherman_morrison_update(const Matrix& a_inv, const Vector& x) {
  Matrix out = a_inv;
  sherman_morrison_update_inplace(out, x);
  return out;
}

double mahalanobis_norm(const Vector& x, const Matrix& a_inv) {
  require(a_inv.rows() == x.dim() && a_inv.cols() == x.dim(), ErrorKind::DimensionError,
          "mahalanobis_norm: metric does not match vector dim");
  double q = 0.0;
  for (std::size_t i = 0; i < x.dim(); ++i) q += x[i] * dot(a_inv.row(i), x.span());
  if (q < 0.0) {
    if (q < -1e-10)
      fail(ErrorKind::NotPSD, "mahalanobis_norm: quadratic form " + std::to_string(q));
    return 0.0;
  }
  return std::sqrt(q);
}

// ---- symmetric eigendecomposition ----------------------------------------

SymmetricEigen symmetric_eigen(const Matrix& sym) {
  const std::size_t n = sym.rows();
  require(sym.cols() == n, ErrorKind::DimensionError, "symmetric_eigen: matrix not square");
  require(sym.all_finite(), ErrorKind::InvalidNumeric, "symmetric_eigen: non-finite input");

  Matrix a = sym;
  Matrix v = Matrix::identity(n);
  double total = 0.0;
  for (double x : a.values()) total += x * x;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * total || off == 0.0) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  canonicalize_signs(out.vectors);
  return out;
}

Matrix spd_inverse(const Matrix& spd) {
  const SymmetricEigen eig = symmetric_eigen(spd);
  const std::size_t n = spd.rows();
  require(n == 0 || eig.values.back() > 0.0, ErrorKind::NotPSD, "spd_inverse: matrix not positive definite");
  Matrix inv(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 1.0 / eig.values[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = eig.vectors(i, k) * w;
      for (std::size_t j = 0; j < n; ++j) inv(i, j) += vik * eig.vectors(j, k);
    }
  }
  return inv;
}

// ---- PCA ------------------------------------------------------------------

PcaModel pca_fit(std::span<const Vector> samples, std::size_t k) {
  require(samples.size() >= 2, ErrorKind::InsufficientData, "pca_fit: need at least 2 samples");
  const std::size_t d = samples.front().dim();
  if (k < 1 || k > d)
    fail(ErrorKind::DimensionError, "pca_fit: k=" + std::to_string(k) + " outside [1, " + std::to_string(d) + "]");

  Vector mean(d);
  for (const Vector& s : samples) {
    require_same_dim(s.dim(), d, "pca_fit sample");
    mean += s;
  }
  mean *= 1.0 / static_cast<double>(samples.size());

  Matrix cov(d, d);
  Vector centered(d);
  for (const Vector& s : samples) {
    for (std::size_t i = 0; i < d; ++i) centered[i] = s[i] - mean[i];
    for (std::size_t i = 0; i < d; ++i) {
      auto row = cov.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += centered[i] * centered[j];
    }
  }
  const double inv_n1 = 1.0 / static_cast<double>(samples.size() - 1);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) cov(i, j) *= inv_n1;
    trace += cov(i, i);
  }
  require(trace > 0.0, ErrorKind::DegenerateVariance, "pca_fit: all samples identical");

  const SymmetricEigen eig = symmetric_eigen(cov);
  PcaModel model{std::move(mean), Matrix(d, k), std::vector<double>(k)};
  for (std::size_t c = 0; c < k; ++c) {
    model.explained_variance[c] = std::max(0.0, eig.values[c]);
    for (std::size_t r = 0; r < d; ++r) model.components(r, c) = eig.vectors(r, c);
  }
  return model;
}

Vector pca_transform(const PcaModel& model, const Vector& x) {
  require_same_dim(x.dim(), model.input_dim(), "pca_transform");
  Vector centered = x - model.mean;
  return matvec_transposed(model.components, centered);
}

}  // namespace daband
