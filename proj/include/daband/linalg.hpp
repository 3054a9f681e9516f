#pragma once

// Dense linear algebra for the bandit agents: row-major matrices, rank-1
// inverse maintenance, Mahalanobis norms, a Jacobi symmetric eigensolver and
// PCA built on top of it.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "daband/error.hpp"

namespace daband {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  static Vector unit(std::size_t dim, std::size_t axis);

  std::size_t dim() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  bool all_finite() const noexcept;

  Vector& operator+=(const Vector& other);
  Vector& operator-=(const Vector& other);
  Vector& operator*=(double s);

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

Vector operator+(Vector a, const Vector& b);
Vector operator-(Vector a, const Vector& b);
Vector operator*(double s, Vector v);

double dot(std::span<const double> a, std::span<const double> b);
inline double dot(const Vector& a, const Vector& b) { return dot(a.span(), b.span()); }
double norm2(const Vector& v);

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

  static Matrix identity(std::size_t n, double scale = 1.0);
  static Matrix from_columns(std::span<const Vector> columns);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  Vector column(std::size_t c) const;

  const std::vector<double>& values() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }

  bool all_finite() const noexcept;
  Matrix transpose() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Vector matvec(const Matrix& m, const Vector& x);
/// mᵀ·x without materializing the transpose.
Vector matvec_transposed(const Matrix& m, const Vector& x);
Matrix matmul(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs_diff(const Vector& a, const Vector& b);
bool is_symmetric(const Matrix& m, double tol);

/// (A + x xᵀ)⁻¹ from A⁻¹ in O(d²).
Matrix sherman_morrison_update(const Matrix& a_inv, const Vector& x);
/// In-place variant used on the hot path; same arithmetic as the pure form.
void sherman_morrison_update_inplace(Matrix& a_inv, const Vector& x);

/// sqrt(xᵀ·a_inv·x). Quadratic forms in [-1e-10, 0) clamp to 0.
double mahalanobis_norm(const Vector& x, const Matrix& a_inv);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column j pairs with values[j]
};

/// Cyclic Jacobi rotations; intended for d up to a few hundred.
SymmetricEigen symmetric_eigen(const Matrix& sym);

/// Inverse of a symmetric positive definite matrix through its eigenbasis.
Matrix spd_inverse(const Matrix& spd);

struct PcaModel {
  Vector mean;
  Matrix components;  // d × k, orthonormal columns
  std::vector<double> explained_variance;

  std::size_t input_dim() const noexcept { return mean.dim(); }
  std::size_t output_dim() const noexcept { return components.cols(); }
};

/// Top-k principal directions of the sample covariance (divisor n-1). Each
/// component's largest-magnitude entry is made positive.
PcaModel pca_fit(std::span<const Vector> samples, std::size_t k);
Vector pca_transform(const PcaModel& model, const Vector& x);

}  // namespace daband
