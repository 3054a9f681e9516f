#pragma once

// Independent reference computations shared by the test files.

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "daband/error.hpp"
#include "daband/linalg.hpp"
#include "daband/mlp.hpp"
#include "daband/rng.hpp"

namespace oracle {

using daband::Matrix;
using daband::MlpParams;
using daband::Rng;
using daband::Vector;

// Gauss-Jordan with partial pivoting.
inline Matrix inverse(Matrix a) {
  const std::size_t n = a.rows();
  Matrix inv = Matrix::identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    for (std::size_t k = 0; k < n; ++k) {
      std::swap(a(c, k), a(piv, k));
      std::swap(inv(c, k), inv(piv, k));
    }
    const double p = a(c, c);
    for (std::size_t k = 0; k < n; ++k) {
      a(c, k) /= p;
      inv(c, k) /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      for (std::size_t k = 0; k < n; ++k) {
        a(r, k) -= f * a(c, k);
        inv(r, k) -= f * inv(c, k);
      }
    }
  }
  return inv;
}

inline Vector solve(const Matrix& a, const Vector& b) {
  const Matrix inv = inverse(a);
  Vector x(b.dim());
  for (std::size_t i = 0; i < b.dim(); ++i)
    for (std::size_t j = 0; j < b.dim(); ++j) x[i] += inv(i, j) * b[j];
  return x;
}

inline Vector random_vector(Rng& rng, std::size_t d, double scale = 1.0) {
  Vector v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = scale * rng.normal();
  return v;
}

inline Matrix random_symmetric(Rng& rng, std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.normal();
  return m;
}

// Pointer to the i-th parameter in GradientBundle::flatten order.
inline double& param_at(MlpParams& p, std::size_t idx) {
  for (std::size_t l = 0; l < p.layers(); ++l) {
    auto& w = p.weights[l].values();
    if (idx < w.size()) return w[idx];
    idx -= w.size();
    if (idx < p.biases[l].dim()) return p.biases[l][idx];
    idx -= p.biases[l].dim();
  }
  throw std::out_of_range("parameter index");
}

inline std::size_t param_count(const MlpParams& p) { return p.parameter_count(); }

// Central differences of f over every parameter of p.
inline std::vector<double> numeric_gradient(MlpParams p, const std::function<double(const MlpParams&)>& f,
                                            double h = 1e-5) {
  std::vector<double> g(param_count(p));
  for (std::size_t i = 0; i < g.size(); ++i) {
    double& v = param_at(p, i);
    const double orig = v;
    v = orig + h;
    const double up = f(p);
    v = orig - h;
    const double down = f(p);
    v = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ‖a − b‖ / max(‖a‖, ‖b‖, floor).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

// Kind of the daband::Error thrown by f; nullopt when nothing is thrown.
inline std::optional<daband::ErrorKind> error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const daband::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace oracle
