#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "loralab/rng.hpp"

namespace loralab::num {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Dimensions are always >= 1 for a
// constructed matrix; a default-constructed Matrix is an empty placeholder.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> entries() { return data_; }
  std::span<const double> entries() const { return data_; }

  Matrix transposed() const;
  double frobenius_norm() const;
  // Largest absolute entry (the entrywise infinity norm).
  double max_abs() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(const Matrix& a, const Matrix& b);

// y = M x
Vector matvec(const Matrix& m, std::span<const double> x);
// y = M^T x
Vector matvec_transposed(const Matrix& m, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

struct SvdResult {
  Matrix u;                       // m x k, orthonormal columns
  std::vector<double> singular_values;  // length k = min(m, n), descending
  Matrix v;                       // n x k, orthonormal columns
};

// Thin SVD by one-sided (Hestenes) Jacobi. Throws InvalidInput on
// non-finite entries or an empty matrix.
SvdResult svd(const Matrix& m);

// Moore-Penrose pseudo-inverse V S^+ U^T. Singular values at or below
// rank_tol are treated as zero; the default tolerance is
// max(m, n) * machine-epsilon * s_max.
Matrix pinv(const Matrix& m, std::optional<double> rank_tol = std::nullopt);

// Largest singular value by power iteration on M^T M (relative tolerance
// 1e-12 on the Rayleigh quotient, at most 20000 iterations).
double operator_norm(const Matrix& m);

// Number of singular values strictly above tol.
std::size_t numerical_rank(const Matrix& m, double tol);

// i.i.d. N(0, scale^2) entries. Throws InvalidParameter unless scale > 0.
Matrix sample_gaussian(RngState& rng, std::size_t rows, std::size_t cols,
                       double scale);

}  // namespace loralab::num
