#include "loralab/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "loralab/errors.hpp"

namespace loralab::num {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0) {
    throw InvalidInput("matrix dimensions must be positive");
  }
  data_.assign(rows * cols, fill);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (rows == 0 || cols == 0) {
    throw InvalidInput("matrix dimensions must be positive");
  }
  if (data_.size() != rows * cols) {
    throw InvalidInput("matrix entry count " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows) + "x" +
                       std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::frobenius_norm() const { return norm2(data_); }

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw InvalidInput("matrix sum shape mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw InvalidInput("matrix difference shape mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw InvalidInput("matrix product shape mismatch: " +
                       std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                       " times " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
  if (m.cols() != x.size()) throw InvalidInput("matvec shape mismatch");
  Vector y(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row(i), x);
  return y;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> x) {
  if (m.rows() != x.size()) throw InvalidInput("matvec_transposed shape mismatch");
  Vector y(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double xi = x[i];
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) y[j] += r[j] * xi;
  }
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) {
  // Scaled to avoid overflow for large entries.
  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double x : a) {
    const double y = x / scale;
    s += y * y;
  }
  return scale * std::sqrt(s);
}

namespace {

using Columns = std::vector<std::vector<double>>;

void orthogonalize_against(std::vector<double>& u, const Columns& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) {
      const double c = dot(u, b);
      for (std::size_t k = 0; k < u.size(); ++k) u[k] -= c * b[k];
    }
  }
}

// Appends a unit vector orthogonal to `basis`, chosen among the
// coordinate axes by largest residual.
std::vector<double> complete_basis(const Columns& basis, std::size_t dim) {
  std::vector<double> best;
  double best_norm = -1.0;
  for (std::size_t e = 0; e < dim; ++e) {
    std::vector<double> u(dim, 0.0);
    u[e] = 1.0;
    orthogonalize_against(u, basis);
    const double n = norm2(u);
    if (n > best_norm) {
      best_norm = n;
      best = std::move(u);
    }
    if (best_norm > 0.7) break;
  }
  for (double& x : best) x /= best_norm;
  return best;
}

// One-sided Jacobi for rows >= cols.
SvdResult svd_tall(const Matrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  Columns a(cols, std::vector<double>(rows));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) a[j][i] = m(i, j);
  Columns v(cols, std::vector<double>(cols, 0.0));
  for (std::size_t j = 0; j < cols; ++j) v[j][j] = 1.0;

  constexpr double kTol = 1e-15;
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        const double alpha = dot(a[p], a[p]);
        const double beta = dot(a[q], a[q]);
        const double gamma = dot(a[p], a[q]);
        if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < rows; ++k) {
          const double ap = a[p][k];
          const double aq = a[q][k];
          a[p][k] = c * ap - s * aq;
          a[q][k] = s * ap + c * aq;
        }
        for (std::size_t k = 0; k < cols; ++k) {
          const double vp = v[p][k];
          const double vq = v[q][k];
          v[p][k] = c * vp - s * vq;
          v[q][k] = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(cols);
  for (std::size_t j = 0; j < cols; ++j) sigma[j] = norm2(a[j]);
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  const double smax = sigma[order[0]];
  SvdResult out{Matrix(rows, cols), std::vector<double>(cols), Matrix(cols, cols)};
  Columns accepted;
  for (std::size_t k = 0; k < cols; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = sigma[j];
    std::vector<double> u;
    if (sigma[j] > 0.0 && sigma[j] > smax * 1e-300) {
      u = a[j];
      for (double& x : u) x /= sigma[j];
      orthogonalize_against(u, accepted);
      const double n = norm2(u);
      if (n > 0.5) {
        for (double& x : u) x /= n;
      } else {
        u = complete_basis(accepted, rows);
      }
    } else {
      u = complete_basis(accepted, rows);
    }
    for (std::size_t i = 0; i < rows; ++i) out.u(i, k) = u[i];
    for (std::size_t i = 0; i < cols; ++i) out.v(i, k) = v[j][i];
    accepted.push_back(std::move(u));
  }
  return out;
}

void require_valid(const Matrix& m, const char* what) {
  if (m.empty()) throw InvalidInput(std::string(what) + ": empty matrix");
  if (!m.all_finite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

}  // namespace

SvdResult svd(const Matrix& m) {
  require_valid(m, "svd");
  if (m.rows() >= m.cols()) return svd_tall(m);
  SvdResult t = svd_tall(m.transposed());
  std::swap(t.u, t.v);
  return t;
}

Matrix pinv(const Matrix& m, std::optional<double> rank_tol) {
  const SvdResult s = svd(m);
  const double smax = s.singular_values.front();
  const double tol = rank_tol.value_or(
      static_cast<double>(std::max(m.rows(), m.cols())) *
      std::numeric_limits<double>::epsilon() * smax);
  if (tol < 0.0) throw InvalidParameter("pinv: rank_tol must be non-negative");
  Matrix out(m.cols(), m.rows());
  for (std::size_t k = 0; k < s.singular_values.size(); ++k) {
    const double sk = s.singular_values[k];
    if (!(sk > tol)) continue;
    const double inv = 1.0 / sk;
    for (std::size_t i = 0; i < m.cols(); ++i) {
      const double vik = s.v(i, k) * inv;
      if (vik == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < m.rows(); ++j) out_row[j] += vik * s.u(j, k);
    }
  }
  return out;
}

double operator_norm(const Matrix& m) {
  require_valid(m, "operator_norm");
  if (m.max_abs() == 0.0) return 0.0;
  RngState start(0x5EEDULL, 0);
  Vector v(m.cols());
  for (double& x : v) x = start.normal();
  {
    const double n = norm2(v);
    for (double& x : v) x /= n;
  }
  constexpr int kMaxIterations = 20000;
  constexpr double kTol = 1e-12;
  double rho_prev = 0.0;
  for (int it = 0; it < kMaxIterations; ++it) {
    const Vector y = matvec(m, v);
    const double rho = dot(y, y);
    Vector w = matvec_transposed(m, y);
    const double wn = norm2(w);
    if (wn == 0.0) break;  // v landed in the null space
    for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / wn;
    if (it > 0 && std::abs(rho - rho_prev) <= kTol * rho) break;
    rho_prev = rho;
  }
  return norm2(matvec(m, v));
}

std::size_t numerical_rank(const Matrix& m, double tol) {
  const SvdResult s = svd(m);
  return static_cast<std::size_t>(std::count_if(
      s.singular_values.begin(), s.singular_values.end(),
      [tol](double x) { return x > tol; }));
}

Matrix sample_gaussian(RngState& rng, std::size_t rows, std::size_t cols,
                       double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidParameter("sample_gaussian: scale must be positive and finite");
  }
  Matrix m(rows, cols);
  for (double& x : m.entries()) x = scale * rng.normal();
  return m;
}

}  // namespace loralab::num
