#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wlecv {

/// Small dense row-major matrix. Every matrix in this library is m x m with m
/// the number of populations, so dimensions are capped at kMaxDim.
class Matrix {
 public:
  static constexpr std::size_t kMaxDim = 64;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double> column(std::size_t c) const;

  Matrix transpose() const;
  double trace() const;
  double frobenius_norm() const;
  double max_abs() const;

  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend Matrix operator+(const Matrix& a, const Matrix& b);
  friend Matrix operator-(const Matrix& a, const Matrix& b);
  friend Matrix operator*(double s, const Matrix& a);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::vector<double> operator*(const Matrix& a, std::span<const double> x);

/// Solves A x = b by LU with scaled partial pivoting. Throws
/// "singular-matrix" when a pivot falls below 1e-13 of its row scale.
std::vector<double> solve_linear(const Matrix& a, std::span<const double> b);

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column k pairs with values[k]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
SymmetricEigen symmetric_eigen(const Matrix& a);

struct Svd {
  Matrix u;                     // rows x k
  std::vector<double> singular; // k = min(rows, cols), descending
  Matrix v;                     // cols x k
};

/// Thin SVD by one-sided (Hestenes) Jacobi rotations.
Svd svd(const Matrix& a);

/// Moore-Penrose inverse. Singular values at or below
/// rtol * sigma_max are treated as zero; a negative rtol selects the default
/// max(rows, cols) * machine epsilon.
Matrix pseudo_inverse(const Matrix& a, double rtol = -1.0);

struct QuadMinResult {
  std::vector<double> lambda;
  double nu = 0.0;              ///< Lagrange multiplier: 2 A lambda - 2 b = nu 1
  bool unique = true;           ///< false when A is singular (minimum-norm solution)
  bool ridge_applied = false;   ///< conditioning guard engaged
};

/// Minimizes c - 2 lambda'b + lambda'A lambda subject to 1'lambda = 1 for
/// symmetric PSD A.
///
/// Invertible A: the Lagrange solution A^{-1}(b + (nu/2) 1). A whose
/// condition number exceeds 1e12 first receives the ridge
/// 1e-12 * trace(A) / m on its diagonal. Numerically singular A (smallest
/// eigenvalue <= 1e-13 of the largest) yields the minimum-norm minimizer on the
/// constraint plane, with unique = false. Throws "degenerate-constraint" when
/// 1'A^+1 vanishes or the objective is unbounded on the plane.
QuadMinResult constrained_quadratic_min(const Matrix& a, std::span<const double> b);

/// Orthonormal basis of the complement of the all-ones vector (m x (m-1),
/// Helmert contrasts).
Matrix sum_zero_basis(std::size_t m);

}  // namespace wlecv
