#include "wlecv/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "wlecv/error.hpp"

namespace wlecv {

namespace {

void check_dims(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0 || rows > Matrix::kMaxDim || cols > Matrix::kMaxDim) {
    throw_data(errc::kInvalidArgument, "matrix dimensions " + std::to_string(rows) + "x" +
                                           std::to_string(cols) + " outside 1..64");
  }
}

constexpr double kEps = std::numeric_limits<double>::epsilon();

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  check_dims(rows, cols);
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw_data(errc::kInvalidArgument, "empty matrix");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols_) throw_data(errc::kInvalidArgument, "ragged matrix rows");
    std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + r * m.cols_);
  }
  return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Matrix::trace() const {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
  return s;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Matrix::max_abs() const {
  double s = 0.0;
  for (double v : data_) s = std::max(s, std::abs(v));
  return s;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols_ != b.rows_) throw_data(errc::kInvalidArgument, "matrix product shape mismatch");
  Matrix out(a.rows_, b.cols_);
  for (std::size_t i = 0; i < a.rows_; ++i)
    for (std::size_t k = 0; k < a.cols_; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
    throw_data(errc::kInvalidArgument, "matrix sum shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.data_.size(); ++i) out.data_[i] += b.data_[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) { return a + (-1.0) * b; }

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data_) v *= s;
  return out;
}

std::vector<double> operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw_data(errc::kInvalidArgument, "matrix-vector shape mismatch");
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    out[i] = std::inner_product(r.begin(), r.end(), x.begin(), 0.0);
  }
  return out;
}

std::vector<double> solve_linear(const Matrix& a, std::span<const double> b) {
  const std::size_t n = a.rows();
  if (!a.square()) throw_data(errc::kInvalidArgument, "solve_linear needs a square matrix");
  if (b.size() != n) throw_data(errc::kInvalidArgument, "solve_linear rhs length mismatch");

  Matrix lu = a;
  std::vector<double> x(b.begin(), b.end());
  std::vector<double> scale(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s = std::max(s, std::abs(lu(i, j)));
    scale[i] = s;
  }

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = -1.0;
    for (std::size_t i = k; i < n; ++i) {
      const double rel = scale[i] > 0.0 ? std::abs(lu(i, k)) / scale[i] : 0.0;
      if (rel > best) {
        best = rel;
        piv = i;
      }
    }
    if (best < 1e-13) {
      throw_numerical(errc::kSingularMatrix,
                      "pivot " + std::to_string(k) + " below 1e-13 of its row scale");
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
      std::swap(x[k], x[piv]);
      std::swap(scale[k], scale[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
      x[i] -= f * x[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    double s = x[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= lu(k, j) * x[j];
    x[k] = s / lu(k, k);
  }
  return x;
}

SymmetricEigen symmetric_eigen(const Matrix& a) {
  const std::size_t n = a.rows();
  if (!a.square()) throw_data(errc::kInvalidArgument, "symmetric_eigen needs a square matrix");
  Matrix d = a;
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += d(p, q) * d(p, q);
    if (off <= kEps * kEps * std::max(1e-300, d.frobenius_norm() * d.frobenius_norm())) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = d(p, q);
        if (apq == 0.0) continue;
        const double theta = (d(q, q) - d(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(1.0, theta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double dkp = d(k, p);
          const double dkq = d(k, q);
          d(k, p) = c * dkp - s * dkq;
          d(k, q) = s * dkp + c * dkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double dpk = d(p, k);
          const double dqk = d(q, k);
          d(p, k) = c * dpk - s * dqk;
          d(q, k) = s * dpk + c * dqk;
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
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return d(i, i) < d(j, j); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = d(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

Svd svd(const Matrix& a) {
  const bool wide = a.rows() < a.cols();
  Matrix u = wide ? a.transpose() : a;  // tall: rows >= cols
  const std::size_t m = u.rows();
  const std::size_t n = u.cols();
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          alpha += u(k, p) * u(k, p);
          beta += u(k, q) * u(k, q);
          gamma += u(k, p) * u(k, q);
        }
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (std::size_t k = 0; k < m; ++k) {
          const double ukp = u(k, p);
          const double ukq = u(k, q);
          u(k, p) = c * ukp - s * ukq;
          u(k, q) = s * ukp + c * ukq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += u(k, j) * u(k, j);
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

  Svd out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.singular[k] = sigma[j];
    for (std::size_t r = 0; r < m; ++r) out.u(r, k) = sigma[j] > 0.0 ? u(r, j) / sigma[j] : 0.0;
    for (std::size_t r = 0; r < n; ++r) out.v(r, k) = v(r, j);
  }
  if (wide) std::swap(out.u, out.v);
  return out;
}

Matrix pseudo_inverse(const Matrix& a, double rtol) {
  const Svd d = svd(a);
  if (rtol < 0.0) rtol = static_cast<double>(std::max(a.rows(), a.cols())) * kEps;
  const double cutoff = d.singular.empty() ? 0.0 : rtol * d.singular.front();
  Matrix out(a.cols(), a.rows());
  for (std::size_t k = 0; k < d.singular.size(); ++k) {
    const double s = d.singular[k];
    if (s <= cutoff || s == 0.0) continue;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double vik = d.v(i, k) / s;
      if (vik == 0.0) continue;
      for (std::size_t j = 0; j < a.rows(); ++j) out(i, j) += vik * d.u(j, k);
    }
  }
  return out;
}

Matrix sum_zero_basis(std::size_t m) {
  if (m < 2) throw_data(errc::kInvalidArgument, "sum-zero basis needs m >= 2");
  Matrix n(m, m - 1);
  for (std::size_t k = 1; k < m; ++k) {
    const double kk = static_cast<double>(k);
    const double norm = std::sqrt(kk * (kk + 1.0));
    for (std::size_t i = 0; i < k; ++i) n(i, k - 1) = 1.0 / norm;
    n(k, k - 1) = -kk / norm;
  }
  return n;
}

namespace {

QuadMinResult lagrange_solution(const Matrix& a, std::span<const double> b) {
  const std::size_t m = a.rows();
  const std::vector<double> ones(m, 1.0);
  const std::vector<double> x = solve_linear(a, b);
  const std::vector<double> y = solve_linear(a, ones);
  const double one_x = std::accumulate(x.begin(), x.end(), 0.0);
  const double one_y = std::accumulate(y.begin(), y.end(), 0.0);
  if (!(std::abs(one_y) > 0.0) || !std::isfinite(one_y)) {
    throw_numerical(errc::kDegenerateConstraint, "1'A^{-1}1 vanishes");
  }
  const double half_nu = (1.0 - one_x) / one_y;
  QuadMinResult out;
  out.lambda.resize(m);
  for (std::size_t i = 0; i < m; ++i) out.lambda[i] = x[i] + half_nu * y[i];
  out.nu = 2.0 * half_nu;
  return out;
}

QuadMinResult minimum_norm_solution(const Matrix& a, std::span<const double> b, double scale) {
  const std::size_t m = a.rows();
  const Matrix a_pinv = pseudo_inverse(a, 1e-13);
  const std::vector<double> ones(m, 1.0);
  const std::vector<double> pinv_ones = a_pinv * ones;
  const double one_pinv_one = std::accumulate(pinv_ones.begin(), pinv_ones.end(), 0.0);
  if (scale == 0.0 || one_pinv_one <= 1e-12 * static_cast<double>(m) / scale) {
    throw_numerical(errc::kDegenerateConstraint, "1'A^+1 vanishes");
  }

  // lambda = 1/m + N z, with N an orthonormal basis of the sum-zero plane.
  const Matrix basis = sum_zero_basis(m);
  const std::vector<double> center(m, 1.0 / static_cast<double>(m));
  const Matrix hess = basis.transpose() * a * basis;
  std::vector<double> resid = a * center;
  for (std::size_t i = 0; i < m; ++i) resid[i] = b[i] - resid[i];
  const std::vector<double> grad = basis.transpose() * resid;
  const std::vector<double> z = pseudo_inverse(hess, 1e-10) * grad;

  const std::vector<double> hz = hess * z;
  double miss = 0.0, gnorm = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    miss = std::max(miss, std::abs(hz[k] - grad[k]));
    gnorm = std::max(gnorm, std::abs(grad[k]));
  }
  if (miss > 1e-8 * (1.0 + gnorm)) {
    throw_numerical(errc::kDegenerateConstraint, "objective unbounded on the constraint plane");
  }

  QuadMinResult out;
  out.lambda = basis * z;
  for (std::size_t i = 0; i < m; ++i) out.lambda[i] += center[i];
  const std::vector<double> al = a * out.lambda;
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += al[i] - b[i];
  out.nu = 2.0 * s / static_cast<double>(m);
  out.unique = false;
  return out;
}

}  // namespace

QuadMinResult constrained_quadratic_min(const Matrix& a, std::span<const double> b) {
  const std::size_t m = a.rows();
  if (!a.square()) throw_data(errc::kInvalidArgument, "quadratic form must be square");
  if (b.size() != m) throw_data(errc::kInvalidArgument, "linear term length mismatch");
  const double amax = a.max_abs();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-10 * std::max(1.0, amax))
        throw_data(errc::kInvalidArgument, "quadratic form is not symmetric");

  if (m == 1) {
    QuadMinResult out;
    out.lambda = {1.0};
    out.nu = 2.0 * (a(0, 0) - b[0]);
    out.unique = true;
    return out;
  }

  const SymmetricEigen eig = symmetric_eigen(a);
  const double top = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
  if (eig.values.front() < -1e-10 * std::max(1e-300, std::abs(a.trace()))) {
    throw_data(errc::kInvalidArgument, "quadratic form is not positive semidefinite");
  }
  const double bottom = eig.values.front();
  if (top == 0.0 || bottom <= 1e-13 * top) return minimum_norm_solution(a, b, top);

  if (top / bottom > 1e12) {
    const double tau = 1e-12 * a.trace() / static_cast<double>(m);
    Matrix ridged = a;
    for (std::size_t i = 0; i < m; ++i) ridged(i, i) += tau;
    QuadMinResult out = lagrange_solution(ridged, b);
    out.ridge_applied = true;
    return out;
  }
  return lagrange_solution(a, b);
}

}  // namespace wlecv
