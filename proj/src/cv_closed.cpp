#include "wlecv/cv_closed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wlecv/error.hpp"

namespace wlecv {

namespace {

void require_equal_pair(const PopulationSample& x1, const PopulationSample& x2) {
  if (x1.size() != x2.size())
    throw_data(errc::kInvalidArgument, "equal-column weights need equal sample sizes");
  if (x1.size() < 2) throw_data(errc::kInsufficientData, "need n >= 2 observations per population");
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_delta(double delta) {
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw_data(errc::kInvalidArgument, "delta must be a finite nonnegative number");
}

// Adds n * delta to the diagonal of every non-target weight.
Matrix corrected(Matrix a, double n, double delta) {
  for (std::size_t i = 1; i < a.rows(); ++i) a(i, i) += n * delta;
  return a;
}

}  // namespace

double default_delta(const PopulationSample& target) {
  const auto v = target.values();
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return 1e-8 * std::max(1.0, sq / static_cast<double>(v.size()));
}

EqualSchemeIntermediates equal_scheme_intermediates(const MultiSample& ms) {
  if (!ms.aligned())
    throw_data(errc::kCovarianceUndefined, "equal-column scheme needs an aligned sample");
  const std::size_t n = ms.target().size();
  if (n < 2) throw_data(errc::kInsufficientData, "need n >= 2 observations per population");
  const std::size_t m = ms.m();
  const SampleStats stats = summarize(ms);
  const Matrix& sigma = stats.cov();
  const auto& theta = stats.means();
  const double nd = static_cast<double>(n);
  const double e_n = nd / (nd - 1.0);

  EqualSchemeIntermediates out;
  out.e_n = e_n;
  const double c_cov = e_n / (nd - 1.0);
  const double c_mean = e_n * e_n * (nd - 2.0) + e_n / (nd - 1.0);
  out.a_e = Matrix(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < m; ++k)
      out.a_e(i, k) = c_cov * sigma(i, k) + c_mean * theta[i] * theta[k];
  out.b_e.resize(m);
  for (std::size_t i = 0; i < m; ++i) out.b_e[i] = out.a_e(i, 0) - e_n * e_n * sigma(i, 0);

  if (m >= 2) {
    const double gap = theta[0] - theta[1];
    double sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = ms[0][j] - ms[1][j];
      sq += d * d;
    }
    const double nm1 = nd - 1.0;
    out.s1 = nd * (nd - 2.0) / (nm1 * nm1) * gap * gap + sq / (nd * nm1 * nm1);
    out.s2 = nd / (nm1 * nm1) * (sigma(0, 0) - sigma(0, 1));
  }
  return out;
}

WeightVector weights_equal_two(const PopulationSample& x1, const PopulationSample& x2,
                               std::optional<double> delta) {
  require_equal_pair(x1, x2);
  const double d = delta.value_or(default_delta(x1));
  check_delta(d);
  const MultiSample ms({x1, x2}, true);
  const EqualSchemeIntermediates im = equal_scheme_intermediates(ms);
  const double denom = im.s1 + d;
  if (!(denom > 0.0))
    throw_numerical(errc::kDegenerateSamples, "s1 + delta is zero (identical constant samples)");
  const double l2 = im.s2 / denom;
  return WeightVector{{1.0 - l2, l2}, WeightScheme::kEqualColumn, d, true, false};
}

WeightVector weights_equal_matrix(const MultiSample& ms, std::optional<double> delta) {
  const double d = delta.value_or(default_delta(ms.target()));
  check_delta(d);
  const EqualSchemeIntermediates im = equal_scheme_intermediates(ms);
  if (ms.m() == 1) return WeightVector{{1.0}, WeightScheme::kEqualColumn, d, true, false};
  const double n = static_cast<double>(ms.target().size());
  const QuadMinResult q = constrained_quadratic_min(corrected(im.a_e, n, d), im.b_e);
  return WeightVector{q.lambda, WeightScheme::kEqualColumn, d, q.unique, q.ridge_applied};
}

std::vector<double> weights_equal_projection(const MultiSample& ms, std::optional<double> delta) {
  const double d = delta.value_or(default_delta(ms.target()));
  check_delta(d);
  const EqualSchemeIntermediates im = equal_scheme_intermediates(ms);
  const std::size_t m = ms.m();
  if (m == 1) return {1.0};
  const double n = static_cast<double>(ms.target().size());
  const Matrix a = corrected(im.a_e, n, d);
  const std::vector<double> sigma1 = summarize(ms).cov().column(0);
  const std::vector<double> ones(m, 1.0);
  const std::vector<double> a_sigma1 = solve_linear(a, sigma1);
  const std::vector<double> a_ones = solve_linear(a, ones);
  const double num = std::accumulate(a_sigma1.begin(), a_sigma1.end(), 0.0);
  const double den = std::accumulate(a_ones.begin(), a_ones.end(), 0.0);
  std::vector<double> lambda(m);
  for (std::size_t i = 0; i < m; ++i)
    lambda[i] = (i == 0 ? 1.0 : 0.0) - im.e_n * im.e_n * (a_sigma1[i] - num / den * a_ones[i]);
  return lambda;
}

WeightVector weights_unequal_two(const PopulationSample& x1, const PopulationSample& x2) {
  const std::size_t n1 = x1.size();
  if (n1 < 2) throw_data(errc::kInsufficientData, "delete-one-point weights need n1 >= 2");
  const double n = static_cast<double>(n1);
  const double m1 = mean_of(x1.values());
  const double m2 = mean_of(x2.values());
  double ss = 0.0;
  for (double v : x1.values()) ss += (v - m1) * (v - m1);
  const double var1 = ss / n;
  const double gap2 = (m1 - m2) * (m1 - m2);
  const double num = n * gap2 - n / (n - 1.0) * var1;
  const double den = n * gap2 + n / ((n - 1.0) * (n - 1.0)) * var1;
  if (!(den >= 1e-300))
    throw_numerical(errc::kDegenerateSamples, "constant target with equal means");
  const double l1 = num / den;
  return WeightVector{{l1, 1.0 - l1}, WeightScheme::kUnequalPoint, 0.0, true, false};
}

std::pair<Matrix, std::vector<double>> unequal_scheme_quadratic(const MultiSample& ms) {
  const std::size_t n1 = ms.target().size();
  if (n1 < 2) throw_data(errc::kInsufficientData, "delete-one-point weights need n1 >= 2");
  const std::size_t m = ms.m();
  std::vector<double> theta(m);
  for (std::size_t i = 0; i < m; ++i) theta[i] = mean_of(ms[i].values());
  const double n = static_cast<double>(n1);
  double ss = 0.0;
  for (double v : ms.target().values()) ss += (v - theta[0]) * (v - theta[0]);
  const double var1 = ss / n;

  Matrix a(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < m; ++k) a(i, k) = n * theta[i] * theta[k];
  a(0, 0) += n / ((n - 1.0) * (n - 1.0)) * var1;
  std::vector<double> b(m);
  for (std::size_t i = 0; i < m; ++i) b[i] = n * theta[0] * theta[i];
  b[0] -= n / (n - 1.0) * var1;
  return {std::move(a), std::move(b)};
}

WeightVector weights_unequal_matrix(const MultiSample& ms, double delta) {
  check_delta(delta);
  auto [a, b] = unequal_scheme_quadratic(ms);
  if (ms.m() == 1) return WeightVector{{1.0}, WeightScheme::kUnequalPoint, delta, true, false};
  const double n = static_cast<double>(ms.target().size());
  const QuadMinResult q = constrained_quadratic_min(corrected(std::move(a), n, delta), b);
  return WeightVector{q.lambda, WeightScheme::kUnequalPoint, delta, q.unique, q.ridge_applied};
}

}  // namespace wlecv
