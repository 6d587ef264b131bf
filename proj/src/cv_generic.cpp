#include "wlecv/cv_generic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wlecv/error.hpp"
#include "wlecv/linalg.hpp"
#include "wlecv/wle.hpp"

namespace wlecv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> full_weights(std::span<const double> free) {
  std::vector<double> lambda(free.size() + 1);
  lambda[0] = 1.0 - std::accumulate(free.begin(), free.end(), 0.0);
  std::copy(free.begin(), free.end(), lambda.begin() + 1);
  return lambda;
}

// Grid over [-2, 2]^d: a full lattice while it stays small, otherwise a star
// of axis points around the origin.
std::vector<std::vector<double>> seed_grid(std::size_t d) {
  std::vector<std::vector<double>> seeds;
  if (d <= 6) {
    std::size_t k = 41;
    while (k > 3 && std::pow(static_cast<double>(k), static_cast<double>(d)) > 4096.0) k -= 2;
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= k;
    seeds.reserve(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::vector<double> p(d);
      std::size_t rest = idx;
      for (std::size_t i = 0; i < d; ++i) {
        p[i] = -2.0 + 4.0 * static_cast<double>(rest % k) / static_cast<double>(k - 1);
        rest /= k;
      }
      seeds.push_back(std::move(p));
    }
    return seeds;
  }
  seeds.emplace_back(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (double s : {-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0}) {
      std::vector<double> p(d, 0.0);
      p[i] = s;
      seeds.push_back(std::move(p));
    }
  return seeds;
}

WeightVector linear_optimum(const MultiSample& ms, const ModelSpec& model, DeletionScheme scheme) {
  const std::size_t d = ms.m() - 1;
  auto eval = [&](const std::vector<double>& free) {
    return loo_discrepancy(ms, full_weights(free), model, scheme);
  };
  const std::vector<double> origin(d, 0.0);
  const double f0 = eval(origin);
  std::vector<double> fp(d), fm(d), grad(d);
  Matrix hess(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<double> e(d, 0.0);
    e[i] = 1.0;
    fp[i] = eval(e);
    e[i] = -1.0;
    fm[i] = eval(e);
    grad[i] = 0.5 * (fp[i] - fm[i]);
    hess(i, i) = fp[i] + fm[i] - 2.0 * f0;
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = i + 1; k < d; ++k) {
      std::vector<double> e(d, 0.0);
      e[i] = e[k] = 1.0;
      hess(i, k) = hess(k, i) = eval(e) - fp[i] - fp[k] + f0;
    }

  std::vector<double> rhs(d);
  for (std::size_t i = 0; i < d; ++i) rhs[i] = -grad[i];
  WeightVector out;
  out.scheme = weight_scheme_for(scheme);
  std::vector<double> z;
  try {
    z = solve_linear(hess, rhs);
  } catch (const Error& e) {
    if (e.code() != errc::kSingularMatrix) throw;
    z = pseudo_inverse(hess, 1e-10) * rhs;
    out.unique = false;
  }
  out.lambda = full_weights(z);
  return out;
}

WeightVector nonlinear_optimum(const MultiSample& ms, const ModelSpec& model,
                               DeletionScheme scheme) {
  const std::size_t d = ms.m() - 1;
  auto objective = [&](std::span<const double> free) {
    const double v = loo_discrepancy(ms, full_weights(free), model, scheme);
    return std::isfinite(v) ? v : kInf;
  };

  const auto seeds = seed_grid(d);
  std::vector<double> values(seeds.size());
  const auto count = static_cast<std::ptrdiff_t>(seeds.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < count; ++s) values[s] = objective(seeds[s]);

  std::size_t best = 0;
  double lo = kInf, hi = -kInf;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (values[s] < values[best]) best = s;
    if (std::isfinite(values[s])) {
      lo = std::min(lo, values[s]);
      hi = std::max(hi, values[s]);
    }
  }
  if (!std::isfinite(values[best]))
    throw_numerical(errc::kOptimizationFailed, "objective non-finite at every grid seed");

  WeightVector out;
  out.scheme = weight_scheme_for(scheme);
  if (hi - lo <= 1e-14 * (1.0 + std::abs(lo))) {
    out.lambda = full_weights(std::vector<double>(d, 0.0));
    out.unique = false;
    return out;
  }

  const NelderMeadResult nm = nelder_mead(objective, seeds[best], 0.05, 1e-10, 1e-10,
                                          20000 * static_cast<int>(d));
  out.lambda = full_weights(nm.f <= values[best] ? nm.x : seeds[best]);
  return out;
}

}  // namespace

double loo_discrepancy(const MultiSample& ms, std::span<const double> lambda,
                       const ModelSpec& model, DeletionScheme scheme) {
  const std::vector<double> pred = loo_estimates(ms, lambda, model, scheme);
  const PopulationSample& x1 = ms.target();
  double s = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double r = x1[j] - pred[j];
    s += r * r;
  }
  return s / static_cast<double>(pred.size());
}

WeightVector optimize_weights(const MultiSample& ms, const ModelSpec& model, DeletionScheme scheme) {
  check_domain(ms, model);
  if (ms.target().size() < 2) throw_data(errc::kInsufficientData, "leave-one-out needs n1 >= 2");
  if (ms.m() == 1) return WeightVector{{1.0}, weight_scheme_for(scheme), 0.0, true, false};
  return model.linear() ? linear_optimum(ms, model, scheme) : nonlinear_optimum(ms, model, scheme);
}

ScalarMin golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                                  double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::vector<double> start, double step, double xtol, double ftol,
                             int max_iter) {
  const std::size_t d = start.size();
  std::vector<std::vector<double>> pts(d + 1, start);
  for (std::size_t i = 0; i < d; ++i) pts[i + 1][i] += step;
  std::vector<double> vals(d + 1);
  for (std::size_t i = 0; i <= d; ++i) vals[i] = f(pts[i]);

  std::vector<std::size_t> order(d + 1);
  int iter = 0;
  auto point_at = [&](const std::vector<double>& centroid, const std::vector<double>& worst,
                      double t) {
    std::vector<double> p(d);
    for (std::size_t k = 0; k < d; ++k) p[k] = centroid[k] + t * (worst[k] - centroid[k]);
    return p;
  };

  for (; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return vals[i] < vals[j]; });
    std::vector<std::vector<double>> sp(d + 1);
    std::vector<double> sv(d + 1);
    for (std::size_t i = 0; i <= d; ++i) {
      sp[i] = pts[order[i]];
      sv[i] = vals[order[i]];
    }
    pts.swap(sp);
    vals.swap(sv);

    double diam = 0.0;
    for (std::size_t i = 1; i <= d; ++i)
      for (std::size_t k = 0; k < d; ++k) diam = std::max(diam, std::abs(pts[i][k] - pts[0][k]));
    if (diam <= xtol && vals[d] - vals[0] <= ftol * (1.0 + std::abs(vals[0]))) break;

    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < d; ++k) centroid[k] += pts[i][k] / static_cast<double>(d);

    const auto refl = point_at(centroid, pts[d], -1.0);
    const double fr = f(refl);
    if (fr < vals[0]) {
      const auto exp = point_at(centroid, pts[d], -2.0);
      const double fe = f(exp);
      if (fe < fr) {
        pts[d] = exp;
        vals[d] = fe;
      } else {
        pts[d] = refl;
        vals[d] = fr;
      }
      continue;
    }
    if (fr < vals[d - 1]) {
      pts[d] = refl;
      vals[d] = fr;
      continue;
    }
    const bool outside = fr < vals[d];
    const auto con = point_at(centroid, pts[d], outside ? -0.5 : 0.5);
    const double fc = f(con);
    if (fc < (outside ? fr : vals[d])) {
      pts[d] = con;
      vals[d] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= d; ++i) {
      for (std::size_t k = 0; k < d; ++k) pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
      vals[i] = f(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {pts[best], vals[best], iter};
}

WeightVector lognormal_weight(const PopulationSample& x1, const PopulationSample& x2) {
  const ModelSpec model{Family::kLognormal};
  const MultiSample ms({x1, x2}, true);
  if (x1.size() != x2.size())
    throw_data(errc::kInvalidArgument, "lognormal weights need equal sample sizes");
  const auto means = loo_means(ms, model, DeletionScheme::kDeleteOneColumn);
  const std::size_t n = x1.size();
  std::vector<double> slope(n);
  double slope_max = 0.0, base_max = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    slope[j] = means[1][j] - means[0][j];
    slope_max = std::max(slope_max, std::abs(slope[j]));
    base_max = std::max(base_max, std::abs(means[0][j]));
  }
  WeightVector out{{1.0, 0.0}, WeightScheme::kEqualColumn, 0.0, true, false};
  if (slope_max <= 1e-14 * (1.0 + base_max)) {
    out.unique = false;
    return out;
  }

  auto objective = [&](double l2) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double r = x1[j] - std::exp(means[0][j] + l2 * slope[j] + 0.5);
      s += r * r;
    }
    return s / static_cast<double>(n);
  };
  double lo = -1.0, hi = 1.0;
  ScalarMin best = golden_section_minimize(objective, lo, hi, 1e-10);
  while (hi < 8.0 && (best.x - lo < 1e-8 || hi - best.x < 1e-8)) {
    lo *= 2.0;
    hi *= 2.0;
    best = golden_section_minimize(objective, lo, hi, 1e-10);
  }
  // Still on the widest bracket's edge: the minimizer lies further out.
  out.condition_flag = best.x - lo < 1e-8 || hi - best.x < 1e-8;
  out.lambda = {1.0 - best.x, best.x};
  return out;
}

}  // namespace wlecv
