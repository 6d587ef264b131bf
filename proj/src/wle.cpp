#include "wlecv/wle.hpp"

#include <cmath>
#include <string>

#include "wlecv/error.hpp"

namespace wlecv {

namespace {

void check_values(const PopulationSample& x, const ModelSpec& model) {
  for (double v : x.values()) {
    if (model.family == Family::kPoissonRate && v < 0.0)
      throw_data(errc::kDomainError, "negative count in population '" + x.id() + "'");
    if (model.family == Family::kLognormal && !(v > 0.0))
      throw_data(errc::kDomainError, "non-positive lognormal observation in '" + x.id() + "'");
  }
}

double natural(double v, const ModelSpec& model) {
  return model.family == Family::kLognormal ? std::log(v) : v;
}

double natural_mean(const PopulationSample& x, const ModelSpec& model) {
  double s = 0.0;
  for (double v : x.values()) s += natural(v, model);
  return s / static_cast<double>(x.size());
}

}  // namespace

void check_domain(const MultiSample& ms, const ModelSpec& model) {
  for (const auto& p : ms.populations()) check_values(p, model);
}

Estimate mle_mean(const PopulationSample& x, const ModelSpec& model) {
  check_values(x, model);
  const double theta = natural_mean(x, model);
  return Estimate{theta, model.phi(theta), false};
}

Estimate wle(const MultiSample& ms, std::span<const double> lambda, const ModelSpec& model,
             bool truncate_at_zero) {
  if (lambda.size() != ms.m())
    throw_data(errc::kInvalidArgument, "weight vector length does not match population count");
  check_domain(ms, model);
  double theta = 0.0;
  for (std::size_t i = 0; i < ms.m(); ++i) theta += lambda[i] * natural_mean(ms[i], model);
  Estimate e{theta, 0.0, false};
  if (model.family == Family::kPoissonRate && theta < 0.0) {
    e.negative_rate = true;
    if (truncate_at_zero) e.theta = 0.0;
  }
  e.phi = model.phi(e.theta);
  return e;
}

std::vector<std::vector<double>> loo_means(const MultiSample& ms, const ModelSpec& model,
                                           DeletionScheme scheme) {
  check_domain(ms, model);
  const std::size_t n1 = ms.target().size();
  if (n1 < 2) throw_data(errc::kInsufficientData, "leave-one-out needs n1 >= 2");
  if (scheme == DeletionScheme::kDeleteOneColumn && !ms.aligned())
    throw_data(errc::kInvalidArgument, "delete-one-column needs an aligned sample");

  std::vector<std::vector<double>> out(ms.m(), std::vector<double>(n1));
  for (std::size_t i = 0; i < ms.m(); ++i) {
    const PopulationSample& p = ms[i];
    double total = 0.0;
    for (double v : p.values()) total += natural(v, model);
    const bool drop = i == 0 || scheme == DeletionScheme::kDeleteOneColumn;
    const double len = static_cast<double>(p.size());
    for (std::size_t j = 0; j < n1; ++j)
      out[i][j] = drop ? (total - natural(p[j], model)) / (len - 1.0) : total / len;
  }
  return out;
}

std::vector<double> loo_estimates(const MultiSample& ms, std::span<const double> lambda,
                                  const ModelSpec& model, DeletionScheme scheme) {
  if (lambda.size() != ms.m())
    throw_data(errc::kInvalidArgument, "weight vector length does not match population count");
  const auto means = loo_means(ms, model, scheme);
  const std::size_t n1 = ms.target().size();
  std::vector<double> out(n1, 0.0);
  for (std::size_t j = 0; j < n1; ++j) {
    double theta = 0.0;
    for (std::size_t i = 0; i < ms.m(); ++i) theta += lambda[i] * means[i][j];
    out[j] = model.phi(theta);
  }
  return out;
}

}  // namespace wlecv
