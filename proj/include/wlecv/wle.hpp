#pragma once

#include <span>
#include <vector>

#include "wlecv/core.hpp"

namespace wlecv {

/// theta is the natural parameter (the mean for normal/Poisson, the log-mean
/// for the lognormal); phi = E[X] under theta.
struct Estimate {
  double theta = 0.0;
  double phi = 0.0;
  bool negative_rate = false;  ///< Poisson WLE below zero (negative weights)
};

/// Sample average (of logs for the lognormal). Throws "domain-error" for
/// negative Poisson counts or non-positive lognormal observations.
Estimate mle_mean(const PopulationSample& x, const ModelSpec& model);

/// theta = sum_i lambda_i * mle_i. A negative Poisson rate is flagged, or set
/// to zero when `truncate_at_zero` is requested.
Estimate wle(const MultiSample& ms, std::span<const double> lambda, const ModelSpec& model,
             bool truncate_at_zero = false);

/// Per-population leave-one-out sufficient means, on the model's natural
/// scale (logs for the lognormal): row i, column j is population i's mean
/// with step j's deletion applied. The column scheme drops X_ij from every
/// population; the point scheme drops only X_1j and keeps full means elsewhere.
std::vector<std::vector<double>> loo_means(const MultiSample& ms, const ModelSpec& model,
                                           DeletionScheme scheme);

/// (phi(theta~^(-1)), ..., phi(theta~^(-n1))).
std::vector<double> loo_estimates(const MultiSample& ms, std::span<const double> lambda,
                                  const ModelSpec& model, DeletionScheme scheme);

/// Throws unless every observation lies in the family's support.
void check_domain(const MultiSample& ms, const ModelSpec& model);

}  // namespace wlecv
