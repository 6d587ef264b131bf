#pragma once

#include <functional>
#include <span>
#include <vector>

#include "wlecv/core.hpp"

namespace wlecv {

/// Average LOO discrepancy (1/n1) sum_j (X_1j - phi(theta~_1^(-j)))^2.
double loo_discrepancy(const MultiSample& ms, std::span<const double> lambda,
                       const ModelSpec& model, DeletionScheme scheme);

/// Weights minimizing loo_discrepancy on the plane sum(lambda) = 1.
///
/// Linear mean maps: the discrepancy is an exact quadratic in the free
/// weights (lambda_2..lambda_m), recovered from unit-step differences and
/// solved directly (pseudo-inverse when singular, unique = false).
/// Lognormal: best point of a grid over [-2, 2]^(m-1), refined by
/// Nelder-Mead; the result never scores worse than any grid point.
WeightVector optimize_weights(const MultiSample& ms, const ModelSpec& model, DeletionScheme scheme);

/// Two aligned lognormal samples: golden-section search for lambda_2 on
/// [-1, 1], doubling the bracket up to [-8, 8] while the minimum sits on a
/// boundary. Tolerance 1e-10 in lambda_2. condition_flag is set when the
/// result still sits on the edge of [-8, 8].
WeightVector lognormal_weight(const PopulationSample& x1, const PopulationSample& x2);

struct ScalarMin {
  double x = 0.0;
  double f = 0.0;
};

/// Golden-section search for a unimodal f on [lo, hi].
ScalarMin golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                                  double tol);

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
};

/// Deterministic Nelder-Mead from `start` with initial edge `step`. Stops when
/// the simplex diameter drops below `xtol` and the value spread below
/// `ftol` * (1 + |f_best|), or after `max_iter` iterations.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::vector<double> start, double step, double xtol, double ftol,
                             int max_iter);

}  // namespace wlecv
