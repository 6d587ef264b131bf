#pragma once

#include <optional>
#include <vector>

#include "wlecv/core.hpp"
#include "wlecv/linalg.hpp"

namespace wlecv {

/// Quantities behind the delete-one-column weights.
///
/// s1, s2 compare the first two populations: s1 is the mean squared gap
/// between their LOO means, s2 the mean cross term with the target's own LOO
/// residual, so lambda_2 = s2 / s1. a_e and b_e are the quadratic and linear
/// terms of the unnormalized discrepancy sum_j (X_1j - sum_i lambda_i Xbar_i^(-j))^2:
///
///   a_e = e_n/(n-1) * Sigma + (e_n^2 (n-2) + e_n/(n-1)) * theta theta'
///   b_e = a_e.col(0) - e_n^2 * Sigma.col(0)
///
/// with Sigma the 1/n covariance, theta the means and e_n = n/(n-1).
struct EqualSchemeIntermediates {
  double s1 = 0.0;
  double s2 = 0.0;
  Matrix a_e;
  std::vector<double> b_e;
  double e_n = 0.0;
};

/// Requires an aligned sample with n >= 2. s1/s2 are zero when m == 1.
EqualSchemeIntermediates equal_scheme_intermediates(const MultiSample& ms);

/// Default correction constant: 1e-8 * max(1, mean(X_1j^2)).
double default_delta(const PopulationSample& target);

/// Two populations of equal size: lambda_2 = s2 / (s1 + delta).
/// Without `delta` the default correction is used.
WeightVector weights_equal_two(const PopulationSample& x1, const PopulationSample& x2,
                               std::optional<double> delta = std::nullopt);

/// m aligned populations via the constrained quadratic in (a_e, b_e). The
/// correction adds n * delta to the diagonal entries of the non-target
/// weights, which at m = 2 reproduces weights_equal_two exactly.
WeightVector weights_equal_matrix(const MultiSample& ms,
                                  std::optional<double> delta = std::nullopt);

/// Same weights through the projection form
///   lambda = e_1 - e_n^2 (A^{-1} Sigma_1 - (1'A^{-1}Sigma_1 / 1'A^{-1}1) A^{-1} 1).
/// Requires an invertible (corrected) a_e; used to cross-check the Lagrange path.
std::vector<double> weights_equal_projection(const MultiSample& ms,
                                             std::optional<double> delta = std::nullopt);

/// Delete-one-point weights for two populations (n1 >= 2, n2 >= 1):
///   lambda_1 = [n1 d^2 - n1/(n1-1) s^2] / [n1 d^2 + n1/(n1-1)^2 s^2]
/// where d = Xbar_1 - Xbar_2 and s^2 is the 1/n1 variance of the target.
WeightVector weights_unequal_two(const PopulationSample& x1, const PopulationSample& x2);

/// Delete-one-point weights for m populations of any sizes. The quadratic
/// A = n1 theta theta' + diag(n1/(n1-1)^2 s^2, 0, ..., 0) has rank <= 2, so
/// for m > 2 the minimum-norm minimizer is returned with unique = false.
/// `delta` defaults to zero here (it only ever shrinks non-target weights).
WeightVector weights_unequal_matrix(const MultiSample& ms, double delta = 0.0);

/// Unnormalized delete-one-point quadratic (A, b) for `ms`.
std::pair<Matrix, std::vector<double>> unequal_scheme_quadratic(const MultiSample& ms);

}  // namespace wlecv
