#pragma once

// Test-only generators and oracles. The oracles recompute leave-one-out
// quantities from scratch and minimize with Eigen, so they share no code
// with the library paths they check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wlecv/core.hpp"

namespace support {

using Data = std::vector<std::vector<double>>;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double a, double b) {
    return a + (b - a) * (static_cast<double>(eng_() >> 11) * 0x1.0p-53);
  }
  int integer(int lo, int hi) {
    return lo + static_cast<int>(eng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double normal() {
    const double u1 = uniform(0.0, 1.0) + 0x1.0p-60;
    const double u2 = uniform(0.0, 1.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  std::vector<double> normals(std::size_t n, double mean, double sd) {
    std::vector<double> v(n);
    for (auto& x : v) x = mean + sd * normal();
    return v;
  }
  bool coin() { return (eng_() & 1u) != 0; }

 private:
  std::mt19937_64 eng_;
};

inline wlecv::MultiSample to_sample(const Data& d, bool aligned) {
  std::vector<wlecv::PopulationSample> pops;
  for (std::size_t i = 0; i < d.size(); ++i) pops.emplace_back(d[i], "p" + std::to_string(i + 1));
  return wlecv::MultiSample(std::move(pops), aligned);
}

inline double plain_mean(const std::vector<double>& v, std::size_t skip = SIZE_MAX) {
  double s = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (j != skip) {
      s += v[j];
      ++k;
    }
  return s / static_cast<double>(k);
}

/// Leave-one-out means recomputed by summing the retained values directly.
/// `column`: drop X_ij from every population; otherwise only X_1j.
inline Data direct_loo_means(const Data& d, bool column) {
  const std::size_t n1 = d[0].size();
  Data out(d.size(), std::vector<double>(n1));
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < n1; ++j)
      out[i][j] = (i == 0 || column) ? plain_mean(d[i], j) : plain_mean(d[i]);
  return out;
}

/// (1/n1) sum_j (X_1j - sum_i lambda_i Xbar_i^(-j))^2 for a linear mean map.
inline double direct_discrepancy(const Data& d, const std::vector<double>& lambda, bool column) {
  const Data loo = direct_loo_means(d, column);
  double s = 0.0;
  for (std::size_t j = 0; j < d[0].size(); ++j) {
    double pred = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) pred += lambda[i] * loo[i][j];
    s += (d[0][j] - pred) * (d[0][j] - pred);
  }
  return s / static_cast<double>(d[0].size());
}

/// Minimizer of direct_discrepancy on sum(lambda) = 1, as the least-squares
/// problem in the free weights (minimum norm in those weights when
/// rank-deficient).
inline std::vector<double> least_squares_weights(const Data& d, bool column) {
  const Data loo = direct_loo_means(d, column);
  const auto n1 = static_cast<Eigen::Index>(d[0].size());
  const auto k = static_cast<Eigen::Index>(d.size() - 1);
  Eigen::MatrixXd b(n1, k);
  Eigen::VectorXd y(n1);
  for (Eigen::Index j = 0; j < n1; ++j) {
    y(j) = d[0][j] - loo[0][j];
    for (Eigen::Index i = 0; i < k; ++i) b(j, i) = loo[i + 1][j] - loo[0][j];
  }
  const Eigen::VectorXd z = b.completeOrthogonalDecomposition().solve(y);
  std::vector<double> lambda(d.size());
  lambda[0] = 1.0 - z.sum();
  for (Eigen::Index i = 0; i < k; ++i) lambda[i + 1] = z(i);
  return lambda;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Writes `text` under the system temp directory and returns the path.
inline std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  const auto dir = std::filesystem::temp_directory_path() / "wlecv_tests";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

}  // namespace support
