#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wlecv/linalg.hpp"

namespace wlecv {

/// Observations from one population, in insertion order. Position j is the
/// column index used by the delete-one-column scheme.
class PopulationSample {
 public:
  PopulationSample(std::vector<double> values, std::string id = {});

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  const std::string& id() const noexcept { return id_; }
  double operator[](std::size_t j) const noexcept { return values_[j]; }

 private:
  std::vector<double> values_;
  std::string id_;
};

/// m populations; the first one is the population of inferential interest.
/// `aligned` asserts equal sizes with column j observed jointly.
class MultiSample {
 public:
  MultiSample(std::vector<PopulationSample> populations, bool aligned);

  /// Aligned sample when all sizes agree, unaligned otherwise.
  static MultiSample auto_aligned(std::vector<PopulationSample> populations);

  std::size_t m() const noexcept { return populations_.size(); }
  bool aligned() const noexcept { return aligned_; }
  const PopulationSample& operator[](std::size_t i) const noexcept { return populations_[i]; }
  const PopulationSample& target() const noexcept { return populations_.front(); }
  const std::vector<PopulationSample>& populations() const noexcept { return populations_; }
  bool equal_sizes() const noexcept;

 private:
  std::vector<PopulationSample> populations_;
  bool aligned_;
};

/// Means and the 1/n-divisor covariance.
class SampleStats {
 public:
  SampleStats(std::vector<double> means, std::vector<std::size_t> n, std::optional<Matrix> cov)
      : means_(std::move(means)), n_(std::move(n)), cov_(std::move(cov)) {}

  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<std::size_t>& n() const noexcept { return n_; }
  bool has_cov() const noexcept { return cov_.has_value(); }
  /// Throws "covariance-undefined" for unaligned samples.
  const Matrix& cov() const;

 private:
  std::vector<double> means_;
  std::vector<std::size_t> n_;
  std::optional<Matrix> cov_;
};

/// Means of every population; covariance (divisor n, not n-1) only when aligned.
SampleStats summarize(const MultiSample& ms);

enum class WeightScheme { kEqualColumn, kUnequalPoint };

/// Which observations a leave-one-out step removes.
enum class DeletionScheme {
  kDeleteOneColumn,  ///< X_1j, ..., X_mj together (aligned samples)
  kDeleteOnePoint,   ///< only X_1j
};

struct WeightVector {
  std::vector<double> lambda;
  WeightScheme scheme = WeightScheme::kEqualColumn;
  double delta_used = 0.0;
  bool unique = true;
  bool condition_flag = false;

  double sum() const noexcept;
};

/// Clips every weight into [0, 1] and renormalizes to sum one. Falls back to
/// (1, 0, ..., 0) when every weight clips to zero.
WeightVector clip_weights(WeightVector w);

enum class Family { kNormalMean, kPoissonRate, kLognormal };

/// Distribution family. `sigma` is the fixed standard deviation used when
/// sampling the normal family; the lognormal log-scale SD is fixed at 1.
struct ModelSpec {
  Family family = Family::kNormalMean;
  double sigma = 1.0;

  bool linear() const noexcept { return family != Family::kLognormal; }
  /// Mean map: identity, or exp(mu + 1/2) for the lognormal.
  double phi(double theta) const noexcept;
};

const char* to_string(Family f) noexcept;
const char* to_string(WeightScheme s) noexcept;
const char* to_string(DeletionScheme s) noexcept;
std::optional<Family> parse_family(std::string_view s) noexcept;
std::optional<DeletionScheme> parse_scheme(std::string_view s) noexcept;
WeightScheme weight_scheme_for(DeletionScheme s) noexcept;

/// Reads `population_id,column_index,value` rows (optional header).
/// Populations keep first-appearance order; values are ordered by column
/// index. With `require_aligned`, every population must hold columns
/// 0..n-1 for one common n.
MultiSample read_samples_csv(const std::filesystem::path& path, bool require_aligned);

}  // namespace wlecv
