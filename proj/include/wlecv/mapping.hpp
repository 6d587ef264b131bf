#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "wlecv/core.hpp"
#include "wlecv/linalg.hpp"

namespace wlecv {

struct Region {
  std::string id;
  double longitude = 0.0;
  double latitude = 0.0;
};

/// Weekly counts per (region, year, week), weeks numbered 1..weeks_per_year.
/// Immutable once built.
class MappingDataset {
 public:
  using Key = std::tuple<std::string, int, int>;

  MappingDataset(std::vector<Region> regions, std::map<Key, std::int64_t> counts,
                 int weeks_per_year);

  const std::vector<Region>& regions() const noexcept { return regions_; }
  const std::map<Key, std::int64_t>& counts() const noexcept { return counts_; }
  int weeks_per_year() const noexcept { return weeks_per_year_; }

  /// Throws "invalid-argument" for an unknown id.
  const Region& region(const std::string& id) const;
  /// Years with at least one count for `region`, ascending.
  std::vector<int> years(const std::string& region) const;
  /// Counts for weeks 1..weeks_per_year; throws "insufficient-data" when a
  /// week is missing.
  std::vector<double> weekly(const std::string& region, int year) const;

 private:
  std::vector<Region> regions_;
  std::map<Key, std::int64_t> counts_;
  int weeks_per_year_;
};

struct DailyCount {
  std::string region;
  int year = 0;
  int day = 0;  ///< 1-based day of the season
  std::int64_t count = 0;
};

/// Week w collects days 7(w-1)+1 .. 7w; days past 7 * weeks_per_year are dropped.
MappingDataset weekly_aggregate(std::vector<Region> regions, std::span<const DailyCount> daily,
                                int weeks_per_year = 17);

/// Reads `region_id,longitude,latitude,year,week,count` or the same with
/// `day` in place of `week` (aggregated to weeks). Weekly files take
/// weeks_per_year from the largest week unless it is given. Throws
/// "ingest-error" on parse failures, negative counts, duplicate keys or
/// inconsistent coordinates.
MappingDataset ingest_counts(const std::filesystem::path& path,
                             std::optional<int> weeks_per_year = std::nullopt);

/// Target first, then regions at Euclidean distance (degrees) in
/// (0, threshold], nearest first, ties by id.
std::vector<std::string> select_neighbors(const MappingDataset& ds, const std::string& target,
                                          double threshold);

struct KMeans1D {
  std::vector<int> label;  ///< 0 or 1 per value
  double centroid[2] = {0.0, 0.0};
  std::size_t size[2] = {0, 0};
};

/// Two-cluster Lloyd iterations started at min and max, to a fixed point.
KMeans1D kmeans_two(std::span<const double> values);

/// Weeks (1-based) in the smaller k-means cluster when that cluster has at
/// most ceil(weeks/4) members and the higher centroid.
std::set<int> flag_outlier_weeks(std::span<const double> weekly_counts);
std::set<int> flag_outlier_weeks(const MappingDataset& ds, const std::string& region, int year);

/// Aligned sample: populations = regions, columns = retained weeks.
MultiSample year_sample(const MappingDataset& ds, std::span<const std::string> regions, int year,
                        const std::set<int>& excluded_weeks);

/// Equal-size column-scheme weights over the retained weeks.
WeightVector yearly_weights(const MappingDataset& ds, std::span<const std::string> regions,
                            int year, const std::set<int>& excluded_weeks,
                            std::optional<double> delta = std::nullopt);

/// mse_mle = var/W and mse_wle = lambda' C lambda / W + (lambda'Ybar - Ybar_1)^2,
/// with C the 1/W-divisor covariance of weekly counts.
std::pair<double, double> mse_estimates(const MappingDataset& ds,
                                        std::span<const std::string> regions, int year,
                                        std::span<const double> lambda,
                                        const std::set<int>& excluded_weeks);

struct Interval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

/// Plug-in Poisson(theta_hat) equal-tail interval for one future count.
Interval predictive_interval(double theta_hat, double level);

struct YearAnalysis {
  int year = 0;
  std::vector<std::string> region_ids;
  std::set<int> excluded_weeks;
  WeightVector lambda;
  double wle = 0.0;
  double mle = 0.0;
  double mse_mle = 0.0;
  double mse_wle = 0.0;
  Matrix correlation;
  Interval interval_mle;
  std::optional<Interval> interval_wle;  ///< unset for a negative untruncated WLE
  bool negative_wle = false;
};

/// Root mean squared one-year-ahead errors over consecutive years:
/// (MLE_q vs MLE_{q+1}, WLE_q vs MLE_{q+1}). Needs at least two years.
std::pair<double, double> prediction_errors(std::span<const YearAnalysis> years);

struct MapOptions {
  std::string target;
  double threshold = 0.2;
  std::optional<double> delta;
  bool auto_exclude = true;
  std::map<int, std::set<int>> manual_exclusions;  ///< year -> weeks
  double level = 0.95;
  bool truncate = false;
  std::optional<std::vector<double>> fixed_lambda;  ///< bypasses weight selection
  int workers = 0;
};

struct MappingReport {
  MapOptions options;
  std::string source;  ///< free-form description of the input, echoed in outputs
  std::vector<std::string> regions;
  std::vector<YearAnalysis> years;
  std::optional<double> pred_mle;  ///< unset with fewer than two years
  std::optional<double> pred_wle;
};

/// Full pipeline for one target; years run concurrently on `workers` threads.
MappingReport analyze(const MappingDataset& ds, const MapOptions& opts);

std::string mapping_json(const MappingReport& r);
std::string mapping_mse_csv(const MappingReport& r);
std::string mapping_intervals_csv(const MappingReport& r);
std::string mapping_weights_csv(const MappingReport& r);

struct SyntheticConfig {
  std::uint64_t seed = 42;
  int regions = 4;
  int years = 6;
  int weeks = 16;
  double target_rate = 1.0;
  double neighbor_lo = 0.8;
  double neighbor_hi = 1.2;
  double shock_sd = 0.5;  ///< log-scale SD of the weekly shock shared by all regions
  bool inject_outlier = false;
  int outlier_year = 0;  ///< offset into the generated years
  int outlier_week = 8;
  double outlier_scale = 20.0;
  int first_year = 1984;
};

/// Seeded Poisson counts with shared multiplicative weekly shocks. Region
/// "R1" is the target; the others sit within 0.15 degrees of it.
MappingDataset synthetic_dataset(const SyntheticConfig& cfg);

/// Weekly CSV rendering of a dataset.
std::string dataset_csv(const MappingDataset& ds);

}  // namespace wlecv
