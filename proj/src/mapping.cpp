#include "wlecv/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include <omp.h>

#include "csv_util.hpp"
#include "wlecv/cv_closed.hpp"
#include "wlecv/error.hpp"
#include "wlecv/sim.hpp"
#include "wlecv/wle.hpp"

namespace wlecv {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<int> retained_weeks(int weeks_per_year, const std::set<int>& excluded) {
  std::vector<int> out;
  for (int w = 1; w <= weeks_per_year; ++w)
    if (!excluded.count(w)) out.push_back(w);
  return out;
}

std::string csv_comment(const MappingReport& r) {
  std::ostringstream os;
  os << "# target=" << r.options.target << " threshold=" << format_number(r.options.threshold)
     << " delta=" << (r.options.delta ? format_number(*r.options.delta) : "1e-8*max(1,mean(x1^2))")
     << " auto_exclude=" << (r.options.auto_exclude ? "true" : "false")
     << " level=" << format_number(r.options.level)
     << " truncate=" << (r.options.truncate ? "true" : "false")
     << " covariance_divisor=W source=" << r.source << '\n';
  return os.str();
}

}  // namespace

MappingDataset::MappingDataset(std::vector<Region> regions, std::map<Key, std::int64_t> counts,
                               int weeks_per_year)
    : regions_(std::move(regions)), counts_(std::move(counts)), weeks_per_year_(weeks_per_year) {
  if (weeks_per_year_ < 1) throw_data(errc::kInvalidArgument, "weeks_per_year must be >= 1");
  std::set<std::string> ids;
  for (const auto& r : regions_)
    if (!ids.insert(r.id).second) throw_data(errc::kIngestError, "duplicate region '" + r.id + "'");
  for (const auto& [key, count] : counts_) {
    const auto& [region, year, week] = key;
    if (!ids.count(region)) throw_data(errc::kIngestError, "count for unknown region '" + region + "'");
    if (week < 1 || week > weeks_per_year_)
      throw_data(errc::kIngestError, "week " + std::to_string(week) + " outside 1.." +
                                         std::to_string(weeks_per_year_));
    if (count < 0) throw_data(errc::kIngestError, "negative count for '" + region + "'");
  }
}

const Region& MappingDataset::region(const std::string& id) const {
  for (const auto& r : regions_)
    if (r.id == id) return r;
  throw_data(errc::kInvalidArgument, "unknown region '" + id + "'");
}

std::vector<int> MappingDataset::years(const std::string& region) const {
  std::set<int> ys;
  for (const auto& [key, count] : counts_)
    if (std::get<0>(key) == region) ys.insert(std::get<1>(key));
  return {ys.begin(), ys.end()};
}

std::vector<double> MappingDataset::weekly(const std::string& region, int year) const {
  std::vector<double> out(static_cast<std::size_t>(weeks_per_year_));
  for (int w = 1; w <= weeks_per_year_; ++w) {
    const auto it = counts_.find({region, year, w});
    if (it == counts_.end())
      throw_data(errc::kInsufficientData, "no count for '" + region + "' year " +
                                              std::to_string(year) + " week " + std::to_string(w));
    out[static_cast<std::size_t>(w - 1)] = static_cast<double>(it->second);
  }
  return out;
}

MappingDataset weekly_aggregate(std::vector<Region> regions, std::span<const DailyCount> daily,
                                int weeks_per_year) {
  std::map<MappingDataset::Key, std::int64_t> counts;
  for (const auto& d : daily) {
    if (d.day < 1) throw_data(errc::kIngestError, "day index must be >= 1");
    if (d.count < 0) throw_data(errc::kIngestError, "negative count for '" + d.region + "'");
    for (int w = 1; w <= weeks_per_year; ++w) counts.try_emplace({d.region, d.year, w}, 0);
    if (d.day > 7 * weeks_per_year) continue;
    counts[{d.region, d.year, (d.day - 1) / 7 + 1}] += d.count;
  }
  return MappingDataset(std::move(regions), std::move(counts), weeks_per_year);
}

MappingDataset ingest_counts(const std::filesystem::path& path, std::optional<int> weeks_per_year) {
  std::ifstream in(path);
  if (!in) throw_data(errc::kIngestError, "cannot open '" + path.string() + "'");
  std::vector<Region> regions;
  std::map<std::string, std::size_t> region_index;
  std::map<MappingDataset::Key, std::int64_t> weekly;
  std::vector<DailyCount> daily;
  std::set<MappingDataset::Key> seen;
  bool is_daily = false;
  bool first = true;
  int max_week = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 6) throw_data(errc::kIngestError, where + ": expected 6 fields");
    if (first) {
      first = false;
      if (f[4] == "day" || f[4] == "week") {
        is_daily = f[4] == "day";
        continue;
      }
    }
    double lon = 0.0, lat = 0.0;
    int year = 0, slot = 0;
    std::int64_t count = 0;
    if (!detail::parse_number(f[1], lon) || !detail::parse_number(f[2], lat) ||
        !std::isfinite(lon) || !std::isfinite(lat))
      throw_data(errc::kIngestError, where + ": bad coordinates");
    if (!detail::parse_number(f[3], year)) throw_data(errc::kIngestError, where + ": bad year");
    if (!detail::parse_number(f[4], slot) || slot < 1)
      throw_data(errc::kIngestError, where + ": bad " + (is_daily ? "day" : "week") + " index");
    if (!detail::parse_number(f[5], count)) throw_data(errc::kIngestError, where + ": bad count");
    if (count < 0) throw_data(errc::kIngestError, where + ": negative count");
    if (f[0].empty()) throw_data(errc::kIngestError, where + ": empty region id");

    const auto [it, fresh] = region_index.try_emplace(f[0], regions.size());
    if (fresh)
      regions.push_back({f[0], lon, lat});
    else if (regions[it->second].longitude != lon || regions[it->second].latitude != lat)
      throw_data(errc::kIngestError, where + ": coordinates differ from earlier rows of '" + f[0] + "'");
    if (!seen.insert({f[0], year, slot}).second)
      throw_data(errc::kIngestError, where + ": duplicate (region, year, " +
                                         (is_daily ? "day" : "week") + ") key");
    if (is_daily) {
      daily.push_back({f[0], year, slot, count});
    } else {
      weekly[{f[0], year, slot}] = count;
      max_week = std::max(max_week, slot);
    }
  }
  if (regions.empty()) throw_data(errc::kIngestError, "'" + path.string() + "' holds no counts");
  if (is_daily) return weekly_aggregate(std::move(regions), daily, weeks_per_year.value_or(17));
  const int wpy = weeks_per_year.value_or(max_week);
  if (max_week > wpy)
    throw_data(errc::kIngestError, "week " + std::to_string(max_week) + " exceeds weeks_per_year");
  return MappingDataset(std::move(regions), std::move(weekly), wpy);
}

std::vector<std::string> select_neighbors(const MappingDataset& ds, const std::string& target,
                                          double threshold) {
  if (!(threshold >= 0.0)) throw_data(errc::kInvalidArgument, "threshold must be nonnegative");
  const Region& t = ds.region(target);
  std::vector<std::pair<double, std::string>> near;
  for (const auto& r : ds.regions()) {
    if (r.id == target) continue;
    const double d = std::hypot(r.longitude - t.longitude, r.latitude - t.latitude);
    if (d > 0.0 && d <= threshold) near.emplace_back(d, r.id);
  }
  std::sort(near.begin(), near.end());
  std::vector<std::string> out{target};
  for (auto& [d, id] : near) out.push_back(std::move(id));
  return out;
}

KMeans1D kmeans_two(std::span<const double> values) {
  KMeans1D km;
  km.label.assign(values.size(), 0);
  if (values.empty()) return km;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  km.centroid[0] = *lo;
  km.centroid[1] = *hi;
  for (bool changed = true; changed;) {
    changed = false;
    double sum[2] = {0.0, 0.0};
    std::size_t size[2] = {0, 0};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const int c = std::abs(values[i] - km.centroid[1]) < std::abs(values[i] - km.centroid[0]);
      if (c != km.label[i]) changed = true;
      km.label[i] = c;
      sum[c] += values[i];
      ++size[c];
    }
    for (int c = 0; c < 2; ++c) {
      km.size[c] = size[c];
      if (size[c] > 0) km.centroid[c] = sum[c] / static_cast<double>(size[c]);
    }
  }
  return km;
}

std::set<int> flag_outlier_weeks(std::span<const double> weekly_counts) {
  const KMeans1D km = kmeans_two(weekly_counts);
  std::set<int> out;
  if (km.size[0] == 0 || km.size[1] == 0) return out;
  const int small = km.size[1] <= km.size[0] ? 1 : 0;
  const std::size_t limit = (weekly_counts.size() + 3) / 4;
  if (km.size[small] > limit || !(km.centroid[small] > km.centroid[1 - small])) return out;
  for (std::size_t i = 0; i < weekly_counts.size(); ++i)
    if (km.label[i] == small) out.insert(static_cast<int>(i) + 1);
  return out;
}

std::set<int> flag_outlier_weeks(const MappingDataset& ds, const std::string& region, int year) {
  return flag_outlier_weeks(ds.weekly(region, year));
}

MultiSample year_sample(const MappingDataset& ds, std::span<const std::string> regions, int year,
                        const std::set<int>& excluded_weeks) {
  const std::vector<int> keep = retained_weeks(ds.weeks_per_year(), excluded_weeks);
  std::vector<PopulationSample> pops;
  for (const auto& id : regions) {
    const std::vector<double> all = ds.weekly(id, year);
    std::vector<double> v;
    for (int w : keep) v.push_back(all[static_cast<std::size_t>(w - 1)]);
    if (v.empty()) throw_data(errc::kInsufficientData, "every week of the year is excluded");
    pops.emplace_back(std::move(v), id);
  }
  return MultiSample(std::move(pops), true);
}

WeightVector yearly_weights(const MappingDataset& ds, std::span<const std::string> regions,
                            int year, const std::set<int>& excluded_weeks,
                            std::optional<double> delta) {
  if (regions.empty()) throw_data(errc::kInvalidArgument, "empty region list");
  const MultiSample ms = year_sample(ds, regions, year, excluded_weeks);
  if (ms.target().size() < 2)
    throw_data(errc::kInsufficientData, "need at least two retained weeks");
  return weights_equal_matrix(ms, delta);
}

std::pair<double, double> mse_estimates(const MappingDataset& ds,
                                        std::span<const std::string> regions, int year,
                                        std::span<const double> lambda,
                                        const std::set<int>& excluded_weeks) {
  if (lambda.size() != regions.size())
    throw_data(errc::kInvalidArgument, "weight vector length does not match region count");
  const MultiSample ms = year_sample(ds, regions, year, excluded_weeks);
  const double w = static_cast<double>(ms.target().size());
  if (w < 2.0) throw_data(errc::kInsufficientData, "need at least two retained weeks");
  const SampleStats st = summarize(ms);
  const Matrix& c = st.cov();
  double quad = 0.0, combined = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    combined += lambda[i] * st.means()[i];
    for (std::size_t k = 0; k < lambda.size(); ++k) quad += lambda[i] * lambda[k] * c(i, k);
  }
  const double bias = combined - st.means()[0];
  return {c(0, 0) / w, quad / w + bias * bias};
}

Interval predictive_interval(double theta_hat, double level) {
  if (!(theta_hat >= 0.0) || !std::isfinite(theta_hat))
    throw_data(errc::kDomainError, "predictive interval needs a nonnegative finite rate");
  if (!(level > 0.0 && level < 1.0)) throw_data(errc::kInvalidArgument, "level must lie in (0, 1)");
  if (theta_hat == 0.0) return {0, 0};
  const double tail = (1.0 - level) / 2.0;
  const double log_theta = std::log(theta_hat);
  Interval out{-1, -1};
  double cdf = 0.0;
  for (std::int64_t k = 0;; ++k) {
    const double kd = static_cast<double>(k);
    cdf += std::exp(kd * log_theta - theta_hat - std::lgamma(kd + 1.0));
    // lo is the largest L with P(X < L) <= tail, i.e. one past the last k with CDF(k) <= tail.
    if (out.lo < 0 && cdf > tail) out.lo = k;
    if (cdf >= 1.0 - tail) {
      out.hi = k;
      break;
    }
    if (kd > theta_hat + 60.0 * std::sqrt(theta_hat) + 100.0) {
      out.hi = k;  // cumulative rounding never reached 1 - tail
      break;
    }
  }
  if (out.lo < 0) out.lo = out.hi;
  return out;
}

std::pair<double, double> prediction_errors(std::span<const YearAnalysis> years) {
  if (years.size() < 2) throw_data(errc::kInsufficientData, "prediction errors need two years");
  std::vector<const YearAnalysis*> sorted;
  for (const auto& y : years) sorted.push_back(&y);
  std::sort(sorted.begin(), sorted.end(),
            [](const YearAnalysis* a, const YearAnalysis* b) { return a->year < b->year; });
  double sm = 0.0, sw = 0.0;
  for (std::size_t q = 0; q + 1 < sorted.size(); ++q) {
    const double next = sorted[q + 1]->mle;
    sm += (sorted[q]->mle - next) * (sorted[q]->mle - next);
    sw += (sorted[q]->wle - next) * (sorted[q]->wle - next);
  }
  const double pairs = static_cast<double>(sorted.size() - 1);
  return {std::sqrt(sm / pairs), std::sqrt(sw / pairs)};
}

MappingReport analyze(const MappingDataset& ds, const MapOptions& opts) {
  if (!(opts.level > 0.0 && opts.level < 1.0))
    throw_data(errc::kInvalidArgument, "level must lie in (0, 1)");
  MappingReport report;
  report.options = opts;
  report.regions = select_neighbors(ds, opts.target, opts.threshold);
  if (opts.fixed_lambda && opts.fixed_lambda->size() != report.regions.size())
    throw_data(errc::kInvalidArgument, "fixed weights do not match the selected region count");
  const std::vector<int> years = ds.years(opts.target);
  if (years.empty()) throw_data(errc::kInsufficientData, "target region has no counts");
  report.years.resize(years.size());
  std::vector<std::exception_ptr> errors(years.size());
  const ModelSpec poisson{Family::kPoissonRate};
  const int threads = opts.workers > 0 ? opts.workers : omp_get_max_threads();
  const auto count = static_cast<std::ptrdiff_t>(years.size());

#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::ptrdiff_t q = 0; q < count; ++q) {
    try {
      YearAnalysis& ya = report.years[q];
      ya.year = years[q];
      ya.region_ids = report.regions;
      if (const auto it = opts.manual_exclusions.find(ya.year); it != opts.manual_exclusions.end())
        ya.excluded_weeks = it->second;
      if (opts.auto_exclude) {
        const auto flagged = flag_outlier_weeks(ds, opts.target, ya.year);
        ya.excluded_weeks.insert(flagged.begin(), flagged.end());
      }
      for (int w : ya.excluded_weeks)
        if (w < 1 || w > ds.weeks_per_year())
          throw_data(errc::kInvalidArgument, "excluded week " + std::to_string(w) + " out of range");
      if (opts.fixed_lambda) {
        ya.lambda = WeightVector{*opts.fixed_lambda, WeightScheme::kEqualColumn, 0.0, true, false};
      } else {
        ya.lambda = yearly_weights(ds, ya.region_ids, ya.year, ya.excluded_weeks, opts.delta);
      }
      const MultiSample ms = year_sample(ds, ya.region_ids, ya.year, ya.excluded_weeks);
      ya.mle = mle_mean(ms.target(), poisson).theta;
      const Estimate e = wle(ms, ya.lambda.lambda, poisson, opts.truncate);
      ya.wle = e.theta;
      ya.negative_wle = e.negative_rate;
      std::tie(ya.mse_mle, ya.mse_wle) =
          mse_estimates(ds, ya.region_ids, ya.year, ya.lambda.lambda, ya.excluded_weeks);
      const Matrix& c = summarize(ms).cov();
      const std::size_t m = ms.m();
      ya.correlation = Matrix(m, m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k) {
          const double den = std::sqrt(c(i, i) * c(k, k));
          ya.correlation(i, k) = den > 0.0 ? c(i, k) / den : 0.0;
        }
      ya.interval_mle = predictive_interval(ya.mle, opts.level);
      if (ya.wle >= 0.0) ya.interval_wle = predictive_interval(ya.wle, opts.level);
    } catch (...) {
      errors[q] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  if (report.years.size() >= 2) {
    const auto [pm, pw] = prediction_errors(report.years);
    report.pred_mle = pm;
    report.pred_wle = pw;
  }
  return report;
}

std::string mapping_json(const MappingReport& r) {
  using nlohmann::ordered_json;
  const MapOptions& o = r.options;
  ordered_json j;
  ordered_json manual = ordered_json::object();
  for (const auto& [year, weeks] : o.manual_exclusions) manual[std::to_string(year)] = weeks;
  j["config"] = {{"source", r.source},
                 {"target", o.target},
                 {"threshold", o.threshold},
                 {"distance", "euclidean-degrees"},
                 {"delta", o.delta ? ordered_json(*o.delta) : ordered_json()},
                 {"delta_rule", o.delta ? "fixed" : "1e-8*max(1,mean(x1^2))"},
                 {"auto_exclude", o.auto_exclude},
                 {"manual_exclusions", manual},
                 {"level", o.level},
                 {"truncate", o.truncate},
                 {"fixed_lambda", o.fixed_lambda ? ordered_json(*o.fixed_lambda) : ordered_json()},
                 {"covariance_divisor", "W"}};
  j["regions"] = r.regions;
  j["years"] = ordered_json::array();
  for (const auto& y : r.years) {
    ordered_json corr = ordered_json::array();
    for (std::size_t i = 0; i < y.correlation.rows(); ++i) {
      const auto row = y.correlation.row(i);
      corr.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["years"].push_back(
        {{"year", y.year},
         {"region_ids", y.region_ids},
         {"excluded_weeks", y.excluded_weeks},
         {"lambda", y.lambda.lambda},
         {"delta_used", y.lambda.delta_used},
         {"unique", y.lambda.unique},
         {"condition_flag", y.lambda.condition_flag},
         {"mle", y.mle},
         {"wle", y.wle},
         {"negative_wle", y.negative_wle},
         {"mse_mle", y.mse_mle},
         {"mse_wle", y.mse_wle},
         {"correlation", corr},
         {"interval_mle", {y.interval_mle.lo, y.interval_mle.hi}},
         {"interval_wle", y.interval_wle
                              ? ordered_json{y.interval_wle->lo, y.interval_wle->hi}
                              : ordered_json()}});
  }
  j["pred_mle"] = r.pred_mle ? ordered_json(*r.pred_mle) : ordered_json();
  j["pred_wle"] = r.pred_wle ? ordered_json(*r.pred_wle) : ordered_json();
  return j.dump(2) + "\n";
}

std::string mapping_mse_csv(const MappingReport& r) {
  std::ostringstream os;
  os << csv_comment(r) << "year,mle,wle,mse_mle,mse_wle\n";
  for (const auto& y : r.years)
    os << y.year << ',' << format_number(y.mle) << ',' << format_number(y.wle) << ','
       << format_number(y.mse_mle) << ',' << format_number(y.mse_wle) << '\n';
  return os.str();
}

std::string mapping_intervals_csv(const MappingReport& r) {
  std::ostringstream os;
  os << csv_comment(r) << "year,mle,mle_lo,mle_hi,wle,wle_lo,wle_hi\n";
  for (const auto& y : r.years) {
    os << y.year << ',' << format_number(y.mle) << ',' << y.interval_mle.lo << ','
       << y.interval_mle.hi << ',' << format_number(y.wle) << ',';
    if (y.interval_wle)
      os << y.interval_wle->lo << ',' << y.interval_wle->hi << '\n';
    else
      os << ",\n";
  }
  return os.str();
}

std::string mapping_weights_csv(const MappingReport& r) {
  std::ostringstream os;
  os << csv_comment(r) << "year,region,lambda";
  for (const auto& id : r.regions) os << ",corr_" << id;
  os << '\n';
  for (const auto& y : r.years)
    for (std::size_t i = 0; i < y.region_ids.size(); ++i) {
      os << y.year << ',' << y.region_ids[i] << ',' << format_number(y.lambda.lambda[i]);
      for (std::size_t k = 0; k < y.region_ids.size(); ++k)
        os << ',' << format_number(y.correlation(i, k));
      os << '\n';
    }
  return os.str();
}

MappingDataset synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.regions < 1 || cfg.years < 1 || cfg.weeks < 1)
    throw_data(errc::kInvalidArgument, "synthetic dataset needs positive sizes");
  if (cfg.inject_outlier &&
      (cfg.outlier_year < 0 || cfg.outlier_year >= cfg.years || cfg.outlier_week < 1 ||
       cfg.outlier_week > cfg.weeks))
    throw_data(errc::kInvalidArgument, "outlier position outside the generated range");
  Rng rng(derive_substream(cfg.seed, 0));
  std::vector<Region> regions;
  std::vector<double> rates;
  const double lon0 = -80.0, lat0 = 43.0;
  regions.push_back({"R1", lon0, lat0});
  rates.push_back(cfg.target_rate);
  for (int k = 1; k < cfg.regions; ++k) {
    const double angle = 2.0 * kPi * (k - 1) / static_cast<double>(cfg.regions - 1);
    const double radius = 0.08 + 0.01 * (k % 5);
    regions.push_back({"R" + std::to_string(k + 1), lon0 + radius * std::cos(angle),
                       lat0 + radius * std::sin(angle)});
    rates.push_back(cfg.neighbor_lo + (cfg.neighbor_hi - cfg.neighbor_lo) * rng.uniform());
  }
  std::map<MappingDataset::Key, std::int64_t> counts;
  const double sd = cfg.shock_sd;
  for (int q = 0; q < cfg.years; ++q)
    for (int w = 1; w <= cfg.weeks; ++w) {
      const double shock = std::exp(sd * rng.normal() - 0.5 * sd * sd);
      for (std::size_t i = 0; i < regions.size(); ++i) {
        double mean = rates[i] * shock;
        if (cfg.inject_outlier && i == 0 && q == cfg.outlier_year && w == cfg.outlier_week)
          mean = cfg.outlier_scale * cfg.target_rate;
        counts[{regions[i].id, cfg.first_year + q, w}] = static_cast<std::int64_t>(rng.poisson(mean));
      }
    }
  return MappingDataset(std::move(regions), std::move(counts), cfg.weeks);
}

std::string dataset_csv(const MappingDataset& ds) {
  std::ostringstream os;
  os << "region_id,longitude,latitude,year,week,count\n";
  for (const auto& [key, count] : ds.counts()) {
    const auto& [id, year, week] = key;
    const Region& r = ds.region(id);
    os << id << ',' << format_number(r.longitude) << ',' << format_number(r.latitude) << ','
       << year << ',' << week << ',' << count << '\n';
  }
  return os.str();
}

}  // namespace wlecv
