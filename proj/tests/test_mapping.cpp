#include "doctest.h"

#include <cmath>

#include "json.hpp"
#include "support.hpp"
#include "wlecv/cv_generic.hpp"
#include "wlecv/error.hpp"
#include "wlecv/mapping.hpp"

using wlecv::MappingDataset;
using wlecv::Region;

namespace {

template <class F>
std::string error_code(F&& f) {
  try {
    f();
  } catch (const wlecv::Error& e) {
    return e.code();
  }
  return "none";
}

MappingDataset from_series(const std::vector<std::vector<double>>& series, int year = 2000) {
  std::vector<Region> regions;
  std::map<MappingDataset::Key, std::int64_t> counts;
  const int weeks = static_cast<int>(series[0].size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::string id = "r" + std::to_string(i + 1);
    regions.push_back({id, 0.05 * static_cast<double>(i), 0.0});
    for (int w = 1; w <= weeks; ++w)
      counts[{id, year, w}] = static_cast<std::int64_t>(series[i][static_cast<std::size_t>(w - 1)]);
  }
  return MappingDataset(regions, counts, weeks);
}

// Poisson CDF by direct summation of the pmf.
double poisson_cdf(double mean, int k) {
  double s = 0, p = std::exp(-mean);
  for (int i = 0; i <= k; ++i) {
    s += p;
    p *= mean / (i + 1);
  }
  return s;
}

}  // namespace

TEST_CASE("ingest_counts") {
  SUBCASE("weekly file") {
    std::string text = "region_id,longitude,latitude,year,week,count\n";
    for (int r = 1; r <= 4; ++r)
      for (int y = 1984; y < 1990; ++y)
        for (int w = 1; w <= 17; ++w)
          text += "c" + std::to_string(r) + "," + std::to_string(-80 + 0.1 * r) + ",43," +
                  std::to_string(y) + "," + std::to_string(w) + "," + std::to_string((r + y + w) % 4) + "\n";
    const auto ds = wlecv::ingest_counts(support::temp_file("weekly.csv", text));
    CHECK(ds.regions().size() == 4);
    CHECK(ds.weeks_per_year() == 17);
    CHECK(ds.years("c1").size() == 6);
  }
  SUBCASE("negative count") {
    const auto p = support::temp_file("neg.csv", "c1,0,0,1984,1,-1\n");
    CHECK(error_code([&] { wlecv::ingest_counts(p); }) == wlecv::errc::kIngestError);
  }
  SUBCASE("duplicate key") {
    const auto p = support::temp_file("dupkey.csv", "c1,0,0,1984,1,2\nc1,0,0,1984,1,3\n");
    CHECK(error_code([&] { wlecv::ingest_counts(p); }) == wlecv::errc::kIngestError);
  }
  SUBCASE("inconsistent coordinates and parse failures") {
    const auto p = support::temp_file("coords.csv", "c1,0,0,1984,1,2\nc1,0,1,1984,2,3\n");
    CHECK(error_code([&] { wlecv::ingest_counts(p); }) == wlecv::errc::kIngestError);
    const auto q = support::temp_file("short.csv", "c1,0,0,1984,1\n");
    CHECK(error_code([&] { wlecv::ingest_counts(q); }) == wlecv::errc::kIngestError);
    CHECK(error_code([] { wlecv::ingest_counts("/nonexistent/counts.csv"); }) == wlecv::errc::kIngestError);
  }
  SUBCASE("daily file is aggregated into weeks") {
    std::string text = "region_id,longitude,latitude,year,day,count\n";
    for (int d = 1; d <= 123; ++d) text += "c1,0,0,1990," + std::to_string(d) + ",1\n";
    const auto ds = wlecv::ingest_counts(support::temp_file("daily.csv", text));
    CHECK(ds.weeks_per_year() == 17);
    const auto w = ds.weekly("c1", 1990);
    for (double x : w) CHECK(x == 7.0);
  }
}

TEST_CASE("weekly_aggregate") {
  std::vector<wlecv::DailyCount> days;
  for (int d = 1; d <= 123; ++d) days.push_back({"a", 1990, d, d > 119 ? 100 : 0});
  const auto ds = wlecv::weekly_aggregate({{"a", 0, 0}}, days, 17);
  for (double x : ds.weekly("a", 1990)) CHECK(x == 0.0);  // days 120-123 dropped

  std::vector<wlecv::DailyCount> first;
  for (int d = 1; d <= 7; ++d) first.push_back({"a", 1990, d, 1});
  CHECK(wlecv::weekly_aggregate({{"a", 0, 0}}, first, 17).weekly("a", 1990)[0] == 7.0);
}

TEST_CASE("select_neighbors") {
  const MappingDataset ds({{"t", 0, 0}, {"near", 0.1, 0.1}, {"far", 0.3, 0}, {"twin", 0, 0}}, {}, 17);
  CHECK(wlecv::select_neighbors(ds, "t", 0.2) == std::vector<std::string>{"t", "near"});
  CHECK(wlecv::select_neighbors(ds, "t", 0.0) == std::vector<std::string>{"t"});
  CHECK(wlecv::select_neighbors(ds, "t", 0.31) == std::vector<std::string>{"t", "near", "far"});
  CHECK(error_code([&] { wlecv::select_neighbors(ds, "nope", 0.2); }) == wlecv::errc::kInvalidArgument);

  const MappingDataset tie({{"t", 0, 0}, {"b", 0.1, 0}, {"a", 0, 0.1}}, {}, 17);
  CHECK(wlecv::select_neighbors(tie, "t", 0.2) == std::vector<std::string>{"t", "a", "b"});
}

TEST_CASE("flag_outlier_weeks") {
  const std::vector<double> spike{1, 2, 1, 2, 21, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2};
  CHECK(wlecv::flag_outlier_weeks(spike) == std::set<int>{5});
  CHECK(wlecv::flag_outlier_weeks(std::vector<double>(17, 3.0)).empty());
  std::vector<double> halves(9, 1.0);
  halves.insert(halves.end(), 8, 2.0);
  CHECK(wlecv::flag_outlier_weeks(halves).empty());
  // A low outlier is never flagged.
  std::vector<double> dip(17, 10.0);
  dip[3] = 0.0;
  CHECK(wlecv::flag_outlier_weeks(dip).empty());

  const auto km = wlecv::kmeans_two(spike);
  CHECK(km.size[1] == 1);
  CHECK(km.centroid[1] == 21.0);
  CHECK(km.centroid[0] == doctest::Approx(1.5));
}

TEST_CASE("yearly weights") {
  const auto ds = from_series({{1, 3, 2, 4, 0, 2}, {2, 2, 3, 5, 1, 1}, {0, 4, 2, 3, 1, 2}});
  const std::vector<std::string> one{"r1"};
  CHECK(wlecv::yearly_weights(ds, one, 2000, {}).lambda == std::vector<double>{1.0});

  const std::vector<std::string> all{"r1", "r2", "r3"};
  CHECK(error_code([&] { wlecv::yearly_weights(ds, all, 2000, {1, 2, 3, 4, 5}); }) ==
        wlecv::errc::kInsufficientData);
}

TEST_CASE("yearly weights agree with the numerical minimizer on synthetic years") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    wlecv::SyntheticConfig sc;
    sc.seed = seed;
    const auto ds = wlecv::synthetic_dataset(sc);
    const auto regions = wlecv::select_neighbors(ds, "R1", 0.2);
    REQUIRE(regions.size() == 4);
    for (int year : ds.years("R1")) {
      const auto w = wlecv::yearly_weights(ds, regions, year, {}, 0.0);
      const auto ms = wlecv::year_sample(ds, regions, year, {});
      const auto o = wlecv::optimize_weights(ms, wlecv::ModelSpec{wlecv::Family::kPoissonRate},
                                             wlecv::DeletionScheme::kDeleteOneColumn);
      if (w.unique && o.unique) CHECK(support::max_abs_diff(w.lambda, o.lambda) <= 1e-6);
    }
  }
}

TEST_CASE("mse_estimates") {
  const auto ds = from_series({{1, 3}, {2, 2}});
  const std::vector<std::string> one{"r1"};
  const auto [mle, wle] = wlecv::mse_estimates(ds, one, 2000, std::vector<double>{1.0}, {});
  CHECK(mle == 0.5);
  CHECK(wle == 0.5);

  const auto big = from_series({{1, 3, 2, 6, 0}, {2, 2, 3, 5, 1}, {0, 4, 2, 3, 1}});
  const std::vector<std::string> all{"r1", "r2", "r3"};
  const auto a = wlecv::mse_estimates(big, all, 2000, std::vector<double>{1, 0, 0}, {});
  CHECK(a.first == a.second);
  // Independent arithmetic for lambda = (0.5, 0.25, 0.25), week 4 excluded.
  const std::vector<std::vector<double>> kept{{1, 3, 2, 0}, {2, 2, 3, 1}, {0, 4, 2, 1}};
  const std::vector<double> l{0.5, 0.25, 0.25};
  double quad = 0, comb = 0;
  for (int i = 0; i < 3; ++i) {
    comb += l[i] * support::plain_mean(kept[i]);
    for (int k = 0; k < 3; ++k) {
      double c = 0;
      for (int j = 0; j < 4; ++j)
        c += (kept[i][j] - support::plain_mean(kept[i])) * (kept[k][j] - support::plain_mean(kept[k]));
      quad += l[i] * l[k] * c / 4;
    }
  }
  const double bias = comb - support::plain_mean(kept[0]);
  const auto b = wlecv::mse_estimates(big, all, 2000, l, {4});
  CHECK(b.second == doctest::Approx(quad / 4 + bias * bias).epsilon(1e-14));

  const auto tiny = from_series({{1, 3}});
  CHECK(error_code([&] { wlecv::mse_estimates(tiny, one, 2000, std::vector<double>{1.0}, {1}); }) ==
        wlecv::errc::kInsufficientData);
}

TEST_CASE("prediction_errors") {
  std::vector<wlecv::YearAnalysis> ys(3);
  for (int q = 0; q < 3; ++q) {
    ys[q].year = 2000 + q;
    ys[q].mle = 1.0;
    ys[q].wle = 1.0;
  }
  auto [pm, pw] = wlecv::prediction_errors(ys);
  CHECK(pm == 0.0);
  ys[0].mle = 2.0;
  ys[0].wle = 1.5;
  std::tie(pm, pw) = wlecv::prediction_errors(ys);
  CHECK(pm == doctest::Approx(std::sqrt(0.5)));
  CHECK(pw == doctest::Approx(std::sqrt(0.125)));
  CHECK(error_code([&] { wlecv::prediction_errors(std::span(ys.data(), 1)); }) ==
        wlecv::errc::kInsufficientData);
}

TEST_CASE("predictive_interval") {
  CHECK(wlecv::predictive_interval(0.0, 0.95).lo == 0);
  CHECK(wlecv::predictive_interval(0.0, 0.95).hi == 0);
  const auto one = wlecv::predictive_interval(1.0, 0.95);
  CHECK(one.lo == 0);
  CHECK(one.hi == 3);
  CHECK(error_code([] { wlecv::predictive_interval(-0.1, 0.95); }) == wlecv::errc::kDomainError);
  CHECK(error_code([] { wlecv::predictive_interval(1.0, 1.0); }) == wlecv::errc::kInvalidArgument);

  support::Gen g(71);
  for (int t = 0; t < 300; ++t) {
    const double theta = g.uniform(0.01, 40);
    const double level = g.uniform(0.5, 0.99);
    const double tail = (1 - level) / 2;
    const auto iv = wlecv::predictive_interval(theta, level);
    const int hi = static_cast<int>(iv.hi), lo = static_cast<int>(iv.lo);
    CHECK(poisson_cdf(theta, hi) >= 1 - tail - 1e-12);
    if (hi > 0) CHECK(poisson_cdf(theta, hi - 1) < 1 - tail + 1e-12);
    if (lo > 0) CHECK(poisson_cdf(theta, lo - 1) <= tail + 1e-12);
    CHECK(poisson_cdf(theta, lo) > tail - 1e-12);

    const auto wider = wlecv::predictive_interval(theta, std::min(0.999, level + 0.01));
    const auto bigger = wlecv::predictive_interval(theta + g.uniform(0, 2), level);
    CHECK(wider.hi >= iv.hi);
    CHECK(bigger.hi >= iv.hi);
  }
}

TEST_CASE("pipeline with the MLE weights reproduces the MLE outputs exactly") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    wlecv::SyntheticConfig sc;
    sc.seed = seed;
    const auto ds = wlecv::synthetic_dataset(sc);
    wlecv::MapOptions o;
    o.target = "R1";
    o.fixed_lambda = std::vector<double>{1, 0, 0, 0};
    const auto r = wlecv::analyze(ds, o);
    for (const auto& y : r.years) {
      CHECK(y.wle == y.mle);
      CHECK(y.mse_wle == y.mse_mle);
      REQUIRE(y.interval_wle.has_value());
      CHECK(y.interval_wle->lo == y.interval_mle.lo);
      CHECK(y.interval_wle->hi == y.interval_mle.hi);
    }
    CHECK(*r.pred_wle == *r.pred_mle);
  }
}

TEST_CASE("analysis outputs") {
  wlecv::SyntheticConfig sc;
  sc.inject_outlier = true;
  const auto ds = wlecv::synthetic_dataset(sc);
  CHECK(ds.weekly("R1", 1984)[7] >= 5.0);
  wlecv::MapOptions o;
  o.target = "R1";
  o.manual_exclusions[1985] = {2};
  const auto r = wlecv::analyze(ds, o);
  CHECK(r.years.size() == 6);
  CHECK(r.years[0].excluded_weeks.count(8) == 1);
  CHECK(r.years[1].excluded_weeks.count(2) == 1);
  for (const auto& y : r.years) {
    CHECK(std::abs(y.lambda.sum() - 1.0) <= 1e-12);
    for (std::size_t i = 0; i < y.correlation.rows(); ++i)
      CHECK((y.correlation(i, i) == doctest::Approx(1.0) || y.correlation(i, i) == 0.0));
  }
  const auto j = nlohmann::json::parse(wlecv::mapping_json(r));
  CHECK(j["config"]["covariance_divisor"] == "W");
  CHECK(j["years"].size() == 6);
  CHECK(wlecv::mapping_weights_csv(r).find("year,region,lambda,corr_R1") != std::string::npos);
  CHECK(wlecv::mapping_intervals_csv(r).find("year,mle,mle_lo,mle_hi") != std::string::npos);

  // The dataset survives a CSV round trip.
  const auto back = wlecv::ingest_counts(support::temp_file("synth.csv", wlecv::dataset_csv(ds)));
  CHECK(back.counts() == ds.counts());
  CHECK(back.weeks_per_year() == 16);

  // Parallel years give identical documents.
  o.workers = 1;
  const auto one = wlecv::mapping_json(wlecv::analyze(ds, o));
  o.workers = 4;
  CHECK(wlecv::mapping_json(wlecv::analyze(ds, o)) == one);
}
