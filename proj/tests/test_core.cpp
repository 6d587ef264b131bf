#include "doctest.h"

#include <cmath>

#include "support.hpp"
#include "wlecv/core.hpp"
#include "wlecv/error.hpp"

using wlecv::MultiSample;
using wlecv::PopulationSample;

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

}  // namespace

TEST_CASE("summarize examples") {
  const MultiSample ms({PopulationSample({1, 2, 3}), PopulationSample({2, 3, 4})}, true);
  const auto st = wlecv::summarize(ms);
  CHECK(st.means()[0] == doctest::Approx(2.0));
  CHECK(st.means()[1] == doctest::Approx(3.0));
  // Brute-force sums with the 1/n divisor.
  double s11 = 0, s12 = 0;
  for (int j = 0; j < 3; ++j) {
    s11 += (ms[0][j] - 2.0) * (ms[0][j] - 2.0);
    s12 += (ms[0][j] - 2.0) * (ms[1][j] - 3.0);
  }
  CHECK(st.cov()(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(st.cov()(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(st.cov()(0, 0) == doctest::Approx(s11 / 3));
  CHECK(st.cov()(0, 1) == doctest::Approx(s12 / 3));

  const double c = 7.25;
  const auto flat = wlecv::summarize(MultiSample({PopulationSample({c, c, c})}, true));
  CHECK(flat.cov()(0, 0) == 0.0);

  const auto single = wlecv::summarize(MultiSample({PopulationSample({5})}, true));
  CHECK(single.means() == std::vector<double>{5.0});
  CHECK(single.n() == std::vector<std::size_t>{1});
}

TEST_CASE("covariance is undefined for unaligned samples") {
  const MultiSample ms({PopulationSample({1, 2, 3}), PopulationSample({2, 3})}, false);
  const auto st = wlecv::summarize(ms);
  CHECK_FALSE(st.has_cov());
  CHECK(error_code([&] { (void)st.cov(); }) == wlecv::errc::kCovarianceUndefined);
}

TEST_CASE("summarize is shift-equivariant in means, shift-invariant in covariance, and PSD") {
  support::Gen g(21);
  for (int t = 0; t < 300; ++t) {
    const std::size_t m = static_cast<std::size_t>(g.integer(1, 6));
    const std::size_t n = static_cast<std::size_t>(g.integer(1, 12));
    const double shift = g.uniform(-100, 100);
    support::Data d(m), ds(m);
    for (std::size_t i = 0; i < m; ++i) {
      d[i] = g.normals(n, g.uniform(-3, 3), g.uniform(0.1, 3));
      for (double x : d[i]) ds[i].push_back(x + shift);
    }
    const auto a = wlecv::summarize(support::to_sample(d, true));
    const auto b = wlecv::summarize(support::to_sample(ds, true));
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(b.means()[i] == doctest::Approx(a.means()[i] + shift).epsilon(1e-12));
      for (std::size_t k = 0; k < m; ++k)
        CHECK(std::abs(b.cov()(i, k) - a.cov()(i, k)) <= 1e-9 * (1 + std::abs(shift)));
    }
    const auto eig = wlecv::symmetric_eigen(a.cov());
    CHECK(eig.values.front() >= -1e-10 * std::max(1.0, a.cov().trace()));
    CHECK((a.cov() - a.cov().transpose()).max_abs() == 0.0);
  }
}

TEST_CASE("sample construction validates its input") {
  CHECK(error_code([] { PopulationSample({}); }) == wlecv::errc::kInsufficientData);
  CHECK(error_code([] { PopulationSample({1.0, NAN}); }) == wlecv::errc::kDomainError);
  CHECK(error_code([] { PopulationSample({INFINITY}); }) == wlecv::errc::kDomainError);
  CHECK(error_code([] { MultiSample({}, false); }) == wlecv::errc::kInsufficientData);
  CHECK(error_code([] {
          MultiSample({PopulationSample({1, 2}), PopulationSample({1})}, true);
        }) == wlecv::errc::kInvalidArgument);
  std::vector<PopulationSample> many(65, PopulationSample({1.0}));
  CHECK(error_code([&] { MultiSample(many, true); }) == wlecv::errc::kInvalidArgument);
  CHECK(MultiSample::auto_aligned({PopulationSample({1, 2}), PopulationSample({3, 4})}).aligned());
  CHECK_FALSE(MultiSample::auto_aligned({PopulationSample({1, 2}), PopulationSample({3})}).aligned());
}

TEST_CASE("weight vector sum and clipping") {
  wlecv::WeightVector w;
  w.lambda = {-2.0, 3.0};
  CHECK(w.sum() == 1.0);
  const auto c = wlecv::clip_weights(w);
  CHECK(c.lambda == std::vector<double>{0.0, 1.0});
  w.lambda = {1.5, -0.25, -0.25};
  CHECK(wlecv::clip_weights(w).lambda == std::vector<double>{1.0, 0.0, 0.0});
  w.lambda = {0.5, 0.25, 0.25};
  CHECK(wlecv::clip_weights(w).lambda == w.lambda);
  w.lambda = {-1.0, -2.0, 4.0};
  const auto d = wlecv::clip_weights(w);
  CHECK(d.sum() == doctest::Approx(1.0));

  // Long vectors of tiny weights still sum to one at rounding level.
  w.lambda.assign(64, 1.0 / 64.0);
  w.lambda[0] += 1e6;
  w.lambda[1] -= 1e6;
  CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
}

TEST_CASE("model helpers") {
  const wlecv::ModelSpec ln{wlecv::Family::kLognormal};
  CHECK(ln.phi(1.0) == std::exp(1.5));
  CHECK_FALSE(ln.linear());
  CHECK(wlecv::ModelSpec{wlecv::Family::kPoissonRate}.phi(2.5) == 2.5);
  CHECK(wlecv::parse_family("poisson") == wlecv::Family::kPoissonRate);
  CHECK(wlecv::parse_family("normal-mean") == wlecv::Family::kNormalMean);
  CHECK_FALSE(wlecv::parse_family("gamma").has_value());
  CHECK(wlecv::parse_scheme("unequal-point") == wlecv::DeletionScheme::kDeleteOnePoint);
  CHECK(wlecv::parse_scheme("delete-one-column") == wlecv::DeletionScheme::kDeleteOneColumn);
  CHECK(std::string(wlecv::to_string(wlecv::Family::kLognormal)) == "lognormal");
}

TEST_CASE("read_samples_csv") {
  SUBCASE("header, ordering by column and first-appearance population order") {
    const auto p = support::temp_file("ok.csv",
                                      "population,column,value\nb,1,4\nb,0,3\na,0,1\na,1,2\n");
    const auto ms = wlecv::read_samples_csv(p, true);
    REQUIRE(ms.m() == 2);
    CHECK(ms[0].id() == "b");
    CHECK(ms[0][0] == 3.0);
    CHECK(ms[0][1] == 4.0);
    CHECK(ms[1][1] == 2.0);
    CHECK(ms.aligned());
  }
  SUBCASE("unequal sizes read unaligned") {
    const auto p = support::temp_file("uneq.csv", "a,0,1\na,1,2\nb,0,5\n");
    const auto ms = wlecv::read_samples_csv(p, false);
    CHECK_FALSE(ms.aligned());
    CHECK(wlecv::read_samples_csv(p, false).target().size() == 2);
    CHECK(error_code([&] { wlecv::read_samples_csv(p, true); }) == wlecv::errc::kIngestError);
  }
  SUBCASE("gaps in the column index break alignment") {
    const auto p = support::temp_file("gap.csv", "a,0,1\na,2,2\nb,0,5\nb,1,6\n");
    CHECK_FALSE(wlecv::read_samples_csv(p, false).aligned());
    CHECK(error_code([&] { wlecv::read_samples_csv(p, true); }) == wlecv::errc::kIngestError);
  }
  SUBCASE("malformed input") {
    CHECK(error_code([] { wlecv::read_samples_csv("/nonexistent/x.csv", false); }) ==
          wlecv::errc::kIngestError);
    const auto dup = support::temp_file("dup.csv", "a,0,1\na,0,2\n");
    CHECK(error_code([&] { wlecv::read_samples_csv(dup, false); }) == wlecv::errc::kIngestError);
    const auto bad = support::temp_file("bad.csv", "a,0,1\na,1,x\n");
    CHECK(error_code([&] { wlecv::read_samples_csv(bad, false); }) == wlecv::errc::kIngestError);
    const auto empty = support::temp_file("empty.csv", "population,column,value\n");
    CHECK(error_code([&] { wlecv::read_samples_csv(empty, false); }) == wlecv::errc::kIngestError);
  }
}
