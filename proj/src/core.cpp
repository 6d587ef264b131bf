#include "wlecv/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "csv_util.hpp"
#include "wlecv/error.hpp"

namespace wlecv {

PopulationSample::PopulationSample(std::vector<double> values, std::string id)
    : values_(std::move(values)), id_(std::move(id)) {
  if (values_.empty()) throw_data(errc::kInsufficientData, "population '" + id_ + "' is empty");
  for (double v : values_)
    if (!std::isfinite(v)) throw_data(errc::kDomainError, "non-finite observation in '" + id_ + "'");
}

MultiSample::MultiSample(std::vector<PopulationSample> populations, bool aligned)
    : populations_(std::move(populations)), aligned_(aligned) {
  if (populations_.empty()) throw_data(errc::kInsufficientData, "no populations");
  if (populations_.size() > Matrix::kMaxDim)
    throw_data(errc::kInvalidArgument, "more than 64 populations");
  if (aligned_ && !equal_sizes())
    throw_data(errc::kInvalidArgument, "aligned sample requires equal population sizes");
}

MultiSample MultiSample::auto_aligned(std::vector<PopulationSample> populations) {
  const bool eq = std::all_of(populations.begin(), populations.end(), [&](const auto& p) {
    return p.size() == populations.front().size();
  });
  return MultiSample(std::move(populations), eq);
}

bool MultiSample::equal_sizes() const noexcept {
  return std::all_of(populations_.begin(), populations_.end(),
                     [&](const auto& p) { return p.size() == populations_.front().size(); });
}

const Matrix& SampleStats::cov() const {
  if (!cov_) throw_data(errc::kCovarianceUndefined, "covariance needs column-aligned populations");
  return *cov_;
}

SampleStats summarize(const MultiSample& ms) {
  const std::size_t m = ms.m();
  std::vector<double> means(m);
  std::vector<std::size_t> n(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto v = ms[i].values();
    n[i] = v.size();
    means[i] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
  std::optional<Matrix> cov;
  if (ms.aligned()) {
    const std::size_t len = n.front();
    Matrix c(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = i; k < m; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < len; ++j) s += (ms[i][j] - means[i]) * (ms[k][j] - means[k]);
        c(i, k) = c(k, i) = s / static_cast<double>(len);
      }
    }
    cov = std::move(c);
  }
  return SampleStats(std::move(means), std::move(n), std::move(cov));
}

double WeightVector::sum() const noexcept {
  // Neumaier summation keeps |sum - 1| at rounding level for long vectors.
  double s = 0.0, comp = 0.0;
  for (double x : lambda) {
    const double t = s + x;
    comp += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + comp;
}

WeightVector clip_weights(WeightVector w) {
  double total = 0.0;
  for (double& x : w.lambda) {
    x = std::clamp(x, 0.0, 1.0);
    total += x;
  }
  if (total <= 0.0) {
    std::fill(w.lambda.begin(), w.lambda.end(), 0.0);
    w.lambda.front() = 1.0;
    return w;
  }
  for (double& x : w.lambda) x /= total;
  return w;
}

double ModelSpec::phi(double theta) const noexcept {
  return family == Family::kLognormal ? std::exp(theta + 0.5) : theta;
}

const char* to_string(Family f) noexcept {
  switch (f) {
    case Family::kNormalMean: return "normal-mean";
    case Family::kPoissonRate: return "poisson-rate";
    case Family::kLognormal: return "lognormal";
  }
  return "?";
}

const char* to_string(WeightScheme s) noexcept {
  return s == WeightScheme::kEqualColumn ? "equal-column" : "unequal-point";
}

const char* to_string(DeletionScheme s) noexcept {
  return s == DeletionScheme::kDeleteOneColumn ? "equal-column" : "unequal-point";
}

std::optional<Family> parse_family(std::string_view s) noexcept {
  if (s == "normal-mean" || s == "normal") return Family::kNormalMean;
  if (s == "poisson-rate" || s == "poisson") return Family::kPoissonRate;
  if (s == "lognormal") return Family::kLognormal;
  return std::nullopt;
}

std::optional<DeletionScheme> parse_scheme(std::string_view s) noexcept {
  if (s == "equal-column" || s == "delete-one-column") return DeletionScheme::kDeleteOneColumn;
  if (s == "unequal-point" || s == "delete-one-point") return DeletionScheme::kDeleteOnePoint;
  return std::nullopt;
}

WeightScheme weight_scheme_for(DeletionScheme s) noexcept {
  return s == DeletionScheme::kDeleteOneColumn ? WeightScheme::kEqualColumn
                                               : WeightScheme::kUnequalPoint;
}

using detail::parse_number;
using detail::split_csv_line;

MultiSample read_samples_csv(const std::filesystem::path& path, bool require_aligned) {
  std::ifstream in(path);
  if (!in) throw_data(errc::kIngestError, "cannot open '" + path.string() + "'");

  std::vector<std::string> order;
  std::map<std::string, std::map<long long, double>> cols;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto f = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 3) throw_data(errc::kIngestError, where + ": expected 3 fields");
    long long col = 0;
    double value = 0.0;
    if (!parse_number(f[1], col)) {
      if (order.empty() && cols.empty()) continue;  // header
      throw_data(errc::kIngestError, where + ": bad column index '" + f[1] + "'");
    }
    if (!parse_number(f[2], value) || !std::isfinite(value))
      throw_data(errc::kIngestError, where + ": bad value '" + f[2] + "'");
    if (col < 0) throw_data(errc::kIngestError, where + ": negative column index");
    if (f[0].empty()) throw_data(errc::kIngestError, where + ": empty population id");
    auto [it, fresh] = cols.try_emplace(f[0]);
    if (fresh) order.push_back(f[0]);
    if (!it->second.emplace(col, value).second)
      throw_data(errc::kIngestError, where + ": duplicate column " + f[1] + " for '" + f[0] + "'");
  }
  if (order.empty()) throw_data(errc::kIngestError, "'" + path.string() + "' holds no observations");

  std::vector<PopulationSample> pops;
  bool contiguous = true;
  for (const auto& id : order) {
    const auto& c = cols.at(id);
    std::vector<double> v;
    v.reserve(c.size());
    long long expect = 0;
    for (const auto& [k, x] : c) {
      if (k != expect++) {
        if (require_aligned)
          throw_data(errc::kIngestError, "population '" + id + "' columns are not contiguous from 0");
        contiguous = false;
      }
      v.push_back(x);
    }
    pops.emplace_back(std::move(v), id);
  }
  if (require_aligned) {
    for (const auto& p : pops)
      if (p.size() != pops.front().size())
        throw_data(errc::kIngestError, "aligned mode needs equal population sizes");
  }
  if (require_aligned || !contiguous) return MultiSample(std::move(pops), require_aligned);
  return MultiSample::auto_aligned(std::move(pops));
}

}  // namespace wlecv
