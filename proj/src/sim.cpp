#include "wlecv/sim.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>

#include "json.hpp"
#include <omp.h>

#include "wlecv/cv_closed.hpp"
#include "wlecv/cv_generic.hpp"
#include "wlecv/error.hpp"
#include "wlecv/wle.hpp"

namespace wlecv {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr const char* kDefaultDeltaRule = "1e-8*max(1,mean(x1^2))";

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

template <class Get>
std::pair<double, double> mean_sd(std::size_t count, Get get) {
  CompensatedSum s;
  for (std::size_t i = 0; i < count; ++i) s.add(get(i));
  const double mean = s.value() / static_cast<double>(count);
  if (count < 2) return {mean, 0.0};
  CompensatedSum ss;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = get(i) - mean;
    ss.add(d * d);
  }
  return {mean, std::sqrt(ss.value() / static_cast<double>(count - 1))};
}

WeightVector choose_weights(const StudyConfig& cfg, const PopulationSample& x1,
                            const PopulationSample& x2) {
  if (cfg.scheme == DeletionScheme::kDeleteOneColumn) {
    if (cfg.model.linear()) return weights_equal_two(x1, x2, cfg.delta);
    return lognormal_weight(x1, x2);
  }
  if (cfg.model.linear()) return weights_unequal_two(x1, x2);
  return optimize_weights(MultiSample({x1, x2}, false), cfg.model, cfg.scheme);
}

std::vector<ReplicationResult> run_size(const StudyConfig& cfg, std::size_t n, bool parallel,
                                        int workers) {
  const std::size_t reps = cfg.replications;
  std::vector<ReplicationResult> out(reps);
  if (!parallel) {
    for (std::size_t r = 0; r < reps; ++r) out[r] = run_replication(cfg, n, r);
    return out;
  }
  std::vector<std::exception_ptr> errors(reps);
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  const auto count = static_cast<std::ptrdiff_t>(reps);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::ptrdiff_t r = 0; r < count; ++r) {
    try {
      out[r] = run_replication(cfg, n, static_cast<std::size_t>(r));
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

SimulationReport run(const StudyConfig& cfg, bool parallel, int workers) {
  cfg.validate();
  SimulationReport report{cfg, {}};
  for (std::size_t n : cfg.n_list) report.rows.push_back(aggregate(n, run_size(cfg, n, parallel, workers)));
  return report;
}

std::string fixed100(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

void StudyConfig::validate() const {
  if (replications < 1) throw_data(errc::kInvalidArgument, "replications must be >= 1");
  if (n_list.empty()) throw_data(errc::kInvalidArgument, "n_list is empty");
  for (std::size_t n : n_list)
    if (n < 2) throw_data(errc::kInvalidArgument, "every sample size must be >= 2");
  if (delta && !(*delta >= 0.0 && std::isfinite(*delta)))
    throw_data(errc::kInvalidArgument, "delta must be a finite nonnegative number");
  if (model.family == Family::kPoissonRate && !(theta1 >= 0.0 && theta2 >= 0.0))
    throw_data(errc::kInvalidArgument, "Poisson means must be nonnegative");
}

StudyConfig preset_table1(std::uint64_t seed) {
  StudyConfig c;
  c.model = ModelSpec{Family::kNormalMean, 1.0};
  c.theta1 = 0.0;
  c.theta2 = 0.3;
  c.n_list = {10, 20, 30, 40, 50, 60};
  c.master_seed = seed;
  return c;
}

StudyConfig preset_table3(std::uint64_t seed) {
  StudyConfig c = preset_table1(seed);
  c.model = ModelSpec{Family::kPoissonRate, 1.0};
  c.theta1 = 3.0;
  c.theta2 = 3.6;
  return c;
}

std::uint64_t derive_substream(std::uint64_t master, std::uint64_t index) noexcept {
  // master + golden * (index + 1) is injective in index (odd multiplier) and
  // mix64 is a bijection.
  return mix64(master + 0x9e3779b97f4a7c15ULL * (index + 1));
}

double Rng::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double t = kTwoPi * uniform();
  spare_ = r * std::sin(t);
  return r * std::cos(t);
}

std::uint64_t Rng::poisson_small(double mean) {
  const double u = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  while (u > cdf && k < 1000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

std::uint64_t Rng::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  std::uint64_t total = 0;
  while (mean > 30.0) {
    total += poisson_small(30.0);
    mean -= 30.0;
  }
  return total + poisson_small(mean);
}

PopulationSample sample_population(const ModelSpec& model, double param, std::size_t n,
                                   std::uint64_t seed, std::string id) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) {
    switch (model.family) {
      case Family::kNormalMean: x = param + model.sigma * rng.normal(); break;
      case Family::kPoissonRate: x = static_cast<double>(rng.poisson(param)); break;
      case Family::kLognormal: x = std::exp(param + rng.normal()); break;
    }
  }
  return PopulationSample(std::move(v), std::move(id));
}

ReplicationResult run_replication(const StudyConfig& cfg, std::size_t n, std::size_t replication) {
  const std::uint64_t rep_seed = derive_substream(cfg.master_seed, replication);
  const PopulationSample x1 =
      sample_population(cfg.model, cfg.theta1, n, derive_substream(rep_seed, 2 * n), "1");
  const PopulationSample x2 =
      sample_population(cfg.model, cfg.theta2, n, derive_substream(rep_seed, 2 * n + 1), "2");
  WeightVector w = choose_weights(cfg, x1, x2);
  const MultiSample ms({x1, x2}, cfg.scheme == DeletionScheme::kDeleteOneColumn);
  const double mle = mle_mean(x1, cfg.model).theta;
  const double est = wle(ms, w.lambda, cfg.model).theta;
  return {(mle - cfg.theta1) * (mle - cfg.theta1), (est - cfg.theta1) * (est - cfg.theta1),
          std::move(w.lambda)};
}

StudyRow aggregate(std::size_t n, const std::vector<ReplicationResult>& reps) {
  StudyRow row;
  row.n = n;
  const std::size_t r = reps.size();
  if (r == 0) throw_data(errc::kInvalidArgument, "no replications to aggregate");
  std::tie(row.mse_mle, row.sd_sqerr_mle) = mean_sd(r, [&](std::size_t i) { return reps[i].sqerr_mle; });
  std::tie(row.mse_wle, row.sd_sqerr_wle) = mean_sd(r, [&](std::size_t i) { return reps[i].sqerr_wle; });
  row.ratio = row.mse_wle / row.mse_mle;
  const std::size_t m = reps.front().lambda.size();
  for (std::size_t k = 0; k < m; ++k) {
    const auto [mean, sd] = mean_sd(r, [&](std::size_t i) { return reps[i].lambda[k]; });
    row.mean_lambda.push_back(mean);
    row.sd_lambda.push_back(sd);
  }
  return row;
}

SimulationReport run_study(const StudyConfig& cfg, int workers) { return run(cfg, true, workers); }

SimulationReport run_study_serial(const StudyConfig& cfg) { return run(cfg, false, 1); }

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string report_csv(const SimulationReport& r) {
  const StudyConfig& c = r.config;
  std::ostringstream os;
  os << "# family=" << to_string(c.model.family) << " sigma=" << format_number(c.model.sigma)
     << " theta1=" << format_number(c.theta1) << " theta2=" << format_number(c.theta2)
     << " replications=" << c.replications << " master_seed=" << c.master_seed
     << " scheme=" << to_string(c.scheme)
     << " delta=" << (c.delta ? format_number(*c.delta) : std::string(kDefaultDeltaRule))
     << " sd_divisor=reps-1\n";
  const std::size_t m = r.rows.empty() ? 0 : r.rows.front().mean_lambda.size();
  os << "n,mse_mle,sd_sqerr_mle,mse_wle,sd_sqerr_wle,ratio";
  for (std::size_t k = 1; k <= m; ++k) os << ",mean_lambda_" << k;
  for (std::size_t k = 1; k <= m; ++k) os << ",sd_lambda_" << k;
  os << '\n';
  for (const auto& row : r.rows) {
    os << row.n << ',' << format_number(row.mse_mle) << ',' << format_number(row.sd_sqerr_mle)
       << ',' << format_number(row.mse_wle) << ',' << format_number(row.sd_sqerr_wle) << ','
       << format_number(row.ratio);
    for (double v : row.mean_lambda) os << ',' << format_number(v);
    for (double v : row.sd_lambda) os << ',' << format_number(v);
    os << '\n';
  }
  return os.str();
}

std::string report_json(const SimulationReport& r) {
  const StudyConfig& c = r.config;
  nlohmann::ordered_json j;
  j["config"] = {{"family", to_string(c.model.family)},
                 {"sigma", c.model.sigma},
                 {"theta1", c.theta1},
                 {"theta2", c.theta2},
                 {"n_list", c.n_list},
                 {"replications", c.replications},
                 {"master_seed", c.master_seed},
                 {"scheme", to_string(c.scheme)},
                 {"delta", c.delta ? nlohmann::ordered_json(*c.delta) : nlohmann::ordered_json()},
                 {"delta_rule", c.delta ? "fixed" : kDefaultDeltaRule},
                 {"sd_divisor", "reps-1"}};
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    j["rows"].push_back({{"n", row.n},
                         {"mse_mle", row.mse_mle},
                         {"sd_sqerr_mle", row.sd_sqerr_mle},
                         {"mse_wle", row.mse_wle},
                         {"sd_sqerr_wle", row.sd_sqerr_wle},
                         {"ratio", row.ratio},
                         {"mean_lambda", row.mean_lambda},
                         {"sd_lambda", row.sd_lambda}});
  }
  return j.dump(2) + "\n";
}

std::string report_table(const SimulationReport& r) {
  const StudyConfig& c = r.config;
  std::ostringstream os;
  os << to_string(c.model.family) << ' ' << format_number(c.theta1) << " vs "
     << format_number(c.theta2) << ", " << c.replications << " replications, seed "
     << c.master_seed << ", scheme " << to_string(c.scheme) << ", delta "
     << (c.delta ? format_number(*c.delta) : std::string(kDefaultDeltaRule)) << '\n';
  os << "MSE and weight columns are multiplied by 100\n";
  char line[256];
  std::snprintf(line, sizeof line, "%6s %10s %10s %10s %10s %8s", "n", "MSE(MLE)", "SD", "MSE(WLE)",
                "SD", "ratio");
  os << line;
  const std::size_t m = r.rows.empty() ? 0 : r.rows.front().mean_lambda.size();
  for (std::size_t k = 1; k <= m; ++k) {
    std::snprintf(line, sizeof line, " %9s%zu", "lambda", k);
    os << line;
  }
  os << "     SD(w)\n";
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof line, "%6zu %10s %10s %10s %10s %8s", row.n,
                  fixed100(row.mse_mle).c_str(), fixed100(row.sd_sqerr_mle).c_str(),
                  fixed100(row.mse_wle).c_str(), fixed100(row.sd_sqerr_wle).c_str(),
                  fixed100(row.ratio).c_str());
    os << line;
    for (double v : row.mean_lambda) {
      std::snprintf(line, sizeof line, " %10s", fixed100(v).c_str());
      os << line;
    }
    std::snprintf(line, sizeof line, " %10s\n",
                  fixed100(row.sd_lambda.empty() ? 0.0 : row.sd_lambda.front()).c_str());
    os << line;
  }
  return os.str();
}

}  // namespace wlecv
