#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wlecv/core.hpp"

namespace wlecv {

/// Two-population Monte Carlo study: population 1 has natural parameter
/// theta1, population 2 has theta2.
struct StudyConfig {
  ModelSpec model;
  double theta1 = 0.0;
  double theta2 = 0.0;
  std::vector<std::size_t> n_list;
  std::size_t replications = 1000;
  std::uint64_t master_seed = 42;
  std::optional<double> delta;  ///< unset: the per-sample default correction
  DeletionScheme scheme = DeletionScheme::kDeleteOneColumn;

  /// Throws "invalid-argument" when replications < 1 or some n < 2.
  void validate() const;
};

/// Normal N(0, 1) vs N(0.3, 1), n = 10..60, 1000 replications.
StudyConfig preset_table1(std::uint64_t seed);
/// Poisson(3) vs Poisson(3.6), n = 10..60, 1000 replications.
StudyConfig preset_table3(std::uint64_t seed);

/// Bijective 64-bit mix of (master, index); distinct indices never collide.
std::uint64_t derive_substream(std::uint64_t master, std::uint64_t index) noexcept;

/// mt19937_64 with portable uniform, normal and Poisson draws (the standard
/// library distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal by Box-Muller.
  double normal();
  /// Poisson by CDF inversion; means above 30 are split into summed pieces.
  std::uint64_t poisson(double mean);

 private:
  std::uint64_t poisson_small(double mean);

  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// n draws from the family at natural parameter `param`: N(param, sigma^2),
/// Poisson(param), or exp(N(param, 1)).
PopulationSample sample_population(const ModelSpec& model, double param, std::size_t n,
                                   std::uint64_t seed, std::string id = {});

struct ReplicationResult {
  double sqerr_mle = 0.0;
  double sqerr_wle = 0.0;
  std::vector<double> lambda;
};

/// One replication at sample size n: draw both samples, choose weights by
/// leave-one-out, and score MLE and WLE against theta1.
ReplicationResult run_replication(const StudyConfig& cfg, std::size_t n, std::size_t replication);

struct StudyRow {
  std::size_t n = 0;
  double mse_mle = 0.0;
  double sd_sqerr_mle = 0.0;
  double mse_wle = 0.0;
  double sd_sqerr_wle = 0.0;
  double ratio = 0.0;
  std::vector<double> mean_lambda;
  std::vector<double> sd_lambda;
};

struct SimulationReport {
  StudyConfig config;
  std::vector<StudyRow> rows;
};

/// Reduces replication results (in index order) to one row. SDs use n - 1.
StudyRow aggregate(std::size_t n, const std::vector<ReplicationResult>& reps);

/// Replications run on `workers` OpenMP threads (0: runtime default).
/// The report does not depend on the worker count.
SimulationReport run_study(const StudyConfig& cfg, int workers = 0);
/// Single-threaded reference path.
SimulationReport run_study_serial(const StudyConfig& cfg);

std::string report_csv(const SimulationReport& r);
std::string report_json(const SimulationReport& r);
/// Aligned text table; MSE and weight columns scaled by 100.
std::string report_table(const SimulationReport& r);

/// Shortest round-trip decimal form of v.
std::string format_number(double v);

}  // namespace wlecv
