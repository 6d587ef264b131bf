#include "wlecv/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "csv_util.hpp"
#include "wlecv/cv_closed.hpp"
#include "wlecv/cv_generic.hpp"
#include "wlecv/error.hpp"
#include "wlecv/mapping.hpp"
#include "wlecv/sim.hpp"
#include "wlecv/wle.hpp"

namespace wlecv {

namespace {

using nlohmann::ordered_json;

// Thrown for inconsistent flag combinations found after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SampleArgs {
  std::string input;
  std::string scheme;
  std::string model = "normal";
  std::optional<double> delta;
  bool clip = false;
  bool truncate = false;
  std::string emit = "json";
};

struct SimulateArgs {
  std::string preset;
  std::string family = "normal";
  double theta1 = 0.0;
  double theta2 = 0.3;
  double sigma = 1.0;
  std::vector<std::size_t> n_list;
  std::size_t reps = 1000;
  std::string scheme = "equal-column";
  std::optional<double> delta;
  std::string emit = "table";
  std::string output;
};

struct MapArgs {
  std::string input;
  bool synthetic = false;
  bool inject_outlier = false;
  std::string target;
  double threshold = 0.2;
  std::optional<double> delta;
  bool no_exclude = false;
  std::vector<std::string> exclude;
  double level = 0.95;
  bool truncate = false;
  std::optional<int> weeks_per_year;
  std::string output_dir;
  std::string emit = "json";
};

struct SynthArgs {
  bool inject_outlier = false;
  std::string output;
};

ModelSpec model_from(const std::string& name, double sigma = 1.0) {
  const auto f = parse_family(name);
  if (!f) throw UsageError("unknown model '" + name + "'");
  return ModelSpec{*f, sigma};
}

DeletionScheme scheme_from(const std::string& name) {
  const auto s = parse_scheme(name);
  if (!s) throw UsageError("unknown scheme '" + name + "'");
  return *s;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("WLECV_SEED"); env && *env) {
    std::uint64_t v = 0;
    if (!detail::parse_number(std::string(env), v)) throw UsageError("WLECV_SEED is not an integer");
    return v;
  }
  return kDefaultSeed;
}

struct LoadedSample {
  MultiSample ms;
  DeletionScheme scheme;
};

LoadedSample load_sample(const SampleArgs& a) {
  if (a.scheme.empty()) {
    MultiSample ms = read_samples_csv(a.input, false);
    const auto scheme =
        ms.aligned() ? DeletionScheme::kDeleteOneColumn : DeletionScheme::kDeleteOnePoint;
    return {std::move(ms), scheme};
  }
  const DeletionScheme scheme = scheme_from(a.scheme);
  MultiSample ms = read_samples_csv(a.input, scheme == DeletionScheme::kDeleteOneColumn);
  return {std::move(ms), scheme};
}

ordered_json sample_header(const SampleArgs& a, const ModelSpec& model, DeletionScheme scheme,
                           const MultiSample& ms) {
  std::vector<std::string> ids;
  for (const auto& p : ms.populations()) ids.push_back(p.id());
  return {{"input", a.input},
          {"model", to_string(model.family)},
          {"scheme", to_string(scheme)},
          {"populations", ids}};
}

void emit_weights(std::ostream& out, const std::string& emit, ordered_json doc,
                  const WeightVector& w, const MultiSample& ms) {
  doc["delta"] = w.delta_used;
  doc["lambda"] = w.lambda;
  doc["sum"] = w.sum();
  doc["unique"] = w.unique;
  doc["condition_flag"] = w.condition_flag;
  if (emit == "json") {
    out << doc.dump(2) << '\n';
    return;
  }
  if (emit == "csv") {
    out << "# model=" << doc["model"].get<std::string>()
        << " scheme=" << doc["scheme"].get<std::string>()
        << " delta=" << format_number(w.delta_used) << '\n';
    out << "population,lambda\n";
    for (std::size_t i = 0; i < ms.m(); ++i)
      out << ms[i].id() << ',' << format_number(w.lambda[i]) << '\n';
    for (const auto& [key, value] : doc.items())
      if (key != "lambda" && key != "populations" && key != "model" && key != "scheme" &&
          key != "delta" && key != "input")
        out << "# " << key << '=' << value.dump() << '\n';
    return;
  }
  for (const auto& [key, value] : doc.items())
    if (key != "lambda") out << key << ": " << value.dump() << '\n';
  for (std::size_t i = 0; i < ms.m(); ++i)
    out << "  lambda[" << ms[i].id() << "] = " << format_number(w.lambda[i]) << '\n';
}

int cmd_weights(const SampleArgs& a, bool with_estimate, std::ostream& out) {
  const ModelSpec model = model_from(a.model);
  const LoadedSample s = load_sample(a);
  WeightVector w = select_weights(s.ms, model, s.scheme, a.delta);
  if (a.clip) w = clip_weights(std::move(w));
  ordered_json doc = sample_header(a, model, s.scheme, s.ms);
  doc["clipped"] = a.clip;
  if (with_estimate) {
    const Estimate mle = mle_mean(s.ms.target(), model);
    const Estimate est = wle(s.ms, w.lambda, model, a.truncate);
    doc["mle_theta"] = mle.theta;
    doc["mle_mean"] = mle.phi;
    doc["wle_theta"] = est.theta;
    doc["wle_mean"] = est.phi;
    doc["negative_rate"] = est.negative_rate;
    doc["truncated"] = a.truncate;
  }
  emit_weights(out, a.emit, std::move(doc), w, s.ms);
  return 0;
}

int cmd_oracle(const SampleArgs& a, std::ostream& out) {
  const ModelSpec model = model_from(a.model);
  const LoadedSample s = load_sample(a);
  const WeightVector w = optimize_weights(s.ms, model, s.scheme);
  ordered_json doc = sample_header(a, model, s.scheme, s.ms);
  doc["method"] = "numerical leave-one-out minimization";
  doc["discrepancy"] = loo_discrepancy(s.ms, w.lambda, model, s.scheme);
  emit_weights(out, a.emit, std::move(doc), w, s.ms);
  return 0;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw_data(errc::kIngestError, "cannot write '" + p.string() + "'");
  f << text;
}

int cmd_simulate(const SimulateArgs& a, std::uint64_t seed, int workers, std::ostream& out) {
  StudyConfig cfg;
  if (a.preset == "table1") {
    cfg = preset_table1(seed);
  } else if (a.preset == "table3") {
    cfg = preset_table3(seed);
  } else if (a.preset.empty()) {
    cfg.model = model_from(a.family, a.sigma);
    cfg.theta1 = a.theta1;
    cfg.theta2 = a.theta2;
    cfg.n_list = a.n_list.empty() ? std::vector<std::size_t>{10, 20, 30, 40, 50, 60} : a.n_list;
    cfg.master_seed = seed;
  } else {
    throw UsageError("unknown preset '" + a.preset + "'");
  }
  if (!a.n_list.empty()) cfg.n_list = a.n_list;
  cfg.replications = a.reps;
  cfg.scheme = scheme_from(a.scheme);
  cfg.delta = a.delta;
  const SimulationReport r = run_study(cfg, workers);
  std::string text;
  if (a.emit == "csv")
    text = report_csv(r);
  else if (a.emit == "json")
    text = report_json(r);
  else
    text = report_table(r);
  if (a.output.empty())
    out << text;
  else
    write_file(a.output, text);
  return 0;
}

std::map<int, std::set<int>> parse_exclusions(const std::vector<std::string>& items) {
  std::map<int, std::set<int>> out;
  for (const auto& item : items) {
    const auto colon = item.find(':');
    int year = 0, week = 0;
    if (colon == std::string::npos || !detail::parse_number(item.substr(0, colon), year) ||
        !detail::parse_number(item.substr(colon + 1), week))
      throw UsageError("--exclude expects YEAR:WEEK, got '" + item + "'");
    out[year].insert(week);
  }
  return out;
}

int cmd_map(const MapArgs& a, std::uint64_t seed, int workers, std::ostream& out) {
  if (a.synthetic == !a.input.empty()) throw UsageError("map needs exactly one of --input or --synthetic");
  std::optional<MappingDataset> ds;
  std::string source;
  if (a.synthetic) {
    SyntheticConfig sc;
    sc.seed = seed;
    sc.inject_outlier = a.inject_outlier;
    ds.emplace(synthetic_dataset(sc));
    source = "synthetic(seed=" + std::to_string(seed) +
             (a.inject_outlier ? ",outlier=year0-week8" : "") + ")";
  } else {
    ds.emplace(ingest_counts(a.input, a.weeks_per_year));
    source = a.input;
  }
  MapOptions opts;
  opts.target = a.target.empty() && a.synthetic ? "R1" : a.target;
  if (opts.target.empty()) throw UsageError("map --input needs --target");
  opts.threshold = a.threshold;
  opts.delta = a.delta;
  opts.auto_exclude = !a.no_exclude;
  opts.manual_exclusions = parse_exclusions(a.exclude);
  opts.level = a.level;
  opts.truncate = a.truncate;
  opts.workers = workers;
  MappingReport r = analyze(*ds, opts);
  r.source = source;
  if (!a.output_dir.empty()) {
    const std::filesystem::path dir(a.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw_data(errc::kIngestError, "cannot create '" + dir.string() + "'");
    write_file(dir / "analysis.json", mapping_json(r));
    write_file(dir / "mse.csv", mapping_mse_csv(r));
    write_file(dir / "intervals.csv", mapping_intervals_csv(r));
    write_file(dir / "correlation_weights.csv", mapping_weights_csv(r));
  }
  if (a.emit == "csv")
    out << mapping_mse_csv(r);
  else if (a.output_dir.empty() || a.emit == "json")
    out << mapping_json(r);
  return 0;
}

int cmd_synth(const SynthArgs& a, std::uint64_t seed, std::ostream& out) {
  SyntheticConfig sc;
  sc.seed = seed;
  sc.inject_outlier = a.inject_outlier;
  const std::string text = dataset_csv(synthetic_dataset(sc));
  if (a.output.empty())
    out << text;
  else
    write_file(a.output, text);
  return 0;
}

void add_sample_options(CLI::App* sub, SampleArgs& a) {
  sub->add_option("--input", a.input, "CSV of population_id,column_index,value rows")->required();
  sub->add_option("--scheme", a.scheme,
                  "equal-column or unequal-point (default: equal-column when sizes agree)");
  sub->add_option("--model", a.model, "normal, poisson or lognormal")->capture_default_str();
  sub->add_option("--delta", a.delta, "stabilizing correction (default: 1e-8*max(1,mean(x1^2)))");
  sub->add_option("--emit", a.emit, "json, csv or table")
      ->check(CLI::IsMember({"json", "csv", "table"}))
      ->capture_default_str();
}

}  // namespace

WeightVector select_weights(const MultiSample& ms, const ModelSpec& model, DeletionScheme scheme,
                            std::optional<double> delta) {
  check_domain(ms, model);
  if (!model.linear()) {
    if (ms.m() == 2 && scheme == DeletionScheme::kDeleteOneColumn)
      return lognormal_weight(ms[0], ms[1]);
    return optimize_weights(ms, model, scheme);
  }
  if (scheme == DeletionScheme::kDeleteOneColumn) return weights_equal_matrix(ms, delta);
  if (ms.m() == 2 && !delta) return weights_unequal_two(ms[0], ms[1]);
  return weights_unequal_matrix(ms, delta.value_or(0.0));
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-validated weighted likelihood estimation"};
  app.name("wlecv");
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  int workers = 0;

  SampleArgs weights_args, wle_args, oracle_args;
  auto* weights = app.add_subcommand("weights", "Leave-one-out weights for a sample file");
  add_sample_options(weights, weights_args);
  weights->add_flag("--clip", weights_args.clip, "clip weights to [0, 1] and renormalize");

  auto* wle_cmd = app.add_subcommand("wle", "Weights plus the weighted likelihood estimate");
  add_sample_options(wle_cmd, wle_args);
  wle_cmd->add_flag("--clip", wle_args.clip, "clip weights to [0, 1] and renormalize");
  wle_cmd->add_flag("--truncate", wle_args.truncate, "set a negative Poisson estimate to zero");

  auto* oracle = app.add_subcommand("oracle", "Numerical minimization of the leave-one-out discrepancy");
  add_sample_options(oracle, oracle_args);

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo comparison of MLE and WLE");
  simulate->add_option("--preset", sim_args.preset, "table1 (normal) or table3 (Poisson)");
  simulate->add_option("--model", sim_args.family, "family for an explicit study")->capture_default_str();
  simulate->add_option("--theta1", sim_args.theta1, "target parameter")->capture_default_str();
  simulate->add_option("--theta2", sim_args.theta2, "second population parameter")->capture_default_str();
  simulate->add_option("--sigma", sim_args.sigma, "normal standard deviation")->capture_default_str();
  simulate->add_option("--n-list", sim_args.n_list, "comma-separated sample sizes")->delimiter(',');
  simulate->add_option("--reps", sim_args.reps, "replications per sample size")->capture_default_str();
  simulate->add_option("--scheme", sim_args.scheme, "equal-column or unequal-point")->capture_default_str();
  simulate->add_option("--delta", sim_args.delta, "fixed correction instead of the per-sample default");
  simulate->add_option("--emit", sim_args.emit, "table, csv or json")
      ->check(CLI::IsMember({"json", "csv", "table"}))
      ->capture_default_str();
  simulate->add_option("--output", sim_args.output, "write to this file instead of stdout");

  MapArgs map_args;
  auto* map = app.add_subcommand("map", "Regional count analysis with neighbor borrowing");
  map->add_option("--input", map_args.input, "weekly or daily count CSV");
  map->add_flag("--synthetic", map_args.synthetic, "analyze a seeded synthetic dataset");
  map->add_flag("--inject-outlier", map_args.inject_outlier, "synthetic: 20x target count in one week");
  map->add_option("--target", map_args.target, "target region id (synthetic default: R1)");
  map->add_option("--threshold", map_args.threshold, "neighbor distance in degrees")->capture_default_str();
  map->add_option("--delta", map_args.delta, "fixed correction instead of the per-sample default");
  map->add_flag("--no-exclude", map_args.no_exclude, "keep k-means outlier weeks");
  map->add_option("--exclude", map_args.exclude, "YEAR:WEEK to drop (repeatable)");
  map->add_option("--level", map_args.level, "predictive interval level")->capture_default_str();
  map->add_flag("--truncate", map_args.truncate, "set negative estimates to zero");
  map->add_option("--weeks-per-year", map_args.weeks_per_year, "season length in weeks");
  map->add_option("--output-dir", map_args.output_dir, "write analysis.json and CSV tables here");
  map->add_option("--emit", map_args.emit, "json or csv (stdout)")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write the synthetic count dataset as CSV");
  synth->add_flag("--inject-outlier", synth_args.inject_outlier, "20x target count in one week");
  synth->add_option("--output", synth_args.output, "write to this file instead of stdout");

  for (auto* sub : {simulate, map, synth})
    sub->add_option("--seed", seed, "master seed (overrides WLECV_SEED; default 42)");
  for (auto* sub : {simulate, map})
    sub->add_option("--workers", workers, "worker threads (default: available parallelism)")
        ->check(CLI::NonNegativeNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (weights->parsed()) return cmd_weights(weights_args, false, out);
    if (wle_cmd->parsed()) return cmd_weights(wle_args, true, out);
    if (oracle->parsed()) return cmd_oracle(oracle_args, out);
    if (simulate->parsed()) return cmd_simulate(sim_args, resolve_seed(seed), workers, out);
    if (map->parsed()) return cmd_map(map_args, resolve_seed(seed), workers, out);
    if (synth->parsed()) return cmd_synth(synth_args, resolve_seed(seed), out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::kData ? 3 : 4;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace wlecv
