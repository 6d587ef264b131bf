#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "support.hpp"
#include "wlecv/cli.hpp"
#include "wlecv/sim.hpp"

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = wlecv::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string sample_csv(const support::Data& d) {
  std::string s = "population_id,column_index,value\n";
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d[i].size(); ++j)
      s += "p" + std::to_string(i + 1) + "," + std::to_string(j) + "," + wlecv::format_number(d[i][j]) + "\n";
  return s;
}

}  // namespace

TEST_CASE("simulate is reproducible") {
  const std::vector<std::string> args{"simulate", "--preset", "table1", "--reps", "40", "--emit", "csv"};
  const auto a = run(args);
  const auto b = run(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("master_seed=42") != std::string::npos);

  auto seeded = args;
  seeded.insert(seeded.end(), {"--seed", "9"});
  const auto c = run(seeded);
  CHECK(c.out.find("master_seed=9") != std::string::npos);
  CHECK(c.out != a.out);
}

TEST_CASE("WLECV_SEED sets the seed and --seed overrides it") {
  ::setenv("WLECV_SEED", "77", 1);
  const auto env = run({"simulate", "--preset", "table3", "--reps", "10", "--emit", "json"});
  const auto flag = run({"simulate", "--preset", "table3", "--reps", "10", "--emit", "json", "--seed", "5"});
  ::setenv("WLECV_SEED", "junk", 1);
  const auto bad = run({"simulate", "--preset", "table3", "--reps", "10"});
  ::unsetenv("WLECV_SEED");
  CHECK(nlohmann::json::parse(env.out)["config"]["master_seed"] == 77);
  CHECK(nlohmann::json::parse(flag.out)["config"]["master_seed"] == 5);
  CHECK(bad.code == 2);
}

TEST_CASE("exit codes") {
  CHECK(run({"weights", "--input", "/nonexistent/samples.csv"}).code == 3);
  CHECK(run({"weights"}).code == 2);
  CHECK(run({"simulate", "--bogus"}).code == 2);
  CHECK(run({"simulate", "--preset", "table9"}).code == 2);
  CHECK(run({"simulate", "--preset", "table1", "--reps", "0"}).code == 3);
  CHECK(run({"map"}).code == 2);
  CHECK(run({"map", "--synthetic", "--exclude", "1984-3"}).code == 2);
  CHECK(run({"--help"}).code == 0);

  const auto neg = support::temp_file("cli_neg.csv", "p1,0,1\np1,1,-2\np2,0,1\np2,1,1\n");
  CHECK(run({"weights", "--input", neg.string(), "--model", "poisson"}).code == 3);

  std::string huge = "population_id,column_index,value\n";
  for (int i = 1; i <= 3; ++i)
    for (int j = 0; j < 3; ++j) huge += "p" + std::to_string(i) + "," + std::to_string(j) + ",1e308\n";
  const auto h = support::temp_file("cli_huge.csv", huge);
  const auto r = run({"oracle", "--input", h.string(), "--model", "lognormal"});
  CHECK(r.code == 4);
  CHECK(r.err.find("optimization-failed") != std::string::npos);
}

TEST_CASE("weights and oracle agree") {
  support::Gen g(81);
  for (int t = 0; t < 20; ++t) {
    const auto m = static_cast<std::size_t>(g.integer(2, 4));
    const auto n = static_cast<std::size_t>(g.integer(static_cast<int>(m) + 2, 8));
    support::Data d(m);
    for (auto& row : d) row = g.normals(n, g.uniform(-1, 1), 1);
    const auto p = support::temp_file("cli_w" + std::to_string(t) + ".csv", sample_csv(d));
    const auto w = run({"weights", "--input", p.string(), "--delta", "0"});
    const auto o = run({"oracle", "--input", p.string()});
    REQUIRE(w.code == 0);
    REQUIRE(o.code == 0);
    const auto jw = nlohmann::json::parse(w.out);
    const auto jo = nlohmann::json::parse(o.out);
    CHECK(jw["scheme"] == "equal-column");
    CHECK(support::max_abs_diff(jw["lambda"].get<std::vector<double>>(),
                                jo["lambda"].get<std::vector<double>>()) <= 1e-6);
  }

  const auto p = support::temp_file("cli_1517.csv", "p1,0,0\np1,1,2\np2,0,5\np2,1,5\np2,2,5\n");
  const auto w = nlohmann::json::parse(run({"weights", "--input", p.string()}).out);
  CHECK(w["scheme"] == "unequal-point");
  CHECK(w["lambda"][0].get<double>() == doctest::Approx(15.0 / 17.0).epsilon(1e-12));

  const auto e = nlohmann::json::parse(run({"wle", "--input", p.string()}).out);
  CHECK(e["wle_theta"].get<double>() == doctest::Approx(15.0 / 17.0 + 5.0 * 2.0 / 17.0).epsilon(1e-12));
}

TEST_CASE("map writes its tables") {
  const auto dir = std::filesystem::temp_directory_path() / "wlecv_tests" / "map_out";
  std::filesystem::remove_all(dir);
  const auto r = run({"map", "--synthetic", "--inject-outlier", "--output-dir", dir.string()});
  CHECK(r.code == 0);
  for (const char* f : {"analysis.json", "mse.csv", "intervals.csv", "correlation_weights.csv"})
    CHECK(std::filesystem::exists(dir / f));
  const auto j = nlohmann::json::parse(slurp(dir / "analysis.json"));
  CHECK(j["config"]["target"] == "R1");
  CHECK(j["years"].size() == 6);

  const auto csv = support::temp_file("cli_counts.csv", run({"synth", "--seed", "3"}).out);
  const auto from_file = run({"map", "--input", csv.string(), "--target", "R1", "--emit", "csv"});
  const auto synthetic = run({"map", "--synthetic", "--seed", "3", "--emit", "csv"});
  CHECK(from_file.code == 0);
  // Same numbers, different source line.
  CHECK(from_file.out.substr(from_file.out.find('\n')) == synthetic.out.substr(synthetic.out.find('\n')));
  CHECK(run({"map", "--input", csv.string()}).code == 2);
  CHECK(run({"map", "--input", csv.string(), "--target", "R9"}).code == 3);
}
