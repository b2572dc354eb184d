#include <doctest.h>

#include <limits>
#include <sstream>

#include "csc/config.hpp"
#include "csc/csv.hpp"
#include "csc/solution_io.hpp"
#include "csc/version.hpp"

using namespace csc;

namespace {

std::string replace_line(const std::string & text, const std::string & prefix, const std::string & with)
{
  std::istringstream in(text);
  std::string out;
  std::string line;
  while (std::getline(in, line)) {
    out += line.rfind(prefix, 0) == 0 ? with : line;
    out += "\n";
  }
  return out;
}

std::string strip_annotations(std::string text)
{
  for (const char * tag : {"  # config", "  # default"}) {
    for (auto pos = text.find(tag); pos != std::string::npos; pos = text.find(tag)) { text.erase(pos, std::string(tag).size()); }
  }
  return text;
}

}  // namespace

TEST_SUITE("io")
{
  TEST_CASE("number formatting is shortest round-trip")
  {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.5e6) == "1500000");
    CHECK(format_number(-2.0) == "-2");
    CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
    const double x = 0.1 + 0.2;
    CHECK(std::stod(format_number(x)) == x);
  }

  TEST_CASE("CSV escaping round trips through the reader")
  {
    std::ostringstream os;
    write_csv_row(os, {"plain", "a,b", "say \"hi\"", "", "line\nbreak"});
    write_csv_row(os, {"1", "2"});
    std::istringstream is(os.str());
    const auto rows = read_csv(is);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == std::vector<std::string>{"plain", "a,b", "say \"hi\"", "", "line\nbreak"});
    CHECK(rows[1] == std::vector<std::string>{"1", "2"});
    std::istringstream bad("\"open");
    CHECK_THROWS(read_csv(bad));
  }

  TEST_CASE("trajectory CSV follows the schema and leaves hold steps blank")
  {
    TrajectoryRecord rec;
    rec.run_id = 4;
    rec.T_d = 0.05;
    StepRecord a;
    a.x_true = State(1, 2, 3);
    a.x_hat = State(1.5, 0, 0);
    a.command = -0.25;
    a.eta = 1;
    a.delay_steps = 2;
    a.cum_cost = 14.0;
    StepRecord b = a;
    b.command.reset();
    b.eta.reset();
    rec.steps = {a, b};
    std::ostringstream os;
    write_trajectory_csv(os, {rec});
    std::istringstream is(os.str());
    const auto rows = read_csv(is);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>(std::begin(kTrajectoryColumns), std::end(kTrajectoryColumns)));
    CHECK(rows[1] == std::vector<std::string>{"4", "0", "0", "1", "2", "3", "1.5", "-0.25", "1", "2", "14"});
    CHECK(rows[2][1] == "1");
    CHECK(rows[2][2] == "0.05");
    CHECK(rows[2][7].empty());
    CHECK(rows[2][8].empty());
  }

  TEST_CASE("summary CSV has every column populated")
  {
    SweepRow r;
    r.param = "k_s";
    r.value = 10;
    r.n_runs = 3;
    std::ostringstream os;
    write_summary_csv(os, {r, r});
    std::istringstream is(os.str());
    const auto rows = read_csv(is);
    REQUIRE(rows.size() == 3);
    const std::size_t n = std::size(kSummaryColumns);
    CHECK(rows[0].size() == n);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      REQUIRE(rows[i].size() == n);
      for (const auto & f : rows[i]) { CHECK_FALSE(f.empty()); }
    }
  }

  TEST_CASE("solution JSON round trip")
  {
    const auto p = baseline_problem(10);
    const auto sol = solve(p);
    const std::string text = solution_to_json(sol);
    const auto back = solution_from_json(text);
    CHECK(solution_to_json(back) == text);
    CHECK(back.status == sol.status);
    REQUIRE(back.gains.horizon() == sol.gains.horizon());
    for (int t = 0; t < sol.gains.horizon(); ++t) { CHECK(back.gains.gains[t] == sol.gains.gains[t]); }
    CHECK(back.derived.eps_c == sol.derived.eps_c);
    CHECK(back.cost_J == sol.cost_J);
  }

  TEST_CASE("non-finite values survive the JSON round trip")
  {
    CodesignSolution s;
    s.gains = GainSchedule::zeros(2);
    s.cost_J = std::numeric_limits<double>::infinity();
    s.residuals["cycle_time"] = std::numeric_limits<double>::infinity();
    s.derived.D_c_max = std::numeric_limits<double>::quiet_NaN();
    const auto back = solution_from_json(solution_to_json(s));
    CHECK(std::isinf(back.cost_J));
    CHECK(std::isinf(back.residuals.at("cycle_time")));
    CHECK(std::isnan(back.derived.D_c_max));
  }

  TEST_CASE("corrupted or mismatched solution files are rejected")
  {
    CodesignSolution s;
    s.gains = GainSchedule::zeros(2);
    const std::string good = solution_to_json(s);
    CHECK_THROWS_AS(solution_from_json(good.substr(0, good.size() / 2)), SolutionFormatError);
    CHECK_THROWS_AS(solution_from_json("[]"), SolutionFormatError);
    std::string old = good;
    old.replace(old.find(kToolVersion), std::string(kToolVersion).size(), "0.0.1");
    try {
      solution_from_json(old);
      FAIL("expected throw");
    } catch (const SolutionFormatError & e) {
      CHECK(std::string(e.what()).find("re-run solve") != std::string::npos);
    }
  }

  TEST_CASE("empty config needs k_s and otherwise uses the baseline")
  {
    CHECK_THROWS_WITH_AS(parse_config(""), doctest::Contains("k_s"), ConfigError);
    const auto cfg = parse_config("k_s = 10\n");
    const auto ref = baseline_problem(10);
    CHECK(cfg.problem.plant.A_tilde == ref.plant.A_tilde);
    CHECK(cfg.problem.weights.S == ref.weights.S);
    CHECK(cfg.problem.weights.lyapunov == ref.weights.lyapunov);
    CHECK(cfg.problem.W_0 == 1.5e6);
    CHECK(cfg.problem.D_0 == 0.15);
    CHECK(cfg.problem.link_u.snr == 20.0);
    CHECK(cfg.problem.link_d.e == 0.002);
    CHECK(cfg.sim.n_runs == 100);
    CHECK(cfg.seed == 1);
  }

  TEST_CASE("unknown keys and bad values name the key")
  {
    CHECK_THROWS_WITH_AS(parse_config("k_s = 10\nsigmaa = 1\n"), doctest::Contains("sigmaa"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("k_s = 10\nT_d = -1\n"), doctest::Contains("T_d"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("k_s = 10\nrate_mode = \"paper\"\n"), doctest::Contains("rate_mode"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("k_s = 10\n[weights]\nP = [[1,0,0],[0,-1,0],[0,0,1]]\n"),
                         doctest::Contains("weights.P"), ConfigError);
    CHECK_THROWS_AS(parse_config("k_s = = 3\n"), ConfigError);
  }

  TEST_CASE("lenient parsing keeps a non-PSD weight for the validator")
  {
    const auto cfg = parse_config("k_s = 10\n[weights]\nP = [[1,0,0],[0,-1,0],[0,0,1]]\nS = \"identity\"\n", "<t>",
                                  std::nullopt, true);
    CHECK(cfg.problem.weights.P(1, 1) == -1.0);
  }

  TEST_CASE("manifest is a strict config that reproduces the run")
  {
    const auto cfg = parse_config("k_s = 6\nsigma = 0.5\n[sim]\nn_runs = 7\n", "<t>", 99);
    const std::string manifest = render_manifest(cfg, {{"tool_version", kToolVersion}, {"command", "solve"}});
    CHECK(manifest.find("strict = true") != std::string::npos);
    CHECK(manifest.find("[manifest]") != std::string::npos);
    const auto again = parse_config(manifest);
    CHECK(again.seed == 99);
    CHECK(again.sim.n_runs == 7);
    CHECK(again.problem.sensing.sigma() == 0.5);
    CHECK(strip_annotations(render_manifest(again, {{"tool_version", kToolVersion}, {"command", "solve"}})) ==
          strip_annotations(manifest));
    const std::string no_varsigma = replace_line(manifest, "varsigma = ", "");
    CHECK_THROWS_WITH_AS(parse_config(no_varsigma), doctest::Contains("varsigma"), ConfigError);
  }

  TEST_CASE("seed override replaces the file's seed")
  {
    CHECK(parse_config("k_s = 1\nseed = 5\n").seed == 5);
    CHECK(parse_config("k_s = 1\nseed = 5\n", "<t>", 8).seed == 8);
    CHECK(parse_config("k_s = 1\nseed = 5\n", "<t>", 8).sim.seed == 8);
  }

  TEST_CASE("dB SNR and Rayleigh fading options")
  {
    const auto cfg = parse_config("k_s = 2\nsnr_unit = \"dB\"\nsnr_u = 10\nsnr_model = \"rayleigh\"\nsnr_samples = 50\n");
    CHECK(cfg.problem.link_u.snr == doctest::Approx(10.0));
    CHECK(std::holds_alternative<SampledSnr>(cfg.problem.snr_u));
    CHECK(std::get<SampledSnr>(cfg.problem.snr_u).samples == 50);
  }
}
