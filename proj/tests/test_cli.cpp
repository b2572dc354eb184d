#include <doctest.h>

#include <sstream>

#include "csc/cli.hpp"
#include "csc/config.hpp"
#include "csc/csv.hpp"
#include "csc/solution_io.hpp"
#include "csc/version.hpp"
#include "test_util.hpp"

using namespace csc;
using namespace csc::testing;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<std::string>> csv_rows(const fs::path & path)
{
  std::istringstream is(read_text(path));
  return read_csv(is);
}

fs::path write_config(const fs::path & dir, const std::string & text)
{
  const fs::path path = dir / "config.toml";
  write_text(path, text);
  return path;
}

}  // namespace

TEST_SUITE("cli")
{
  TEST_CASE("usage errors exit 1")
  {
    CHECK(run_tool({}).code == kExitUsage);
    CHECK(run_tool({"frobnicate"}).code == kExitUsage);
    CHECK(run_tool({"solve"}).code == kExitUsage);
    CHECK(run_tool({"--help"}).code == kExitOk);
  }

  TEST_CASE("solve writes a manifest and a converged solution")
  {
    const auto dir = scratch_dir("cli_solve");
    const auto cfg = write_config(dir, "k_s = 10\n");
    const auto r = run_tool({"solve", "--config", cfg.string(), "--out", (dir / "out").string()});
    INFO(r.err);
    REQUIRE(r.code == kExitOk);
    CHECK(fs::exists(dir / "out" / "manifest.toml"));
    const auto sol = read_solution(dir / "out" / "solution.json");
    CHECK(sol.status == SolveStatus::converged);
    CHECK(r.out.find("capacity_uplink") != std::string::npos);
  }

  TEST_CASE("strict manifest without varsigma is a validation error naming the key")
  {
    const auto dir = scratch_dir("cli_varsigma");
    const auto manifest = render_manifest(parse_config("k_s = 10\n"), {});
    std::istringstream in(manifest);
    std::string text;
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("varsigma", 0) != 0) { text += line + "\n"; }
    }
    const auto cfg = write_config(dir, text);
    const auto r = run_tool({"solve", "--config", cfg.string(), "--out", (dir / "out").string()});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("varsigma") != std::string::npos);
  }

  TEST_CASE("same config and seed give byte-identical solution files")
  {
    const auto dir = scratch_dir("cli_det");
    const auto cfg = write_config(dir, "k_s = 6\nseed = 3\n");
    REQUIRE(run_tool({"solve", "--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
    REQUIRE(run_tool({"solve", "--config", cfg.string(), "--out", (dir / "b").string(), "--jobs", "4"}).code == 0);
    CHECK(read_text(dir / "a" / "solution.json") == read_text(dir / "b" / "solution.json"));
  }

  TEST_CASE("an infeasible problem is a result, not an error")
  {
    const auto dir = scratch_dir("cli_infeasible");
    const auto cfg = write_config(dir, "k_s = 10\nD_0_s = 1e-7\n");
    const auto r = run_tool({"solve", "--config", cfg.string(), "--out", (dir / "out").string()});
    CHECK(r.code == kExitOk);
    CHECK(read_solution(dir / "out" / "solution.json").status == SolveStatus::infeasible);
  }

  TEST_CASE("noiseless lossless simulate replays the expected rollout")
  {
    const auto dir = scratch_dir("cli_replay");
    const auto cfg_path = write_config(dir, "k_s = 10\nsigma = 0\n[sim]\nn_runs = 1\nsim_horizon = 10\n");
    const auto cfg = load_config(cfg_path);
    CodesignSolution sol;
    sol.gains = riccati_gains(cfg.problem, 0.0);
    sol.derived = LoopQoS{0.01, 0.0};
    sol.status = SolveStatus::converged;
    write_solution(dir / "solution.json", sol);
    const auto r = run_tool({"simulate", "--config", cfg_path.string(), "--solution", (dir / "solution.json").string(), "--out",
                             (dir / "out").string()});
    INFO(r.err);
    REQUIRE(r.code == kExitOk);
    const auto rows = csv_rows(dir / "out" / "trajectories.csv");
    const auto x = rollout_expected(cfg.problem, sol.gains, 0.0);
    REQUIRE(rows.size() == x.size() + 1);
    for (std::size_t t = 0; t < x.size(); ++t) {
      CHECK(rows[t + 1][3] == format_number(x[t](0)));
      CHECK(rows[t + 1][4] == format_number(x[t](1)));
      CHECK(rows[t + 1][5] == format_number(x[t](2)));
    }
  }

  TEST_CASE("simulate writes a fully populated summary row")
  {
    const auto dir = scratch_dir("cli_sim");
    const auto cfg = write_config(dir, "k_s = 10\n");
    REQUIRE(run_tool({"solve", "--config", cfg.string(), "--out", (dir / "s").string()}).code == 0);
    const auto r = run_tool({"simulate", "--config", cfg.string(), "--solution", (dir / "s" / "solution.json").string(),
                             "--out", (dir / "m").string(), "--jobs", "3"});
    REQUIRE(r.code == kExitOk);
    const auto rows = csv_rows(dir / "m" / "summary.csv");
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[1].size() == std::size(kSummaryColumns));
    for (const auto & f : rows[1]) { CHECK_FALSE(f.empty()); }
    CHECK(rows[1][12] == "100");
    CHECK(csv_rows(dir / "m" / "trajectories.csv").size() == 1 + 100 * 300);
  }

  TEST_CASE("corrupted solution JSON is a validation error with diagnostics")
  {
    const auto dir = scratch_dir("cli_corrupt");
    const auto cfg = write_config(dir, "k_s = 10\n");
    write_text(dir / "bad.json", "{\"tool_version\": \"1.0.0\", \"status\": ");
    const auto r = run_tool({"simulate", "--config", cfg.string(), "--solution", (dir / "bad.json").string(), "--out",
                             (dir / "m").string()});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("parse error") != std::string::npos);
  }

  TEST_CASE("solution from another tool version is refused")
  {
    const auto dir = scratch_dir("cli_version");
    const auto cfg = write_config(dir, "k_s = 10\n");
    CodesignSolution sol;
    sol.gains = GainSchedule::zeros(10);
    std::string text = solution_to_json(sol);
    text.replace(text.find(kToolVersion), std::string(kToolVersion).size(), "0.9.0");
    write_text(dir / "old.json", text);
    const auto r = run_tool({"simulate", "--config", cfg.string(), "--solution", (dir / "old.json").string(), "--out",
                             (dir / "m").string()});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("0.9.0") != std::string::npos);
  }

  TEST_CASE("k_s sweep writes one summary row per value")
  {
    const auto dir = scratch_dir("cli_sweep");
    const auto cfg = write_config(dir, "k_s = 10\n[sim]\nn_runs = 3\nsim_horizon = 60\n");
    const auto r = run_tool({"sweep", "--config", cfg.string(), "--out", (dir / "k").string(), "--param", "k_s", "--values",
                             "2,6,10,14,17"});
    INFO(r.err);
    REQUIRE(r.code == kExitOk);
    const auto rows = csv_rows(dir / "k" / "summary.csv");
    CHECK(rows.size() == 6);
    CHECK(fs::exists(dir / "k" / "k_s_17" / "solution.json"));
    CHECK(fs::exists(dir / "k" / "k_s_17" / "trajectories.csv"));
    CHECK(fs::exists(dir / "k" / "manifest.toml"));
  }

  TEST_CASE("W_0 sweep accepts scientific notation")
  {
    const auto dir = scratch_dir("cli_sweep_w");
    const auto cfg = write_config(dir, "k_s = 10\n[sim]\nn_runs = 2\nsim_horizon = 40\n");
    const auto r = run_tool({"sweep", "--config", cfg.string(), "--out", (dir / "w").string(), "--param", "W_0", "--values",
                             "0.5e6, 1e6,1.5e6"});
    REQUIRE(r.code == kExitOk);
    const auto rows = csv_rows(dir / "w" / "summary.csv");
    REQUIRE(rows.size() == 4);
    CHECK(std::stod(rows[1][1]) == 5e5);
    CHECK(std::stod(rows[3][1]) == 1.5e6);
  }

  TEST_CASE("unknown sweep parameter lists the valid names")
  {
    const auto dir = scratch_dir("cli_param");
    const auto cfg = write_config(dir, "k_s = 10\n");
    const auto r = run_tool({"sweep", "--config", cfg.string(), "--out", (dir / "x").string(), "--param", "sigma", "--values",
                             "1"});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("k_s, W_0, D_0") != std::string::npos);
    const auto bad = run_tool({"sweep", "--config", cfg.string(), "--out", (dir / "x").string(), "--param", "k_s", "--values",
                               "2,,3"});
    CHECK(bad.code == kExitUsage);
  }

  TEST_CASE("validate passes on the default config")
  {
    const auto dir = scratch_dir("cli_validate");
    const auto cfg = write_config(dir, "k_s = 10\n");
    const auto r = run_tool({"validate", "--config", cfg.string(), "--out", (dir / "v").string()});
    INFO(r.out);
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(read_text(dir / "v" / "validation.json").find("\"passed\": true") != std::string::npos);
  }

  TEST_CASE("validate flags a non-PSD weight and exits nonzero")
  {
    const auto dir = scratch_dir("cli_psd");
    const auto cfg = write_config(dir, "k_s = 10\n[weights]\nP = [[1,0,0],[0,-1,0],[0,0,1]]\nS = \"identity\"\n");
    const auto r = run_tool({"validate", "--config", cfg.string()});
    CHECK(r.code == kExitValidation);
    CHECK(r.out.find("FAIL weights_psd") != std::string::npos);
  }

  TEST_CASE("validate exercises the tandem branch boundary when theta_d = theta_u")
  {
    const auto dir = scratch_dir("cli_theta");
    const auto cfg = write_config(dir, "k_s = 10\ntheta_d = 0.001\n");
    const auto r = run_tool({"validate", "--config", cfg.string()});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("PASS tandem_continuity") != std::string::npos);
  }
}
