#include "csc/solution_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "csc/version.hpp"

namespace csc {

namespace {

using nlohmann::ordered_json;

ordered_json num(double v)
{
  if (std::isnan(v)) { return "nan"; }
  if (std::isinf(v)) { return v > 0 ? "inf" : "-inf"; }
  return v;
}

double get_num(const ordered_json & j, const char * key)
{
  if (!j.contains(key)) { throw SolutionFormatError(std::string("solution: missing field '") + key + "'"); }
  const auto & v = j.at(key);
  if (v.is_number()) { return v.get<double>(); }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") { return std::numeric_limits<double>::infinity(); }
    if (s == "-inf") { return -std::numeric_limits<double>::infinity(); }
    if (s == "nan") { return std::numeric_limits<double>::quiet_NaN(); }
  }
  throw SolutionFormatError(std::string("solution: field '") + key + "' is not a number");
}

const ordered_json & get_obj(const ordered_json & j, const char * key)
{
  if (!j.contains(key) || !j.at(key).is_object()) {
    throw SolutionFormatError(std::string("solution: missing object '") + key + "'");
  }
  return j.at(key);
}

ordered_json queue_json(const QueueQoS & q)
{
  return ordered_json{{"C", num(q.C)}, {"eps", num(q.eps)}, {"D_max", num(q.D_max)}, {"theta", num(q.theta)}};
}

QueueQoS queue_from(const ordered_json & j)
{
  return QueueQoS{get_num(j, "C"), get_num(j, "eps"), get_num(j, "D_max"), get_num(j, "theta")};
}

}  // namespace

std::string solution_to_json(const CodesignSolution & sol)
{
  ordered_json j;
  j["tool_version"] = kToolVersion;
  j["status"] = to_string(sol.status);
  j["cost_J"] = num(sol.cost_J);
  j["resources"] = {{"W_u", num(sol.resources.W_u)},
                    {"W_d", num(sol.resources.W_d)},
                    {"eps_u", num(sol.resources.eps_u)},
                    {"eps_d", num(sol.resources.eps_d)}};
  j["derived"] = {{"D_c_max", num(sol.derived.D_c_max)}, {"eps_c", num(sol.derived.eps_c)}};
  j["uplink"] = queue_json(sol.uplink);
  j["downlink"] = queue_json(sol.downlink);
  j["lambda_u"] = num(sol.lambda_u);
  j["lambda_d"] = num(sol.lambda_d);
  j["link_infeasible"] = sol.link_infeasible;
  ordered_json res = ordered_json::object();
  for (const char * name : kResidualNames) {
    if (auto it = sol.residuals.find(name); it != sol.residuals.end()) { res[name] = num(it->second); }
  }
  j["residuals"] = res;
  ordered_json gains = ordered_json::array();
  for (const auto & k : sol.gains.gains) { gains.push_back({num(k(0)), num(k(1)), num(k(2))}); }
  j["gains"] = gains;
  j["stats"] = {{"grid_points", sol.stats.grid_points},
                {"comms_feasible_points", sol.stats.comms_feasible_points},
                {"inner_solves", sol.stats.inner_solves},
                {"refine_moves", sol.stats.refine_moves},
                {"final_inner_iterations", sol.stats.final_inner_iterations},
                {"gradient_check_error", num(sol.stats.gradient_check_error)}};
  return j.dump(2) + "\n";
}

CodesignSolution solution_from_json(const std::string & text)
{
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error & e) {
    throw SolutionFormatError(std::string("solution: JSON parse error: ") + e.what());
  }
  if (!j.is_object()) { throw SolutionFormatError("solution: top level is not an object"); }
  if (!j.contains("tool_version") || !j["tool_version"].is_string()) {
    throw SolutionFormatError("solution: missing 'tool_version'");
  }
  const auto version = j["tool_version"].get<std::string>();
  if (version != kToolVersion) {
    throw SolutionFormatError("solution: written by tool version " + version + ", this tool is " + kToolVersion +
                              "; re-run solve");
  }

  CodesignSolution sol;
  try {
    if (!j.contains("status") || !j["status"].is_string()) { throw SolutionFormatError("solution: missing 'status'"); }
    sol.status = solve_status_from_string(j["status"].get<std::string>());
  } catch (const std::invalid_argument & e) {
    throw SolutionFormatError(std::string("solution: ") + e.what());
  }
  sol.cost_J = get_num(j, "cost_J");
  const auto & r = get_obj(j, "resources");
  sol.resources = ResourceAllocation{get_num(r, "W_u"), get_num(r, "W_d"), get_num(r, "eps_u"), get_num(r, "eps_d")};
  const auto & d = get_obj(j, "derived");
  sol.derived = LoopQoS{get_num(d, "D_c_max"), get_num(d, "eps_c")};
  sol.uplink = queue_from(get_obj(j, "uplink"));
  sol.downlink = queue_from(get_obj(j, "downlink"));
  sol.lambda_u = get_num(j, "lambda_u");
  sol.lambda_d = get_num(j, "lambda_d");
  sol.link_infeasible = j.value("link_infeasible", false);
  const auto & res = get_obj(j, "residuals");
  for (const auto & [name, value] : res.items()) { sol.residuals[name] = get_num(res, name.c_str()); }

  if (!j.contains("gains") || !j["gains"].is_array() || j["gains"].empty()) {
    throw SolutionFormatError("solution: 'gains' must be a non-empty array");
  }
  for (const auto & row : j["gains"]) {
    if (!row.is_array() || row.size() != 3 || !row[0].is_number() || !row[1].is_number() || !row[2].is_number()) {
      throw SolutionFormatError("solution: each gain must be an array of 3 numbers");
    }
    sol.gains.gains.emplace_back(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
  }
  if (j.contains("stats") && j["stats"].is_object()) {
    const auto & s = j["stats"];
    sol.stats.grid_points = s.value("grid_points", 0);
    sol.stats.comms_feasible_points = s.value("comms_feasible_points", 0);
    sol.stats.inner_solves = s.value("inner_solves", 0);
    sol.stats.refine_moves = s.value("refine_moves", 0);
    sol.stats.final_inner_iterations = s.value("final_inner_iterations", 0);
    if (s.contains("gradient_check_error")) { sol.stats.gradient_check_error = get_num(s, "gradient_check_error"); }
  }
  return sol;
}

void write_solution(const std::filesystem::path & path, const CodesignSolution & sol)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) { throw std::runtime_error("cannot write '" + path.string() + "'"); }
  out << solution_to_json(sol);
}

CodesignSolution read_solution(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw SolutionFormatError("cannot read solution file '" + path.string() + "'"); }
  std::ostringstream ss;
  ss << in.rdbuf();
  return solution_from_json(ss.str());
}

}  // namespace csc
