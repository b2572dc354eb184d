#pragma once

/**
 * @file
 * @brief RFC-4180 CSV output for trajectories and sweep summaries.
 *
 * Numbers use the shortest decimal form that round-trips, so identical runs
 * produce identical bytes.
 */

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "simloop.hpp"

namespace csc {

inline constexpr const char * kTrajectoryColumns[] = {
  "run_id", "t_index", "time_s", "delta_m", "v_mps", "a_mps2", "delta_hat_m", "command", "eta", "delay_steps", "cum_cost",
};

inline constexpr const char * kSummaryColumns[] = {
  "param",          "value",          "feasible",          "status",           "W_u_hz",
  "W_d_hz",         "eps_u",          "eps_d",             "eps_c",            "D_c_max_s",
  "cost_J",         "worst_residual", "n_runs",            "settling_time_s",  "settling_time_lo_s",
  "settling_time_hi_s", "settled_fraction", "overshoot_m", "overshoot_lo_m",   "overshoot_hi_m",
  "jitter_rms_m",   "jitter_rms_lo_m", "jitter_rms_hi_m",  "abs_delta_check_m", "abs_delta_check_lo_m",
  "abs_delta_check_hi_m", "loss_rate", "loss_se",          "deliveries",       "hold_rate",
};

/// Shortest round-trip decimal; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double v);

/// Quote a field when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);

void write_csv_row(std::ostream & os, const std::vector<std::string> & fields);

void write_trajectory_csv(std::ostream & os, const std::vector<TrajectoryRecord> & runs);

void write_summary_csv(std::ostream & os, const std::vector<SweepRow> & rows);

/// Parse RFC-4180 text into rows of fields.
std::vector<std::vector<std::string>> read_csv(std::istream & is);

}  // namespace csc
