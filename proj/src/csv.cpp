#include "csc/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace csc {

std::string format_number(double v)
{
  if (std::isnan(v)) { return "nan"; }
  if (std::isinf(v)) { return v > 0 ? "inf" : "-inf"; }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) { throw std::runtime_error("format_number: conversion failed"); }
  return std::string(buf, res.ptr);
}

std::string csv_escape(std::string_view field)
{
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) { return std::string(field); }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') { out += '"'; }
    out += c;
  }
  out += '"';
  return out;
}

void write_csv_row(std::ostream & os, const std::vector<std::string> & fields)
{
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) { os << ','; }
    os << csv_escape(fields[i]);
  }
  os << "\r\n";
}

namespace {

template<std::size_t N>
std::vector<std::string> header(const char * const (&cols)[N])
{
  return std::vector<std::string>(std::begin(cols), std::end(cols));
}

std::string integer(long long v)
{
  return std::to_string(v);
}

}  // namespace

void write_trajectory_csv(std::ostream & os, const std::vector<TrajectoryRecord> & runs)
{
  write_csv_row(os, header(kTrajectoryColumns));
  for (const auto & rec : runs) {
    for (std::size_t t = 0; t < rec.steps.size(); ++t) {
      const auto & r = rec.steps[t];
      write_csv_row(os, {
                          integer(static_cast<long long>(rec.run_id)),
                          integer(static_cast<long long>(t)),
                          format_number(static_cast<double>(t) * rec.T_d),
                          format_number(r.x_true(0)),
                          format_number(r.x_true(1)),
                          format_number(r.x_true(2)),
                          format_number(r.x_hat(0)),
                          r.command ? format_number(*r.command) : std::string{},
                          r.eta ? integer(*r.eta) : std::string{},
                          integer(r.delay_steps),
                          format_number(r.cum_cost),
                        });
    }
  }
}

void write_summary_csv(std::ostream & os, const std::vector<SweepRow> & rows)
{
  write_csv_row(os, header(kSummaryColumns));
  for (const auto & r : rows) {
    write_csv_row(os, {
                        r.param,
                        format_number(r.value),
                        r.feasible ? "true" : "false",
                        to_string(r.status),
                        format_number(r.W_u),
                        format_number(r.W_d),
                        format_number(r.eps_u),
                        format_number(r.eps_d),
                        format_number(r.eps_c),
                        format_number(r.D_c_max),
                        format_number(r.cost_J),
                        format_number(r.worst_residual),
                        integer(r.n_runs),
                        format_number(r.settling_time_s.mean),
                        format_number(r.settling_time_s.lo),
                        format_number(r.settling_time_s.hi),
                        format_number(r.settled_fraction),
                        format_number(r.overshoot_m.mean),
                        format_number(r.overshoot_m.lo),
                        format_number(r.overshoot_m.hi),
                        format_number(r.jitter_rms_m.mean),
                        format_number(r.jitter_rms_m.lo),
                        format_number(r.jitter_rms_m.hi),
                        format_number(r.abs_delta_check_m.mean),
                        format_number(r.abs_delta_check_m.lo),
                        format_number(r.abs_delta_check_m.hi),
                        format_number(r.loss_rate),
                        format_number(r.loss_se),
                        integer(r.deliveries),
                        format_number(r.hold_rate),
                      });
  }
}

std::vector<std::vector<std::string>> read_csv(std::istream & is)
{
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c = 0;
  while (is.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (is.peek() == '"') {
          is.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) { throw std::runtime_error("read_csv: unterminated quoted field"); }
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace csc
