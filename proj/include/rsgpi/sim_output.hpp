// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_SIM_OUTPUT_HPP
#define RSGPI_SIM_OUTPUT_HPP

// Serialization of sweep results: records CSV, JSON aggregate, plot data, and
// the JSON form of an experiment spec.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsgpi/sim_harness.hpp"

namespace rsgpi
{

using json = nlohmann::json;

inline constexpr const char *kRecordsHeader = "trial,seed,snr_db,method,sum_se,common_rate,private_rates_json,"
                                              "partial_rates_json,iterations,alpha_final,converged,wall_time_ms";

/// Shortest-safe round-trip text for a double.
inline std::string format_double(double v)
{
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string &s)
{
  if (s == "nan" || s == "null")
    return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size())
    throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline std::string rates_json(const std::vector<double> &v)
{
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i)
  {
    if (i)
      s += ',';
    s += std::isfinite(v[i]) ? format_double(v[i]) : "null";
  }
  return s + "]";
}

inline std::string csv_quote(const std::string &s)
{
  std::string out = "\"";
  for (char c : s)
  {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_records_csv(std::ostream &os, const std::vector<TrialRecord> &records)
{
  os << kRecordsHeader << '\n';
  for (const auto &r : records)
  {
    os << r.trial_index << ',' << r.seed << ',' << format_double(r.snr_db) << ',' << method_name(r.method) << ','
       << format_double(r.sum_se_bits) << ',' << format_double(r.common_rate) << ','
       << csv_quote(rates_json(r.private_rates)) << ',' << csv_quote(rates_json(r.partial_rates)) << ','
       << r.iterations << ',' << format_double(r.alpha_final) << ',' << (r.converged ? "true" : "false") << ','
       << format_double(r.wall_time_ms) << '\n';
  }
}

/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
inline std::vector<std::string> split_csv_line(const std::string &line)
{
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i)
  {
    const char c = line[i];
    if (quoted)
    {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"')
      {
        cur += '"';
        ++i;
      }
      else if (c == '"')
        quoted = false;
      else
        cur += c;
    }
    else if (c == '"')
      quoted = true;
    else if (c == ',')
    {
      cells.push_back(std::move(cur));
      cur.clear();
    }
    else
      cur += c;
  }
  cells.push_back(std::move(cur));
  return cells;
}

inline std::vector<double> parse_rates_json(const std::string &s)
{
  std::vector<double> out;
  for (const auto &v : json::parse(s))
    out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  return out;
}

inline std::vector<TrialRecord> read_records_csv(std::istream &is)
{
  std::string line;
  if (!std::getline(is, line) || line != kRecordsHeader)
    throw std::runtime_error("records CSV: missing or unexpected header");
  std::vector<TrialRecord> out;
  int lineno = 1;
  while (std::getline(is, line))
  {
    ++lineno;
    if (line.empty())
      continue;
    const auto c = split_csv_line(line);
    if (c.size() != 12)
      throw std::runtime_error("records CSV line " + std::to_string(lineno) + ": expected 12 fields");
    TrialRecord r;
    r.trial_index = std::stoi(c[0]);
    r.seed = std::stoull(c[1]);
    r.snr_db = parse_double(c[2]);
    r.method = parse_method(c[3]);
    r.sum_se_bits = parse_double(c[4]);
    r.common_rate = parse_double(c[5]);
    r.private_rates = parse_rates_json(c[6]);
    r.partial_rates = parse_rates_json(c[7]);
    r.iterations = std::stoi(c[8]);
    r.alpha_final = parse_double(c[9]);
    r.converged = c[10] == "true";
    r.wall_time_ms = parse_double(c[11]);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spec <-> JSON
// ---------------------------------------------------------------------------

inline json spec_to_json(const ExperimentSpec &s)
{
  json sys = {{"n", s.system.antennas},
              {"k", s.system.users},
              {"groups", s.system.groups},
              {"angular_spread", s.system.angular_spread},
              {"fixed_aoa", s.system.fixed_aoa},
              {"noise_power", s.system.noise_power},
              {"snr_db", s.system.snr_db},
              {"tau_p", s.system.tau_p},
              {"quad_points", s.system.quad_points}};
  json solver = {{"epsilon", s.solver.epsilon},
                 {"max_iters_per_alpha", s.solver.max_iters_per_alpha},
                 {"alpha_init_low_snr", s.solver.alpha_init_low_snr},
                 {"alpha_init_high_snr", s.solver.alpha_init_high_snr},
                 {"snr_threshold_db", s.solver.snr_threshold_db},
                 {"alpha_step", s.solver.alpha_step},
                 {"alpha_max", s.solver.alpha_max}};
  if (s.solver.alpha_init)
    solver["alpha_init"] = *s.solver.alpha_init;
  json methods = json::array();
  for (Method m : s.methods)
    methods.push_back(method_name(m));
  return {{"system", sys},     {"solver", solver},         {"methods", methods},
          {"trials", s.trials}, {"base_seed", s.base_seed}, {"threads", s.threads}};
}

/// Fields present in `j` overwrite the corresponding fields of `base`.
inline ExperimentSpec spec_from_json(const json &j, ExperimentSpec base = {})
{
  if (j.contains("system"))
  {
    const json &s = j.at("system");
    auto &y = base.system;
    if (s.contains("n"))
      y.antennas = s.at("n").get<int>();
    if (s.contains("k"))
      y.users = s.at("k").get<int>();
    if (s.contains("groups"))
      y.groups = s.at("groups").get<std::vector<std::vector<int>>>();
    if (s.contains("angular_spread"))
      y.angular_spread = s.at("angular_spread").get<double>();
    if (s.contains("fixed_aoa"))
      y.fixed_aoa = s.at("fixed_aoa").get<std::vector<double>>();
    if (s.contains("noise_power"))
      y.noise_power = s.at("noise_power").get<double>();
    if (s.contains("snr_db"))
      y.snr_db = s.at("snr_db").get<std::vector<double>>();
    if (s.contains("tau_p"))
      y.tau_p = s.at("tau_p").get<double>();
    if (s.contains("quad_points"))
      y.quad_points = s.at("quad_points").get<int>();
  }
  if (j.contains("solver"))
  {
    const json &s = j.at("solver");
    auto &c = base.solver;
    if (s.contains("epsilon"))
      c.epsilon = s.at("epsilon").get<double>();
    if (s.contains("max_iters_per_alpha"))
      c.max_iters_per_alpha = s.at("max_iters_per_alpha").get<int>();
    if (s.contains("alpha_init_low_snr"))
      c.alpha_init_low_snr = s.at("alpha_init_low_snr").get<double>();
    if (s.contains("alpha_init_high_snr"))
      c.alpha_init_high_snr = s.at("alpha_init_high_snr").get<double>();
    if (s.contains("snr_threshold_db"))
      c.snr_threshold_db = s.at("snr_threshold_db").get<double>();
    if (s.contains("alpha_step"))
      c.alpha_step = s.at("alpha_step").get<double>();
    if (s.contains("alpha_max"))
      c.alpha_max = s.at("alpha_max").get<double>();
    if (s.contains("alpha_init"))
      c.alpha_init = s.at("alpha_init").get<double>();
  }
  if (j.contains("methods"))
  {
    base.methods.clear();
    for (const auto &m : j.at("methods"))
      base.methods.push_back(parse_method(m.get<std::string>()));
  }
  if (j.contains("trials"))
    base.trials = j.at("trials").get<int>();
  if (j.contains("base_seed"))
    base.base_seed = j.at("base_seed").get<std::uint64_t>();
  if (j.contains("threads"))
    base.threads = j.at("threads").get<int>();
  return base;
}

inline ExperimentSpec load_spec_file(const std::filesystem::path &path, ExperimentSpec base = {})
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open config file " + path.string());
  try
  {
    return spec_from_json(json::parse(in), std::move(base));
  }
  catch (const json::exception &e)
  {
    throw std::runtime_error("config file " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Aggregate and plot data
// ---------------------------------------------------------------------------

/// {"config": spec echo, "cells": [{snr_db, method, count, failures,
/// converged, mean_sum_se, stderr_sum_se, mean_common_rate}, ...]}
inline json aggregate_json(const ExperimentSpec &spec, const std::vector<CellStats> &cells)
{
  json arr = json::array();
  for (const auto &c : cells)
    arr.push_back({{"snr_db", c.snr_db},
                   {"method", method_name(c.method)},
                   {"count", c.count},
                   {"failures", c.failures},
                   {"converged", c.converged},
                   {"mean_sum_se", c.mean},
                   {"stderr_sum_se", c.stderr_},
                   {"mean_common_rate", c.mean_common}});
  return {{"config", spec_to_json(spec)}, {"cells", arr}};
}

/// Whitespace table: x column then one mean and one stderr column per method.
inline void write_plot_data(std::ostream &os, const std::string &x_label, const std::vector<double> &xs,
                            const std::vector<Method> &methods,
                            const std::vector<std::vector<CellStats>> &cells_per_x)
{
  os << "# " << x_label;
  for (Method m : methods)
    os << ' ' << method_name(m) << ' ' << method_name(m) << "_stderr";
  os << '\n';
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    os << format_double(xs[i]);
    for (Method m : methods)
    {
      const CellStats *hit = nullptr;
      for (const auto &c : cells_per_x[i])
        if (c.method == m)
          hit = &c;
      os << ' ' << format_double(hit ? hit->mean : std::nan("")) << ' '
         << format_double(hit ? hit->stderr_ : std::nan(""));
    }
    os << '\n';
  }
}

namespace detail
{

inline std::ofstream open_out(const std::filesystem::path &p)
{
  std::ofstream os(p, std::ios::binary);
  if (!os)
    throw std::runtime_error("cannot write " + p.string());
  return os;
}

} // namespace detail

/// Writes records.csv, aggregate.json and plot_sum_se.dat (SNR on x) into
/// `dir`, creating it if needed.
inline void emit_outputs(const ExperimentSpec &spec, const SweepResult &res, const std::filesystem::path &dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  {
    auto os = detail::open_out(dir / "records.csv");
    write_records_csv(os, res.records);
  }
  {
    auto os = detail::open_out(dir / "aggregate.json");
    os << aggregate_json(spec, res.cells).dump(2) << '\n';
  }
  {
    std::vector<std::vector<CellStats>> per_snr;
    for (double snr : spec.system.snr_db)
    {
      per_snr.emplace_back();
      for (const auto &c : res.cells)
        if (c.snr_db == snr)
          per_snr.back().push_back(c);
    }
    auto os = detail::open_out(dir / "plot_sum_se.dat");
    write_plot_data(os, "snr_db", spec.system.snr_db, spec.methods, per_snr);
  }
}

/// iteration, residual, objective_bits, lambda_log2, alpha.
inline void write_trace_csv(std::ostream &os, const GpiReport &rep)
{
  os << "iteration,residual,objective_bits,lambda_log2,alpha\n";
  for (std::size_t i = 0; i < rep.residual_trace.size(); ++i)
    os << (i + 1) << ',' << format_double(rep.residual_trace[i]) << ',' << format_double(rep.objective_trace[i])
       << ',' << format_double(rep.lambda_trace[i]) << ',' << format_double(rep.alpha_trace[i]) << '\n';
}

inline json report_json(const GpiReport &rep)
{
  json fbar = json::array();
  for (Eigen::Index i = 0; i < rep.fbar_star.fbar.size(); ++i)
    fbar.push_back({rep.fbar_star.fbar(i).real(), rep.fbar_star.fbar(i).imag()});
  const MessagePrecoders mp = extract_precoders(rep.fbar_star);
  return {{"objective_bits", rep.objective_bits},
          {"lambda_log2", rep.lambda_log2},
          {"alpha_final", rep.alpha_final},
          {"iterations", rep.iterations},
          {"converged", rep.converged},
          {"alpha_history", rep.alpha_history},
          {"sum_se", rep.rate_breakdown.sum},
          {"common_rate", rep.rate_breakdown.common_rate},
          {"partial_rates", rep.rate_breakdown.partial_rates},
          {"private_rates", rep.rate_breakdown.private_rates},
          {"power_fractions", mp.power_fractions},
          {"antennas", rep.fbar_star.layout.antennas},
          {"messages", rep.fbar_star.layout.messages},
          {"fbar", fbar},
          {"residual_trace", rep.residual_trace}};
}

} // namespace rsgpi

#endif // RSGPI_SIM_OUTPUT_HPP
