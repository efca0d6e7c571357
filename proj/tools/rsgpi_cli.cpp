// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

// rsgpi: covariance dumps, single solves, Monte Carlo sweeps, convergence
// traces and instance audits from the command line.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsgpi/oracles.hpp"
#include "rsgpi/rsgpi.hpp"

namespace fs = std::filesystem;
using namespace rsgpi;

namespace
{

// "1,2;3,4" (1-based users) -> {{0,1},{2,3}}.
std::vector<std::vector<int>> parse_groups(const std::string &text)
{
  std::vector<std::vector<int>> out;
  std::stringstream groups(text);
  std::string grp;
  while (std::getline(groups, grp, ';'))
  {
    if (grp.empty())
      continue;
    std::vector<int> members;
    std::stringstream ss(grp);
    std::string tok;
    while (std::getline(ss, tok, ','))
    {
      if (tok.empty())
        continue;
      const int u = std::stoi(tok);
      if (u < 1)
        throw std::invalid_argument("--groups: users are numbered from 1");
      members.push_back(u - 1);
    }
    out.push_back(std::move(members));
  }
  return out;
}

struct Flags
{
  std::string config;
  int n = 0;
  int k = 0;
  std::string groups;
  std::vector<double> snr_db;
  double taup = 0.0;
  std::vector<double> taup_list;
  int trials = 0;
  std::uint64_t seed = 0;
  double alpha_init = 0.0;
  double epsilon = 0.0;
  double spread = 0.0;
  std::string methods;
  std::string out;
  int threads = 0;
  bool no_timing = false;

  CLI::Option *o_n = nullptr, *o_k = nullptr, *o_groups = nullptr, *o_snr = nullptr, *o_taup = nullptr,
              *o_trials = nullptr, *o_seed = nullptr, *o_alpha = nullptr, *o_eps = nullptr, *o_spread = nullptr,
              *o_methods = nullptr, *o_threads = nullptr;
};

void add_common(CLI::App *app, Flags &f)
{
  app->add_option("--config", f.config, "JSON experiment file; flags override its fields")->check(CLI::ExistingFile);
  f.o_n = app->add_option("--n", f.n, "transmit antennas")->check(CLI::PositiveNumber);
  f.o_k = app->add_option("--k", f.k, "users")->check(CLI::PositiveNumber);
  f.o_groups = app->add_option("--groups", f.groups, "partial-common groups, 1-based, e.g. \"1,2;3,4\"");
  f.o_snr = app->add_option("--snr-db", f.snr_db, "SNR grid in dB")->delimiter(',');
  f.o_taup = app->add_option("--taup", f.taup, "pilot length times pilot power")->check(CLI::PositiveNumber);
  f.o_trials = app->add_option("--trials", f.trials, "Monte Carlo trials (100 smoke, 1000 full)");
  f.o_seed = app->add_option("--seed", f.seed, "base seed");
  f.o_alpha = app->add_option("--alpha-init", f.alpha_init, "initial smoothing parameter");
  f.o_eps = app->add_option("--epsilon", f.epsilon, "residual threshold");
  f.o_spread = app->add_option("--spread", f.spread, "angular spread in radians");
  f.o_methods = app->add_option("--methods", f.methods, "comma list of GPI_RS,GPI_RS_1L,SDMA_GPI,RZF,MRT");
  f.o_threads = app->add_option("--threads", f.threads, "worker threads");
  app->add_option("--out", f.out, "output directory (file for solve/trace/verify)");
  app->add_flag("--no-timing", f.no_timing, "write 0 in the wall_time_ms column");
}

ExperimentSpec build_spec(const Flags &f, ExperimentSpec base)
{
  if (!f.config.empty())
    base = load_spec_file(f.config, std::move(base));
  auto &s = base.system;
  if (f.o_n->count())
    s.antennas = f.n;
  if (f.o_k->count())
  {
    s.users = f.k;
    if (!s.fixed_aoa.empty() && static_cast<int>(s.fixed_aoa.size()) != s.users)
      s.fixed_aoa.clear();
  }
  if (f.o_groups->count())
    s.groups = parse_groups(f.groups);
  if (f.o_snr->count())
    s.snr_db = f.snr_db;
  if (f.o_taup->count())
    s.tau_p = f.taup;
  if (f.o_spread->count())
    s.angular_spread = f.spread;
  if (f.o_trials->count())
    base.trials = f.trials;
  if (f.o_seed->count())
    base.base_seed = f.seed;
  if (f.o_alpha->count())
    base.solver.alpha_init = f.alpha_init;
  if (f.o_eps->count())
    base.solver.epsilon = f.epsilon;
  if (f.o_threads->count())
    base.threads = f.threads;
  if (f.o_methods->count())
  {
    base.methods.clear();
    std::stringstream ss(f.methods);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty())
        base.methods.push_back(parse_method(tok));
  }
  if (f.no_timing)
    base.record_timing = false;
  base.output_path = f.out;
  for (const auto &g : base.system.groups)
    for (int u : g)
      if (u >= base.system.users)
        throw std::invalid_argument("--groups: user " + std::to_string(u + 1) + " exceeds K = " +
                                    std::to_string(base.system.users));
  base.validate();
  return base;
}

// Writes to `path`, or stdout when empty.
template <typename Fn> void write_to(const std::string &path, Fn &&fn)
{
  if (path.empty())
  {
    fn(std::cout);
    return;
  }
  if (fs::path(path).has_parent_path())
    fs::create_directories(fs::path(path).parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw std::runtime_error("cannot write " + path);
  fn(os);
}

Problem instance(const ExperimentSpec &spec, int snr_index = 0)
{
  const TrialChannels ch = draw_trial_channels(spec.system, spec.base_seed, 0);
  return Problem::from_states(ch.states, spec.system.message_set(), snr_inv_of(spec.system, spec.system.snr_db.at(snr_index)));
}

void print_cells(const std::vector<CellStats> &cells)
{
  for (const auto &c : cells)
    std::cerr << "snr " << c.snr_db << " dB  " << method_name(c.method) << "  mean " << c.mean << "  stderr "
              << c.stderr_ << "  (" << c.count << " ok, " << c.failures << " failed, " << c.converged
              << " converged)\n";
}

int run_covariance(int n, double aoa, double spread, int quad, const std::string &out)
{
  const OneRingGeometry geom{n, aoa, spread};
  const SpatialCovariance r = build_one_ring_covariance(geom, quad);
  json re = json::array(), im = json::array();
  for (int i = 0; i < n; ++i)
  {
    json rr = json::array(), ri = json::array();
    for (int j = 0; j < n; ++j)
    {
      rr.push_back(r.matrix(i, j).real());
      ri.push_back(r.matrix(i, j).imag());
    }
    re.push_back(rr);
    im.push_back(ri);
  }
  const json doc = {{"n", n}, {"aoa", aoa}, {"angular_spread", spread}, {"real", re}, {"imag", im}};
  write_to(out, [&](std::ostream &os) { os << doc.dump(2) << '\n'; });
  return 0;
}

int run_sweep_csit(const ExperimentSpec &base, const std::vector<double> &taus, const fs::path &out)
{
  // One complete sweep per tau_p; plot files put tau_p on x, one per SNR.
  std::vector<std::vector<CellStats>> cells_per_tau;
  for (double tau : taus)
  {
    ExperimentSpec spec = base;
    spec.system.tau_p = tau;
    const SweepResult res = run_sweep(spec);
    std::cerr << "tau_p " << tau << '\n';
    print_cells(res.cells);
    if (!out.empty())
      emit_outputs(spec, res, out / ("taup_" + format_double(tau)));
    cells_per_tau.push_back(res.cells);
  }
  if (!out.empty())
    for (double snr : base.system.snr_db)
    {
      std::vector<std::vector<CellStats>> rows;
      for (const auto &cells : cells_per_tau)
      {
        rows.emplace_back();
        for (const auto &c : cells)
          if (c.snr_db == snr)
            rows.back().push_back(c);
      }
      std::ofstream os(out / ("plot_csit_snr" + format_double(snr) + ".dat"), std::ios::binary);
      if (!os)
        throw std::runtime_error("cannot write plot data under " + out.string());
      write_plot_data(os, "tau_p", taus, base.methods, rows);
    }
  return 0;
}

int run_verify(const ExperimentSpec &spec, const std::string &out)
{
  const Problem p = instance(spec);
  const QuotientSystem sys = build_quotient_system(p);
  const GpiReport rep = solve(sys, spec.solver);
  const CVector &f = rep.fbar_star.fbar;
  const double alpha = rep.alpha_final;
  const CVector f0 = mrt_initial_point(p).fbar;

  const double g_star = oracles::projected_gradient_norm(p, f, alpha);
  const double g_init = oracles::projected_gradient_norm(p, f0, alpha);
  const double dense_res = oracles::dense_fixed_point_check(p, f, alpha);
  const double path_gap = (oracles::dense_update(p, f, alpha) - gpi_step(sys, f, alpha)).norm();
  const double identity_gap = std::abs(lambda_log2(sys, f, alpha) - objective_j(p, f, SmoothingParam(alpha)));

  const json doc = {{"converged", rep.converged},
                    {"iterations", rep.iterations},
                    {"alpha_final", alpha},
                    {"epsilon", spec.solver.epsilon},
                    {"objective_bits", rep.objective_bits},
                    {"sum_se", rep.rate_breakdown.sum},
                    {"lambda_objective_gap", identity_gap},
                    {"dense_fixed_point_residual", dense_res},
                    {"dense_vs_block_update_gap", path_gap},
                    {"projected_gradient_norm", g_star},
                    {"projected_gradient_norm_at_init", g_init},
                    {"gradient_ratio", g_init > 0.0 ? g_star / g_init : 0.0}};
  write_to(out, [&](std::ostream &os) { os << doc.dump(2) << '\n'; });
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Rate-splitting precoder optimization by generalized power iteration"};
  app.require_subcommand(1);

  // One flag set per subcommand; options are bound to their own storage.
  std::array<Flags, 6> flags;

  int cov_n = 6, cov_quad = 200;
  double cov_aoa = 0.0, cov_spread = kPi / 6.0;
  std::string cov_out;
  auto *cov = app.add_subcommand("covariance", "dump the one-ring covariance of one geometry as JSON");
  cov->add_option("--n", cov_n, "antennas")->check(CLI::PositiveNumber);
  cov->add_option("--aoa", cov_aoa, "angle of arrival in radians");
  cov->add_option("--spread", cov_spread, "angular spread in radians");
  cov->add_option("--quad-points", cov_quad, "Simpson intervals (even, >= 8)");
  cov->add_option("--out", cov_out, "output file (default stdout)");

  auto *solve_cmd = app.add_subcommand("solve", "solve one instance and print the report as JSON");
  auto *sweep_snr = app.add_subcommand("sweep-snr", "Monte Carlo sum-SE sweep over the SNR grid");
  auto *sweep_csit = app.add_subcommand("sweep-csit", "Monte Carlo sweep over CSIT accuracy (tau_p)");
  auto *trace = app.add_subcommand("trace", "per-iteration convergence trace of one instance");
  auto *multi = app.add_subcommand("multilayer", "clustered two-group scenario, one vs two layers");
  auto *verify = app.add_subcommand("verify", "audit one solved instance against the independent oracles");
  const std::array<CLI::App *, 6> runs{solve_cmd, sweep_snr, sweep_csit, trace, multi, verify};
  for (std::size_t i = 0; i < runs.size(); ++i)
    add_common(runs[i], flags[i]);
  sweep_csit->add_option("--taup-list", flags[2].taup_list, "tau_p values")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  Flags *picked = &flags[0];
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (runs[i]->parsed())
      picked = &flags[i];
  const Flags &f = *picked;

  try
  {
    if (cov->parsed())
      return run_covariance(cov_n, cov_aoa, cov_spread, cov_quad, cov_out);

    if (solve_cmd->parsed() || trace->parsed() || verify->parsed())
    {
      ExperimentSpec base;
      base.system.snr_db = {20.0};
      const ExperimentSpec spec = build_spec(f, base);
      if (spec.system.snr_db.size() != 1)
        throw std::invalid_argument("solve, trace and verify take exactly one --snr-db value");
      if (verify->parsed())
        return run_verify(spec, f.out);
      const GpiReport rep = run_convergence_trace(spec, spec.base_seed);
      if (solve_cmd->parsed())
        write_to(f.out, [&](std::ostream &os) { os << report_json(rep).dump(2) << '\n'; });
      else
        write_to(f.out, [&](std::ostream &os) { write_trace_csv(os, rep); });
      return 0;
    }

    if (sweep_snr->parsed())
    {
      const ExperimentSpec spec = build_spec(f, ExperimentSpec{});
      const SweepResult res = run_sweep(spec);
      print_cells(res.cells);
      if (!f.out.empty())
        emit_outputs(spec, res, f.out);
      return 0;
    }

    if (sweep_csit->parsed())
    {
      ExperimentSpec base;
      base.system.snr_db = {20.0};
      const ExperimentSpec spec = build_spec(f, base);
      std::vector<double> taus = f.taup_list;
      if (taus.empty())
        taus = {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0};
      return run_sweep_csit(spec, taus, f.out);
    }

    if (multi->parsed())
    {
      ExperimentSpec base;
      base.system.antennas = 6;
      base.system.users = 4;
      base.system.groups = {{0, 1}, {2, 3}};
      base.system.fixed_aoa = {kPi / 3.0, kPi / 3.0, 2.0 * kPi / 3.0, 2.0 * kPi / 3.0};
      base.methods = {Method::GpiRs, Method::GpiRsSingleLayer};
      const ExperimentSpec spec = build_spec(f, base);
      const SweepResult res = run_sweep(spec);
      print_cells(res.cells);
      if (!f.out.empty())
        emit_outputs(spec, res, f.out);
      return 0;
    }
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
