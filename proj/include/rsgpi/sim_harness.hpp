// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_SIM_HARNESS_HPP
#define RSGPI_SIM_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <initializer_list>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rsgpi/baselines.hpp"
#include "rsgpi/channel_model.hpp"
#include "rsgpi/gpi_solver.hpp"
#include "rsgpi/message_set.hpp"
#include "rsgpi/types.hpp"

namespace rsgpi
{

enum class Method
{
  GpiRs,
  GpiRsSingleLayer,
  SdmaGpi,
  Rzf,
  Mrt
};

inline const char *method_name(Method m)
{
  switch (m)
  {
  case Method::GpiRs:
    return "GPI_RS";
  case Method::GpiRsSingleLayer:
    return "GPI_RS_1L";
  case Method::SdmaGpi:
    return "SDMA_GPI";
  case Method::Rzf:
    return "RZF";
  case Method::Mrt:
    return "MRT";
  }
  return "?";
}

inline Method parse_method(const std::string &s)
{
  for (Method m : {Method::GpiRs, Method::GpiRsSingleLayer, Method::SdmaGpi, Method::Rzf, Method::Mrt})
    if (s == method_name(m))
      return m;
  throw std::invalid_argument("unknown method '" + s + "' (expected GPI_RS, GPI_RS_1L, SDMA_GPI, RZF or MRT)");
}

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Order-sensitive 64-bit hash of a tuple of integers.
inline std::uint64_t hash64(std::initializer_list<std::uint64_t> parts)
{
  std::uint64_t h = 0x6A09E667F3BCC908ULL;
  for (std::uint64_t p : parts)
    h = splitmix64(h ^ splitmix64(p));
  return h;
}

// Tag mixed into the per-trial channel stream so it never collides with a
// per-record seed.
inline constexpr std::uint64_t kChannelStreamTag = 0xC4A77E1ULL;

// ---------------------------------------------------------------------------
// Experiment description
// ---------------------------------------------------------------------------

/// Scenario parameters. Groups are 0-based. An empty `fixed_aoa` means each
/// trial draws every AoA uniformly on [0, 2 pi).
struct SystemConfig
{
  int antennas = 6;
  int users = 4;
  std::vector<std::vector<int>> groups;
  double angular_spread = kPi / 6.0;
  std::vector<double> fixed_aoa;
  double noise_power = 1.0;
  std::vector<double> snr_db{0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0};
  double tau_p = 4.0;
  int quad_points = 200;

  MessageSet message_set() const { return MessageSet{users, groups, true}; }

  void validate() const
  {
    if (antennas < 1)
      throw std::invalid_argument("system: antennas must be >= 1");
    if (users < 1)
      throw std::invalid_argument("system: users must be >= 1");
    message_set().validate();
    if (!fixed_aoa.empty() && static_cast<int>(fixed_aoa.size()) != users)
      throw std::invalid_argument("system: fixed AoA list must have one angle per user");
    if (snr_db.empty())
      throw std::invalid_argument("system: SNR grid is empty");
    if (!(noise_power > 0.0))
      throw std::invalid_argument("system: noise power must be positive");
    if (!(tau_p > 0.0))
      throw std::invalid_argument("system: tau_p must be positive");
    OneRingGeometry{antennas, 0.0, angular_spread}.validate();
  }
};

struct ExperimentSpec
{
  SystemConfig system;
  SolverConfig solver;
  std::vector<Method> methods{Method::GpiRs, Method::SdmaGpi, Method::Rzf, Method::Mrt};
  int trials = 100;
  std::uint64_t base_seed = 1;
  std::string output_path;
  int threads = 1;
  bool record_timing = true;

  void validate() const
  {
    system.validate();
    if (trials < 1)
      throw std::invalid_argument("experiment: trials must be >= 1");
    if (methods.empty())
      throw std::invalid_argument("experiment: no methods selected");
    if (threads < 1)
      throw std::invalid_argument("experiment: threads must be >= 1");
    for (double s : system.snr_db)
      solver.validate(s);
  }
};

struct TrialRecord
{
  int trial_index = 0;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  Method method = Method::GpiRs;
  double sum_se_bits = 0.0;
  double common_rate = 0.0;
  std::vector<double> partial_rates;
  std::vector<double> private_rates;
  int iterations = 0;
  double alpha_final = 0.0;
  bool converged = false;
  double wall_time_ms = 0.0;
};

inline std::uint64_t record_seed(std::uint64_t base_seed, int trial, int snr_index, Method m)
{
  return hash64({base_seed, static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(snr_index),
                 static_cast<std::uint64_t>(m)});
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

/// One trial's channel realization, shared by every method and SNR point.
struct TrialChannels
{
  std::vector<double> aoa;
  std::vector<UserChannelState> states;
};

inline TrialChannels draw_trial_channels(const SystemConfig &sys, std::uint64_t base_seed, int trial)
{
  Rng rng(hash64({base_seed, static_cast<std::uint64_t>(trial), kChannelStreamTag}));
  TrialChannels out;
  if (sys.fixed_aoa.empty())
  {
    std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
    for (int k = 0; k < sys.users; ++k)
      out.aoa.push_back(u(rng));
  }
  else
  {
    out.aoa = sys.fixed_aoa;
  }
  for (int k = 0; k < sys.users; ++k)
  {
    const OneRingGeometry geom{sys.antennas, out.aoa[k], sys.angular_spread};
    const SpatialCovariance r = build_one_ring_covariance(geom, sys.quad_points);
    out.states.push_back(draw_user_channel(r, sys.tau_p, sys.noise_power, rng));
  }
  return out;
}

/// FNV-1a over the raw bytes of every estimated channel and error covariance.
inline std::uint64_t channel_digest(const TrialChannels &ch)
{
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto feed = [&h](const cdouble *data, Eigen::Index count) {
    const auto *bytes = reinterpret_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(cdouble); ++i)
      h = (h ^ bytes[i]) * 0x100000001B3ULL;
  };
  for (const auto &s : ch.states)
  {
    feed(s.h_hat.data(), s.h_hat.size());
    feed(s.phi.data(), s.phi.size());
  }
  return h;
}

inline double snr_inv_of(const SystemConfig &sys, double snr_db)
{
  return sys.noise_power / std::pow(10.0, snr_db / 10.0);
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

namespace detail
{

inline void fill_rates(TrialRecord &rec, const RateBreakdown &rb)
{
  rec.common_rate = rb.common_rate;
  rec.partial_rates = rb.partial_rates;
  rec.private_rates = rb.private_rates;
  rec.sum_se_bits = rb.sum;
}

inline void fill_report(TrialRecord &rec, const GpiReport &rep)
{
  fill_rates(rec, rep.rate_breakdown);
  rec.iterations = rep.iterations;
  rec.alpha_final = rep.alpha_final;
  rec.converged = rep.converged;
}

} // namespace detail

/// Runs one method on an already drawn trial. Solver failures are recorded
/// as a non-converged record with NaN rates.
inline TrialRecord run_method(const ExperimentSpec &spec, const TrialChannels &ch, int trial, int snr_index,
                              Method method)
{
  const SystemConfig &sys = spec.system;
  TrialRecord rec;
  rec.trial_index = trial;
  rec.snr_db = sys.snr_db.at(snr_index);
  rec.method = method;
  rec.seed = record_seed(spec.base_seed, trial, snr_index, method);

  const auto t0 = std::chrono::steady_clock::now();
  try
  {
    const Problem p = Problem::from_states(ch.states, sys.message_set(), snr_inv_of(sys, rec.snr_db));
    switch (method)
    {
    case Method::GpiRs:
      detail::fill_report(rec, solve(p, spec.solver));
      break;
    case Method::GpiRsSingleLayer:
      detail::fill_report(rec, solve(p.with_messages(MessageSet::single_layer(sys.users)), spec.solver));
      break;
    case Method::SdmaGpi:
      detail::fill_report(rec, sdma_gpi_solve(p, spec.solver));
      break;
    case Method::Rzf:
      detail::fill_rates(rec, exact_breakdown(p, rzf_precoders(p).fbar));
      rec.converged = true;
      break;
    case Method::Mrt:
      detail::fill_rates(rec, exact_breakdown(p, mrt_precoders(p).fbar));
      rec.converged = true;
      break;
    }
  }
  catch (const std::exception &)
  {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.sum_se_bits = nan;
    rec.common_rate = nan;
    rec.partial_rates.clear();
    rec.private_rates.clear();
    rec.converged = false;
  }
  if (spec.record_timing)
    rec.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

inline TrialRecord run_trial(const ExperimentSpec &spec, int trial, int snr_index, Method method)
{
  return run_method(spec, draw_trial_channels(spec.system, spec.base_seed, trial), trial, snr_index, method);
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct CellStats
{
  double snr_db = 0.0;
  Method method = Method::GpiRs;
  int count = 0;    // finite records
  int failures = 0; // records with a non-finite sum
  int converged = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double mean_common = 0.0;
};

struct SweepResult
{
  std::vector<TrialRecord> records;
  std::vector<CellStats> cells;
};

inline bool record_before(const TrialRecord &a, const TrialRecord &b)
{
  if (a.trial_index != b.trial_index)
    return a.trial_index < b.trial_index;
  if (a.snr_db != b.snr_db)
    return a.snr_db < b.snr_db;
  return static_cast<int>(a.method) < static_cast<int>(b.method);
}

/// Mean and standard error per (SNR, method) cell, in the order SNR grid
/// first, then method list.
inline std::vector<CellStats> aggregate(std::vector<TrialRecord> records, const std::vector<double> &snr_grid,
                                        const std::vector<Method> &methods)
{
  std::sort(records.begin(), records.end(), record_before);
  std::vector<CellStats> cells;
  for (double snr : snr_grid)
    for (Method m : methods)
    {
      CellStats c;
      c.snr_db = snr;
      c.method = m;
      double sum = 0.0;
      double sum_common = 0.0;
      std::vector<double> xs;
      for (const auto &r : records)
      {
        if (r.snr_db != snr || r.method != m)
          continue;
        if (r.converged)
          ++c.converged;
        if (!std::isfinite(r.sum_se_bits))
        {
          ++c.failures;
          continue;
        }
        xs.push_back(r.sum_se_bits);
        sum += r.sum_se_bits;
        sum_common += r.common_rate;
      }
      c.count = static_cast<int>(xs.size());
      if (c.count > 0)
      {
        c.mean = sum / c.count;
        c.mean_common = sum_common / c.count;
      }
      if (c.count > 1)
      {
        double ss = 0.0;
        for (double x : xs)
          ss += (x - c.mean) * (x - c.mean);
        c.stderr_ = std::sqrt(ss / (c.count - 1)) / std::sqrt(static_cast<double>(c.count));
      }
      cells.push_back(c);
    }
  return cells;
}

/// Trials x SNR grid x methods. Trials run on `spec.threads` workers; each
/// trial fills its own slot, so the result does not depend on scheduling.
inline SweepResult run_sweep(const ExperimentSpec &spec)
{
  spec.validate();
  const int n_snr = static_cast<int>(spec.system.snr_db.size());
  const int n_methods = static_cast<int>(spec.methods.size());
  const std::size_t per_trial = static_cast<std::size_t>(n_snr) * n_methods;
  std::vector<TrialRecord> slots(per_trial * spec.trials);

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    for (;;)
    {
      const int t = next.fetch_add(1);
      if (t >= spec.trials)
        return;
      try
      {
        const TrialChannels ch = draw_trial_channels(spec.system, spec.base_seed, t);
        for (int s = 0; s < n_snr; ++s)
          for (int m = 0; m < n_methods; ++m)
            slots[t * per_trial + s * n_methods + m] = run_method(spec, ch, t, s, spec.methods[m]);
      }
      catch (...)
      {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure)
          failure = std::current_exception();
      }
    }
  };

  const int workers = std::min(spec.threads, spec.trials);
  if (workers <= 1)
  {
    worker();
  }
  else
  {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i)
      pool.emplace_back(worker);
    for (auto &th : pool)
      th.join();
  }
  if (failure)
    std::rethrow_exception(failure);

  SweepResult out;
  out.records = std::move(slots);
  std::sort(out.records.begin(), out.records.end(), record_before);
  out.cells = aggregate(out.records, spec.system.snr_db, spec.methods);
  return out;
}

/// GPI-RS on one instance drawn from `instance_seed` at the first SNR point,
/// with full per-iteration traces.
inline GpiReport run_convergence_trace(const ExperimentSpec &spec, std::uint64_t instance_seed, int snr_index = 0)
{
  spec.validate();
  const TrialChannels ch = draw_trial_channels(spec.system, instance_seed, 0);
  const Problem p =
      Problem::from_states(ch.states, spec.system.message_set(), snr_inv_of(spec.system, spec.system.snr_db.at(snr_index)));
  return solve(p, spec.solver);
}

} // namespace rsgpi

#endif // RSGPI_SIM_HARNESS_HPP
