// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_RATE_BOUNDS_HPP
#define RSGPI_RATE_BOUNDS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "rsgpi/message_set.hpp"
#include "rsgpi/types.hpp"

namespace rsgpi
{

/// Spectral efficiencies of one precoder under the true-minimum metric.
struct RateBreakdown
{
  double common_rate = 0.0;
  std::vector<double> partial_rates;
  std::vector<double> private_rates;
  double sum = 0.0;
};

/// LogSumExp smoothing parameter.
struct SmoothingParam
{
  double alpha = 0.1;

  explicit SmoothingParam(double a) : alpha(a)
  {
    if (!(a > 0.0))
      throw std::invalid_argument("smoothing parameter alpha must be positive");
  }
};

/// -alpha * ln(mean(exp(-v_i / alpha))), evaluated after shifting by min(v).
/// Lies in [min(v), min(v) + alpha ln|v|].
inline double softmin(std::span<const double> values, SmoothingParam alpha)
{
  if (values.empty())
    throw std::invalid_argument("softmin: empty list");
  const double lo = *std::min_element(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values)
    acc += std::exp(-(v - lo) / alpha.alpha);
  return lo - alpha.alpha * std::log(acc / static_cast<double>(values.size()));
}

namespace detail
{

// Received power |h_k^H f_b|^2 and error leakage f_b^H Phi_k f_b of every
// message block b at user k.
struct UserLoads
{
  std::vector<double> gain;
  std::vector<double> leak;
};

inline UserLoads user_loads(const Problem &p, const CVector &fbar, int k)
{
  const StackLayout lay = p.layout();
  if (fbar.size() != lay.size())
    throw std::invalid_argument("rate bound: stacked precoder dimension mismatch");
  if (k < 0 || k >= p.num_users())
    throw std::invalid_argument("rate bound: user index out of range");
  UserLoads out;
  out.gain.resize(lay.messages);
  out.leak.resize(lay.messages);
  for (int b = 0; b < lay.messages; ++b)
  {
    const auto fb = fbar.segment(lay.offset(b), lay.antennas);
    out.gain[b] = inner_gain(p.h_hat[k], fb);
    out.leak[b] = quad_form(p.phi[k], fb);
  }
  return out;
}

inline double log2_1p(double num, double den) { return std::log2(1.0 + num / den); }

} // namespace detail

/// Common-message bound at user k: every other message interferes and every
/// message leaks through the CSIT error.
inline double common_rate_bound(const Problem &p, const CVector &fbar, int k)
{
  const MessageSet &ms = p.messages;
  const auto u = detail::user_loads(p, fbar, k);
  const int c = ms.common_index();
  double den = p.snr_inv;
  for (int j = 0; j < ms.num_groups(); ++j)
    den += u.gain[ms.partial_index(j)] + u.leak[ms.partial_index(j)];
  for (int l = 0; l < ms.num_users; ++l)
    den += u.gain[ms.private_index(l)] + u.leak[ms.private_index(l)];
  den += u.leak[c];
  return detail::log2_1p(u.gain[c], den);
}

/// Partial-common bound of group i at member k. The common message is already
/// removed by SIC.
inline double partial_common_rate_bound(const Problem &p, const CVector &fbar, int group, int k)
{
  const MessageSet &ms = p.messages;
  if (group < 0 || group >= ms.num_groups())
    throw std::invalid_argument("partial_common_rate_bound: group index out of range");
  const auto &members = ms.groups[group];
  if (std::find(members.begin(), members.end(), k) == members.end())
    throw std::invalid_argument("partial_common_rate_bound: user is not a member of the group");
  const auto u = detail::user_loads(p, fbar, k);
  const int own = ms.partial_index(group);
  double den = p.snr_inv;
  for (int j = 0; j < ms.num_groups(); ++j)
  {
    const int b = ms.partial_index(j);
    if (j != group)
      den += u.gain[b];
    den += u.leak[b];
  }
  for (int l = 0; l < ms.num_users; ++l)
    den += u.gain[ms.private_index(l)] + u.leak[ms.private_index(l)];
  return detail::log2_1p(u.gain[own], den);
}

/// Private bound of user k after the common message and k's own partial
/// common message (if any) are cancelled.
inline double private_rate_bound(const Problem &p, const CVector &fbar, int k)
{
  const MessageSet &ms = p.messages;
  const auto u = detail::user_loads(p, fbar, k);
  const auto own_group = ms.group_of_user(k);
  double den = p.snr_inv;
  for (int j = 0; j < ms.num_groups(); ++j)
  {
    if (own_group && *own_group == j)
      continue;
    const int b = ms.partial_index(j);
    den += u.gain[b] + u.leak[b];
  }
  for (int l = 0; l < ms.num_users; ++l)
  {
    const int b = ms.private_index(l);
    if (l != k)
      den += u.gain[b];
    den += u.leak[b];
  }
  return detail::log2_1p(u.gain[ms.private_index(k)], den);
}

/// Smoothed objective J: softmin of the common bounds over all users, plus a
/// softmin of each group's partial bounds over its members, plus the sum of
/// private bounds. Rates are in bits; the LogSumExp uses natural log.
inline double objective_j(const Problem &p, const CVector &fbar, SmoothingParam alpha)
{
  require_unit_norm(fbar, "objective_j");
  const MessageSet &ms = p.messages;
  double j = 0.0;
  std::vector<double> buf;
  if (ms.has_common)
  {
    buf.resize(ms.num_users);
    for (int k = 0; k < ms.num_users; ++k)
      buf[k] = common_rate_bound(p, fbar, k);
    j += softmin(buf, alpha);
  }
  for (int g = 0; g < ms.num_groups(); ++g)
  {
    buf.clear();
    for (int k : ms.groups[g])
      buf.push_back(partial_common_rate_bound(p, fbar, g, k));
    j += softmin(buf, alpha);
  }
  for (int k = 0; k < ms.num_users; ++k)
    j += private_rate_bound(p, fbar, k);
  return j;
}

/// True-minimum rates: the reported performance metric.
inline RateBreakdown exact_breakdown(const Problem &p, const CVector &fbar)
{
  const MessageSet &ms = p.messages;
  RateBreakdown out;
  if (ms.has_common)
  {
    double lo = std::numeric_limits<double>::infinity();
    for (int k = 0; k < ms.num_users; ++k)
      lo = std::min(lo, common_rate_bound(p, fbar, k));
    out.common_rate = lo;
  }
  for (int g = 0; g < ms.num_groups(); ++g)
  {
    double lo = std::numeric_limits<double>::infinity();
    for (int k : ms.groups[g])
      lo = std::min(lo, partial_common_rate_bound(p, fbar, g, k));
    out.partial_rates.push_back(lo);
  }
  for (int k = 0; k < ms.num_users; ++k)
    out.private_rates.push_back(private_rate_bound(p, fbar, k));
  out.sum = out.common_rate;
  for (double r : out.partial_rates)
    out.sum += r;
  for (double r : out.private_rates)
    out.sum += r;
  return out;
}

} // namespace rsgpi

#endif // RSGPI_RATE_BOUNDS_HPP
