// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_MESSAGE_SET_HPP
#define RSGPI_MESSAGE_SET_HPP

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsgpi/channel_model.hpp"
#include "rsgpi/types.hpp"

namespace rsgpi
{

enum class MessageKind
{
  Common,
  PartialCommon,
  Private
};

/// Message structure of a rate-splitting downlink.
///
/// Message indices: the common message (when present) comes first, then one
/// partial common message per group, then one private message per user.
/// Users are 0-based. A set without a common message and without groups is
/// plain SDMA.
struct MessageSet
{
  int num_users = 0;
  std::vector<std::vector<int>> groups;
  bool has_common = true;

  static MessageSet single_layer(int k) { return MessageSet{k, {}, true}; }
  static MessageSet sdma(int k) { return MessageSet{k, {}, false}; }

  int num_groups() const { return static_cast<int>(groups.size()); }
  int num_messages() const { return (has_common ? 1 : 0) + num_groups() + num_users; }

  int common_index() const
  {
    if (!has_common)
      throw std::logic_error("message set has no common message");
    return 0;
  }
  int partial_index(int group) const { return (has_common ? 1 : 0) + group; }
  int private_index(int user) const { return (has_common ? 1 : 0) + num_groups() + user; }

  MessageKind kind(int message) const
  {
    if (has_common && message == 0)
      return MessageKind::Common;
    if (message < private_index(0))
      return MessageKind::PartialCommon;
    return MessageKind::Private;
  }

  /// Group index for a partial-common message index.
  int group_of_message(int message) const { return message - partial_index(0); }
  /// Owner of a private message index.
  int user_of_message(int message) const { return message - private_index(0); }

  std::optional<int> group_of_user(int user) const
  {
    for (int g = 0; g < num_groups(); ++g)
      for (int u : groups[g])
        if (u == user)
          return g;
    return std::nullopt;
  }

  void validate() const
  {
    if (num_users < 1)
      throw std::invalid_argument("message set: need at least one user");
    if (!has_common && !groups.empty())
      throw std::invalid_argument("message set: partial commons require a common message");
    std::vector<int> seen(num_users, 0);
    for (const auto &g : groups)
    {
      if (g.empty())
        throw std::invalid_argument("message set: empty group");
      for (int u : g)
      {
        if (u < 0 || u >= num_users)
          throw std::invalid_argument("message set: group member " + std::to_string(u) + " out of range");
        if (seen[u]++)
          throw std::invalid_argument("message set: groups must be disjoint");
      }
    }
  }
};

/// Block layout of the stacked precoder: message m occupies [m*N, (m+1)*N).
struct StackLayout
{
  int antennas = 0;
  int messages = 0;

  int size() const { return antennas * messages; }
  int offset(int message) const { return message * antennas; }
};

/// Concatenation of all message precoders.
struct StackedPrecoder
{
  CVector fbar;
  StackLayout layout;

  auto block(int m) { return fbar.segment(layout.offset(m), layout.antennas); }
  auto block(int m) const { return fbar.segment(layout.offset(m), layout.antennas); }

  double norm() const { return fbar.norm(); }
  void normalize() { fbar /= fbar.norm(); }
};

inline void require_unit_norm(const CVector &fbar, const char *where, double tol = 1e-9)
{
  if (std::abs(fbar.norm() - 1.0) > tol)
    throw std::invalid_argument(std::string(where) + ": stacked precoder must have unit norm");
}

/// Everything the transmitter knows about one fading block: estimated
/// channels, error covariances, message structure and sigma^2 / P.
struct Problem
{
  std::vector<CVector> h_hat;
  std::vector<CMatrix> phi;
  MessageSet messages;
  double snr_inv = 1.0;

  int antennas() const { return h_hat.empty() ? 0 : static_cast<int>(h_hat.front().size()); }
  int num_users() const { return static_cast<int>(h_hat.size()); }
  StackLayout layout() const { return StackLayout{antennas(), messages.num_messages()}; }

  void validate() const
  {
    messages.validate();
    if (static_cast<int>(h_hat.size()) != messages.num_users || phi.size() != h_hat.size())
      throw std::invalid_argument("problem: user count mismatch");
    const int n = antennas();
    if (n < 1)
      throw std::invalid_argument("problem: need at least one antenna");
    for (std::size_t k = 0; k < h_hat.size(); ++k)
      if (h_hat[k].size() != n || phi[k].rows() != n || phi[k].cols() != n)
        throw std::invalid_argument("problem: dimension mismatch for user " + std::to_string(k));
    if (!(snr_inv > 0.0))
      throw std::invalid_argument("problem: sigma^2/P must be positive");
  }

  static Problem from_states(const std::vector<UserChannelState> &states, MessageSet messages, double snr_inv)
  {
    Problem p;
    for (const auto &s : states)
    {
      p.h_hat.push_back(s.h_hat);
      p.phi.push_back(s.phi);
    }
    p.messages = std::move(messages);
    p.snr_inv = snr_inv;
    p.validate();
    return p;
  }

  /// Same channels with every error covariance replaced by zero.
  Problem without_error_covariance() const
  {
    Problem p = *this;
    for (auto &m : p.phi)
      m.setZero();
    return p;
  }

  /// Same channels under a different message structure.
  Problem with_messages(MessageSet m) const
  {
    Problem p = *this;
    p.messages = std::move(m);
    p.validate();
    return p;
  }
};

} // namespace rsgpi

#endif // RSGPI_MESSAGE_SET_HPP
