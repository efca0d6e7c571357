// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_QUOTIENT_FORMS_HPP
#define RSGPI_QUOTIENT_FORMS_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "rsgpi/message_set.hpp"
#include "rsgpi/types.hpp"

namespace rsgpi
{

/// Block-diagonal matrix with equally sized square blocks.
class BlockDiagonal
{
public:
  BlockDiagonal() = default;
  BlockDiagonal(int num_blocks, int block_size)
      : blocks_(num_blocks, CMatrix::Zero(block_size, block_size)), block_size_(block_size)
  {
  }

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int block_size() const { return block_size_; }
  int size() const { return num_blocks() * block_size_; }

  CMatrix &block(int b) { return blocks_[b]; }
  const CMatrix &block(int b) const { return blocks_[b]; }

  /// x^H M x (real part).
  double quadratic(const CVector &x) const
  {
    double acc = 0.0;
    for (int b = 0; b < num_blocks(); ++b)
      acc += quad_form(blocks_[b], x.segment(b * block_size_, block_size_));
    return acc;
  }

  CVector apply(const CVector &x) const
  {
    CVector y(x.size());
    for (int b = 0; b < num_blocks(); ++b)
      y.segment(b * block_size_, block_size_).noalias() = blocks_[b] * x.segment(b * block_size_, block_size_);
    return y;
  }

  void add_scaled(double s, const BlockDiagonal &other)
  {
    for (int b = 0; b < num_blocks(); ++b)
      blocks_[b] += s * other.blocks_[b];
  }

  CMatrix dense() const
  {
    CMatrix d = CMatrix::Zero(size(), size());
    for (int b = 0; b < num_blocks(); ++b)
      d.block(b * block_size_, b * block_size_, block_size_, block_size_) = blocks_[b];
    return d;
  }

  double hermitian_defect() const
  {
    double acc = 0.0;
    for (const auto &m : blocks_)
      acc += (m - m.adjoint()).squaredNorm();
    return std::sqrt(acc);
  }

private:
  std::vector<CMatrix> blocks_;
  int block_size_ = 0;
};

/// Rate term log2(f^H A f / f^H B f) of message `desired` decoded at user
/// `owner_user`. `cancelled[b]` marks blocks removed by SIC before decoding.
struct QuotientPair
{
  BlockDiagonal a;
  BlockDiagonal b;
  int desired = 0;
  int owner_user = 0;
  std::vector<bool> cancelled;
};

/// Whether user k decodes message m at all.
inline bool decodes(const MessageSet &ms, int message, int user)
{
  switch (ms.kind(message))
  {
  case MessageKind::Common:
    return true;
  case MessageKind::PartialCommon:
  {
    const auto g = ms.group_of_user(user);
    return g && *g == ms.group_of_message(message);
  }
  case MessageKind::Private:
    return ms.user_of_message(message) == user;
  }
  return false;
}

/// Messages user k has already removed by SIC when it decodes message m.
/// Decoding order is common -> own partial common -> private.
inline std::vector<bool> cancelled_messages(const MessageSet &ms, int message, int user)
{
  std::vector<bool> c(ms.num_messages(), false);
  const MessageKind kind = ms.kind(message);
  if (kind == MessageKind::Common)
    return c;
  if (ms.has_common)
    c[ms.common_index()] = true;
  if (kind == MessageKind::Private)
    if (const auto g = ms.group_of_user(user))
      c[ms.partial_index(*g)] = true;
  return c;
}

/// A = sum over uncancelled blocks of (h h^H + Phi) + (sigma^2/P) I,
/// B = A - (h h^H placed on the desired block).
inline QuotientPair build_pair(const Problem &p, int message, int user)
{
  const MessageSet &ms = p.messages;
  if (message < 0 || message >= ms.num_messages() || user < 0 || user >= ms.num_users)
    throw std::invalid_argument("build_pair: index out of range");
  if (!decodes(ms, message, user))
    throw std::invalid_argument("build_pair: user " + std::to_string(user) + " does not decode message " +
                                std::to_string(message));

  const int n = p.antennas();
  const int m = ms.num_messages();
  const CMatrix hh = p.h_hat[user] * p.h_hat[user].adjoint();
  const CMatrix load = hh + p.phi[user];
  const CMatrix noise = p.snr_inv * CMatrix::Identity(n, n);

  QuotientPair out;
  out.desired = message;
  out.owner_user = user;
  out.cancelled = cancelled_messages(ms, message, user);
  out.a = BlockDiagonal(m, n);
  for (int blk = 0; blk < m; ++blk)
    out.a.block(blk) = out.cancelled[blk] ? noise : CMatrix(load + noise);
  out.b = out.a;
  out.b.block(message) -= hh;
  return out;
}

/// f^H A f / f^H B f on the unit sphere.
inline double evaluate_quotient(const QuotientPair &pair, const CVector &fbar)
{
  require_unit_norm(fbar, "evaluate_quotient");
  if (fbar.size() != pair.a.size())
    throw std::invalid_argument("evaluate_quotient: dimension mismatch");
  return pair.a.quadratic(fbar) / pair.b.quadratic(fbar);
}

/// All rate terms of a problem, grouped the way the objective combines them:
/// each entry of `smoothed` is a softmin group (the common message over all
/// users, then one per partial common message), `plain` holds private terms.
struct QuotientSystem
{
  Problem problem;
  std::vector<QuotientPair> pairs;
  std::vector<std::vector<int>> smoothed;
  std::vector<int> plain;
};

inline QuotientSystem build_quotient_system(const Problem &p)
{
  p.validate();
  const MessageSet &ms = p.messages;
  QuotientSystem sys;
  sys.problem = p;
  if (ms.has_common)
  {
    std::vector<int> grp;
    for (int k = 0; k < ms.num_users; ++k)
    {
      grp.push_back(static_cast<int>(sys.pairs.size()));
      sys.pairs.push_back(build_pair(p, ms.common_index(), k));
    }
    sys.smoothed.push_back(std::move(grp));
  }
  for (int g = 0; g < ms.num_groups(); ++g)
  {
    std::vector<int> grp;
    for (int k : ms.groups[g])
    {
      grp.push_back(static_cast<int>(sys.pairs.size()));
      sys.pairs.push_back(build_pair(p, ms.partial_index(g), k));
    }
    sys.smoothed.push_back(std::move(grp));
  }
  for (int k = 0; k < ms.num_users; ++k)
  {
    sys.plain.push_back(static_cast<int>(sys.pairs.size()));
    sys.pairs.push_back(build_pair(p, ms.private_index(k), k));
  }
  return sys;
}

} // namespace rsgpi

#endif // RSGPI_QUOTIENT_FORMS_HPP
