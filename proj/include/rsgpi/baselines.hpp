// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_BASELINES_HPP
#define RSGPI_BASELINES_HPP

#include <cmath>
#include <stdexcept>

#include "rsgpi/gpi_solver.hpp"
#include "rsgpi/message_set.hpp"
#include "rsgpi/types.hpp"

namespace rsgpi
{

enum class BaselineKind
{
  Mrt,
  Rzf,
  SdmaGpi
};

namespace detail
{

// Private blocks get unit directions scaled to an equal 1/K power share;
// common and partial blocks stay zero.
inline StackedPrecoder equal_split_stack(const Problem &p, const std::vector<CVector> &directions)
{
  const MessageSet &ms = p.messages;
  StackedPrecoder s{CVector::Zero(p.layout().size()), p.layout()};
  const double share = 1.0 / std::sqrt(static_cast<double>(ms.num_users));
  for (int k = 0; k < ms.num_users; ++k)
    s.block(ms.private_index(k)) = share * unit_or(directions[k], CVector::Ones(p.antennas()));
  return s;
}

} // namespace detail

/// f_k proportional to h_hat_k, no common message, equal power per user.
inline StackedPrecoder mrt_precoders(const Problem &p)
{
  p.validate();
  return detail::equal_split_stack(p, p.h_hat);
}

/// f_k proportional to (H H^H + (sigma^2/P) I)^{-1} h_hat_k with
/// H = [h_hat_1 ... h_hat_K]; no common message, equal power per user.
inline StackedPrecoder rzf_precoders(const Problem &p)
{
  p.validate();
  const int n = p.antennas();
  const int k_users = p.num_users();
  CMatrix h(n, k_users);
  for (int k = 0; k < k_users; ++k)
    h.col(k) = p.h_hat[k];
  const CMatrix gram = h * h.adjoint() + p.snr_inv * CMatrix::Identity(n, n);
  Eigen::LDLT<CMatrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("rzf_precoders: regularized Gram matrix factorization failed");
  const CMatrix dirs = ldlt.solve(h);
  std::vector<CVector> cols;
  for (int k = 0; k < k_users; ++k)
    cols.emplace_back(dirs.col(k));
  return detail::equal_split_stack(p, cols);
}

/// Sum-rate GPI over private streams only. With `use_error_cov` false the
/// optimizer treats the estimated channels as exact; the returned breakdown is
/// always evaluated on the original problem, error covariances included.
inline GpiReport sdma_gpi_solve(const Problem &p, const SolverConfig &cfg, bool use_error_cov = false)
{
  Problem sdma = p.with_messages(MessageSet::sdma(p.num_users()));
  const Problem design = use_error_cov ? sdma : sdma.without_error_covariance();
  GpiReport rep = solve(design, cfg);
  rep.rate_breakdown = exact_breakdown(sdma, rep.fbar_star.fbar);
  return rep;
}

} // namespace rsgpi

#endif // RSGPI_BASELINES_HPP
