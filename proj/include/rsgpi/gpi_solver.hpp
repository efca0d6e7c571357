// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_GPI_SOLVER_HPP
#define RSGPI_GPI_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rsgpi/message_set.hpp"
#include "rsgpi/quotient_forms.hpp"
#include "rsgpi/rate_bounds.hpp"
#include "rsgpi/types.hpp"

namespace rsgpi
{

enum class InitStrategy
{
  Mrt,
  Provided
};

/// Power-iteration controls and the alpha restart schedule.
///
/// The first alpha is `alpha_init` when set, otherwise `alpha_init_low_snr`
/// below `snr_threshold_db` and `alpha_init_high_snr` at or above it. A run
/// that does not meet the residual threshold within `max_iters_per_alpha`
/// steps restarts from the initial point with alpha + alpha_step, until alpha
/// would exceed alpha_max.
struct SolverConfig
{
  double epsilon = 1e-5;
  int max_iters_per_alpha = 50;
  double alpha_init_low_snr = 0.1;
  double alpha_init_high_snr = 0.5;
  double snr_threshold_db = 15.0;
  double alpha_step = 0.5;
  double alpha_max = 10.0;
  std::optional<double> alpha_init;
  InitStrategy init_strategy = InitStrategy::Mrt;

  double initial_alpha(double snr_db) const
  {
    if (alpha_init)
      return *alpha_init;
    return snr_db < snr_threshold_db ? alpha_init_low_snr : alpha_init_high_snr;
  }

  void validate(double snr_db) const
  {
    if (!(epsilon > 0.0))
      throw std::invalid_argument("solver config: epsilon must be positive");
    if (!(alpha_step > 0.0))
      throw std::invalid_argument("solver config: alpha_step must be positive");
    if (max_iters_per_alpha < 1)
      throw std::invalid_argument("solver config: max_iters_per_alpha must be >= 1");
    const double a0 = initial_alpha(snr_db);
    if (!(a0 > 0.0))
      throw std::invalid_argument("solver config: initial alpha must be positive");
    if (alpha_max < a0)
      throw std::invalid_argument("solver config: alpha_max below initial alpha");
  }
};

/// Outcome of one solve, including per-iteration traces.
struct GpiReport
{
  StackedPrecoder fbar_star;
  double objective_bits = 0.0; // J at fbar_star, alpha_final
  double lambda_log2 = 0.0;    // log2 of the NEPv eigenvalue at fbar_star
  double alpha_final = 0.0;
  RateBreakdown rate_breakdown;
  std::vector<double> residual_trace;
  std::vector<double> objective_trace;
  std::vector<double> lambda_trace;
  std::vector<double> alpha_trace;   // alpha in force at each iteration
  std::vector<double> alpha_history; // one entry per restart
  int iterations = 0;
  bool converged = false;
};

inline double snr_db_from_inv(double snr_inv) { return -10.0 * std::log10(snr_inv); }

// ---------------------------------------------------------------------------
// Weights and eigenvalue
// ---------------------------------------------------------------------------

/// Softmax of -log2(ratio_k) / alpha: the sensitivity of the softmin of the
/// rates log2(ratio_k) to each rate.
inline std::vector<double> softmin_weights(std::span<const double> ratios, double alpha)
{
  std::vector<double> z(ratios.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ratios.size(); ++i)
  {
    z[i] = -std::log2(ratios[i]) / alpha;
    top = std::max(top, z[i]);
  }
  double total = 0.0;
  for (double &v : z)
  {
    v = std::exp(v - top);
    total += v;
  }
  for (double &v : z)
    v /= total;
  return z;
}

/// log2 of the NEPv eigenvalue, accumulated in the log domain from the
/// quotient matrices. Equals J on the unit sphere.
inline double lambda_log2(const QuotientSystem &sys, const CVector &fbar, double alpha)
{
  require_unit_norm(fbar, "lambda_log2");
  const SmoothingParam a(alpha);
  double total = 0.0;
  std::vector<double> rates;
  for (const auto &grp : sys.smoothed)
  {
    rates.clear();
    for (int idx : grp)
      rates.push_back(std::log2(evaluate_quotient(sys.pairs[idx], fbar)));
    total += softmin(rates, a);
  }
  for (int idx : sys.plain)
    total += std::log2(evaluate_quotient(sys.pairs[idx], fbar));
  return total;
}

// ---------------------------------------------------------------------------
// KKT operators
// ---------------------------------------------------------------------------

namespace detail
{

// Quadratic forms of every pair at f, computed from per-(user, block) loads.
// f^H A_p f = sum over uncancelled b of (|h_k^H f_b|^2 + f_b^H Phi_k f_b)
//             + (sigma^2/P) ||f||^2,  f^H B_p f = f^H A_p f - |h_k^H f_d|^2.
struct PairForms
{
  std::vector<double> qa;
  std::vector<double> qb;
};

inline PairForms pair_forms(const QuotientSystem &sys, const CVector &fbar)
{
  const Problem &p = sys.problem;
  const int n = p.antennas();
  const int m = p.messages.num_messages();
  const int k_users = p.num_users();
  const Eigen::Map<const CMatrix> f(fbar.data(), n, m);

  Eigen::MatrixXd load(k_users, m);
  Eigen::MatrixXd gain(k_users, m);
  CMatrix tmp(n, m);
  for (int k = 0; k < k_users; ++k)
  {
    tmp.noalias() = p.phi[k] * f;
    for (int b = 0; b < m; ++b)
    {
      const cdouble hf = p.h_hat[k].dot(f.col(b)); // h^H f_b
      gain(k, b) = std::norm(hf);
      load(k, b) = gain(k, b) + f.col(b).dot(tmp.col(b)).real();
    }
  }
  const double noise = p.snr_inv * fbar.squaredNorm();

  PairForms out;
  out.qa.resize(sys.pairs.size());
  out.qb.resize(sys.pairs.size());
  for (std::size_t i = 0; i < sys.pairs.size(); ++i)
  {
    const QuotientPair &pr = sys.pairs[i];
    double qa = noise;
    for (int b = 0; b < m; ++b)
      if (!pr.cancelled[b])
        qa += load(pr.owner_user, b);
    out.qa[i] = qa;
    out.qb[i] = qa - gain(pr.owner_user, pr.desired);
  }
  return out;
}

// Per-pair weight: softmin weights within each smoothed group, one for plain
// terms.
inline std::vector<double> pair_weights(const QuotientSystem &sys, const PairForms &forms, double alpha)
{
  std::vector<double> w(sys.pairs.size(), 1.0);
  std::vector<double> ratios;
  for (const auto &grp : sys.smoothed)
  {
    ratios.clear();
    for (int idx : grp)
      ratios.push_back(forms.qa[idx] / forms.qb[idx]);
    const auto wg = softmin_weights(ratios, alpha);
    for (std::size_t j = 0; j < grp.size(); ++j)
      w[grp[j]] = wg[j];
  }
  return w;
}

} // namespace detail

/// Direction operators of the fixed-point condition B^{-1} A f = lambda f:
///   A_dir = sum_p w_p A_p / (f^H A_p f),  B_dir = sum_p w_p B_p / (f^H B_p f)
/// with w_p the softmin weight of term p within its group (1 for private
/// terms). The scalar prefactors of the eigenvalue cancel in the normalized
/// update and are left out.
struct KktOperators
{
  BlockDiagonal a_dir;
  BlockDiagonal b_dir;
};

inline KktOperators build_kkt_operators(const QuotientSystem &sys, const CVector &fbar, double alpha)
{
  require_unit_norm(fbar, "build_kkt_operators");
  const Problem &p = sys.problem;
  const int n = p.antennas();
  const int m = p.messages.num_messages();
  const int k_users = p.num_users();

  const auto forms = detail::pair_forms(sys, fbar);
  const auto w = detail::pair_weights(sys, forms, alpha);

  // Each block is sum_k c_{k,b} (h_k h_k^H + Phi_k) + scalar * I, minus the
  // desired-signal outer products on the B side.
  Eigen::MatrixXd coef_a = Eigen::MatrixXd::Zero(k_users, m);
  Eigen::MatrixXd coef_b = Eigen::MatrixXd::Zero(k_users, m);
  double diag_a = 0.0;
  double diag_b = 0.0;
  std::vector<double> beta(sys.pairs.size());
  for (std::size_t i = 0; i < sys.pairs.size(); ++i)
  {
    const QuotientPair &pr = sys.pairs[i];
    const double ca = w[i] / forms.qa[i];
    const double cb = w[i] / forms.qb[i];
    beta[i] = cb;
    diag_a += ca;
    diag_b += cb;
    for (int b = 0; b < m; ++b)
      if (!pr.cancelled[b])
      {
        coef_a(pr.owner_user, b) += ca;
        coef_b(pr.owner_user, b) += cb;
      }
  }

  std::vector<CMatrix> loads(k_users);
  for (int k = 0; k < k_users; ++k)
    loads[k] = p.h_hat[k] * p.h_hat[k].adjoint() + p.phi[k];

  // Blocks sharing a coefficient column (all private blocks, in particular)
  // share the weighted sum.
  auto weighted_sum = [&](const Eigen::MatrixXd &coef, double diag, std::vector<int> &owner_of,
                          std::vector<CMatrix> &sums, int b) -> const CMatrix & {
    for (std::size_t s = 0; s < sums.size(); ++s)
      if (coef.col(owner_of[s]) == coef.col(b))
        return sums[s];
    CMatrix acc = (p.snr_inv * diag) * CMatrix::Identity(n, n);
    for (int k = 0; k < k_users; ++k)
      if (coef(k, b) != 0.0)
        acc += coef(k, b) * loads[k];
    owner_of.push_back(b);
    sums.push_back(std::move(acc));
    return sums.back();
  };

  KktOperators ops{BlockDiagonal(m, n), BlockDiagonal(m, n)};
  std::vector<int> owners_a, owners_b;
  std::vector<CMatrix> sums_a, sums_b;
  sums_a.reserve(m);
  sums_b.reserve(m);
  for (int b = 0; b < m; ++b)
  {
    ops.a_dir.block(b) = weighted_sum(coef_a, diag_a, owners_a, sums_a, b);
    ops.b_dir.block(b) = weighted_sum(coef_b, diag_b, owners_b, sums_b, b);
  }
  for (std::size_t i = 0; i < sys.pairs.size(); ++i)
  {
    const QuotientPair &pr = sys.pairs[i];
    const CVector &h = p.h_hat[pr.owner_user];
    ops.b_dir.block(pr.desired).noalias() -= beta[i] * (h * h.adjoint());
  }
  return ops;
}

// ---------------------------------------------------------------------------
// Power iteration
// ---------------------------------------------------------------------------

/// Rotates the global phase so the largest-magnitude entry is real and
/// nonnegative.
inline void canonicalize_phase(CVector &f)
{
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
  {
    const double a = std::abs(f(i));
    if (a > best)
    {
      best = a;
      arg = i;
    }
  }
  if (best > 0.0)
    f *= std::conj(f(arg)) / best;
}

/// One update f <- B_dir^{-1} A_dir f / ||.||, solved block by block with a
/// Cholesky factorization of each B_dir block.
inline CVector gpi_step(const QuotientSystem &sys, const CVector &fbar_prev, double alpha)
{
  const KktOperators ops = build_kkt_operators(sys, fbar_prev, alpha);
  const int n = sys.problem.antennas();
  const int m = sys.problem.messages.num_messages();
  CVector y(fbar_prev.size());
  Eigen::LLT<CMatrix> llt(n);
  for (int b = 0; b < m; ++b)
  {
    llt.compute(ops.b_dir.block(b));
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("gpi_step: B_dir block " + std::to_string(b) + " is not positive definite");
    y.segment(b * n, n) = llt.solve(ops.a_dir.block(b) * fbar_prev.segment(b * n, n));
  }
  const double nrm = y.norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm))
    throw std::runtime_error("gpi_step: degenerate update direction");
  y /= nrm;
  canonicalize_phase(y);
  return y;
}

/// Unit direction of v, or of `fallback` when v vanishes.
inline CVector unit_or(const CVector &v, const CVector &fallback)
{
  const double nv = v.norm();
  if (nv > 1e-12)
    return v / nv;
  return fallback / fallback.norm();
}

/// Starting point: every message gets an equal share of power along a
/// matched filter. Common: sum of all estimated channels; partial common:
/// sum over the group; private: the user's own channel.
inline StackedPrecoder mrt_initial_point(const Problem &p)
{
  const MessageSet &ms = p.messages;
  StackedPrecoder s{CVector::Zero(p.layout().size()), p.layout()};
  if (ms.has_common)
  {
    CVector acc = CVector::Zero(p.antennas());
    for (const auto &h : p.h_hat)
      acc += h;
    s.block(ms.common_index()) = unit_or(acc, p.h_hat.front());
  }
  for (int g = 0; g < ms.num_groups(); ++g)
  {
    CVector acc = CVector::Zero(p.antennas());
    for (int k : ms.groups[g])
      acc += p.h_hat[k];
    s.block(ms.partial_index(g)) = unit_or(acc, p.h_hat[ms.groups[g].front()]);
  }
  for (int k = 0; k < ms.num_users; ++k)
    s.block(ms.private_index(k)) = unit_or(p.h_hat[k], CVector::Ones(p.antennas()));
  s.normalize();
  canonicalize_phase(s.fbar);
  return s;
}

/// Generalized power iteration with alpha restarts.
inline GpiReport solve(const QuotientSystem &sys, const SolverConfig &cfg,
                       const std::optional<StackedPrecoder> &init = std::nullopt)
{
  const Problem &p = sys.problem;
  const double snr_db = snr_db_from_inv(p.snr_inv);
  cfg.validate(snr_db);

  StackedPrecoder start;
  if (cfg.init_strategy == InitStrategy::Provided || init)
  {
    if (!init)
      throw std::invalid_argument("solve: init strategy 'provided' needs an initial point");
    if (init->fbar.size() != p.layout().size())
      throw std::invalid_argument("solve: initial point dimension mismatch");
    start = *init;
    start.layout = p.layout();
    start.normalize();
    canonicalize_phase(start.fbar);
  }
  else
  {
    start = mrt_initial_point(p);
  }

  // Without softmin terms alpha has no effect; one pass gets the combined
  // iteration budget of all restarts instead.
  const bool smoothed = !sys.smoothed.empty();
  double alpha = cfg.initial_alpha(snr_db);
  int stages = 1;
  for (double a = alpha + cfg.alpha_step; a <= cfg.alpha_max + 1e-12; a += cfg.alpha_step)
    ++stages;
  const int budget = smoothed ? cfg.max_iters_per_alpha : cfg.max_iters_per_alpha * stages;

  GpiReport rep;
  CVector best_f = start.fbar;
  double best_alpha = alpha;
  double best_sum = -std::numeric_limits<double>::infinity();

  for (;;)
  {
    rep.alpha_history.push_back(alpha);
    CVector f = start.fbar;
    for (int t = 0; t < budget; ++t)
    {
      CVector next = gpi_step(sys, f, alpha);
      const double res = (next - f).norm();
      f = std::move(next);
      ++rep.iterations;
      rep.residual_trace.push_back(res);
      rep.objective_trace.push_back(objective_j(p, f, SmoothingParam(alpha)));
      rep.lambda_trace.push_back(lambda_log2(sys, f, alpha));
      rep.alpha_trace.push_back(alpha);

      const double s = exact_breakdown(p, f).sum;
      if (s > best_sum)
      {
        best_sum = s;
        best_f = f;
        best_alpha = alpha;
      }
      if (res < cfg.epsilon)
      {
        rep.converged = true;
        best_f = f;
        best_alpha = alpha;
        break;
      }
    }
    if (rep.converged || !smoothed)
      break;
    alpha += cfg.alpha_step;
    if (alpha > cfg.alpha_max + 1e-12)
      break;
  }

  rep.fbar_star = StackedPrecoder{best_f, p.layout()};
  rep.alpha_final = best_alpha;
  rep.objective_bits = objective_j(p, best_f, SmoothingParam(best_alpha));
  rep.lambda_log2 = lambda_log2(sys, best_f, best_alpha);
  rep.rate_breakdown = exact_breakdown(p, best_f);
  return rep;
}

inline GpiReport solve(const Problem &p, const SolverConfig &cfg,
                       const std::optional<StackedPrecoder> &init = std::nullopt)
{
  return solve(build_quotient_system(p), cfg, init);
}

// ---------------------------------------------------------------------------
// Unstacking
// ---------------------------------------------------------------------------

/// Per-message precoders and their share of the total power.
struct MessagePrecoders
{
  std::vector<CVector> precoders;
  std::vector<double> power_fractions;
};

inline MessagePrecoders extract_precoders(const StackedPrecoder &s)
{
  MessagePrecoders out;
  const double total = s.fbar.squaredNorm();
  for (int m = 0; m < s.layout.messages; ++m)
  {
    out.precoders.emplace_back(s.block(m));
    out.power_fractions.push_back(total > 0.0 ? s.block(m).squaredNorm() / total : 0.0);
  }
  return out;
}

inline StackedPrecoder restack(const MessagePrecoders &mp)
{
  if (mp.precoders.empty())
    return {};
  const int n = static_cast<int>(mp.precoders.front().size());
  StackedPrecoder s{CVector(n * static_cast<int>(mp.precoders.size())),
                    StackLayout{n, static_cast<int>(mp.precoders.size())}};
  for (int m = 0; m < s.layout.messages; ++m)
    s.block(m) = mp.precoders[m];
  return s;
}

} // namespace rsgpi

#endif // RSGPI_GPI_SOLVER_HPP
