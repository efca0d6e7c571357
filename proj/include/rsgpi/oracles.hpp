// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_ORACLES_HPP
#define RSGPI_ORACLES_HPP

// Independent verification routines. Nothing here shares a code path with the
// block-wise solver: KKT operators are assembled densely from the rate
// definitions, gradients come from finite differences, optima from sampling.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "rsgpi/gpi_solver.hpp"
#include "rsgpi/message_set.hpp"
#include "rsgpi/rate_bounds.hpp"
#include "rsgpi/types.hpp"

namespace rsgpi::oracles
{

using Objective = std::function<double(const CVector &)>;

/// Central-difference gradient over the 2*size real coordinates, ordered
/// [Re f0, Im f0, Re f1, Im f1, ...].
inline RVector fd_gradient(const Objective &j, const CVector &f, double h = 1e-5)
{
  RVector g(2 * f.size());
  CVector x = f;
  for (Eigen::Index i = 0; i < f.size(); ++i)
  {
    for (int part = 0; part < 2; ++part)
    {
      const cdouble step = part == 0 ? cdouble(h, 0.0) : cdouble(0.0, h);
      x(i) = f(i) + step;
      const double up = j(x);
      x(i) = f(i) - step;
      const double down = j(x);
      x(i) = f(i);
      g(2 * i + part) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

/// Removes the radial component of a real-coordinate gradient at f.
inline RVector project_tangent(const RVector &g, const CVector &f)
{
  RVector x(2 * f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i)
  {
    x(2 * i) = f(i).real();
    x(2 * i + 1) = f(i).imag();
  }
  const double nx = x.norm();
  if (nx == 0.0)
    return g;
  x /= nx;
  return g - g.dot(x) * x;
}

/// J(f / ||f||): the smoothed objective extended off the sphere.
inline Objective normalized_objective(const Problem &p, double alpha)
{
  return [p, alpha](const CVector &f) { return objective_j(p, f / f.norm(), SmoothingParam(alpha)); };
}

inline double projected_gradient_norm(const Problem &p, const CVector &f, double alpha, double h = 1e-5)
{
  return project_tangent(fd_gradient(normalized_objective(p, alpha), f, h), f).norm();
}

// ---------------------------------------------------------------------------
// Random search
// ---------------------------------------------------------------------------

struct SearchResult
{
  CVector fbar;
  double objective = -std::numeric_limits<double>::infinity();
};

/// Best of `samples` uniform unit vectors, then coordinate-wise polish on the
/// sphere with a halving step, for at most `polish_steps` sweeps.
inline SearchResult random_search(const Problem &p, double alpha, long samples, int polish_steps, Rng &rng)
{
  const int dim = p.layout().size();
  const SmoothingParam a(alpha);
  SearchResult best;
  CVector f(dim);
  for (long s = 0; s < samples; ++s)
  {
    for (int i = 0; i < dim; ++i)
      f(i) = standard_complex_normal(rng);
    f /= f.norm();
    const double v = objective_j(p, f, a);
    if (v > best.objective)
    {
      best.objective = v;
      best.fbar = f;
    }
  }

  double step = 0.1;
  CVector trial(dim);
  for (int sweep = 0; sweep < polish_steps && step > 1e-10; ++sweep)
  {
    bool improved = false;
    for (int i = 0; i < dim; ++i)
    {
      for (int part = 0; part < 2; ++part)
      {
        for (double sign : {1.0, -1.0})
        {
          trial = best.fbar;
          trial(i) += part == 0 ? cdouble(sign * step, 0.0) : cdouble(0.0, sign * step);
          trial /= trial.norm();
          const double v = objective_j(p, trial, a);
          if (v > best.objective)
          {
            best.objective = v;
            best.fbar = trial;
            improved = true;
            break;
          }
        }
      }
    }
    if (!improved)
      step *= 0.5;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Dense fixed-point path
// ---------------------------------------------------------------------------

struct DenseKkt
{
  CMatrix a_dir;
  CMatrix b_dir;
};

namespace detail
{

// Dense A of one rate term, written per message type from the rate
// expressions: `skip_common` / `skip_partial` drop blocks already removed by
// SIC.
inline CMatrix dense_term(const Problem &p, int user, bool skip_common, int skip_partial)
{
  const MessageSet &ms = p.messages;
  const int n = p.antennas();
  const int dim = p.layout().size();
  const CMatrix load = p.h_hat[user] * p.h_hat[user].adjoint() + p.phi[user];
  CMatrix a = p.snr_inv * CMatrix::Identity(dim, dim);
  for (int m = 0; m < ms.num_messages(); ++m)
  {
    if (skip_common && ms.has_common && m == ms.common_index())
      continue;
    if (skip_partial >= 0 && m == ms.partial_index(skip_partial))
      continue;
    a.block(m * n, m * n, n, n) += load;
  }
  return a;
}

inline CMatrix desired_outer(const Problem &p, int user, int message)
{
  const int n = p.antennas();
  const int dim = p.layout().size();
  CMatrix d = CMatrix::Zero(dim, dim);
  d.block(message * n, message * n, n, n) = p.h_hat[user] * p.h_hat[user].adjoint();
  return d;
}

inline std::vector<double> softmax_neg(const std::vector<double> &rates, double alpha)
{
  std::vector<double> w(rates.size());
  double top = -std::numeric_limits<double>::infinity();
  for (double r : rates)
    top = std::max(top, -r / alpha);
  double sum = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i)
    sum += (w[i] = std::exp(-rates[i] / alpha - top));
  for (double &x : w)
    x /= sum;
  return w;
}

} // namespace detail

/// A_dir and B_dir as full matrices. Weights come from the SINR-form rates.
inline DenseKkt dense_kkt(const Problem &p, const CVector &f, double alpha)
{
  const MessageSet &ms = p.messages;
  const int dim = p.layout().size();
  DenseKkt out{CMatrix::Zero(dim, dim), CMatrix::Zero(dim, dim)};

  auto accumulate = [&](double w, const CMatrix &a, const CMatrix &b) {
    const double qa = f.dot(a * f).real();
    const double qb = f.dot(b * f).real();
    out.a_dir += (w / qa) * a;
    out.b_dir += (w / qb) * b;
  };

  if (ms.has_common)
  {
    std::vector<double> rates;
    for (int k = 0; k < ms.num_users; ++k)
      rates.push_back(common_rate_bound(p, f, k));
    const auto w = detail::softmax_neg(rates, alpha);
    for (int k = 0; k < ms.num_users; ++k)
    {
      const CMatrix a = detail::dense_term(p, k, false, -1);
      accumulate(w[k], a, a - detail::desired_outer(p, k, ms.common_index()));
    }
  }
  for (int g = 0; g < ms.num_groups(); ++g)
  {
    std::vector<double> rates;
    for (int k : ms.groups[g])
      rates.push_back(partial_common_rate_bound(p, f, g, k));
    const auto w = detail::softmax_neg(rates, alpha);
    for (std::size_t j = 0; j < ms.groups[g].size(); ++j)
    {
      const int k = ms.groups[g][j];
      const CMatrix a = detail::dense_term(p, k, true, -1);
      accumulate(w[j], a, a - detail::desired_outer(p, k, ms.partial_index(g)));
    }
  }
  for (int k = 0; k < ms.num_users; ++k)
  {
    const auto g = ms.group_of_user(k);
    const CMatrix a = detail::dense_term(p, k, true, g ? *g : -1);
    accumulate(1.0, a, a - detail::desired_outer(p, k, ms.private_index(k)));
  }
  return out;
}

/// B^{-1} A f / ||.|| by a dense LU solve, phase canonicalized like the
/// block-wise update.
inline CVector dense_update(const Problem &p, const CVector &f, double alpha)
{
  const DenseKkt kkt = dense_kkt(p, f, alpha);
  CVector y = kkt.b_dir.partialPivLu().solve(kkt.a_dir * f);
  y /= y.norm();
  canonicalize_phase(y);
  return y;
}

/// || B^{-1} A f / ||.|| - f || after aligning the global phase of the update
/// to f. Zero exactly at an NEPv eigenvector.
inline double dense_fixed_point_check(const Problem &p, const CVector &f, double alpha)
{
  const DenseKkt kkt = dense_kkt(p, f, alpha);
  CVector y = kkt.b_dir.partialPivLu().solve(kkt.a_dir * f);
  y /= y.norm();
  const cdouble overlap = y.dot(f); // y^H f
  if (std::abs(overlap) > 0.0)
    y *= overlap / std::abs(overlap);
  return (y - f).norm();
}

} // namespace rsgpi::oracles

#endif // RSGPI_ORACLES_HPP
