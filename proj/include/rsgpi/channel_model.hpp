// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_CHANNEL_MODEL_HPP
#define RSGPI_CHANNEL_MODEL_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include "rsgpi/types.hpp"

namespace rsgpi
{

// ---------------------------------------------------------------------------
// One-ring geometry
// ---------------------------------------------------------------------------

/// Uniform circular array seen by one user through a ring of scatterers.
///
/// Antennas sit on a circle of radius `wavelength * radius_factor()`, with
/// antenna n (0-based) at angle 2*pi*n/N. The radius is chosen so that
/// neighbouring antennas are half a wavelength apart.
struct OneRingGeometry
{
  int num_antennas = 1;
  double aoa = 0.0;             // radians
  double angular_spread = 0.0;  // radians, half-width of the scattering arc
  double wavelength = 1.0;

  /// 0.5 / sqrt((1 - cos(2pi/N))^2 + sin^2(2pi/N)). A single antenna has no
  /// baseline; its radius is reported as zero.
  double radius_factor() const
  {
    if (num_antennas <= 1)
      return 0.0;
    const double a = 2.0 * kPi / num_antennas;
    const double c = 1.0 - std::cos(a);
    const double s = std::sin(a);
    return 0.5 / std::sqrt(c * c + s * s);
  }

  /// Planar position of antenna n (0-based), in length units.
  Eigen::Vector2d antenna_position(int n) const
  {
    const double r = wavelength * radius_factor();
    const double phi = 2.0 * kPi * n / num_antennas;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  void validate() const
  {
    if (num_antennas < 1)
      throw std::invalid_argument("one-ring geometry: num_antennas must be >= 1");
    if (!(angular_spread > 0.0) || angular_spread > kPi)
      throw std::invalid_argument("one-ring geometry: angular spread must lie in (0, pi]");
    if (!(wavelength > 0.0))
      throw std::invalid_argument("one-ring geometry: wavelength must be positive");
  }
};

/// Steering vector a(x)_n = exp(-j (2pi/psi) [cos x, sin x] . r_n).
inline CVector ring_steering_vector(const OneRingGeometry &geom, double x)
{
  CVector a(geom.num_antennas);
  const double k = 2.0 * kPi / geom.wavelength;
  const Eigen::Vector2d dir(std::cos(x), std::sin(x));
  for (int n = 0; n < geom.num_antennas; ++n)
    a(n) = std::polar(1.0, -k * dir.dot(geom.antenna_position(n)));
  return a;
}

/// Spatial covariance R of one user. Hermitian PSD with unit diagonal.
struct SpatialCovariance
{
  CMatrix matrix;

  Eigen::Index size() const { return matrix.rows(); }
};

/// Average of a(x) a(x)^H over x in [aoa - spread, aoa + spread], by composite
/// Simpson with `quad_points` intervals. Each Simpson node contributes a
/// positively weighted rank-one term, so the result is PSD by construction.
inline SpatialCovariance build_one_ring_covariance(const OneRingGeometry &geom, int quad_points = 200)
{
  geom.validate();
  if (quad_points < 8 || quad_points % 2 != 0)
    throw std::invalid_argument("one-ring covariance: quad_points must be even and >= 8");

  const int n = geom.num_antennas;
  const double lo = geom.aoa - geom.angular_spread;
  const double h = 2.0 * geom.angular_spread / quad_points;
  // (1 / 2*spread) * (h / 3) = 1 / (3 * quad_points)
  const double scale = 1.0 / (3.0 * quad_points);

  CMatrix r = CMatrix::Zero(n, n);
  for (int i = 0; i <= quad_points; ++i)
  {
    double w = (i == 0 || i == quad_points) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const CVector a = ring_steering_vector(geom, lo + i * h);
    r.noalias() += (w * scale) * (a * a.adjoint());
  }
  SpatialCovariance out;
  out.matrix = 0.5 * (r + r.adjoint());
  return out;
}

// ---------------------------------------------------------------------------
// Karhunen-Loeve factor
// ---------------------------------------------------------------------------

/// R ~= U diag(eigenvalues) U^H restricted to the retained spectrum.
struct KlFactor
{
  CMatrix basis;       // N x r, orthonormal columns
  RVector eigenvalues; // r, strictly positive
  int rank = 0;

  Eigen::Index dimension() const { return basis.rows(); }
};

inline bool all_finite(const CMatrix &m)
{
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag()))
        return false;
  return true;
}

/// Eigendecomposition keeping eigenvalues above rel_tol * lambda_max.
inline KlFactor kl_factorize(const CMatrix &r, double rel_tol = 1e-10)
{
  if (r.rows() != r.cols())
    throw std::invalid_argument("kl_factorize: matrix must be square");
  if (!all_finite(r))
    throw std::domain_error("kl_factorize: non-finite entry in covariance");

  const Eigen::Index n = r.rows();
  KlFactor out;
  if (n == 0)
    return out;

  Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (r + r.adjoint()));
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("kl_factorize: eigendecomposition failed");

  const RVector &vals = eig.eigenvalues(); // ascending
  const double lmax = vals(n - 1);
  const double threshold = rel_tol * std::max(lmax, 0.0);

  int keep = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (vals(i) > threshold && vals(i) > 0.0)
      ++keep;

  out.rank = keep;
  out.basis.resize(n, keep);
  out.eigenvalues.resize(keep);
  // Largest first.
  for (int c = 0; c < keep; ++c)
  {
    out.basis.col(c) = eig.eigenvectors().col(n - 1 - c);
    out.eigenvalues(c) = vals(n - 1 - c);
  }
  return out;
}

inline KlFactor kl_factorize(const SpatialCovariance &r, double rel_tol = 1e-10)
{
  return kl_factorize(r.matrix, rel_tol);
}

/// h = U Lambda^{1/2} g with g ~ CN(0, I_r).
inline CVector sample_channel(const KlFactor &kl, Rng &rng)
{
  CVector g(kl.rank);
  for (int i = 0; i < kl.rank; ++i)
    g(i) = standard_complex_normal(rng) * std::sqrt(kl.eigenvalues(i));
  if (kl.rank == 0)
    return CVector::Zero(kl.dimension());
  return kl.basis * g;
}

// ---------------------------------------------------------------------------
// CSIT model
// ---------------------------------------------------------------------------

/// LMMSE error covariance Phi = R - R (R + (sigma2 / tau_p) I)^{-1} R.
/// `tau_p` is the product of uplink training length and training power.
///
/// Evaluated in the eigenbasis of R, where each eigenvalue l maps to
/// l * s / (l + s) with s = sigma2 / tau_p. A direct solve loses all accuracy
/// once s is far below the spectrum of R.
inline CMatrix lmmse_error_covariance(const CMatrix &r, double tau_p, double sigma2)
{
  if (!(tau_p > 0.0))
    throw std::invalid_argument("lmmse_error_covariance: tau_p must be positive");
  if (!(sigma2 > 0.0))
    throw std::invalid_argument("lmmse_error_covariance: sigma2 must be positive");
  if (!all_finite(r))
    throw std::domain_error("lmmse_error_covariance: non-finite entry in covariance");

  const double s = sigma2 / tau_p;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (r + r.adjoint()));
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("lmmse_error_covariance: eigendecomposition failed");
  RVector shrunk(eig.eigenvalues().size());
  for (Eigen::Index i = 0; i < shrunk.size(); ++i)
  {
    const double l = std::max(eig.eigenvalues()(i), 0.0);
    shrunk(i) = l * s / (l + s);
  }
  const CMatrix phi = eig.eigenvectors() * shrunk.asDiagonal() * eig.eigenvectors().adjoint();
  return 0.5 * (phi + phi.adjoint());
}

inline CMatrix lmmse_error_covariance(const SpatialCovariance &r, double tau_p, double sigma2)
{
  return lmmse_error_covariance(r.matrix, tau_p, sigma2);
}

/// L with L L^H = M for a Hermitian PSD M, from its eigendecomposition.
/// Negative round-off eigenvalues are clamped to zero.
inline CMatrix psd_sqrt_factor(const CMatrix &m)
{
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (m + m.adjoint()));
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("psd_sqrt_factor: eigendecomposition failed");
  const RVector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal();
}

/// True channel, transmitter-side estimate and error covariance of one user.
struct UserChannelState
{
  CVector h;
  CVector h_hat;
  CMatrix phi;
  CMatrix covariance; // R; empty when the state was built from (h, Phi) only
};

/// Draws e ~ CN(0, Phi) and returns h_hat = h - e.
inline UserChannelState sample_csit(const CVector &h, const CMatrix &phi, Rng &rng)
{
  if (phi.rows() != h.size() || phi.cols() != h.size())
    throw std::invalid_argument("sample_csit: dimension mismatch");
  const CMatrix l = psd_sqrt_factor(phi);
  CVector g(h.size());
  for (Eigen::Index i = 0; i < g.size(); ++i)
    g(i) = standard_complex_normal(rng);
  UserChannelState st;
  st.h = h;
  st.h_hat = h - l * g;
  st.phi = phi;
  return st;
}

/// Full per-user draw: covariance -> channel -> LMMSE estimate.
inline UserChannelState draw_user_channel(const SpatialCovariance &r, double tau_p, double sigma2, Rng &rng)
{
  const KlFactor kl = kl_factorize(r);
  const CVector h = sample_channel(kl, rng);
  UserChannelState st = sample_csit(h, lmmse_error_covariance(r, tau_p, sigma2), rng);
  st.covariance = r.matrix;
  return st;
}

} // namespace rsgpi

#endif // RSGPI_CHANNEL_MODEL_HPP
