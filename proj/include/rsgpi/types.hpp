// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_TYPES_HPP
#define RSGPI_TYPES_HPP

#include <complex>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace rsgpi
{

using cdouble = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/// Random engine used by every stochastic routine. Streams are seeded per
/// trial and never shared between threads.
using Rng = std::mt19937_64;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLn2 = 0.69314718055994530942;

/// Hermitian quadratic form x^H M x, real part only. Written out to avoid
/// temporaries in hot loops.
template <typename Mat, typename Vec>
inline double quad_form(const Mat &m, const Vec &x)
{
  const Eigen::Index n = x.size();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
  {
    cdouble col(0.0, 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
      col += std::conj(x(i)) * m(i, j);
    acc += (col * x(j)).real();
  }
  return acc;
}

/// |h^H x|^2.
template <typename VecA, typename VecB>
inline double inner_gain(const VecA &h, const VecB &x)
{
  cdouble acc(0.0, 0.0);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    acc += std::conj(h(i)) * x(i);
  return std::norm(acc);
}

/// One CN(0,1) draw: real and imaginary parts each N(0, 1/2).
inline cdouble standard_complex_normal(Rng &rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  const double x = normal(rng);
  const double y = normal(rng);
  return cdouble(x, y) * std::sqrt(0.5);
}

} // namespace rsgpi

#endif // RSGPI_TYPES_HPP
