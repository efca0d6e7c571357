// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "test_support.hpp"

using namespace rsgpi;
using Catch::Approx;

namespace
{

// Scalar re-evaluation of every bound straight from the per-message SINR
// expressions. Messages: c, p_1..p_G, 1..K.
struct ScalarRates
{
  std::vector<double> common;               // per user
  std::vector<std::vector<double>> partial; // per group, per member
  std::vector<double> priv;                 // per user
};

ScalarRates scalar_rates(const Problem &p, const CVector &fbar)
{
  const int n = p.antennas();
  const int g_count = p.messages.num_groups();
  const int k_users = p.num_users();
  auto fc = [&](int) { return fbar.segment(0, n); };
  auto fp = [&](int i) { return fbar.segment((1 + i) * n, n); };
  auto fk = [&](int l) { return fbar.segment((1 + g_count + l) * n, n); };
  auto pw = [&](int k, const CVector &f) { return std::norm(p.h_hat[k].dot(f)); };
  auto lk = [&](int k, const CVector &f) { return f.dot(p.phi[k] * f).real(); };

  ScalarRates out;
  for (int k = 0; k < k_users; ++k)
  {
    double den = p.snr_inv + lk(k, fc(0));
    for (int i = 0; i < g_count; ++i)
      den += pw(k, fp(i)) + lk(k, fp(i));
    for (int l = 0; l < k_users; ++l)
      den += pw(k, fk(l)) + lk(k, fk(l));
    out.common.push_back(std::log2(1.0 + pw(k, fc(0)) / den));
  }
  for (int i = 0; i < g_count; ++i)
  {
    out.partial.emplace_back();
    for (int k : p.messages.groups[i])
    {
      double den = p.snr_inv;
      for (int j = 0; j < g_count; ++j)
        den += (j == i ? 0.0 : pw(k, fp(j))) + lk(k, fp(j));
      for (int l = 0; l < k_users; ++l)
        den += pw(k, fk(l)) + lk(k, fk(l));
      out.partial.back().push_back(std::log2(1.0 + pw(k, fp(i)) / den));
    }
  }
  for (int k = 0; k < k_users; ++k)
  {
    int own = -1;
    for (int i = 0; i < g_count; ++i)
      if (std::count(p.messages.groups[i].begin(), p.messages.groups[i].end(), k))
        own = i;
    double den = p.snr_inv;
    for (int j = 0; j < g_count; ++j)
      if (j != own)
        den += pw(k, fp(j)) + lk(k, fp(j));
    for (int l = 0; l < k_users; ++l)
      den += (l == k ? 0.0 : pw(k, fk(l))) + lk(k, fk(l));
    out.priv.push_back(std::log2(1.0 + pw(k, fk(k)) / den));
  }
  return out;
}

double direct_softmin(const std::vector<double> &v, double alpha)
{
  double acc = 0.0;
  for (double x : v)
    acc += std::exp(-x / alpha);
  return -alpha * std::log(acc / v.size());
}

} // namespace

TEST_CASE("zero message precoders give zero rates")
{
  Rng rng(1);
  Problem p = testing::random_problem(3, 3, 1, rng);
  CVector f = testing::random_unit(p.layout().size(), rng);
  f.segment(0, 3).setZero();
  f.segment(p.layout().offset(p.messages.partial_index(0)), 3).setZero();
  f.segment(p.layout().offset(p.messages.private_index(2)), 3).setZero();
  f /= f.norm();
  for (int k = 0; k < 3; ++k)
    CHECK(common_rate_bound(p, f, k) == 0.0);
  for (int k : p.messages.groups[0])
    CHECK(partial_common_rate_bound(p, f, 0, k) == 0.0);
  CHECK(private_rate_bound(p, f, 2) == 0.0);
}

TEST_CASE("single-user interference-free closed forms")
{
  Rng rng(2);
  Problem p = testing::random_problem(4, 1, 0, rng, 0.0, 0.05);
  const CVector h = p.h_hat[0];
  const double closed = std::log2(1.0 + h.squaredNorm() / p.snr_inv);

  CVector f = CVector::Zero(8);
  f.segment(0, 4) = h / h.norm();
  CHECK(common_rate_bound(p, f, 0) == Approx(closed).epsilon(1e-14));

  f.setZero();
  f.segment(4, 4) = h / h.norm();
  CHECK(private_rate_bound(p, f, 0) == Approx(closed).epsilon(1e-14));

  Problem q = testing::random_problem(3, 1, 1, rng, 0.0, 0.2);
  CVector g = CVector::Zero(9);
  g.segment(3, 3) = testing::random_unit(3, rng);
  const double expect = std::log2(1.0 + std::norm(q.h_hat[0].dot(g.segment(3, 3))) / q.snr_inv);
  CHECK(partial_common_rate_bound(q, g, 0, 0) == Approx(expect).epsilon(1e-14));
}

TEST_CASE("rate bounds equal an independent scalar evaluation")
{
  Rng rng(3);
  for (auto [n, k, g] : {std::tuple{2, 2, 0}, {3, 2, 1}, {4, 4, 2}, {3, 5, 2}})
    for (int rep = 0; rep < 50; ++rep)
    {
      const Problem p = testing::random_problem(n, k, g, rng);
      const CVector f = testing::random_unit(p.layout().size(), rng);
      const ScalarRates s = scalar_rates(p, f);
      for (int u = 0; u < k; ++u)
      {
        CHECK(std::abs(common_rate_bound(p, f, u) - s.common[u]) < 1e-12);
        CHECK(std::abs(private_rate_bound(p, f, u) - s.priv[u]) < 1e-12);
      }
      for (int i = 0; i < g; ++i)
        for (std::size_t j = 0; j < p.messages.groups[i].size(); ++j)
          CHECK(std::abs(partial_common_rate_bound(p, f, i, p.messages.groups[i][j]) - s.partial[i][j]) < 1e-12);

      const RateBreakdown rb = exact_breakdown(p, f);
      double sum = *std::min_element(s.common.begin(), s.common.end());
      for (const auto &grp : s.partial)
        sum += *std::min_element(grp.begin(), grp.end());
      for (double r : s.priv)
        sum += r;
      CHECK(std::abs(rb.sum - sum) < 1e-10);
      double parts = rb.common_rate;
      for (double r : rb.partial_rates)
        parts += r;
      for (double r : rb.private_rates)
        parts += r;
      CHECK(std::abs(rb.sum - parts) < 1e-12);
    }
}

TEST_CASE("softmin values and bounds")
{
  const std::vector<double> flat(7, 2.75);
  CHECK(softmin(flat, SmoothingParam(0.3)) == 2.75);

  const std::vector<double> two{1.0, 2.0};
  const double expect = -0.5 * std::log((std::exp(-2.0) + std::exp(-4.0)) / 2.0);
  CHECK(softmin(two, SmoothingParam(0.5)) == Approx(expect).epsilon(1e-14));
  CHECK(softmin(two, SmoothingParam(0.5)) == Approx(1.28305).margin(1e-4));

  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int t = 0; t < 2000; ++t)
  {
    std::vector<double> v(1 + t % 9);
    for (double &x : v)
      x = u(rng);
    const double a = 0.01 + (t % 13) * 0.2;
    const double lo = *std::min_element(v.begin(), v.end());
    const double s = softmin(v, SmoothingParam(a));
    CHECK(s >= lo - 1e-12);
    CHECK(s <= lo + a * std::log(static_cast<double>(v.size())) + 1e-12);
    if (a > 0.5)
      CHECK(std::abs(s - direct_softmin(v, a)) < 1e-10);
  }
  // No underflow for a tiny alpha.
  CHECK(std::isfinite(softmin(std::vector<double>{50.0, 60.0}, SmoothingParam(1e-3))));
  CHECK_THROWS_AS(SmoothingParam(0.0), std::invalid_argument);
  CHECK_THROWS_AS(softmin(std::vector<double>{}, SmoothingParam(1.0)), std::invalid_argument);
}

TEST_CASE("objective combines softmins and private sums")
{
  Rng rng(5);
  for (int g : {0, 2})
  {
    const Problem p = testing::random_problem(3, 4, g, rng);
    const CVector f = testing::random_unit(p.layout().size(), rng);
    const double alpha = 0.4;
    const ScalarRates s = scalar_rates(p, f);
    double expect = direct_softmin(s.common, alpha);
    for (const auto &grp : s.partial)
      expect += direct_softmin(grp, alpha);
    for (double r : s.priv)
      expect += r;
    CHECK(objective_j(p, f, SmoothingParam(alpha)) == Approx(expect).epsilon(1e-12));

    const CVector rotated = std::polar(1.0, 1.234) * f;
    CHECK(std::abs(objective_j(p, rotated, SmoothingParam(alpha)) - objective_j(p, f, SmoothingParam(alpha))) <
          1e-12);
  }
}

TEST_CASE("objective rejects non-unit stacks and invalid indices")
{
  Rng rng(6);
  const Problem p = testing::random_problem(2, 2, 1, rng);
  const CVector f = testing::random_unit(p.layout().size(), rng);
  CHECK_THROWS_AS(objective_j(p, CVector(2.0 * f), SmoothingParam(0.1)), std::invalid_argument);
  CHECK_THROWS_AS(private_rate_bound(p, CVector(f.head(4)), 0), std::invalid_argument);
  Problem q = testing::random_problem(2, 3, 1, rng);
  q.messages.groups = {{0, 1}};
  const CVector fq = testing::random_unit(q.layout().size(), rng);
  CHECK_THROWS_AS(partial_common_rate_bound(q, fq, 0, 2), std::invalid_argument);
}

TEST_CASE("breakdown: smoothing gap per term is at most alpha ln(length)")
{
  Rng rng(7);
  const double alpha = 0.3;
  for (int rep = 0; rep < 100; ++rep)
  {
    const Problem p = testing::random_problem(4, 4, 2, rng);
    const CVector f = testing::random_unit(p.layout().size(), rng);
    const RateBreakdown rb = exact_breakdown(p, f);
    const double j = objective_j(p, f, SmoothingParam(alpha));
    const double slack = alpha * (std::log(4.0) + 2.0 * std::log(2.0));
    CHECK(j >= rb.sum - 1e-12);
    CHECK(j <= rb.sum + slack + 1e-12);
  }
}

TEST_CASE("private bounds grow with power when nothing else interferes")
{
  Rng rng(8);
  Problem p = testing::random_problem(4, 3, 0, rng, 0.0);
  CVector f = testing::random_unit(p.layout().size(), rng);
  f.segment(0, 4).setZero();
  f /= f.norm();
  std::vector<double> prev(3, -1.0);
  for (double snr_db = -10.0; snr_db <= 40.0; snr_db += 5.0)
  {
    p.snr_inv = std::pow(10.0, -snr_db / 10.0);
    for (int k = 0; k < 3; ++k)
    {
      const double r = private_rate_bound(p, f, k);
      CHECK(r >= prev[k]);
      prev[k] = r;
    }
  }
}
