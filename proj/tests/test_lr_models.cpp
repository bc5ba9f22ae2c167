#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "qdet/lr_models.hpp"

using namespace qdet;

namespace {

// The observation-space likelihood ratio, written down directly from the two
// densities. Everything in this file that plays oracle goes through this
// function and the observation-space CDFs, never through lr_cdf/lr_pdf.
double lr_of_x(const LikelihoodRatioModel& m, double x) {
  if (m.family == ModelFamily::GaussianMeanShift)
    return std::exp(m.theta * x - 0.5 * m.theta * m.theta);
  return std::exp(x * (1.0 - 1.0 / m.theta)) / m.theta;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P_i[X <= x] in observation space.
double obs_cdf(const LikelihoodRatioModel& m, Measure i, double x) {
  if (m.family == ModelFamily::GaussianMeanShift)
    return norm_cdf(i == Measure::PostChange ? x - m.theta : x);
  if (x <= 0.0) return 0.0;
  const double rate = (i == Measure::PostChange) ? 1.0 / m.theta : 1.0;
  return 1.0 - std::exp(-rate * x);
}

// Solve lr_of_x(x) = t by bisection on a bracket wide enough for every test
// point, then convert {l(X) <= t} into an observation-space event.
double cdf_oracle(const LikelihoodRatioModel& m, Measure i, double t) {
  const bool increasing = (m.family == ModelFamily::GaussianMeanShift)
                              ? (m.theta > 0.0)
                              : (m.theta > 1.0);
  double lo = (m.family == ModelFamily::ExponentialScale) ? 0.0 : -60.0;
  double hi = (m.family == ModelFamily::ExponentialScale) ? 4000.0 : 60.0;
  const double f_lo = lr_of_x(m, lo) - t;
  const double f_hi = lr_of_x(m, hi) - t;
  if (increasing) {
    if (f_lo >= 0.0) return i == Measure::PreChange ? 0.0 : 0.0;
    if (f_hi <= 0.0) return 1.0;
  } else {
    if (f_lo <= 0.0) return 1.0;
    if (f_hi >= 0.0) return 0.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const bool below = (lr_of_x(m, mid) < t) == increasing;
    (below ? lo : hi) = mid;
  }
  const double x_t = 0.5 * (lo + hi);
  return increasing ? obs_cdf(m, i, x_t) : 1.0 - obs_cdf(m, i, x_t);
}

// Composite Simpson over [a,b].
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Integration window covering all but ~1e-12 of the lr mass under either
// measure. The ends are pinned to the exact support edges where the
// exponential-family density jumps; Simpson across an interior jump would
// cost three digits.
std::pair<double, double> lr_mass_window(const LikelihoodRatioModel& m) {
  // The edge itself sits just inside the open side of the support, so that
  // the endpoint samples pick up the one-sided density limit instead of the
  // zero the boundary convention assigns at the jump.
  double lo = 1e-12, hi = 1.0;
  if (m.family == ModelFamily::ExponentialScale && m.theta > 1.0)
    lo = (1.0 / m.theta) * (1.0 + 1e-12);
  if (m.family == ModelFamily::ExponentialScale && m.theta < 1.0)
    return {lo, (1.0 / m.theta) * (1.0 - 1e-12)};
  while (lr_cdf(m, Measure::PreChange, hi) < 1.0 - 1e-13 ||
         lr_cdf(m, Measure::PostChange, hi) < 1.0 - 1e-13)
    hi *= 2.0;
  return {lo, hi};
}

std::vector<double> probe_points(const LikelihoodRatioModel& m) {
  if (m.family == ModelFamily::GaussianMeanShift)
    return {0.2, 0.5, 0.8, 0.95, 1.0, 1.05, 1.3, 2.0, 3.5};
  if (m.theta > 1.0)
    return {1.0 / m.theta + 0.01, 1.0, 1.5, 2.0, 5.0, 20.0, 100.0};
  return {0.05, 0.2, 0.5, 1.0 / m.theta - 0.01};
}

const LikelihoodRatioModel kModels[] = {
    LikelihoodRatioModel::gaussian(0.1),
    LikelihoodRatioModel::gaussian(1.0),
    LikelihoodRatioModel::gaussian(-0.3),
    LikelihoodRatioModel::exponential(1.1),
    LikelihoodRatioModel::exponential(2.0),
    LikelihoodRatioModel::exponential(0.5),
};

}  // namespace

TEST_CASE("factories reject degenerate parameters") {
  CHECK_THROWS_AS(LikelihoodRatioModel::gaussian(0.0), std::invalid_argument);
  CHECK_THROWS_AS(LikelihoodRatioModel::exponential(1.0), std::invalid_argument);
  CHECK_THROWS_AS(LikelihoodRatioModel::exponential(-2.0), std::invalid_argument);
  CHECK_THROWS_AS(LikelihoodRatioModel::exponential(0.0), std::invalid_argument);
}

TEST_CASE("lr_cdf matches the set-inversion oracle") {
  for (const auto& m : kModels) {
    CAPTURE(static_cast<int>(m.family));
    CAPTURE(m.theta);
    for (double t : probe_points(m)) {
      CAPTURE(t);
      CHECK(lr_cdf(m, Measure::PreChange, t) ==
            doctest::Approx(cdf_oracle(m, Measure::PreChange, t)).epsilon(1e-9));
      CHECK(lr_cdf(m, Measure::PostChange, t) ==
            doctest::Approx(cdf_oracle(m, Measure::PostChange, t)).epsilon(1e-9));
    }
  }
}

TEST_CASE("lr_cdf is a distribution function") {
  for (const auto& m : kModels) {
    for (Measure i : {Measure::PreChange, Measure::PostChange}) {
      CHECK(lr_cdf(m, i, 0.0) == 0.0);
      CHECK(lr_cdf(m, i, -3.0) == 0.0);
      CHECK(lr_cdf(m, i, 1e12) == doctest::Approx(1.0).epsilon(1e-6));
      double prev = 0.0;
      for (double t = 0.01; t < 40.0; t *= 1.3) {
        const double cur = lr_cdf(m, i, t);
        CHECK(cur >= prev - 1e-15);
        prev = cur;
      }
    }
  }
}

TEST_CASE("support bound: no mass below lr_support_lo") {
  const auto m = LikelihoodRatioModel::exponential(1.1);
  const double lo = lr_support_lo(m);
  CHECK(lo == doctest::Approx(1.0 / 1.1));
  CHECK(lr_cdf(m, Measure::PreChange, lo) == 0.0);
  CHECK(lr_cdf(m, Measure::PreChange, lo * 0.999) == 0.0);
  CHECK(lr_pdf(m, Measure::PreChange, lo * 0.9) == 0.0);
  CHECK(lr_cdf(m, Measure::PreChange, lo * 1.01) > 0.0);

  CHECK(lr_support_lo(LikelihoodRatioModel::gaussian(0.1)) == 0.0);
  CHECK(lr_support_lo(LikelihoodRatioModel::exponential(0.5)) == 0.0);
}

TEST_CASE("lr_pdf agrees with central differences of lr_cdf") {
  for (const auto& m : kModels) {
    for (Measure i : {Measure::PreChange, Measure::PostChange}) {
      for (double t : probe_points(m)) {
        const double h = 1e-6 * std::max(1.0, t);
        const double fd =
            (lr_cdf(m, i, t + h) - lr_cdf(m, i, t - h)) / (2.0 * h);
        const double pd = lr_pdf(m, i, t);
        CAPTURE(m.theta);
        CAPTURE(t);
        CHECK(pd == doctest::Approx(fd).epsilon(5e-5));
      }
    }
  }
}

TEST_CASE("pdf normalization and the two change-of-measure identities") {
  // E_inf[l] = 1 and E_0[1/l] = 1 hold for any likelihood ratio; they pin the
  // density down against sign or scaling slips far more tightly than
  // normalization alone.
  for (const auto& m : kModels) {
    auto [lo, hi] = lr_mass_window(m);
    // integrate in u = ln t to tame both the spike near 0 and the long tail
    auto log_int = [&](Measure i, auto weight) {
      auto f = [&](double u) {
        const double t = std::exp(u);
        return weight(t) * lr_pdf(m, i, t) * t;
      };
      return simpson(f, std::log(lo), std::log(hi), 40000);
    };
    CAPTURE(static_cast<int>(m.family));
    CAPTURE(m.theta);
    CHECK(log_int(Measure::PreChange, [](double) { return 1.0; }) ==
          doctest::Approx(1.0).epsilon(1e-8));
    CHECK(log_int(Measure::PostChange, [](double) { return 1.0; }) ==
          doctest::Approx(1.0).epsilon(1e-8));
    CHECK(log_int(Measure::PreChange, [](double t) { return t; }) ==
          doctest::Approx(1.0).epsilon(1e-7));
    CHECK(log_int(Measure::PostChange, [](double t) { return 1.0 / t; }) ==
          doctest::Approx(1.0).epsilon(1e-7));
  }
}

TEST_CASE("sampler matches lr_cdf (Kolmogorov-Smirnov at 1e6 draws)") {
  // KS critical value at alpha = 0.001 is 1.95/sqrt(n) ~ 0.00195; a sampler or
  // cdf bug shows up orders of magnitude above that.
  const size_t n = 1000000;
  for (const auto& m : {LikelihoodRatioModel::gaussian(0.1),
                        LikelihoodRatioModel::exponential(1.1)}) {
    for (Measure i : {Measure::PreChange, Measure::PostChange}) {
      std::mt19937_64 rng(20260818u);
      std::vector<double> draws(n);
      for (auto& d : draws) d = sample_lr(m, i, rng);
      std::sort(draws.begin(), draws.end());
      double ks = 0.0;
      for (size_t k = 0; k < n; ++k) {
        const double F = lr_cdf(m, i, draws[k]);
        ks = std::max(ks, std::abs(F - (k + 1.0) / n));
        ks = std::max(ks, std::abs(F - static_cast<double>(k) / n));
      }
      CAPTURE(static_cast<int>(m.family));
      CAPTURE(static_cast<int>(i));
      CHECK(ks < 0.002);
    }
  }
}

TEST_CASE("sample_lr is deterministic in the seed") {
  const auto m = LikelihoodRatioModel::gaussian(0.1);
  std::mt19937_64 a(7u), b(7u), c(8u);
  std::vector<double> va, vb, vc;
  for (int k = 0; k < 100; ++k) {
    va.push_back(sample_lr(m, Measure::PreChange, a));
    vb.push_back(sample_lr(m, Measure::PreChange, b));
    vc.push_back(sample_lr(m, Measure::PreChange, c));
  }
  CHECK(va == vb);
  CHECK(va != vc);
}

TEST_CASE("post-change draws are stochastically larger") {
  // Under f_0 the likelihood ratio must tend to be bigger: its mean is
  // E_0[l] = E_inf[l^2] > 1.
  for (const auto& m : {LikelihoodRatioModel::gaussian(0.1),
                        LikelihoodRatioModel::exponential(1.1)}) {
    std::mt19937_64 rng(99u);
    double s_pre = 0.0, s_post = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      s_pre += sample_lr(m, Measure::PreChange, rng);
      s_post += sample_lr(m, Measure::PostChange, rng);
    }
    CHECK(s_pre / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(s_post / n > 1.0);
  }
}
