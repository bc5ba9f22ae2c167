#pragma once

#include <random>

namespace qdet {

// Index of the governing measure: PreChange = all observations from f_inf,
// PostChange = all observations from f_0.
enum class Measure { PreChange, PostChange };

enum class ModelFamily { GaussianMeanShift, ExponentialScale };

// Observation model pair (f_inf, f_0) together with the distribution of the
// one-step likelihood ratio l(X) = f_0(X)/f_inf(X) under either measure.
//
//   GaussianMeanShift: f_inf = N(0,1), f_0 = N(theta,1), theta != 0
//                      l(x) = exp(theta*x - theta^2/2)
//   ExponentialScale:  f_inf = Exp(mean 1), f_0 = Exp(mean theta), theta > 0, theta != 1
//                      l(x) = theta^{-1} exp(x*(1 - 1/theta))
struct LikelihoodRatioModel {
  ModelFamily family;
  double theta;

  static LikelihoodRatioModel gaussian(double theta);
  static LikelihoodRatioModel exponential(double theta);
};

// F_i(t) = P_i[l(X) <= t], clamped to [0,1]. Zero for t <= lower support bound.
double lr_cdf(const LikelihoodRatioModel& model, Measure i, double t);

// Density of l(X) under measure i; returns 0 outside the support of l.
double lr_pdf(const LikelihoodRatioModel& model, Measure i, double t);

// Infimum of the support of l(X) (0 for Gaussian; 1/theta for Exponential theta>1).
double lr_support_lo(const LikelihoodRatioModel& model);

// Draw X ~ f_i and return l(X).
double sample_lr(const LikelihoodRatioModel& model, Measure i, std::mt19937_64& rng);

}  // namespace qdet
