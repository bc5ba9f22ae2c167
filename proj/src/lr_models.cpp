#include "qdet/lr_models.hpp"

#include <cmath>
#include <stdexcept>

namespace qdet {

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double norm_pdf(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double clamp01(double p) { return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p); }

}  // namespace

LikelihoodRatioModel LikelihoodRatioModel::gaussian(double theta) {
  if (theta == 0.0 || !std::isfinite(theta))
    throw std::invalid_argument("gaussian model requires finite theta != 0");
  return {ModelFamily::GaussianMeanShift, theta};
}

LikelihoodRatioModel LikelihoodRatioModel::exponential(double theta) {
  if (!(theta > 0.0) || theta == 1.0 || !std::isfinite(theta))
    throw std::invalid_argument("exponential model requires theta > 0, theta != 1");
  return {ModelFamily::ExponentialScale, theta};
}

// Gaussian: l(x) = exp(theta*x - theta^2/2) is monotone in x, so
// {l <= t} = {x <= x_t} (theta > 0) or {x >= x_t} (theta < 0) with
// x_t = ln(t)/theta + theta/2. Under f_0 the observation is x = theta + z,
// z standard normal, which shifts the boundary by -theta.
//
// Exponential: l(x) = theta^{-1} exp(x*(1-1/theta)); for theta > 1 it is
// increasing with range [1/theta, inf), giving the power laws
//   F_inf(t) = 1 - (theta*t)^{-theta/(theta-1)},
//   F_0(t)   = 1 - (theta*t)^{-1/(theta-1)},   t >= 1/theta.
// For theta in (0,1) it is decreasing with range (0, 1/theta] and the same
// algebra yields F_inf(t) = (theta*t)^{theta/(1-theta)}, F_0(t) = (theta*t)^{1/(1-theta)}.
double lr_cdf(const LikelihoodRatioModel& model, Measure i, double t) {
  if (!(t > 0.0)) return 0.0;
  switch (model.family) {
    case ModelFamily::GaussianMeanShift: {
      const double th = model.theta;
      const double shift = (i == Measure::PreChange) ? 0.5 * th : -0.5 * th;
      const double z = std::log(t) / th + shift;
      return clamp01(th > 0.0 ? norm_cdf(z) : norm_cdf(-z));
    }
    case ModelFamily::ExponentialScale: {
      const double th = model.theta;
      const double u = th * t;
      if (th > 1.0) {
        if (u <= 1.0) return 0.0;
        const double beta = (i == Measure::PreChange) ? th / (th - 1.0) : 1.0 / (th - 1.0);
        return clamp01(1.0 - std::pow(u, -beta));
      }
      // theta in (0,1): support (0, 1/theta]
      if (u >= 1.0) return 1.0;
      const double beta = (i == Measure::PreChange) ? th / (1.0 - th) : 1.0 / (1.0 - th);
      return clamp01(std::pow(u, beta));
    }
  }
  return 0.0;
}

double lr_pdf(const LikelihoodRatioModel& model, Measure i, double t) {
  if (!(t > 0.0)) return 0.0;
  switch (model.family) {
    case ModelFamily::GaussianMeanShift: {
      const double th = model.theta;
      const double shift = (i == Measure::PreChange) ? 0.5 * th : -0.5 * th;
      const double z = std::log(t) / th + shift;
      return norm_pdf(z) / (std::abs(th) * t);
    }
    case ModelFamily::ExponentialScale: {
      const double th = model.theta;
      const double u = th * t;
      if (th > 1.0) {
        if (u <= 1.0) return 0.0;
        const double beta = (i == Measure::PreChange) ? th / (th - 1.0) : 1.0 / (th - 1.0);
        return beta * th * std::pow(u, -beta - 1.0);
      }
      if (u >= 1.0) return 0.0;
      const double beta = (i == Measure::PreChange) ? th / (1.0 - th) : 1.0 / (1.0 - th);
      return beta * th * std::pow(u, beta - 1.0);
    }
  }
  return 0.0;
}

double lr_support_lo(const LikelihoodRatioModel& model) {
  if (model.family == ModelFamily::ExponentialScale && model.theta > 1.0)
    return 1.0 / model.theta;
  return 0.0;
}

double sample_lr(const LikelihoodRatioModel& model, Measure i, std::mt19937_64& rng) {
  switch (model.family) {
    case ModelFamily::GaussianMeanShift: {
      const double th = model.theta;
      std::normal_distribution<double> n01(0.0, 1.0);
      const double x = (i == Measure::PostChange ? th : 0.0) + n01(rng);
      return std::exp(th * x - 0.5 * th * th);
    }
    case ModelFamily::ExponentialScale: {
      const double th = model.theta;
      std::exponential_distribution<double> e(i == Measure::PostChange ? 1.0 / th : 1.0);
      const double x = e(rng);
      return std::exp(x * (1.0 - 1.0 / th)) / th;
    }
  }
  return 0.0;
}

}  // namespace qdet
