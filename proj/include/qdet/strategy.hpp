#pragma once

#include <stdexcept>
#include <string>

namespace qdet {

// How the chart statistic is initialized at time 0.
//   FixedR    -- deterministic head start R_0 = r (0 <= r < nu)
//   Classical -- the chart's conventional start (r = 0 for SR, r = 1 for CUSUM)
//   RNu       -- smallest r whose ADD profile never exceeds its steady-state limit
//   RStar     -- smallest r whose ADD profile is nondecreasing in tau
//   QsdMean   -- r = mean of the quasi-stationary distribution
//   Srp       -- R_0 drawn from the quasi-stationary distribution (randomized)
struct InitStrategy {
  enum class Kind { FixedR, Classical, RNu, RStar, QsdMean, Srp };

  Kind kind = Kind::Classical;
  double fixed_r = 0.0;

  static InitStrategy fixed(double r) {
    if (!(r >= 0.0)) throw std::invalid_argument("fixed head start must be >= 0");
    return {Kind::FixedR, r};
  }
  static InitStrategy classical() { return {Kind::Classical, 0.0}; }
  static InitStrategy r_nu() { return {Kind::RNu, 0.0}; }
  static InitStrategy r_star() { return {Kind::RStar, 0.0}; }
  static InitStrategy qsd_mean() { return {Kind::QsdMean, 0.0}; }
  static InitStrategy srp() { return {Kind::Srp, 0.0}; }

  bool randomized() const { return kind == Kind::Srp; }
  std::string name() const;

  // Accepts the CLI spellings: fixed:R, classical, r-nu, r-star, qsd-mean, srp.
  static InitStrategy parse(const std::string& text);
};

}  // namespace qdet
