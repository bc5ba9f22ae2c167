#pragma once

#include <cstdint>
#include <random>

#include "qdet/grid.hpp"
#include "qdet/lr_models.hpp"
#include "qdet/procedures.hpp"

namespace qdet {

enum class McQuantity { ARL, ADD_at, SurvivalProb };

struct McOptions {
  long replications = 10000;
  std::uint64_t seed = 0x5eed0001u;
  long path_cap = 0;        // 0: derive 100*gamma from gamma_hint or the threshold
  double gamma_hint = 0.0;  // informs the default path cap
  // SRP starts are drawn from this density by inverse transform on its
  // piecewise-linear trapezoid cumulative.
  const Eigen::VectorXd* srp_q = nullptr;
  const Grid* srp_grid = nullptr;
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(replications)
  long replications = 0;
  std::uint64_t seed = 0;
  McQuantity quantity = McQuantity::ARL;
  long tau = -1;
  double rejection_rate = 0.0;  // share of paths discarded by ADD conditioning
};

// Simulates the statistic recursion from start r0, with observations
// pre-change for n <= change_point and post-change after (change_point < 0
// means the change never occurs). Returns the first n >= 1 at which the
// stopping rule triggers, or -1 if the path exceeds path_cap steps.
long simulate_stopping_time(const ProcedureSpec& spec, const LikelihoodRatioModel& model,
                            double r0, long change_point, long path_cap, std::mt19937_64& rng);

// Aggregates replications of simulate_stopping_time into an estimate of the
// requested quantity (tau is ignored for ARL). Replications use independent
// substream seeds, so the result is bit-identical for a given seed regardless
// of scheduling. ADD_at(tau) conditions on survival past tau by rejection.
McEstimate estimate(const ProcedureSpec& spec, const LikelihoodRatioModel& model,
                    McQuantity quantity, long tau, const McOptions& opts = {});

}  // namespace qdet
