#pragma once

#include "qdet/grid.hpp"
#include "qdet/strategy.hpp"

namespace qdet {

enum class ChartKind { SR, SRP, CUSUM, EWMA };

struct StoppingRule {
  enum class Kind { UpperCrossing, ExitInterval };
  Kind kind = Kind::UpperCrossing;
  double lo = 0.0;
  double hi = 0.0;

  bool stopped(double s) const {
    return kind == Kind::UpperCrossing ? s >= hi : (s <= lo || s >= hi);
  }
};

// One chart family: drift map + statistic domain + stopping rule + default
// initialization. SR/SRP/CUSUM live on [0, nu] and alarm on an upper crossing;
// EWMA lives on [nu1, nu2], 0 < nu1 < 1 < nu2, and alarms on exit from the
// open interval.
struct ProcedureSpec {
  ChartKind chart = ChartKind::SR;
  DriftMap drift = DriftMap::sr();
  double lo = 0.0;
  double hi = 0.0;  // nu, or nu2 for EWMA
  InitStrategy init = InitStrategy::classical();
  double alpha = 0.9;  // EWMA forgetting factor

  static ProcedureSpec sr(double nu, InitStrategy init = InitStrategy::classical());
  static ProcedureSpec srp(double nu);
  static ProcedureSpec cusum(double nu, double r = 1.0);
  static ProcedureSpec ewma(double nu1, double nu2, double alpha, double r);
};

StoppingRule stopping_rule(const ProcedureSpec& spec);

// Classical start value of the chart: 0 for SR, 1 for CUSUM and EWMA.
double classical_start(ChartKind chart);

// One step of the statistic recursion: next = b(current) * lr.
double step_statistic(const ProcedureSpec& spec, double current, double lr);

}  // namespace qdet
