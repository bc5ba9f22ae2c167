#pragma once

#include <vector>

#include "qdet/sr_metrics.hpp"

namespace qdet {

// First threshold guess from the asymptotic proportionality ARL ~ nu/w - r,
// so nu0 = w * (gamma + r). The default w = 0.94 suits the Gaussian
// theta = 0.1 instance; each probe refines w from its measured ARL.
double pilot_threshold(double gamma, double r, double w);

struct CalibrationOptions {
  int grid_n = 10000;         // intervals per probe grid (held constant across probes)
  double arl_rel_tol = 1e-3;  // accept when |ARL - gamma| <= tol * gamma
  double w0 = 0.94;           // initial proportionality guess
  double r0 = -1.0;           // initial head-start guess; negative means per-strategy default
  long tau_max = 0;           // profile cap for the scan strategies; 0 means 10*gamma
  SolveOptions solve;
  EigenOptions eigen;
  int max_probes = 40;
  int dense_threshold = kDenseThresholdDefault;
};

struct ProbeRecord {
  double nu = 0.0;
  double r = 0.0;
  double arl = 0.0;
};

struct CalibrationResult {
  double nu = 0.0;
  double r = 0.0;           // resolved head start (mean of the QSD for SRP)
  bool randomized = false;  // SRP draws R_0 from the quasi-stationary density
  double achieved_arl = 0.0;
  double gamma = 0.0;
  InitStrategy strategy;
  int grid_n = 0;
  double pilot_w = 0.0;  // final proportionality nu / (ARL + r)
  std::vector<ProbeRecord> probes;
  bool arl_monotone_in_nu = true;   // probe-history diagnostic
  bool resolution_limited = false;  // nu bracket shrank below one grid cell first
};

// Solves ARL(nu, r(nu)) = gamma for an upper-crossing chart under the given
// initialization strategy. The head start is re-derived at every trial
// threshold (profile scan for r-nu / r-star, eigenpair for qsd-mean and SRP),
// so the returned (nu, r) pair is self-consistent and achieved_arl comes from
// the accepted probe itself, never from a stale bracket endpoint. CUSUM
// supports the fixed-start strategies only; EWMA thresholds are a caller
// choice and are rejected here.
CalibrationResult calibrate(const LikelihoodRatioModel& model, ChartKind chart,
                            InitStrategy strategy, double gamma,
                            const CalibrationOptions& opts = {});

// Head-start searches over the node-resolved scan (the returned r is a grid
// node; sub-cell refinement would be below the discretization error).
// r-nu: smallest r whose ADD profile never exceeds its steady-state limit.
// r-star: smallest r whose ADD profile is nondecreasing in tau.
struct HeadStartSearch {
  double r = 0.0;
  int node = -1;
  bool found = false;
  int predicate_violations = 0;  // false nodes above the boundary (resolution warnings)
};

HeadStartSearch find_r_nu_in_scan(const Grid& grid, const ScanResult& scan,
                                  double rel_tol = 1e-6);
HeadStartSearch find_r_star_in_scan(const Grid& grid, const ScanResult& scan,
                                    double rel_tol = 1e-6);

// Standalone forms: run the delta/rho scan at threshold nu (= grid.hi) and
// search it. They throw when the predicate holds nowhere on the grid, which
// signals a too-coarse grid or a too-small tau cap.
double find_r_nu(const LikelihoodRatioModel& model, const Grid& grid, double nu,
                 const PerformanceVectors& vectors, const CalibrationOptions& opts = {});
double find_r_star(const LikelihoodRatioModel& model, const Grid& grid, double nu,
                   const PerformanceVectors& vectors, const CalibrationOptions& opts = {});

// Node index minimizing sup_tau ADD(tau) - L(r) over the grid (the minimax
// gap argument), an independent cross-check of the r-nu search.
int min_gap_node(const PerformanceVectors& vectors, const ScanResult& scan);

// One point of the performance frontier: calibrate the strategy to gamma,
// then evaluate its worst-tau delay J_P (the SRP value is the equalizer
// constant) and, for deterministic starts, the lower bound L_P at the same
// (nu, r).
struct FrontierPoint {
  CalibrationResult cal;
  double j_p = 0.0;
  double l_p = 0.0;
  bool has_l_p = false;
};

FrontierPoint frontier_point(const LikelihoodRatioModel& model, InitStrategy strategy,
                             double gamma, const CalibrationOptions& opts = {},
                             bool with_lower_bound = false);

}  // namespace qdet
