#pragma once

#include <optional>
#include <vector>

#include "qdet/procedures.hpp"
#include "qdet/solver.hpp"

namespace qdet {

// Solutions of the three second-kind equations on one grid:
//   phi_i  = 1 + M_i phi_i     (i = infinity: ARL to false alarm; i = 0: ADD at tau 0)
//   psi    = phi_0 + M_inf psi (summed delta sequence, used by the lower bound)
struct PerformanceVectors {
  Grid grid;
  Eigen::VectorXd phi_inf;
  Eigen::VectorXd phi_0;
  Eigen::VectorXd psi;
};

Eigen::VectorXd solve_phi(const DiscreteOperator& M_i, const SolveOptions& opts = {});
Eigen::VectorXd solve_psi(const DiscreteOperator& M_pre, const Eigen::VectorXd& phi_0,
                          const SolveOptions& opts = {});

// Builds both forward operators for the procedure's drift/domain and solves
// all three equations (operators are built and released one at a time).
PerformanceVectors compute_performance_vectors(const LikelihoodRatioModel& model,
                                               const ProcedureSpec& spec, const Grid& grid,
                                               const SolveOptions& opts = {},
                                               int dense_threshold = kDenseThresholdDefault);

struct ProfileOptions {
  long tau_max = 0;         // hard cap on the recursion (callers use 10*gamma)
  long min_tau = 0;         // never stop before this tau, even when settled
  double ss_rel_tol = 1e-6; // steady-state detection: relative change below this...
  int ss_window = 25;       // ...for this many consecutive tau
};

// The curve tau -> E_tau[T - tau | T > tau] = delta_tau(r) / rho_tau(r) at one
// start value r, with its steady-state limit and supremum.
struct PerformanceProfile {
  std::vector<long> tau_values;
  std::vector<double> add;
  double steady_state = 0.0;
  double sup_add = 0.0;
  long converged_at = -1;
  bool converged = false;
};

PerformanceProfile add_profile(const PerformanceVectors& vectors, const DiscreteOperator& M_pre,
                               double r, const ProfileOptions& opts);

// Node-resolved single pass over the delta/rho recursion: tracks, for every
// grid node at once, the running maximum of the ADD ratio, the worst relative
// dip between consecutive tau, and the final (steady-state) ratio. Optionally
// records full curves at chosen r values and the q-weighted equalizer curve.
// One scan replaces a per-r family of add_profile recursions.
struct ScanRequest {
  ProfileOptions profile;
  std::vector<double> record_rs;
  const Eigen::VectorXd* qtilde = nullptr;  // record q-weighted curve when set
};

struct ScanResult {
  Eigen::VectorXd run_max;
  Eigen::VectorXd worst_dip;     // most negative relative step, as a positive number
  Eigen::VectorXd final_ratio;
  long stopped_at = 0;
  bool converged = false;
  std::vector<std::vector<double>> curves;  // indexed like record_rs; curve[tau]
  std::vector<double> qcurve;
};

ScanResult profile_scan(const PerformanceVectors& vectors, const DiscreteOperator& M_pre,
                        const ScanRequest& req);

// L_P = (r phi_0(r) + psi(r)) / (r + phi_inf(r)), the minimax lower bound.
double lower_bound(const PerformanceVectors& vectors, double r);

// 1 - rho_{k+m}(r) / rho_k(r) from a precomputed survival sequence at r.
double local_false_alarm_prob(const std::vector<double>& rho_at_r, long k, long m);

// Survival sequence rho_tau(r), tau = 0..tau_hi, at one start value.
std::vector<double> rho_sequence_at(const DiscreteOperator& M_pre, const Grid& grid, double r,
                                    long tau_hi);

// SRP operating characteristics through the quasi-stationary eigenpair.
struct SrpCharacteristics {
  double lambda_max = 0.0;
  Eigen::VectorXd q;
  double mu = 0.0;   // mean of the quasi-stationary distribution
  double arl = 0.0;  // q-weighted ARL to false alarm
  double add = 0.0;  // q-weighted ADD (constant in tau: the equalizer value)
  long eigen_iterations = 0;
  double eigen_residual = 0.0;
};

SrpCharacteristics srp_characteristics(const DiscreteOperator& conjugate_pre,
                                       const PerformanceVectors& vectors,
                                       const EigenOptions& opts = {});
SrpCharacteristics srp_characteristics(const LikelihoodRatioModel& model, const Grid& grid,
                                       const PerformanceVectors& vectors,
                                       const EigenOptions& opts = {},
                                       int dense_threshold = kDenseThresholdDefault);

}  // namespace qdet
