#include "qdet/sr_metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace qdet {

Eigen::VectorXd solve_phi(const DiscreteOperator& M_i, const SolveOptions& opts) {
  return solve_second_kind(M_i, Eigen::VectorXd::Ones(M_i.size()), opts);
}

Eigen::VectorXd solve_psi(const DiscreteOperator& M_pre, const Eigen::VectorXd& phi_0,
                          const SolveOptions& opts) {
  if (M_pre.measure() != Measure::PreChange)
    throw std::invalid_argument("psi equation uses the pre-change operator");
  return solve_second_kind(M_pre, phi_0, opts);
}

PerformanceVectors compute_performance_vectors(const LikelihoodRatioModel& model,
                                               const ProcedureSpec& spec, const Grid& grid,
                                               const SolveOptions& opts, int dense_threshold) {
  PerformanceVectors out;
  out.grid = grid;
  {
    DiscreteOperator M0 =
        build_forward_operator(model, Measure::PostChange, grid, spec.drift, dense_threshold);
    out.phi_0 = solve_phi(M0, opts);
  }
  DiscreteOperator Minf =
      build_forward_operator(model, Measure::PreChange, grid, spec.drift, dense_threshold);
  out.phi_inf = solve_phi(Minf, opts);
  out.psi = solve_psi(Minf, out.phi_0, opts);
  return out;
}

namespace {

long default_tau_cap(const ProfileOptions& opts) {
  if (opts.tau_max <= 0)
    throw std::invalid_argument("profile recursion requires tau_max > 0");
  return opts.tau_max;
}

}  // namespace

PerformanceProfile add_profile(const PerformanceVectors& vectors, const DiscreteOperator& M_pre,
                               double r, const ProfileOptions& opts) {
  const long tau_cap = default_tau_cap(opts);
  const Grid& grid = vectors.grid;
  if (r < grid.lo || r > grid.hi)
    throw std::invalid_argument("add_profile: r outside the grid domain");

  PerformanceProfile prof;
  Eigen::MatrixXd state(grid.size(), 2);
  state.col(0) = vectors.phi_0;                        // delta_0
  state.col(1) = Eigen::VectorXd::Ones(grid.size());   // rho_0

  double ratio = interp_linear(grid, state.col(0), r); // add(0) = phi_0(r)
  prof.tau_values.push_back(0);
  prof.add.push_back(ratio);
  double run_max = ratio;
  int stable = 0;

  for (long tau = 1; tau <= tau_cap; ++tau) {
    state = M_pre.apply_multi(state);
    const double d = interp_linear(grid, state.col(0), r);
    const double rho = interp_linear(grid, state.col(1), r);
    if (!(rho > 0.0)) break;  // survival mass exhausted at this start
    const double next = d / rho;
    prof.tau_values.push_back(tau);
    prof.add.push_back(next);
    run_max = std::max(run_max, next);
    if (std::abs(next - ratio) <= opts.ss_rel_tol * std::abs(ratio))
      ++stable;
    else
      stable = 0;
    ratio = next;
    if (stable >= opts.ss_window && tau >= opts.min_tau) {
      prof.converged = true;
      prof.converged_at = tau;
      break;
    }
  }
  prof.steady_state = ratio;
  prof.sup_add = std::max(run_max, prof.steady_state);
  return prof;
}

ScanResult profile_scan(const PerformanceVectors& vectors, const DiscreteOperator& M_pre,
                        const ScanRequest& req) {
  const long tau_cap = default_tau_cap(req.profile);
  const Grid& grid = vectors.grid;
  const int n = grid.size();
  const double ss_tol = req.profile.ss_rel_tol;

  Eigen::MatrixXd state(n, 2);
  state.col(0) = vectors.phi_0;
  state.col(1) = Eigen::VectorXd::Ones(n);

  ScanResult out;
  Eigen::VectorXd ratio = vectors.phi_0;  // add(0) per node
  out.run_max = ratio;
  out.worst_dip = Eigen::VectorXd::Zero(n);

  out.curves.resize(req.record_rs.size());
  for (size_t i = 0; i < req.record_rs.size(); ++i)
    out.curves[i].push_back(interp_linear(grid, ratio, req.record_rs[i]));

  Eigen::VectorXd p;
  if (req.qtilde) {
    p = trapezoid_weights(grid).as_vector().cwiseProduct(*req.qtilde);
    out.qcurve.push_back(p.dot(state.col(0)) / p.dot(state.col(1)));
  }

  int stable = 0;
  Eigen::VectorXd next(n);
  for (long tau = 1; tau <= tau_cap; ++tau) {
    state = M_pre.apply_multi(state);
    double worst_change = 0.0;
    for (int m = 0; m < n; ++m) {
      const double rho = state(m, 1);
      const double nx = rho > 0.0 ? state(m, 0) / rho : ratio[m];
      next[m] = nx;
      const double prev = ratio[m];
      const double change = std::abs(nx - prev) / std::max(std::abs(prev), 1e-300);
      worst_change = std::max(worst_change, change);
      if (nx > out.run_max[m]) out.run_max[m] = nx;
      if (nx < prev) out.worst_dip[m] = std::max(out.worst_dip[m], (prev - nx) / prev);
    }
    ratio.swap(next);
    out.stopped_at = tau;

    for (size_t i = 0; i < req.record_rs.size(); ++i) {
      const double d = interp_linear(grid, state.col(0), req.record_rs[i]);
      const double rho = interp_linear(grid, state.col(1), req.record_rs[i]);
      out.curves[i].push_back(rho > 0.0 ? d / rho : out.curves[i].back());
    }
    if (req.qtilde) out.qcurve.push_back(p.dot(state.col(0)) / p.dot(state.col(1)));

    if (worst_change <= ss_tol)
      ++stable;
    else
      stable = 0;
    if (stable >= req.profile.ss_window && tau >= req.profile.min_tau) {
      out.converged = true;
      break;
    }
  }
  out.final_ratio = ratio;
  return out;
}

double lower_bound(const PerformanceVectors& vectors, double r) {
  if (r < 0.0) throw std::invalid_argument("lower_bound: r must be >= 0");
  const double phi0 = interp_linear(vectors.grid, vectors.phi_0, r);
  const double psi = interp_linear(vectors.grid, vectors.psi, r);
  const double phinf = interp_linear(vectors.grid, vectors.phi_inf, r);
  return (r * phi0 + psi) / (r + phinf);
}

double local_false_alarm_prob(const std::vector<double>& rho_at_r, long k, long m) {
  if (k < 0 || m < 1) throw std::invalid_argument("local_false_alarm_prob: need k >= 0, m >= 1");
  if (static_cast<size_t>(k + m) >= rho_at_r.size())
    throw std::invalid_argument("local_false_alarm_prob: rho sequence too short");
  const double rk = rho_at_r[static_cast<size_t>(k)];
  if (!(rk > 0.0)) throw std::domain_error("local_false_alarm_prob: rho_k is zero");
  const double p = 1.0 - rho_at_r[static_cast<size_t>(k + m)] / rk;
  return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

std::vector<double> rho_sequence_at(const DiscreteOperator& M_pre, const Grid& grid, double r,
                                    long tau_hi) {
  std::vector<double> seq;
  seq.reserve(static_cast<size_t>(tau_hi) + 1);
  seq.push_back(1.0);
  if (tau_hi <= 0) return seq;
  iterate_recursion(M_pre, Eigen::VectorXd::Ones(grid.size()), tau_hi,
                    [&](long, const Eigen::VectorXd& u) {
                      seq.push_back(interp_linear(grid, u, r));
                      return false;
                    });
  return seq;
}

SrpCharacteristics srp_characteristics(const DiscreteOperator& conjugate_pre,
                                       const PerformanceVectors& vectors,
                                       const EigenOptions& opts) {
  const QuadratureWeights w = trapezoid_weights(vectors.grid);
  EigenResult eig = leading_left_eigenpair(conjugate_pre, w, opts);
  SrpCharacteristics out;
  out.lambda_max = eig.lambda_max;
  out.q = std::move(eig.q);
  out.eigen_iterations = eig.iterations;
  out.eigen_residual = eig.residual;
  out.mu = trapezoid_pair(w, vectors.grid.nodes(), out.q);
  out.arl = trapezoid_pair(w, vectors.phi_inf, out.q);
  out.add = trapezoid_pair(w, vectors.phi_0, out.q);
  return out;
}

SrpCharacteristics srp_characteristics(const LikelihoodRatioModel& model, const Grid& grid,
                                       const PerformanceVectors& vectors, const EigenOptions& opts,
                                       int dense_threshold) {
  DiscreteOperator conj = build_conjugate_operator(model, grid, DriftMap::sr(), dense_threshold);
  return srp_characteristics(conj, vectors, opts);
}

}  // namespace qdet
