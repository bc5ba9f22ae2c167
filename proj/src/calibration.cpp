#include "qdet/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qdet {

double pilot_threshold(double gamma, double r, double w) {
  if (!(gamma >= 1.0)) throw std::invalid_argument("pilot_threshold: gamma must be >= 1");
  if (!(w > 0.0 && w < 1.0)) throw std::invalid_argument("pilot_threshold: w must lie in (0,1)");
  if (!(r >= 0.0)) throw std::invalid_argument("pilot_threshold: r must be >= 0");
  return w * (gamma + r);
}

namespace {

HeadStartSearch search_predicate(const Grid& grid, const Eigen::VectorXd& pass_margin) {
  HeadStartSearch out;
  const int n = static_cast<int>(pass_margin.size());
  int first = -1;
  for (int m = 0; m < n; ++m) {
    if (pass_margin[m] <= 0.0) {
      first = m;
      break;
    }
  }
  if (first < 0) return out;
  out.found = true;
  out.node = first;
  out.r = grid.node(first);
  for (int m = first + 1; m < n; ++m)
    if (pass_margin[m] > 0.0) ++out.predicate_violations;
  return out;
}

}  // namespace

HeadStartSearch find_r_nu_in_scan(const Grid& grid, const ScanResult& scan, double rel_tol) {
  // P(m): running max of the profile stays within (1 + tol) of its limit.
  Eigen::VectorXd margin =
      scan.run_max - (scan.final_ratio.array() * (1.0 + rel_tol)).matrix();
  return search_predicate(grid, margin);
}

HeadStartSearch find_r_star_in_scan(const Grid& grid, const ScanResult& scan, double rel_tol) {
  // P(m): no step of the profile dips by more than tol, relatively.
  Eigen::VectorXd margin = scan.worst_dip.array() - rel_tol;
  return search_predicate(grid, margin);
}

namespace {

long scan_tau_cap(const CalibrationOptions& opts, double gamma) {
  if (opts.tau_max > 0) return opts.tau_max;
  return static_cast<long>(std::ceil(10.0 * gamma));
}

ScanResult run_scan(const LikelihoodRatioModel& model, const Grid& grid,
                    const PerformanceVectors& vectors, long tau_cap,
                    const CalibrationOptions& opts) {
  DiscreteOperator Minf = build_forward_operator(model, Measure::PreChange, grid, DriftMap::sr(),
                                                 opts.dense_threshold);
  ScanRequest req;
  req.profile.tau_max = tau_cap;
  ScanResult scan = profile_scan(vectors, Minf, req);
  if (!scan.converged)
    throw std::runtime_error("profile scan hit the tau cap before steady state; raise tau_max");
  return scan;
}

void check_scan_grid(const Grid& grid, double nu) {
  if (std::abs(grid.hi - nu) > 1e-9 * std::max(1.0, nu))
    throw std::invalid_argument("head-start search: grid must span [lo, nu]");
}

}  // namespace

double find_r_nu(const LikelihoodRatioModel& model, const Grid& grid, double nu,
                 const PerformanceVectors& vectors, const CalibrationOptions& opts) {
  check_scan_grid(grid, nu);
  ScanResult scan = run_scan(model, grid, vectors, scan_tau_cap(opts, nu), opts);
  HeadStartSearch hs = find_r_nu_in_scan(grid, scan);
  if (!hs.found)
    throw std::runtime_error(
        "no r with a limit-bounded profile found on the grid (grid too coarse?)");
  return hs.r;
}

double find_r_star(const LikelihoodRatioModel& model, const Grid& grid, double nu,
                   const PerformanceVectors& vectors, const CalibrationOptions& opts) {
  check_scan_grid(grid, nu);
  ScanResult scan = run_scan(model, grid, vectors, scan_tau_cap(opts, nu), opts);
  HeadStartSearch hs = find_r_star_in_scan(grid, scan);
  if (!hs.found)
    throw std::runtime_error(
        "no r with a nondecreasing profile found on the grid (grid too coarse?)");
  return hs.r;
}

int min_gap_node(const PerformanceVectors& vectors, const ScanResult& scan) {
  const Grid& grid = vectors.grid;
  int best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int m = 0; m < grid.size(); ++m) {
    const double sup_add = std::max(scan.run_max[m], scan.final_ratio[m]);
    const double gap = sup_add - lower_bound(vectors, grid.node(m));
    if (gap < best_gap) {
      best_gap = gap;
      best = m;
    }
  }
  return best;
}

namespace {

struct ProbeEval {
  double r = 0.0;
  double arl = 0.0;
};

// One trial threshold: fresh grid, fresh operators, head start re-derived.
ProbeEval evaluate_probe(const LikelihoodRatioModel& model, ChartKind chart,
                         const InitStrategy& strategy, double nu, long tau_cap,
                         const CalibrationOptions& opts) {
  using Kind = InitStrategy::Kind;
  const Grid grid = build_grid(0.0, nu, opts.grid_n);
  const DriftMap drift = chart == ChartKind::CUSUM ? DriftMap::cusum() : DriftMap::sr();

  Eigen::VectorXd phi_0;
  if (strategy.kind == Kind::RNu || strategy.kind == Kind::RStar) {
    DiscreteOperator M0 = build_forward_operator(model, Measure::PostChange, grid, drift,
                                                 opts.dense_threshold);
    phi_0 = solve_phi(M0, opts.solve);
  }

  DiscreteOperator Minf =
      build_forward_operator(model, Measure::PreChange, grid, drift, opts.dense_threshold);
  const Eigen::VectorXd phi_inf = solve_phi(Minf, opts.solve);

  ProbeEval ev;
  switch (strategy.kind) {
    case Kind::Classical:
      ev.r = classical_start(chart);
      break;
    case Kind::FixedR:
      ev.r = strategy.fixed_r;
      break;
    case Kind::RNu:
    case Kind::RStar: {
      PerformanceVectors vecs;
      vecs.grid = grid;
      vecs.phi_0 = std::move(phi_0);
      vecs.phi_inf = phi_inf;
      ScanRequest req;
      req.profile.tau_max = tau_cap;
      ScanResult scan = profile_scan(vecs, Minf, req);
      if (!scan.converged)
        throw std::runtime_error(
            "profile scan hit the tau cap before steady state; raise tau_max");
      HeadStartSearch hs = strategy.kind == Kind::RNu ? find_r_nu_in_scan(grid, scan)
                                                      : find_r_star_in_scan(grid, scan);
      if (!hs.found)
        throw std::runtime_error("head-start predicate holds nowhere on the probe grid");
      ev.r = hs.r;
      break;
    }
    case Kind::QsdMean:
    case Kind::Srp: {
      DiscreteOperator conj = conjugate_from_forward(Minf);
      const QuadratureWeights w = trapezoid_weights(grid);
      EigenResult eig = leading_left_eigenpair(conj, w, opts.eigen);
      ev.r = trapezoid_pair(w, grid.nodes(), eig.q);
      if (strategy.kind == Kind::Srp) {
        ev.arl = trapezoid_pair(w, phi_inf, eig.q);
        return ev;
      }
      break;
    }
  }
  ev.arl = interp_linear(grid, phi_inf, ev.r);
  return ev;
}

double default_initial_r(ChartKind chart, const InitStrategy& strategy) {
  if (strategy.kind == InitStrategy::Kind::FixedR) return strategy.fixed_r;
  if (strategy.kind == InitStrategy::Kind::Classical) return classical_start(chart);
  return 0.0;
}

}  // namespace

CalibrationResult calibrate(const LikelihoodRatioModel& model, ChartKind chart,
                            InitStrategy strategy, double gamma, const CalibrationOptions& opts) {
  using Kind = InitStrategy::Kind;
  if (!(gamma > 1.0)) throw std::invalid_argument("calibrate: gamma must exceed 1");
  if (chart == ChartKind::EWMA)
    throw std::invalid_argument("calibrate: EWMA thresholds are chosen by the caller");
  if (strategy.kind == Kind::Srp) {
    chart = ChartKind::SRP;
  } else if (chart == ChartKind::SRP) {
    throw std::invalid_argument("calibrate: the SRP chart requires the srp strategy");
  }
  if (chart == ChartKind::CUSUM &&
      !(strategy.kind == Kind::Classical || strategy.kind == Kind::FixedR))
    throw std::invalid_argument("calibrate: CUSUM supports fixed-start strategies only");
  if (!(opts.w0 > 0.0 && opts.w0 < 1.0))
    throw std::invalid_argument("calibrate: w0 must lie in (0,1)");

  const long tau_cap = scan_tau_cap(opts, gamma);
  const double tol = opts.arl_rel_tol * gamma;

  CalibrationResult res;
  res.gamma = gamma;
  res.strategy = strategy;
  res.grid_n = opts.grid_n;
  res.randomized = strategy.kind == Kind::Srp;

  double w = opts.w0;
  double r_hat = opts.r0 >= 0.0 ? opts.r0 : default_initial_r(chart, strategy);
  double nu = pilot_threshold(gamma, r_hat, w);

  double lo = 0.0, hi = std::numeric_limits<double>::infinity();  // ARL-gamma sign bracket
  double best_abs_g = std::numeric_limits<double>::infinity();
  ProbeRecord best{};

  for (int probe = 0; probe < opts.max_probes; ++probe) {
    const ProbeEval ev = evaluate_probe(model, chart, strategy, nu, tau_cap, opts);
    res.probes.push_back({nu, ev.r, ev.arl});
    const double g = ev.arl - gamma;
    if (std::abs(g) < best_abs_g) {
      best_abs_g = std::abs(g);
      best = res.probes.back();
    }
    if (std::abs(g) <= tol) break;

    if (g < 0.0)
      lo = std::max(lo, nu);
    else
      hi = std::min(hi, nu);

    w = nu / (ev.arl + ev.r);
    r_hat = ev.r;
    double next = pilot_threshold(gamma, r_hat, w);
    if (next <= lo || next >= hi) {
      if (!std::isfinite(hi)) {
        next = 2.0 * nu;  // expand upward until the root is bracketed
      } else if (lo <= 0.0) {
        next = 0.5 * std::min(nu, hi);
      } else {
        next = 0.5 * (lo + hi);
      }
    }
    if (std::isfinite(hi) && hi - lo < hi / opts.grid_n) {
      res.resolution_limited = true;
      break;
    }
    if (!(next > 0.0) || !std::isfinite(next) || next > 1e12 * gamma)
      throw std::runtime_error("calibrate: threshold bracket expansion failed");
    nu = next;
  }

  if (best_abs_g > tol && !res.resolution_limited)
    throw std::runtime_error("calibrate: ARL root not located within the probe budget");

  res.nu = best.nu;
  res.r = best.r;
  res.achieved_arl = best.arl;
  res.pilot_w = best.nu / (best.arl + best.r);

  std::vector<ProbeRecord> sorted = res.probes;
  std::sort(sorted.begin(), sorted.end(),
            [](const ProbeRecord& a, const ProbeRecord& b) { return a.nu < b.nu; });
  for (size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].arl <= sorted[i - 1].arl) res.arl_monotone_in_nu = false;

  return res;
}

FrontierPoint frontier_point(const LikelihoodRatioModel& model, InitStrategy strategy,
                             double gamma, const CalibrationOptions& opts,
                             bool with_lower_bound) {
  const ChartKind chart = strategy.kind == InitStrategy::Kind::Srp ? ChartKind::SRP : ChartKind::SR;
  FrontierPoint pt;
  pt.cal = calibrate(model, chart, strategy, gamma, opts);

  const Grid grid = build_grid(0.0, pt.cal.nu, opts.grid_n);
  const bool want_psi = with_lower_bound && !pt.cal.randomized;

  Eigen::VectorXd phi_0;
  {
    DiscreteOperator M0 = build_forward_operator(model, Measure::PostChange, grid, DriftMap::sr(),
                                                 opts.dense_threshold);
    phi_0 = solve_phi(M0, opts.solve);
  }
  DiscreteOperator Minf =
      build_forward_operator(model, Measure::PreChange, grid, DriftMap::sr(), opts.dense_threshold);

  PerformanceVectors vecs;
  vecs.grid = grid;
  vecs.phi_0 = std::move(phi_0);

  if (pt.cal.randomized) {
    vecs.phi_inf = solve_phi(Minf, opts.solve);
    DiscreteOperator conj = conjugate_from_forward(Minf);
    pt.j_p = srp_characteristics(conj, vecs, opts.eigen).add;
    return pt;
  }

  if (want_psi) {
    vecs.phi_inf = solve_phi(Minf, opts.solve);
    vecs.psi = solve_psi(Minf, vecs.phi_0, opts.solve);
  }
  ProfileOptions prof;
  prof.tau_max = scan_tau_cap(opts, gamma);
  PerformanceProfile profile = add_profile(vecs, Minf, pt.cal.r, prof);
  if (!profile.converged)
    throw std::runtime_error("frontier_point: ADD profile hit the tau cap before steady state");
  pt.j_p = profile.sup_add;
  if (want_psi) {
    pt.l_p = lower_bound(vecs, pt.cal.r);
    pt.has_l_p = true;
  }
  return pt;
}

}  // namespace qdet
