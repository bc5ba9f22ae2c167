#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "qdet/sr_metrics.hpp"

using namespace qdet;

namespace {

// One small SR instance shared by most cases: gamma ~ 100 territory, cheap
// enough to solve in milliseconds.
struct Fixture {
  LikelihoodRatioModel model = LikelihoodRatioModel::gaussian(0.1);
  double nu = 94.0;
  Grid grid = build_grid(0.0, 94.0, 600);
  ProcedureSpec spec = ProcedureSpec::sr(94.0, InitStrategy::classical());
  PerformanceVectors vecs;
  DiscreteOperator m_pre;

  Fixture()
      : vecs(compute_performance_vectors(model, spec, grid)),
        m_pre(build_forward_operator(model, Measure::PreChange, grid, DriftMap::sr())) {}
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("phi vectors: bounds, monotonicity, threshold identity") {
  const auto& f = fixture();
  const auto& g = f.grid;

  for (int j = 0; j < g.size(); ++j) {
    CHECK(f.vecs.phi_inf[j] >= 1.0);
    CHECK(f.vecs.phi_0[j] >= 1.0);
    CHECK(f.vecs.psi[j] >= f.vecs.phi_0[j]);
  }
  // nonincreasing in the start value
  for (int j = 1; j < g.size(); ++j) {
    CHECK(f.vecs.phi_inf[j] <= f.vecs.phi_inf[j - 1] + 1e-9);
    CHECK(f.vecs.phi_0[j] <= f.vecs.phi_0[j - 1] + 1e-9);
  }
  // a run started at r reaches nu only by accumulating at least nu - r
  for (int j = 0; j < g.size(); ++j)
    CHECK(f.vecs.phi_inf[j] + g.node(j) >= f.nu - 1e-9);
}

TEST_CASE("profile starts at phi_0 and settles at a positive limit") {
  const auto& f = fixture();
  ProfileOptions po;
  po.tau_max = 3000;
  for (double r : {0.0, 30.0, 87.0}) {
    const auto prof = add_profile(f.vecs, f.m_pre, r, po);
    REQUIRE(prof.converged);
    CHECK(prof.add.front() ==
          doctest::Approx(interp_linear(f.grid, f.vecs.phi_0, r)).epsilon(1e-9));
    CHECK(prof.steady_state > 0.0);
    CHECK(prof.sup_add >= prof.steady_state - 1e-12);
    CHECK(prof.sup_add >= prof.add.front() - 1e-12);
    // the settled tail really is flat
    const double tail = prof.add.back();
    CHECK(tail == doctest::Approx(prof.steady_state).epsilon(1e-4));
  }
}

TEST_CASE("profile_scan reproduces per-r profiles in one pass") {
  const auto& f = fixture();
  ScanRequest req;
  req.profile.tau_max = 3000;
  req.record_rs = {0.0, 50.0};
  const auto scan = profile_scan(f.vecs, f.m_pre, req);
  REQUIRE(scan.converged);
  REQUIRE(scan.curves.size() == 2);

  ProfileOptions po;
  po.tau_max = 3000;
  for (size_t k = 0; k < req.record_rs.size(); ++k) {
    const auto prof = add_profile(f.vecs, f.m_pre, req.record_rs[k], po);
    const size_t upto = std::min(scan.curves[k].size(), prof.add.size());
    REQUIRE(upto > 100);
    for (size_t t = 0; t < upto; t += 37)
      CHECK(scan.curves[k][t] == doctest::Approx(prof.add[t]).epsilon(1e-9));
  }

  // node-resolved outputs agree with a freestanding profile at a node
  const int j = 200;
  const auto prof = add_profile(f.vecs, f.m_pre, f.grid.node(j), po);
  // the two stopping rules settle at slightly different tau; both limits are
  // only pinned to ss_rel_tol per step
  CHECK(scan.final_ratio[j] == doctest::Approx(prof.steady_state).epsilon(5e-5));
  CHECK(scan.run_max[j] == doctest::Approx(prof.sup_add).epsilon(5e-5));
}

TEST_CASE("steady-state limit is the same for every start value") {
  // delta_tau and rho_tau collapse onto the leading eigenvector direction, so
  // the limiting ratio cannot depend on r.
  const auto& f = fixture();
  ScanRequest req;
  req.profile.tau_max = 5000;
  const auto scan = profile_scan(f.vecs, f.m_pre, req);
  REQUIRE(scan.converged);
  const double mid = scan.final_ratio[f.grid.size() / 2];
  for (int j = 0; j < f.grid.size(); j += 13)
    CHECK(scan.final_ratio[j] == doctest::Approx(mid).epsilon(1e-4));
}

TEST_CASE("lower bound never exceeds the supremum ADD") {
  const auto& f = fixture();
  std::mt19937_64 rng(17u);
  std::uniform_real_distribution<double> unif(0.0, 0.95);
  ProfileOptions po;
  po.tau_max = 4000;
  for (int trial = 0; trial < 12; ++trial) {
    const double r = unif(rng) * f.nu;
    const auto prof = add_profile(f.vecs, f.m_pre, r, po);
    REQUIRE(prof.converged);
    const double lp = lower_bound(f.vecs, r);
    CAPTURE(r);
    CHECK(lp <= prof.sup_add * (1.0 + 1e-9));
  }
}

TEST_CASE("survival sequence and local false-alarm identities") {
  const auto& f = fixture();
  const double r = 10.0;
  const auto rho = rho_sequence_at(f.m_pre, f.grid, r, 1200);
  REQUIRE(rho.size() == 1201);
  CHECK(rho[0] == 1.0);
  for (size_t t = 1; t < rho.size(); ++t) CHECK(rho[t] <= rho[t - 1] + 1e-15);

  for (long m : {1L, 10L, 100L})
    CHECK(local_false_alarm_prob(rho, 0, m) == doctest::Approx(1.0 - rho[m]).epsilon(1e-12));

  // chained windows multiply: P[T > k+m | T > k] telescopes
  const double p1 = local_false_alarm_prob(rho, 100, 50);
  const double p2 = local_false_alarm_prob(rho, 150, 50);
  const double p12 = local_false_alarm_prob(rho, 100, 100);
  CHECK(1.0 - p12 == doctest::Approx((1.0 - p1) * (1.0 - p2)).epsilon(1e-10));

  CHECK_THROWS_AS(local_false_alarm_prob(rho, -1, 5), std::invalid_argument);
  CHECK_THROWS_AS(local_false_alarm_prob(rho, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(local_false_alarm_prob(rho, 1200, 5), std::invalid_argument);
}

TEST_CASE("hazard in the geometric tail approaches 1 - lambda_max") {
  const auto& f = fixture();
  const auto srp = srp_characteristics(f.model, f.grid, f.vecs);
  const auto rho = rho_sequence_at(f.m_pre, f.grid, 0.0, 2500);
  // by tau ~ 25 ARL the subdominant modes are long gone
  const double hazard = local_false_alarm_prob(rho, 2400, 1);
  CHECK(hazard == doctest::Approx(1.0 - srp.lambda_max).epsilon(1e-3));
}

TEST_CASE("quasi-stationary characteristics satisfy their identities") {
  const auto& f = fixture();
  const auto w = trapezoid_weights(f.grid);
  const auto srp = srp_characteristics(f.model, f.grid, f.vecs);

  CHECK(srp.eigen_residual <= 1e-8);
  CHECK(srp.q.minCoeff() >= 0.0);
  CHECK(trapezoid_pair(w, srp.q, Eigen::VectorXd::Ones(srp.q.size())) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // E_inf[T] under the quasi-stationary start is exactly geometric
  CHECK(srp.arl == doctest::Approx(1.0 / (1.0 - srp.lambda_max)).epsilon(1e-3));

  // left_apply reproduces lambda * q
  const auto con = build_conjugate_operator(f.model, f.grid, DriftMap::sr());
  const Eigen::VectorXd lq = con.left_apply(srp.q);
  CHECK((lq - srp.lambda_max * srp.q).lpNorm<Eigen::Infinity>() /
            srp.q.lpNorm<Eigen::Infinity>() <=
        1e-8);

  // mu is inside the domain and matches the q-weighted mean of the nodes
  CHECK(srp.mu > 0.0);
  CHECK(srp.mu < f.nu);
  CHECK(srp.mu == doctest::Approx(trapezoid_pair(w, srp.q, f.grid.nodes())).epsilon(1e-12));
}

TEST_CASE("the q-weighted ADD curve is the constant equalizer") {
  const auto& f = fixture();
  const auto srp = srp_characteristics(f.model, f.grid, f.vecs);

  ScanRequest req;
  req.profile.tau_max = 1200;
  req.profile.min_tau = 1000;
  req.qtilde = &srp.q;
  const auto scan = profile_scan(f.vecs, f.m_pre, req);
  REQUIRE(scan.qcurve.size() >= 1000);

  double worst = 0.0;
  for (double v : scan.qcurve) worst = std::max(worst, std::abs(v / srp.add - 1.0));
  CHECK(worst <= 5e-3);
  CHECK(scan.qcurve.front() == doctest::Approx(srp.add).epsilon(1e-6));
}

TEST_CASE("performance vectors for CUSUM stay within their own domain logic") {
  // same machinery, cusum drift: phi_inf at the classical start 1 is the ARL
  const auto model = LikelihoodRatioModel::gaussian(0.1);
  const double nu = 4.574270047;  // ARL ~ 500 for theta = 0.1
  const Grid g = build_grid(0.0, nu, 700);
  const auto spec = ProcedureSpec::cusum(nu);
  const auto vecs = compute_performance_vectors(model, spec, g);
  const double arl = interp_linear(g, vecs.phi_inf, 1.0);
  CHECK(arl == doctest::Approx(500.0).epsilon(0.01));
  for (int j = 1; j < g.size(); ++j) CHECK(vecs.phi_inf[j] <= vecs.phi_inf[j - 1] + 1e-9);
}

TEST_CASE("srp_characteristics overloads agree") {
  const auto& f = fixture();
  const auto con = conjugate_from_forward(f.m_pre);
  const auto a = srp_characteristics(con, f.vecs);
  const auto b = srp_characteristics(f.model, f.grid, f.vecs);
  CHECK(a.lambda_max == doctest::Approx(b.lambda_max).epsilon(1e-12));
  CHECK(a.mu == doctest::Approx(b.mu).epsilon(1e-10));
  CHECK(a.arl == doctest::Approx(b.arl).epsilon(1e-10));
  CHECK(a.add == doctest::Approx(b.add).epsilon(1e-10));
}
