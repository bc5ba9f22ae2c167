#include "qdet/solver.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace qdet {

namespace {

using ApplyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Picard iteration u <- v + Mu with Anderson mixing: the next iterate combines
// the last few residual differences by least squares,
//   gamma = argmin || f_k - dF gamma ||_2,   u_{k+1} = u_k + f_k - (dU + dF) gamma,
// which on a linear contraction behaves like a windowed Krylov method. The
// convergence test uses the true residual f = v + Mu - u of the candidate
// before any update, so the returned iterate is certified as-is.
Eigen::VectorXd anderson_picard(const ApplyFn& apply_m, const Eigen::VectorXd& v,
                                const SolveOptions& opts, SolveStats* stats) {
  const long n = v.size();
  Eigen::VectorXd u = opts.warm_start ? *opts.warm_start : v;
  if (u.size() != n) throw std::invalid_argument("warm start length mismatch");

  const int window = std::max(0, opts.anderson_window);
  std::vector<Eigen::VectorXd> du, df;
  Eigen::VectorXd prev_u, prev_f;
  bool have_prev = false;
  double best_resid = std::numeric_limits<double>::infinity();
  const double scale_floor = std::max(v.lpNorm<Eigen::Infinity>(), 1e-300);

  for (long it = 1; it <= opts.max_iterations; ++it) {
    Eigen::VectorXd g = v + apply_m(u);
    Eigen::VectorXd f = g - u;
    const double unorm = std::max(u.lpNorm<Eigen::Infinity>(), scale_floor);
    const double resid = f.lpNorm<Eigen::Infinity>() / unorm;
    if (resid <= opts.rel_tolerance) {
      if (stats) *stats = {it, resid};
      return u;
    }

    if (!std::isfinite(resid) || resid > 1e4 * best_resid) {
      // diverging mix; fall back to a plain sweep and restart the window
      du.clear();
      df.clear();
      have_prev = false;
      u = g;
      continue;
    }
    best_resid = std::min(best_resid, resid);

    if (have_prev && window > 0) {
      du.push_back(u - prev_u);
      df.push_back(f - prev_f);
      if (static_cast<int>(du.size()) > window) {
        du.erase(du.begin());
        df.erase(df.begin());
      }
    }
    prev_u = u;
    prev_f = f;
    have_prev = true;

    if (du.empty()) {
      u = g;
      continue;
    }
    const int m = static_cast<int>(du.size());
    Eigen::MatrixXd F(n, m), U(n, m);
    for (int c = 0; c < m; ++c) {
      F.col(c) = df[c];
      U.col(c) = du[c];
    }
    Eigen::VectorXd gamma = F.colPivHouseholderQr().solve(f);
    Eigen::VectorXd u_next = u + f - (U + F) * gamma;
    if (!u_next.allFinite()) {
      du.clear();
      df.clear();
      have_prev = false;
      u = g;
      continue;
    }
    u = std::move(u_next);
  }

  Eigen::VectorXd f = v + apply_m(u) - u;
  const double resid = f.lpNorm<Eigen::Infinity>() /
                       std::max(u.lpNorm<Eigen::Infinity>(), scale_floor);
  std::ostringstream msg;
  msg << "fixed-point solve did not converge in " << opts.max_iterations
      << " iterations; last relative residual " << resid;
  throw std::runtime_error(msg.str());
}

}  // namespace

Eigen::VectorXd solve_second_kind_apply(const ApplyFn& apply_m, const Eigen::VectorXd& v,
                                        const SolveOptions& opts, SolveStats* stats) {
  return anderson_picard(apply_m, v, opts, stats);
}

Eigen::VectorXd solve_second_kind(const DiscreteOperator& M, const Eigen::VectorXd& v,
                                  const SolveOptions& opts, SolveStats* stats) {
  if (M.direction() != DiscreteOperator::Direction::Forward)
    throw std::invalid_argument("solve_second_kind expects a forward operator");
  if (v.size() != M.size()) throw std::invalid_argument("solve_second_kind: length mismatch");

  if (opts.method == SolveMethod::DirectDense) {
    const int n = M.size();
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n) - M.dense();
    Eigen::VectorXd u = Eigen::PartialPivLU<Eigen::MatrixXd>(B).solve(v);
    const double resid = (v + M.apply(u) - u).lpNorm<Eigen::Infinity>() /
                         std::max(u.lpNorm<Eigen::Infinity>(), 1e-300);
    if (!(resid <= std::max(opts.rel_tolerance, 1e-12) * 100) || !u.allFinite())
      throw std::runtime_error("direct dense solve failed the residual check");
    if (stats) *stats = {1, resid};
    return u;
  }
  return anderson_picard([&M](const Eigen::VectorXd& x) { return M.apply(x); }, v, opts, stats);
}

EigenResult leading_left_eigenpair(const DiscreteOperator& N_op, const QuadratureWeights& w,
                                   const EigenOptions& opts) {
  if (N_op.direction() != DiscreteOperator::Direction::Conjugate)
    throw std::invalid_argument("leading_left_eigenpair expects the conjugate operator");
  const int n = N_op.size();
  if (w.size() != n) throw std::invalid_argument("leading_left_eigenpair: weight length mismatch");

  const Eigen::VectorXd wv = w.as_vector();
  auto normalize = [&](Eigen::VectorXd& q) {
    // clamp rounding residue, keep the trapezoid mass at exactly 1
    for (int j = 0; j < n; ++j)
      if (q[j] < 0.0) q[j] = 0.0;
    const double mass = wv.dot(q);
    if (!(mass > 0.0)) throw std::runtime_error("eigenvector collapsed to zero mass");
    q /= mass;
  };

  Eigen::VectorXd q = wv;
  normalize(q);
  long applies = 0;
  double lambda = 0.0, lambda_prev = -1.0;
  Eigen::VectorXd q_prev = q;
  double resid = std::numeric_limits<double>::infinity();

  const long max_outer =
      opts.method == EigenOptions::Method::PowerIteration ? opts.max_iterations : 200;

  for (long outer = 0; outer < max_outer; ++outer) {
    Eigen::VectorXd y = N_op.left_apply(q);
    ++applies;
    // trapezoid mass of y estimates lambda (exact at the eigenvector since
    // the q-mass is 1)
    lambda = wv.dot(y);
    resid = (y - lambda * q).lpNorm<Eigen::Infinity>() /
            std::max(q.lpNorm<Eigen::Infinity>(), 1e-300);
    const double dq = (q - q_prev).lpNorm<Eigen::Infinity>() /
                      std::max(q.lpNorm<Eigen::Infinity>(), 1e-300);
    const bool stable = outer > 0 && std::abs(lambda - lambda_prev) <= opts.rel_tolerance *
                        std::max(lambda, 1e-300) && dq <= opts.rel_tolerance;
    if (stable && resid <= std::max(opts.rel_tolerance, 1e-13)) break;
    lambda_prev = lambda;
    q_prev = q;

    if (opts.method == EigenOptions::Method::PowerIteration) {
      q = y;
      normalize(q);
    } else {
      // inverse iteration with shift 1: q <- normalize( (I - N^t)^{-1} q );
      // the solve runs through the same accelerated second-kind machinery
      SolveOptions sopts;
      sopts.rel_tolerance = 1e-12;
      sopts.max_iterations = opts.max_iterations;
      Eigen::VectorXd warm;
      if (lambda > 0.0 && lambda < 1.0) {
        warm = q / (1.0 - lambda);
        sopts.warm_start = &warm;
      }
      SolveStats st;
      Eigen::VectorXd x = solve_second_kind_apply(
          [&N_op](const Eigen::VectorXd& z) { return N_op.left_apply(z); }, q, sopts, &st);
      applies += st.iterations;
      q = x;
      normalize(q);
    }
    if (applies > opts.max_iterations) break;
  }

  if (!(resid <= 1e-8)) {
    std::ostringstream msg;
    msg << "left eigenpair did not converge: residual " << resid << " after " << applies
        << " operator applications (lambda ~ " << lambda << ")";
    throw std::runtime_error(msg.str());
  }
  if (!(lambda >= 0.0 && lambda < 1.0))
    throw std::runtime_error("leading eigenvalue outside [0,1)");

  EigenResult res;
  res.lambda_max = lambda;
  res.q = std::move(q);
  res.iterations = applies;
  res.residual = resid;
  return res;
}

void iterate_recursion(const DiscreteOperator& M_pre, const Eigen::VectorXd& u0, long tau_max,
                       const std::function<bool(long, const Eigen::VectorXd&)>& on_step) {
  if (u0.size() != M_pre.size()) throw std::invalid_argument("iterate_recursion: length mismatch");
  Eigen::VectorXd u = u0;
  for (long tau = 1; tau <= tau_max; ++tau) {
    u = M_pre.apply(u);
    if (on_step(tau, u)) return;
  }
}

}  // namespace qdet
