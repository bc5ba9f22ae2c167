#pragma once

#include <functional>

#include "qdet/operators.hpp"

namespace qdet {

enum class SolveMethod { FixedPoint, DirectDense };

struct SolveOptions {
  SolveMethod method = SolveMethod::FixedPoint;
  double rel_tolerance = 1e-10;
  long max_iterations = 1000000;
  // Size of the Anderson mixing window for the FixedPoint path; 0 runs plain
  // Picard sweeps u <- v + Mu. Either way the returned iterate carries a
  // freshly measured residual certificate.
  int anderson_window = 20;
  const Eigen::VectorXd* warm_start = nullptr;
};

struct SolveStats {
  long iterations = 0;   // operator applications
  double residual = 0.0; // ||u - v - Mu||_inf / ||u||_inf at the returned u
};

// Solves u = v + Mu for a forward operator with spectral radius < 1.
Eigen::VectorXd solve_second_kind(const DiscreteOperator& M, const Eigen::VectorXd& v,
                                  const SolveOptions& opts = {}, SolveStats* stats = nullptr);

// Same contract for an arbitrary linear applier (used internally by the
// eigenpair solver; exposed for tests).
Eigen::VectorXd solve_second_kind_apply(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_m,
    const Eigen::VectorXd& v, const SolveOptions& opts = {}, SolveStats* stats = nullptr);

struct EigenResult {
  double lambda_max = 0.0;
  Eigen::VectorXd q;      // sampled quasi-stationary density, trapezoid-normalized
  long iterations = 0;    // operator applications
  double residual = 0.0;  // ||q^t N - lambda q^t||_inf / ||q||_inf
};

struct EigenOptions {
  double rel_tolerance = 1e-10;
  long max_iterations = 100000;
  // InverseIteration amplifies the spectral gap through second-kind solves of
  // (I - N^t) x = q and converges in a handful of outer steps; PowerIteration
  // is the plain left power sweep, kept as a cross-check method.
  enum class Method { InverseIteration, PowerIteration } method = Method::InverseIteration;
};

// Leading left eigenpair of the conjugate operator: q^t N = lambda q^t with
// q >= 0 and trapezoid_pair(w, q, 1) = 1. Start vector is the (normalized)
// trapezoid weight vector, which is strictly positive.
EigenResult leading_left_eigenpair(const DiscreteOperator& N_op, const QuadratureWeights& w,
                                   const EigenOptions& opts = {});

// Streams u_tau = M_pre * u_{tau-1} for tau = 1..tau_max, invoking
// on_step(tau, u_tau) after each step; stops early when on_step returns true.
void iterate_recursion(const DiscreteOperator& M_pre, const Eigen::VectorXd& u0, long tau_max,
                       const std::function<bool(long, const Eigen::VectorXd&)>& on_step);

}  // namespace qdet
