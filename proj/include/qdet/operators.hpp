#pragma once

#include <memory>

#include "qdet/grid.hpp"
#include "qdet/lr_models.hpp"

namespace qdet {

using DenseMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Discretization of the transition kernel K_i(x, r) = d/dx F_i(x / b(r)) on a
// uniform grid, by CDF differences (trapezoid-type product rule):
//
//   integral_lo^hi u(x) K_i(x, r_m) dx  ~=  sum_k entry(k, m) * u(x_k)
//
//   entry(0, m)   = ( F_i(x_1/b_m) - F_i(x_0/b_m) ) / 2
//   entry(k, m)   = ( F_i(x_{k+1}/b_m) - F_i(x_{k-1}/b_m) ) / 2,  0 < k < N
//   entry(N, m)   = ( F_i(x_N/b_m) - F_i(x_{N-1}/b_m) ) / 2
//
// The entries of each output node m telescope exactly to
// F_i(hi/b_m) - F_i(lo/b_m) < 1, which bounds the spectral radius below 1.
//
// The Forward operator maps a sampled function u to the integrals at all
// output nodes r_m. The Conjugate operator is the quadrature-weighted adjoint
// of the forward pre-change operator: left-applying a sampled density u gives
//
//   (u^t N)_j = (1/w_j) * sum_m w_m u_m entry(j, m),
//
// which converges to integral u(r) K_inf(x_j, r) dr. This orientation keeps
// every entry nonnegative and makes the discrete pairing
// <w o v, M u> = <w o (v^t N), u> exact, so the quasi-stationary identities
// hold at the discrete level up to solver tolerance.
class DiscreteOperator {
 public:
  enum class Direction { Forward, Conjugate };

  int size() const { return grid_.size(); }
  Direction direction() const { return direction_; }
  Measure measure() const { return measure_; }
  const Grid& grid() const { return grid_; }
  const DriftMap& drift() const { return drift_; }
  bool is_dense() const { return static_cast<bool>(dense_); }
  const DenseMat& dense() const;

  // Coefficient multiplying u[in] in output node [out]. For Forward, in = k
  // (summation node), out = m (kernel node r_m). For Conjugate, in = m, out = j.
  double entry(int in, int out) const;

  // Forward: out[m] = sum_k entry(k, m) u[k].
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
  // Forward, several columns at once (shares one pass over the matrix).
  Eigen::MatrixXd apply_multi(const Eigen::MatrixXd& u_cols) const;
  // Conjugate: out[j] = (1/w_j) sum_m w_m u[m] fwd_entry(j, m).
  Eigen::VectorXd left_apply(const Eigen::VectorXd& u) const;

  // sum_k entry(k, m) for every output m (Forward only).
  Eigen::VectorXd column_sums() const;

 private:
  friend DiscreteOperator build_forward_operator(const LikelihoodRatioModel&, Measure,
                                                 const Grid&, const DriftMap&, int);
  friend DiscreteOperator conjugate_from_forward(const DiscreteOperator&);

  Direction direction_ = Direction::Forward;
  Measure measure_ = Measure::PreChange;
  LikelihoodRatioModel model_{};
  Grid grid_{};
  DriftMap drift_{};
  std::shared_ptr<const DenseMat> dense_;  // row m = output node, col k = summation node
  Eigen::VectorXd w_;                      // trapezoid weights (Conjugate only)
};

// Default upper bound on dense materialization; above it the operator stays
// matrix-free and rows are recomputed per application.
inline constexpr int kDenseThresholdDefault = 12000;

DiscreteOperator build_forward_operator(const LikelihoodRatioModel& model, Measure i,
                                        const Grid& grid, const DriftMap& drift,
                                        int dense_threshold = kDenseThresholdDefault);

// Conjugate operator N_inf (pre-change kernel only).
DiscreteOperator build_conjugate_operator(const LikelihoodRatioModel& model, const Grid& grid,
                                          const DriftMap& drift,
                                          int dense_threshold = kDenseThresholdDefault);

// Same, reusing an already built pre-change forward operator.
DiscreteOperator conjugate_from_forward(const DiscreteOperator& forward_pre);

}  // namespace qdet
