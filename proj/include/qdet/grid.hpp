#pragma once

#include <Eigen/Dense>

namespace qdet {

// Uniform grid x_j = lo + j*c, j = 0..n_intervals, over the statistic's domain
// ([0,nu] for SR/SRP/CUSUM, [nu1,nu2] for EWMA).
struct Grid {
  double lo = 0.0;
  double hi = 0.0;
  int n_intervals = 0;
  double step = 0.0;

  int size() const { return n_intervals + 1; }
  double node(int j) const { return lo + step * j; }
  Eigen::VectorXd nodes() const;
};

Grid build_grid(double lo, double hi, int n_intervals);

// Composite trapezoid row c*[0.5, 1, ..., 1, 0.5].
struct QuadratureWeights {
  double step = 0.0;
  int n_intervals = 0;

  int size() const { return n_intervals + 1; }
  double operator[](int j) const {
    return (j == 0 || j == n_intervals) ? 0.5 * step : step;
  }
  Eigen::VectorXd as_vector() const;
};

QuadratureWeights trapezoid_weights(const Grid& grid);

// sum_j w_j * u_j * v_j, the trapezoid approximation of the integral of u*v.
double trapezoid_pair(const QuadratureWeights& w, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& v);

// Piecewise-linear interpolation of node samples u at the point r (clamped to
// the grid range at the ends).
double interp_linear(const Grid& grid, const Eigen::VectorXd& u, double r);

// One-step drift of the detection statistic: next = b(current) * l with
//   SR/SRP: b(r) = 1 + r,  CUSUM: b(r) = max{1, r},  EWMA: b(r) = r^alpha.
enum class DriftKind { SR, CUSUM, EWMA };

struct DriftMap {
  DriftKind kind = DriftKind::SR;
  double alpha = 0.0;  // EWMA forgetting factor, in (0,1)

  double operator()(double r) const;

  static DriftMap sr() { return {DriftKind::SR, 0.0}; }
  static DriftMap cusum() { return {DriftKind::CUSUM, 0.0}; }
  static DriftMap ewma(double alpha);
};

}  // namespace qdet
