#include "qdet/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace qdet {

Eigen::VectorXd Grid::nodes() const {
  Eigen::VectorXd x(size());
  for (int j = 0; j < size(); ++j) x[j] = node(j);
  return x;
}

Grid build_grid(double lo, double hi, int n_intervals) {
  if (!(hi > lo) || lo < 0.0 || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("grid requires 0 <= lo < hi");
  if (n_intervals < 2) throw std::invalid_argument("grid requires at least 2 intervals");
  Grid g;
  g.lo = lo;
  g.hi = hi;
  g.n_intervals = n_intervals;
  g.step = (hi - lo) / n_intervals;
  return g;
}

Eigen::VectorXd QuadratureWeights::as_vector() const {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(size(), step);
  w[0] = 0.5 * step;
  w[n_intervals] = 0.5 * step;
  return w;
}

QuadratureWeights trapezoid_weights(const Grid& grid) {
  return {grid.step, grid.n_intervals};
}

double trapezoid_pair(const QuadratureWeights& w, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& v) {
  if (u.size() != w.size() || v.size() != w.size())
    throw std::invalid_argument("trapezoid_pair: length mismatch");
  const int n = w.n_intervals;
  double interior = 0.0;
  for (int j = 1; j < n; ++j) interior += u[j] * v[j];
  return w.step * (interior + 0.5 * (u[0] * v[0] + u[n] * v[n]));
}

double interp_linear(const Grid& grid, const Eigen::VectorXd& u, double r) {
  if (u.size() != grid.size())
    throw std::invalid_argument("interp_linear: length mismatch");
  if (r <= grid.lo) return u[0];
  if (r >= grid.hi) return u[grid.n_intervals];
  const double s = (r - grid.lo) / grid.step;
  int j = static_cast<int>(s);
  if (j >= grid.n_intervals) j = grid.n_intervals - 1;
  const double f = s - j;
  return (1.0 - f) * u[j] + f * u[j + 1];
}

double DriftMap::operator()(double r) const {
  switch (kind) {
    case DriftKind::SR:
      return 1.0 + r;
    case DriftKind::CUSUM:
      return r > 1.0 ? r : 1.0;
    case DriftKind::EWMA:
      if (!(r > 0.0)) throw std::domain_error("EWMA drift requires r > 0");
      return std::pow(r, alpha);
  }
  return 1.0;
}

DriftMap DriftMap::ewma(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("EWMA alpha must lie in (0,1)");
  return {DriftKind::EWMA, alpha};
}

}  // namespace qdet
