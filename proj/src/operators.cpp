#include "qdet/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace qdet {

namespace {

// Fills F[j] = lr_cdf(model, i, x_j / b) for all grid nodes, given the
// precomputed log-nodes. Shares the per-row work between the dense build and
// the matrix-free application path; only the erf/exp call remains per entry.
class CdfRowFiller {
 public:
  CdfRowFiller(const LikelihoodRatioModel& model, Measure i, const Grid& grid)
      : model_(model), i_(i), n_(grid.size()), log_x_(n_) {
    for (int j = 0; j < n_; ++j) log_x_[j] = std::log(grid.node(j));
  }

  void fill(double b, double* out) const {
    const double lb = std::log(b);
    const double th = model_.theta;
    switch (model_.family) {
      case ModelFamily::GaussianMeanShift: {
        const double inv_th = 1.0 / th;
        const double shift = (i_ == Measure::PreChange) ? 0.5 * th : -0.5 * th;
        const double sgn = th > 0.0 ? -1.0 : 1.0;  // erfc argument sign
        static const double inv_sqrt2 = 0.7071067811865475244;
        for (int j = 0; j < n_; ++j) {
          const double z = (log_x_[j] - lb) * inv_th + shift;
          out[j] = clamp01(0.5 * std::erfc(sgn * z * inv_sqrt2));
        }
        break;
      }
      case ModelFamily::ExponentialScale: {
        const double lth = std::log(th);
        if (th > 1.0) {
          const double beta = (i_ == Measure::PreChange) ? th / (th - 1.0) : 1.0 / (th - 1.0);
          for (int j = 0; j < n_; ++j) {
            const double t = lth + log_x_[j] - lb;  // log(theta * x_j / b)
            out[j] = t <= 0.0 ? 0.0 : clamp01(-std::expm1(-beta * t));
          }
        } else {
          const double beta = (i_ == Measure::PreChange) ? th / (1.0 - th) : 1.0 / (1.0 - th);
          for (int j = 0; j < n_; ++j) {
            const double t = lth + log_x_[j] - lb;
            out[j] = t >= 0.0 ? 1.0 : clamp01(std::exp(beta * t));
          }
        }
        break;
      }
    }
  }

 private:
  static double clamp01(double p) { return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p); }

  LikelihoodRatioModel model_;
  Measure i_;
  int n_;
  Eigen::VectorXd log_x_;
};

// CDF half-differences along one output row; nonnegative by monotonicity,
// clamped against rounding residue.
inline void diff_row(const double* F, int n, double* row) {
  row[0] = std::max(0.0, 0.5 * (F[1] - F[0]));
  for (int k = 1; k < n - 1; ++k) row[k] = std::max(0.0, 0.5 * (F[k + 1] - F[k - 1]));
  row[n - 1] = std::max(0.0, 0.5 * (F[n - 1] - F[n - 2]));
}

}  // namespace

const DenseMat& DiscreteOperator::dense() const {
  if (!dense_) throw std::logic_error("operator is matrix-free; no dense entries stored");
  return *dense_;
}

double DiscreteOperator::entry(int in, int out) const {
  const int n = size();
  if (in < 0 || in >= n || out < 0 || out >= n)
    throw std::out_of_range("operator entry index");
  auto fwd = [&](int k, int m) -> double {
    if (dense_) return (*dense_)(m, k);
    const double b = drift_(grid_.node(m));
    auto F = [&](int j) { return lr_cdf(model_, measure_, grid_.node(j) / b); };
    double d;
    if (k == 0)
      d = 0.5 * (F(1) - F(0));
    else if (k == n - 1)
      d = 0.5 * (F(n - 1) - F(n - 2));
    else
      d = 0.5 * (F(k + 1) - F(k - 1));
    return std::max(0.0, d);
  };
  if (direction_ == Direction::Forward) return fwd(in, out);
  // conjugate: coefficient of u[m = in] in output node x_{j = out}
  return w_[in] * fwd(out, in) / w_[out];
}

Eigen::VectorXd DiscreteOperator::apply(const Eigen::VectorXd& u) const {
  if (direction_ != Direction::Forward)
    throw std::logic_error("apply() is defined for the forward operator");
  if (u.size() != size()) throw std::invalid_argument("apply: length mismatch");
  if (dense_) return *dense_ * u;
  const int n = size();
  Eigen::VectorXd out(n);
  CdfRowFiller filler(model_, measure_, grid_);
  Eigen::VectorXd F(n), row(n);
  for (int m = 0; m < n; ++m) {
    filler.fill(drift_(grid_.node(m)), F.data());
    diff_row(F.data(), n, row.data());
    out[m] = row.dot(u);
  }
  return out;
}

Eigen::MatrixXd DiscreteOperator::apply_multi(const Eigen::MatrixXd& u_cols) const {
  if (direction_ != Direction::Forward)
    throw std::logic_error("apply_multi() is defined for the forward operator");
  if (u_cols.rows() != size()) throw std::invalid_argument("apply_multi: length mismatch");
  if (dense_) return *dense_ * u_cols;
  const int n = size();
  Eigen::MatrixXd out(n, u_cols.cols());
  CdfRowFiller filler(model_, measure_, grid_);
  Eigen::VectorXd F(n), row(n);
  for (int m = 0; m < n; ++m) {
    filler.fill(drift_(grid_.node(m)), F.data());
    diff_row(F.data(), n, row.data());
    out.row(m) = row.transpose() * u_cols;
  }
  return out;
}

Eigen::VectorXd DiscreteOperator::left_apply(const Eigen::VectorXd& u) const {
  if (direction_ != Direction::Conjugate)
    throw std::logic_error("left_apply() is defined for the conjugate operator");
  if (u.size() != size()) throw std::invalid_argument("left_apply: length mismatch");
  const int n = size();
  if (dense_) {
    Eigen::VectorXd t = dense_->transpose() * (w_.cwiseProduct(u));
    return t.cwiseQuotient(w_);
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  CdfRowFiller filler(model_, Measure::PreChange, grid_);
  Eigen::VectorXd F(n), row(n);
  for (int m = 0; m < n; ++m) {
    filler.fill(drift_(grid_.node(m)), F.data());
    diff_row(F.data(), n, row.data());
    acc += (w_[m] * u[m]) * row;
  }
  return acc.cwiseQuotient(w_);
}

Eigen::VectorXd DiscreteOperator::column_sums() const {
  if (direction_ != Direction::Forward)
    throw std::logic_error("column_sums() is defined for the forward operator");
  const int n = size();
  if (dense_) return dense_->rowwise().sum();
  Eigen::VectorXd out(n);
  CdfRowFiller filler(model_, measure_, grid_);
  Eigen::VectorXd F(n), row(n);
  for (int m = 0; m < n; ++m) {
    filler.fill(drift_(grid_.node(m)), F.data());
    diff_row(F.data(), n, row.data());
    out[m] = row.sum();
  }
  return out;
}

DiscreteOperator build_forward_operator(const LikelihoodRatioModel& model, Measure i,
                                        const Grid& grid, const DriftMap& drift,
                                        int dense_threshold) {
  if (drift.kind == DriftKind::EWMA && !(grid.lo > 0.0))
    throw std::invalid_argument("EWMA operators require a grid with lo > 0");
  DiscreteOperator op;
  op.direction_ = DiscreteOperator::Direction::Forward;
  op.measure_ = i;
  op.model_ = model;
  op.grid_ = grid;
  op.drift_ = drift;
  const int n = grid.size();
  if (n <= dense_threshold) {
    auto A = std::make_shared<DenseMat>(n, n);
    CdfRowFiller filler(model, i, grid);
    Eigen::VectorXd F(n);
    for (int m = 0; m < n; ++m) {
      filler.fill(drift(grid.node(m)), F.data());
      diff_row(F.data(), n, A->row(m).data());
    }
    op.dense_ = std::move(A);
  }
  return op;
}

DiscreteOperator build_conjugate_operator(const LikelihoodRatioModel& model, const Grid& grid,
                                          const DriftMap& drift, int dense_threshold) {
  return conjugate_from_forward(
      build_forward_operator(model, Measure::PreChange, grid, drift, dense_threshold));
}

DiscreteOperator conjugate_from_forward(const DiscreteOperator& forward_pre) {
  if (forward_pre.direction() != DiscreteOperator::Direction::Forward ||
      forward_pre.measure() != Measure::PreChange)
    throw std::invalid_argument("conjugate operator must wrap a pre-change forward operator");
  DiscreteOperator op = forward_pre;  // shares the dense matrix
  op.direction_ = DiscreteOperator::Direction::Conjugate;
  op.w_ = trapezoid_weights(forward_pre.grid()).as_vector();
  return op;
}

}  // namespace qdet
