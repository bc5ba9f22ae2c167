#include "qdet/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace qdet {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::mt19937_64 substream(std::uint64_t seed, long rep) {
  const std::uint64_t base = seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(rep);
  return std::mt19937_64(splitmix64(base));
}

// Inverse transform on the piecewise-linear cumulative of the sampled density.
struct QsdSampler {
  const Grid* grid = nullptr;
  std::vector<double> cum;

  QsdSampler(const Grid& g, const Eigen::VectorXd& q) : grid(&g) {
    if (q.size() != g.size())
      throw std::invalid_argument("SRP sampler: density and grid sizes differ");
    cum.resize(static_cast<size_t>(g.size()));
    cum[0] = 0.0;
    for (int j = 1; j < g.size(); ++j)
      cum[static_cast<size_t>(j)] =
          cum[static_cast<size_t>(j - 1)] + 0.5 * g.step * (q[j - 1] + q[j]);
    const double total = cum.back();
    if (!(total > 0.0)) throw std::invalid_argument("SRP sampler: density has no mass");
    for (double& c : cum) c /= total;
    cum.back() = 1.0;
  }

  double draw(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    size_t j = it == cum.end() ? cum.size() - 1 : static_cast<size_t>(it - cum.begin());
    if (j == 0) j = 1;
    const double span = cum[j] - cum[j - 1];
    const double frac = span > 0.0 ? (u - cum[j - 1]) / span : 0.0;
    return grid->node(static_cast<int>(j - 1)) + frac * grid->step;
  }
};

long resolve_path_cap(const ProcedureSpec& spec, const McOptions& opts) {
  if (opts.path_cap > 0) return opts.path_cap;
  double gamma = opts.gamma_hint;
  if (!(gamma > 0.0))
    gamma = spec.chart == ChartKind::EWMA ? 1e5 : spec.hi / 0.9;
  return static_cast<long>(std::ceil(100.0 * gamma));
}

}  // namespace

long simulate_stopping_time(const ProcedureSpec& spec, const LikelihoodRatioModel& model,
                            double r0, long change_point, long path_cap, std::mt19937_64& rng) {
  const StoppingRule rule = stopping_rule(spec);
  const bool interval = rule.kind == StoppingRule::Kind::ExitInterval;
  if (interval ? !(r0 > rule.lo && r0 < rule.hi) : !(r0 >= 0.0 && r0 < rule.hi))
    throw std::invalid_argument("simulate_stopping_time: start value outside the chart domain");
  double s = r0;
  for (long n = 1; n <= path_cap; ++n) {
    const Measure i = change_point >= 0 && n > change_point ? Measure::PostChange
                                                            : Measure::PreChange;
    s = step_statistic(spec, s, sample_lr(model, i, rng));
    if (rule.stopped(s)) return n;
  }
  return -1;
}

McEstimate estimate(const ProcedureSpec& spec, const LikelihoodRatioModel& model,
                    McQuantity quantity, long tau, const McOptions& opts) {
  using Kind = InitStrategy::Kind;
  if (opts.replications < 100)
    throw std::invalid_argument("estimate: need at least 100 replications");
  if (quantity != McQuantity::ARL && tau < 0)
    throw std::invalid_argument("estimate: tau must be >= 0 for this quantity");

  double fixed_start = 0.0;
  std::optional<QsdSampler> sampler;
  switch (spec.init.kind) {
    case Kind::FixedR:
      fixed_start = spec.init.fixed_r;
      break;
    case Kind::Classical:
      fixed_start = classical_start(spec.chart);
      break;
    case Kind::Srp:
      if (!opts.srp_q || !opts.srp_grid)
        throw std::invalid_argument("estimate: SRP simulation needs srp_q and srp_grid");
      sampler.emplace(*opts.srp_grid, *opts.srp_q);
      break;
    default:
      throw std::invalid_argument(
          "estimate: resolve the head start to a number (or srp) before simulating");
  }

  const long cap = resolve_path_cap(spec, opts);
  const long n = opts.replications;

  __int128 sum = 0, sum_sq = 0;
  long rejected = 0;

  for (long rep = 0; rep < n; ++rep) {
    std::mt19937_64 rng = substream(opts.seed, rep);
    long value = 0;
    switch (quantity) {
      case McQuantity::ARL: {
        const double r0 = sampler ? sampler->draw(rng) : fixed_start;
        const long t = simulate_stopping_time(spec, model, r0, -1, cap, rng);
        if (t < 0) throw std::runtime_error("estimate: path exceeded the length cap");
        value = t;
        break;
      }
      case McQuantity::ADD_at: {
        for (long attempt = 0;; ++attempt) {
          if (attempt >= 1000000)
            throw std::runtime_error("estimate: survival past tau is too rare to condition on");
          const double r0 = sampler ? sampler->draw(rng) : fixed_start;
          const long t = simulate_stopping_time(spec, model, r0, tau, cap, rng);
          if (t < 0) throw std::runtime_error("estimate: path exceeded the length cap");
          if (t > tau) {
            value = t - tau;
            break;
          }
          ++rejected;
        }
        break;
      }
      case McQuantity::SurvivalProb: {
        const double r0 = sampler ? sampler->draw(rng) : fixed_start;
        // Survival needs only whether the path outlives tau, so cap there.
        const long t = tau == 0 ? 1 : simulate_stopping_time(spec, model, r0, -1, tau, rng);
        value = tau == 0 ? 1 : (t < 0 ? 1 : 0);
        break;
      }
    }
    sum += value;
    sum_sq += static_cast<__int128>(value) * value;
  }

  McEstimate est;
  est.replications = n;
  est.seed = opts.seed;
  est.quantity = quantity;
  est.tau = quantity == McQuantity::ARL ? -1 : tau;
  const long double s1 = static_cast<long double>(sum);
  const long double s2 = static_cast<long double>(sum_sq);
  est.mean = static_cast<double>(s1 / n);
  const long double var = n > 1 ? (s2 - s1 * s1 / n) / (n - 1) : 0.0L;
  est.std_error = static_cast<double>(std::sqrt(std::max(var, 0.0L) / n));
  if (quantity == McQuantity::ADD_at)
    est.rejection_rate = static_cast<double>(rejected) / static_cast<double>(rejected + n);
  return est;
}

}  // namespace qdet
