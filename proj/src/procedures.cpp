#include "qdet/procedures.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace qdet {

ProcedureSpec ProcedureSpec::sr(double nu, InitStrategy init) {
  if (!(nu > 0.0)) throw std::invalid_argument("SR threshold nu must be positive");
  if (init.kind == InitStrategy::Kind::FixedR && init.fixed_r >= nu)
    throw std::invalid_argument("SR head start must lie below the threshold");
  ProcedureSpec spec;
  spec.chart = ChartKind::SR;
  spec.drift = DriftMap::sr();
  spec.lo = 0.0;
  spec.hi = nu;
  spec.init = init;
  return spec;
}

ProcedureSpec ProcedureSpec::srp(double nu) {
  ProcedureSpec spec = sr(nu, InitStrategy::srp());
  spec.chart = ChartKind::SRP;
  return spec;
}

ProcedureSpec ProcedureSpec::cusum(double nu, double r) {
  if (!(nu > 1.0)) throw std::invalid_argument("CUSUM threshold nu must exceed 1");
  if (!(r >= 0.0 && r < nu)) throw std::invalid_argument("CUSUM head start must lie in [0, nu)");
  ProcedureSpec spec;
  spec.chart = ChartKind::CUSUM;
  spec.drift = DriftMap::cusum();
  spec.lo = 0.0;
  spec.hi = nu;
  spec.init = InitStrategy::fixed(r);
  return spec;
}

ProcedureSpec ProcedureSpec::ewma(double nu1, double nu2, double alpha, double r) {
  if (!(nu1 > 0.0 && nu1 < 1.0 && nu2 > 1.0))
    throw std::invalid_argument("EWMA interval must satisfy 0 < nu1 < 1 < nu2");
  if (!(r > nu1 && r < nu2))
    throw std::invalid_argument("EWMA head start must lie inside (nu1, nu2)");
  ProcedureSpec spec;
  spec.chart = ChartKind::EWMA;
  spec.drift = DriftMap::ewma(alpha);
  spec.lo = nu1;
  spec.hi = nu2;
  spec.init = InitStrategy::fixed(r);
  spec.alpha = alpha;
  return spec;
}

StoppingRule stopping_rule(const ProcedureSpec& spec) {
  StoppingRule rule;
  if (spec.chart == ChartKind::EWMA) {
    rule.kind = StoppingRule::Kind::ExitInterval;
    rule.lo = spec.lo;
  } else {
    rule.kind = StoppingRule::Kind::UpperCrossing;
    rule.lo = 0.0;
  }
  rule.hi = spec.hi;
  return rule;
}

double classical_start(ChartKind chart) {
  return chart == ChartKind::SR || chart == ChartKind::SRP ? 0.0 : 1.0;
}

double step_statistic(const ProcedureSpec& spec, double current, double lr) {
  return spec.drift(current) * lr;
}

std::string InitStrategy::name() const {
  switch (kind) {
    case Kind::FixedR: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "fixed:%.10g", fixed_r);
      return buf;
    }
    case Kind::Classical: return "classical";
    case Kind::RNu: return "r-nu";
    case Kind::RStar: return "r-star";
    case Kind::QsdMean: return "qsd-mean";
    case Kind::Srp: return "srp";
  }
  return "classical";
}

InitStrategy InitStrategy::parse(const std::string& text) {
  if (text == "classical") return classical();
  if (text == "r-nu") return r_nu();
  if (text == "r-star") return r_star();
  if (text == "qsd-mean") return qsd_mean();
  if (text == "srp") return srp();
  if (text.rfind("fixed:", 0) == 0) {
    size_t used = 0;
    const std::string num = text.substr(6);
    double r = 0.0;
    try {
      r = std::stod(num, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("unparseable head start in '" + text + "'");
    }
    if (used != num.size())
      throw std::invalid_argument("unparseable head start in '" + text + "'");
    return fixed(r);
  }
  throw std::invalid_argument(
      "unknown initialization '" + text +
      "' (expected fixed:R, classical, r-nu, r-star, qsd-mean, or srp)");
}

}  // namespace qdet
