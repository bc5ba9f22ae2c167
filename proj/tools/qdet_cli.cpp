#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "qdet/calibration.hpp"
#include "qdet/monte_carlo.hpp"
#include "qdet/report.hpp"

namespace {

using namespace qdet;

struct CommonConfig {
  std::string model = "gaussian";
  double theta = 0.1;
  std::string chart = "sr";
  std::vector<std::string> strategies;
  std::vector<double> gammas;
  int grid_n = 10000;
  double alpha = 0.9;
  double nu1 = 0.0;
  double nu2 = 0.0;
  std::vector<long> taus;
  std::uint64_t seed = 0x5eed0001u;
  std::string out;
  std::string format = "csv";
  int jobs = 1;
  std::string config_path;
};

std::string trim_ws(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Feed `key=value` lines into the subcommand's own options. Values pass
// through the regular CLI11 conversion and validator path, so a bad value in
// the file fails the same way a bad flag would. Options already given on the
// command line keep their values. A [section] header scopes the keys that
// follow to the subcommand of that name; keys under a foreign section are
// skipped so one file can serve several subcommands.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file " + path);
  std::vector<CLI::Option*> touched;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim_ws(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[' && s.back() == ']') {
      section = trim_ws(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    if (!section.empty() && section != cmd->get_name()) continue;
    const std::string key = trim_ws(s.substr(0, eq));
    std::string val = trim_ws(s.substr(eq + 1));
    if (val.size() >= 2 && (val.front() == '"' || val.front() == '\'') &&
        val.back() == val.front())
      val = val.substr(1, val.size() - 2);
    CLI::Option* opt = key == "config" ? nullptr : cmd->get_option_no_throw("--" + key);
    if (!opt)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(val);
    touched.push_back(opt);
  }
  for (CLI::Option* opt : touched) opt->run_callback();
}

void add_common(CLI::App* cmd, CommonConfig& c) {
  cmd->add_option("--model", c.model, "LR family")
      ->check(CLI::IsMember({"gaussian", "exponential"}));
  cmd->add_option("--theta", c.theta, "post-change parameter");
  cmd->add_option("--chart", c.chart, "detection chart")
      ->check(CLI::IsMember({"sr", "srp", "cusum", "ewma"}));
  cmd->add_option("--strategy", c.strategies,
                  "initialization: fixed:R, classical, r-nu, r-star, qsd-mean, srp")
      ->delimiter(',');
  cmd->add_option("--gamma", c.gammas, "ARL constraint(s)")->delimiter(',');
  cmd->add_option("--grid-n", c.grid_n, "grid intervals")->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", c.alpha, "EWMA forgetting factor");
  cmd->add_option("--nu1", c.nu1, "EWMA lower threshold");
  cmd->add_option("--nu2", c.nu2, "EWMA upper threshold");
  cmd->add_option("--tau-list", c.taus, "change points to probe")->delimiter(',');
  cmd->add_option("--seed", c.seed, "RNG seed");
  cmd->add_option("--out", c.out, "output path (default stdout)");
  cmd->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--jobs", c.jobs, "parallel jobs")->check(CLI::PositiveNumber);
  cmd->add_option("--config", c.config_path, "INI file with long-option defaults (flags win)");
}

LikelihoodRatioModel make_model(const CommonConfig& c) {
  return c.model == "gaussian" ? LikelihoodRatioModel::gaussian(c.theta)
                               : LikelihoodRatioModel::exponential(c.theta);
}

ChartKind parse_chart(const std::string& s) {
  if (s == "sr") return ChartKind::SR;
  if (s == "srp") return ChartKind::SRP;
  if (s == "cusum") return ChartKind::CUSUM;
  return ChartKind::EWMA;
}

template <typename T>
void canon_list(std::ostringstream& ss, const char* key, const std::vector<T>& xs) {
  ss << key << '=';
  for (size_t i = 0; i < xs.size(); ++i) ss << (i ? "," : "") << xs[i];
  ss << ';';
}

std::string canon_base(const char* cmd, const CommonConfig& c) {
  std::ostringstream ss;
  ss << "cmd=" << cmd << ";model=" << c.model << ";theta=" << format_real(c.theta)
     << ";chart=" << c.chart << ";grid_n=" << c.grid_n << ";alpha=" << format_real(c.alpha)
     << ";nu1=" << format_real(c.nu1) << ";nu2=" << format_real(c.nu2) << ";seed=" << c.seed
     << ";format=" << c.format << ';';
  canon_list(ss, "strategy", c.strategies);
  canon_list(ss, "gamma", c.gammas);
  canon_list(ss, "tau", c.taus);
  return ss.str();
}

int emit(const CommonConfig& c, const ReportTable& table, const std::string& canon,
         int exit_code) {
  const std::uint64_t hash = config_hash(canon);
  const ReportFormat fmt = c.format == "json" ? ReportFormat::JSON : ReportFormat::CSV;
  if (c.out.empty()) {
    write_report(std::cout, table, fmt, hash);
    return exit_code;
  }
  std::ofstream os(c.out);
  if (!os) {
    std::cerr << "cannot open output file " << c.out << "\n";
    return 1;
  }
  write_report(os, table, fmt, hash);
  return exit_code;
}

void run_indexed(int jobs, int count, const std::function<void(int)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int nthreads = std::min(jobs, count);
  pool.reserve(static_cast<size_t>(nthreads));
  for (int t = 0; t < nthreads; ++t)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < count;) fn(i);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------- calibrate

int cmd_calibrate(const CommonConfig& c) {
  LikelihoodRatioModel model{};
  std::vector<InitStrategy> strats;
  ChartKind chart{};
  try {
    if (c.strategies.empty()) throw std::invalid_argument("at least one --strategy is required");
    if (c.gammas.empty()) throw std::invalid_argument("at least one --gamma is required");
    for (const auto& s : c.strategies) strats.push_back(InitStrategy::parse(s));
    for (double g : c.gammas)
      if (!(g > 1.0)) throw std::invalid_argument("--gamma must exceed 1");
    chart = parse_chart(c.chart);
    if (chart == ChartKind::EWMA)
      throw std::invalid_argument("calibrate does not cover the EWMA chart");
    model = make_model(c);
  } catch (const std::exception& e) {
    std::cerr << "calibrate: " << e.what() << "\n";
    return 2;
  }

  struct Task {
    InitStrategy strategy;
    double gamma;
  };
  std::vector<Task> tasks;
  for (const auto& s : strats)
    for (double g : c.gammas) tasks.push_back({s, g});

  std::vector<std::vector<std::string>> rows(tasks.size());
  std::atomic<bool> any_failed{false};
  run_indexed(c.jobs, static_cast<int>(tasks.size()), [&](int i) {
    const Task& t = tasks[static_cast<size_t>(i)];
    try {
      CalibrationOptions opts;
      opts.grid_n = c.grid_n;
      const CalibrationResult r = calibrate(model, chart, t.strategy, t.gamma, opts);
      rows[static_cast<size_t>(i)] = {t.strategy.name(),
                                      format_real(t.gamma),
                                      format_real(r.nu),
                                      r.randomized ? "randomized" : format_real(r.r),
                                      format_real(r.achieved_arl),
                                      format_int(r.grid_n),
                                      format_real(r.pilot_w),
                                      "ok"};
    } catch (const std::exception& e) {
      rows[static_cast<size_t>(i)] = {t.strategy.name(), format_real(t.gamma), "", "", "", "", "",
                                      std::string("error: ") + e.what()};
      any_failed = true;
    }
  });

  ReportTable table;
  table.columns = {"strategy", "gamma", "nu", "r", "achieved_arl", "grid_n", "pilot_w", "status"};
  for (auto& row : rows) table.add_row(std::move(row));
  return emit(c, table, canon_base("calibrate", c), any_failed ? 1 : 0);
}

// ---------------------------------------------------------------- add-curve

struct CalFileRow {
  std::string strategy;
  double gamma = 0.0;
  double nu = 0.0;
  double r = 0.0;
  bool randomized = false;
};

std::vector<CalFileRow> parse_calibration_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open calibration file " + path);
  std::vector<CalFileRow> out;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (first) {
      first = false;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8 || cells[7] != "ok") continue;
    CalFileRow row;
    row.strategy = cells[0];
    row.gamma = std::stod(cells[1]);
    row.nu = std::stod(cells[2]);
    row.randomized = cells[3] == "randomized";
    row.r = row.randomized ? 0.0 : std::stod(cells[3]);
    out.push_back(row);
  }
  return out;
}

struct AddCurveExtras {
  double nu = std::nan("");
  double r = std::nan("");
  std::string calibration_file;
};

int cmd_add_curve(const CommonConfig& c, const AddCurveExtras& x) {
  LikelihoodRatioModel model{};
  std::vector<InitStrategy> strats;
  double gamma = 0.0;
  std::vector<long> taus = c.taus;
  std::vector<CalFileRow> cal_rows;
  ChartKind chart{};
  try {
    if (c.gammas.size() != 1) throw std::invalid_argument("exactly one --gamma is required");
    gamma = c.gammas[0];
    if (!(gamma > 1.0)) throw std::invalid_argument("--gamma must exceed 1");
    for (const auto& s : c.strategies) strats.push_back(InitStrategy::parse(s));
    chart = parse_chart(c.chart);
    if (chart == ChartKind::EWMA || chart == ChartKind::SRP)
      throw std::invalid_argument("--chart must be sr or cusum (srp comes from --strategy srp)");
    model = make_model(c);
    if (taus.empty()) taus = {0, 50, 100, 200, 400, 600, 800, 1000};
    for (long t : taus)
      if (t < 0) throw std::invalid_argument("--tau-list entries must be >= 0");
    if (!x.calibration_file.empty()) {
      cal_rows = parse_calibration_csv(x.calibration_file);
      if (strats.empty()) {
        // no --strategy: curve every calibrated row at this gamma, file order
        for (const auto& row : cal_rows)
          if (std::abs(row.gamma - gamma) <= 1e-9 * gamma)
            strats.push_back(InitStrategy::parse(row.strategy));
        if (strats.empty())
          throw std::invalid_argument("calibration file has no rows at this gamma");
      }
    } else if (strats.empty()) {
      throw std::invalid_argument("at least one --strategy is required (or --calibration FILE)");
    } else if (std::isnan(x.nu)) {
      throw std::invalid_argument("supply --nu (with --r where needed) or --calibration FILE");
    } else if (strats.size() > 1) {
      throw std::invalid_argument("inline --nu/--r works with a single --strategy");
    }
  } catch (const std::exception& e) {
    std::cerr << "add-curve: " << e.what() << "\n";
    return 2;
  }

  ReportTable table;
  table.columns = {"strategy", "gamma", "nu", "r", "tau", "add", "steady_state"};
  int code = 0;

  for (const auto& strat : strats) {
    try {
      double nu = x.nu, r = x.r;
      if (!cal_rows.empty()) {
        bool found = false;
        for (const auto& row : cal_rows) {
          if (row.strategy == strat.name() && std::abs(row.gamma - gamma) <= 1e-9 * gamma) {
            nu = row.nu;
            r = row.r;
            found = true;
            break;
          }
        }
        if (!found)
          throw std::runtime_error("no calibration row for " + strat.name() + " at this gamma");
      }
      using Kind = InitStrategy::Kind;
      if (strat.kind == Kind::Classical) r = classical_start(chart);
      if (strat.kind == Kind::FixedR) r = strat.fixed_r;
      if (strat.kind != Kind::Srp && std::isnan(r))
        throw std::runtime_error("strategy " + strat.name() + " needs a resolved --r");
      if (!(nu > 0.0)) throw std::runtime_error("threshold nu must be positive");

      const Grid grid = build_grid(0.0, nu, c.grid_n);
      const DriftMap drift = chart == ChartKind::CUSUM ? DriftMap::cusum() : DriftMap::sr();
      PerformanceVectors vecs;
      vecs.grid = grid;
      {
        DiscreteOperator M0 = build_forward_operator(model, Measure::PostChange, grid, drift);
        vecs.phi_0 = solve_phi(M0);
      }
      DiscreteOperator Minf = build_forward_operator(model, Measure::PreChange, grid, drift);
      const long tau_hi = std::max<long>(1, *std::max_element(taus.begin(), taus.end()));

      std::vector<double> curve;
      long converged_at = -1;
      if (strat.kind == Kind::Srp) {
        vecs.phi_inf = solve_phi(Minf);
        DiscreteOperator conj = conjugate_from_forward(Minf);
        const SrpCharacteristics qsd = srp_characteristics(conj, vecs);
        ScanRequest req;
        req.profile.tau_max = tau_hi;
        req.qtilde = &qsd.q;
        const ScanResult scan = profile_scan(vecs, Minf, req);
        curve = scan.qcurve;
        if (scan.converged) converged_at = scan.stopped_at;
      } else {
        ProfileOptions prof;
        prof.tau_max = tau_hi;
        const PerformanceProfile profile = add_profile(vecs, Minf, r, prof);
        curve = profile.add;
        if (profile.converged) converged_at = profile.converged_at;
      }

      for (long t : taus) {
        const size_t idx = std::min<size_t>(static_cast<size_t>(t), curve.size() - 1);
        const bool settled = converged_at >= 0 && t >= converged_at;
        table.add_row({strat.name(), format_real(gamma), format_real(nu),
                       strat.kind == Kind::Srp ? "randomized" : format_real(r), format_int(t),
                       format_real(curve[idx]), settled ? "1" : "0"});
      }
    } catch (const std::exception& e) {
      table.add_row({strat.name(), format_real(gamma), "", "", "", "",
                     std::string("error: ") + e.what()});
      code = 1;
    }
  }

  std::string canon = canon_base("add-curve", c);
  canon += "nu=" + format_real(x.nu) + ";r=" + format_real(x.r) +
           ";calibration=" + x.calibration_file + ";";
  return emit(c, table, canon, code);
}

// ----------------------------------------------------------------- frontier

int cmd_frontier(const CommonConfig& c) {
  LikelihoodRatioModel model{};
  std::vector<InitStrategy> strats;
  try {
    if (c.gammas.empty()) throw std::invalid_argument("at least one --gamma is required");
    for (double g : c.gammas)
      if (!(g > 1.0)) throw std::invalid_argument("--gamma must exceed 1");
    std::vector<std::string> names = c.strategies;
    if (names.empty()) names = {"classical", "r-nu", "r-star", "qsd-mean", "srp"};
    for (const auto& s : names) strats.push_back(InitStrategy::parse(s));
    model = make_model(c);
  } catch (const std::exception& e) {
    std::cerr << "frontier: " << e.what() << "\n";
    return 2;
  }

  struct Task {
    double gamma;
    InitStrategy strategy;
  };
  std::vector<Task> tasks;
  for (double g : c.gammas)
    for (const auto& s : strats) tasks.push_back({g, s});

  std::vector<FrontierPoint> points(tasks.size());
  std::vector<std::string> errors(tasks.size());
  run_indexed(c.jobs, static_cast<int>(tasks.size()), [&](int i) {
    const Task& t = tasks[static_cast<size_t>(i)];
    try {
      CalibrationOptions opts;
      opts.grid_n = c.grid_n;
      const bool want_lp = t.strategy.kind == InitStrategy::Kind::RNu;
      points[static_cast<size_t>(i)] = frontier_point(model, t.strategy, t.gamma, opts, want_lp);
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = e.what();
    }
  });

  ReportTable table;
  table.columns = {"gamma", "row", "strategy", "nu", "r", "j_p", "l_p", "flag", "status"};
  int code = 0;
  size_t idx = 0;
  for (double g : c.gammas) {
    double jp_rnu = std::nan("");
    std::vector<std::pair<std::string, double>> jps;
    for (const auto& strat : strats) {
      const FrontierPoint& pt = points[idx];
      const std::string& err = errors[idx];
      ++idx;
      if (!err.empty()) {
        table.add_row({format_real(g), "result", strat.name(), "", "", "", "", "",
                       "error: " + err});
        code = 1;
        continue;
      }
      table.add_row({format_real(g), "result", strat.name(), format_real(pt.cal.nu),
                     pt.cal.randomized ? "randomized" : format_real(pt.cal.r),
                     format_real(pt.j_p), pt.has_l_p ? format_real(pt.l_p) : "", "", "ok"});
      if (strat.kind == InitStrategy::Kind::RNu)
        jp_rnu = pt.j_p;
      else
        jps.emplace_back(strat.name(), pt.j_p);
    }
    if (!std::isnan(jp_rnu))
      for (const auto& [name, jp] : jps) {
        const bool holds = jp_rnu <= jp * (1.0 + 1e-9);
        table.add_row({format_real(g), "ordering", "r-nu<=" + name, "", "", "", "",
                       holds ? "1" : "0", "ok"});
      }
  }
  return emit(c, table, canon_base("frontier", c), code);
}

// ---------------------------------------------------------------------- qsd

int cmd_qsd(const CommonConfig& c, double nu) {
  LikelihoodRatioModel model{};
  try {
    if (!(nu > 0.0)) throw std::invalid_argument("--nu must be positive");
    model = make_model(c);
  } catch (const std::exception& e) {
    std::cerr << "qsd: " << e.what() << "\n";
    return 2;
  }

  ReportTable table;
  table.columns = {"x", "metric", "value"};
  try {
    const Grid grid = build_grid(0.0, nu, c.grid_n);
    PerformanceVectors vecs;
    vecs.grid = grid;
    {
      DiscreteOperator M0 = build_forward_operator(model, Measure::PostChange, grid, DriftMap::sr());
      vecs.phi_0 = solve_phi(M0);
    }
    DiscreteOperator Minf = build_forward_operator(model, Measure::PreChange, grid, DriftMap::sr());
    vecs.phi_inf = solve_phi(Minf);
    DiscreteOperator conj = conjugate_from_forward(Minf);
    const SrpCharacteristics qsd = srp_characteristics(conj, vecs);
    table.add_row({"", "lambda_max", format_real(qsd.lambda_max)});
    table.add_row({"", "mu", format_real(qsd.mu)});
    table.add_row({"", "arl", format_real(qsd.arl)});
    table.add_row({"", "add", format_real(qsd.add)});
    table.add_row({"", "eigen_residual", format_real(qsd.eigen_residual)});
    for (int j = 0; j < grid.size(); ++j)
      table.add_row({format_real(grid.node(j)), "qtilde", format_real(qsd.q[j])});
  } catch (const std::exception& e) {
    std::cerr << "qsd: " << e.what() << "\n";
    return 1;
  }
  std::string canon = canon_base("qsd", c) + "nu=" + format_real(nu) + ";";
  return emit(c, table, canon, 0);
}

// ---------------------------------------------------------------------- lfa

struct LfaExtras {
  double nu = std::nan("");
  double r = 0.0;
  std::vector<long> ks{0, 100, 1000};
  std::vector<long> ms{1, 10, 100};
};

int cmd_lfa(const CommonConfig& c, const LfaExtras& x) {
  LikelihoodRatioModel model{};
  try {
    if (std::isnan(x.nu) || !(x.nu > 0.0)) throw std::invalid_argument("--nu must be positive");
    if (!(x.r >= 0.0 && x.r < x.nu)) throw std::invalid_argument("--r must lie in [0, nu)");
    for (long k : x.ks)
      if (k < 0) throw std::invalid_argument("--k-list entries must be >= 0");
    for (long m : x.ms)
      if (m < 1) throw std::invalid_argument("--m-list entries must be >= 1");
    if (x.ks.empty() || x.ms.empty()) throw std::invalid_argument("k and m lists must be nonempty");
    model = make_model(c);
  } catch (const std::exception& e) {
    std::cerr << "lfa: " << e.what() << "\n";
    return 2;
  }

  ReportTable table;
  table.columns = {"k", "m", "probability"};
  try {
    const long k_max = *std::max_element(x.ks.begin(), x.ks.end());
    const long m_max = *std::max_element(x.ms.begin(), x.ms.end());
    const Grid grid = build_grid(0.0, x.nu, c.grid_n);
    DiscreteOperator Minf = build_forward_operator(model, Measure::PreChange, grid, DriftMap::sr());
    const std::vector<double> rho = rho_sequence_at(Minf, grid, x.r, k_max + m_max);
    for (long k : x.ks)
      for (long m : x.ms)
        table.add_row({format_int(k), format_int(m),
                       format_real(local_false_alarm_prob(rho, k, m))});
  } catch (const std::exception& e) {
    std::cerr << "lfa: " << e.what() << "\n";
    return 1;
  }
  std::ostringstream extra;
  extra << "nu=" << format_real(x.nu) << ";r=" << format_real(x.r) << ';';
  canon_list(extra, "k", x.ks);
  canon_list(extra, "m", x.ms);
  return emit(c, table, canon_base("lfa", c) + extra.str(), 0);
}

// ----------------------------------------------------------------- validate

struct ValidateExtras {
  long replications = 1000000;
  double richardson_tol = 0.002;
};

int cmd_validate(const CommonConfig& c, const ValidateExtras& x) {
  LikelihoodRatioModel model{};
  double gamma = 1000.0;
  try {
    if (c.gammas.size() > 1) throw std::invalid_argument("at most one --gamma");
    if (!c.gammas.empty()) gamma = c.gammas[0];
    if (!(gamma > 1.0)) throw std::invalid_argument("--gamma must exceed 1");
    if (x.replications < 100) throw std::invalid_argument("--replications must be >= 100");
    model = make_model(c);
  } catch (const std::exception& e) {
    std::cerr << "validate: " << e.what() << "\n";
    return 2;
  }

  ReportTable table;
  table.columns = {"check", "observed", "threshold", "pass"};
  bool all_pass = true;
  auto check = [&](const std::string& name, double observed, double threshold) {
    const bool pass = observed <= threshold;
    all_pass = all_pass && pass;
    table.add_row({name, format_real(observed), format_real(threshold), pass ? "1" : "0"});
  };

  try {
    CalibrationOptions copts;
    copts.grid_n = c.grid_n;
    const CalibrationResult cal =
        calibrate(model, ChartKind::SR, InitStrategy::classical(), gamma, copts);
    check("calibration_arl_rel_err", std::abs(cal.achieved_arl - gamma) / gamma,
          copts.arl_rel_tol);

    const Grid grid = build_grid(0.0, cal.nu, c.grid_n);
    PerformanceVectors vecs;
    vecs.grid = grid;
    {
      DiscreteOperator M0 = build_forward_operator(model, Measure::PostChange, grid, DriftMap::sr());
      vecs.phi_0 = solve_phi(M0);
    }
    double fred_arl = 0.0;
    std::vector<double> fred_add;  // at tau 0, 50, 200
    std::vector<double> fred_rho;  // at tau 10, 100
    const std::vector<long> add_taus{0, 50, 200};
    const std::vector<long> rho_taus{10, 100};
    {
      DiscreteOperator Minf = build_forward_operator(model, Measure::PreChange, grid, DriftMap::sr());
      vecs.phi_inf = solve_phi(Minf);
      fred_arl = interp_linear(grid, vecs.phi_inf, 0.0);
      ProfileOptions prof;
      prof.tau_max = 200;
      const PerformanceProfile profile = add_profile(vecs, Minf, 0.0, prof);
      for (long t : add_taus)
        fred_add.push_back(profile.add[static_cast<size_t>(std::min<long>(
            t, static_cast<long>(profile.add.size()) - 1))]);
      const std::vector<double> rho = rho_sequence_at(Minf, grid, 0.0, 100);
      for (long t : rho_taus) fred_rho.push_back(rho[static_cast<size_t>(t)]);
    }

    const ProcedureSpec spec = ProcedureSpec::sr(cal.nu);
    McOptions mopts;
    mopts.replications = x.replications;
    mopts.seed = c.seed;
    mopts.gamma_hint = gamma;

    const McEstimate arl = estimate(spec, model, McQuantity::ARL, -1, mopts);
    check("mc_arl_abs_err", std::abs(arl.mean - fred_arl),
          std::max(0.005 * fred_arl, 3.0 * arl.std_error));
    for (size_t i = 0; i < add_taus.size(); ++i) {
      const McEstimate add = estimate(spec, model, McQuantity::ADD_at, add_taus[i], mopts);
      check("mc_add_tau" + format_int(add_taus[i]) + "_abs_err", std::abs(add.mean - fred_add[i]),
            std::max(0.005 * fred_add[i], 3.0 * add.std_error));
    }
    for (size_t i = 0; i < rho_taus.size(); ++i) {
      const McEstimate srv = estimate(spec, model, McQuantity::SurvivalProb, rho_taus[i], mopts);
      check("mc_survival_tau" + format_int(rho_taus[i]) + "_abs_err",
            std::abs(srv.mean - fred_rho[i]), std::max(3.0 * srv.std_error, 1e-6));
    }

    // Grid-refinement diagnostic: phi_inf(0) at N and 2N intervals.
    double coarse = fred_arl;
    {
      const int fine_n = 2 * c.grid_n;
      const Grid fine = build_grid(0.0, cal.nu, fine_n);
      // A 20900^2 matrix is ~3.5 GB; above that fall back to the lazy path.
      const int threshold = fine_n + 1 <= 20900 ? fine_n + 1 : kDenseThresholdDefault;
      DiscreteOperator Minf2 =
          build_forward_operator(model, Measure::PreChange, fine, DriftMap::sr(), threshold);
      const Eigen::VectorXd phi2 = solve_phi(Minf2);
      const double refined = interp_linear(fine, phi2, 0.0);
      check("richardson_phi_inf_rel_diff", std::abs(refined - coarse) / std::abs(refined),
            x.richardson_tol);
    }
  } catch (const std::exception& e) {
    std::cerr << "validate: " << e.what() << "\n";
    return 1;
  }

  std::ostringstream extra;
  extra << "gamma=" << format_real(gamma) << ";replications=" << x.replications
        << ";richardson_tol=" << format_real(x.richardson_tol) << ';';
  return emit(c, table, canon_base("validate", c) + extra.str(), all_pass ? 0 : 1);
}

// ----------------------------------------------------------------------- mc

struct McExtras {
  std::string quantity = "arl";
  long tau = 0;
  long replications = 100000;
  double nu = std::nan("");
  double r = std::nan("");
};

int cmd_mc(const CommonConfig& c, const McExtras& x) {
  LikelihoodRatioModel model{};
  ChartKind chart{};
  InitStrategy strategy = InitStrategy::classical();
  McQuantity quantity{};
  try {
    model = make_model(c);
    chart = parse_chart(c.chart);
    if (c.strategies.size() > 1) throw std::invalid_argument("at most one --strategy");
    if (!c.strategies.empty()) strategy = InitStrategy::parse(c.strategies[0]);
    if (x.quantity == "arl")
      quantity = McQuantity::ARL;
    else if (x.quantity == "add")
      quantity = McQuantity::ADD_at;
    else if (x.quantity == "survival")
      quantity = McQuantity::SurvivalProb;
    else
      throw std::invalid_argument("--quantity must be arl, add, or survival");
    if (chart == ChartKind::EWMA) {
      if (!(c.nu1 > 0.0 && c.nu1 < 1.0 && c.nu2 > 1.0))
        throw std::invalid_argument("EWMA needs --nu1 in (0,1) and --nu2 > 1");
    } else if (std::isnan(x.nu) || !(x.nu > 0.0)) {
      throw std::invalid_argument("--nu must be positive");
    }
    using Kind = InitStrategy::Kind;
    if (strategy.kind != Kind::Classical && strategy.kind != Kind::FixedR &&
        strategy.kind != Kind::Srp)
      throw std::invalid_argument("mc needs a resolved strategy: fixed:R, classical, or srp");
    if (quantity != McQuantity::ARL && x.tau < 0)
      throw std::invalid_argument("--tau must be >= 0");
  } catch (const std::exception& e) {
    std::cerr << "mc: " << e.what() << "\n";
    return 2;
  }

  ReportTable table;
  table.columns = {"quantity", "tau", "mean", "std_error", "replications", "rejection_rate"};
  try {
    ProcedureSpec spec = [&] {
      switch (chart) {
        case ChartKind::SR:
          return strategy.kind == InitStrategy::Kind::Srp ? ProcedureSpec::srp(x.nu)
                                                          : ProcedureSpec::sr(x.nu, strategy);
        case ChartKind::SRP:
          return ProcedureSpec::srp(x.nu);
        case ChartKind::CUSUM:
          return ProcedureSpec::cusum(x.nu, std::isnan(x.r) ? 1.0 : x.r);
        default:
          return ProcedureSpec::ewma(c.nu1, c.nu2, c.alpha, std::isnan(x.r) ? 1.0 : x.r);
      }
    }();

    McOptions mopts;
    mopts.replications = x.replications;
    mopts.seed = c.seed;
    if (c.gammas.size() == 1) mopts.gamma_hint = c.gammas[0];

    Grid qsd_grid;
    Eigen::VectorXd qsd_q;
    if (spec.init.kind == InitStrategy::Kind::Srp) {
      qsd_grid = build_grid(0.0, x.nu, c.grid_n);
      DiscreteOperator Minf =
          build_forward_operator(model, Measure::PreChange, qsd_grid, DriftMap::sr());
      DiscreteOperator conj = conjugate_from_forward(Minf);
      qsd_q = leading_left_eigenpair(conj, trapezoid_weights(qsd_grid)).q;
      mopts.srp_q = &qsd_q;
      mopts.srp_grid = &qsd_grid;
    }

    const McEstimate est = estimate(spec, model, quantity, x.tau, mopts);
    table.add_row({x.quantity, est.tau < 0 ? "" : format_int(est.tau), format_real(est.mean),
                   format_real(est.std_error), format_int(est.replications),
                   format_real(est.rejection_rate)});
  } catch (const std::exception& e) {
    std::cerr << "mc: " << e.what() << "\n";
    return 1;
  }

  std::ostringstream extra;
  extra << "quantity=" << x.quantity << ";tau=" << x.tau << ";replications=" << x.replications
        << ";nu=" << format_real(x.nu) << ";r=" << format_real(x.r) << ';';
  return emit(c, table, canon_base("mc", c) + extra.str(), 0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"operating characteristics of quickest change-point detection charts"};
  app.require_subcommand(1);

  CommonConfig c_cal, c_curve, c_frontier, c_qsd, c_lfa, c_validate, c_mc;
  AddCurveExtras x_curve;
  LfaExtras x_lfa;
  ValidateExtras x_validate;
  McExtras x_mc;
  double qsd_nu = std::nan("");

  CLI::App* cal = app.add_subcommand("calibrate", "solve ARL(nu, r(nu)) = gamma per strategy");
  add_common(cal, c_cal);

  CLI::App* curve = app.add_subcommand("add-curve", "ADD as a function of the change point");
  add_common(curve, c_curve);
  curve->add_option("--nu", x_curve.nu, "calibrated threshold (inline input)");
  curve->add_option("--r", x_curve.r, "resolved head start (inline input)");
  curve->add_option("--calibration", x_curve.calibration_file,
                    "CSV produced by the calibrate command");

  CLI::App* frontier = app.add_subcommand("frontier", "worst-tau delay and lower bound vs gamma");
  add_common(frontier, c_frontier);

  CLI::App* qsd = app.add_subcommand("qsd", "quasi-stationary eigenpair at a threshold");
  add_common(qsd, c_qsd);
  qsd->add_option("--nu", qsd_nu, "threshold");

  CLI::App* lfa = app.add_subcommand("lfa", "local false-alarm probabilities over (k, m)");
  add_common(lfa, c_lfa);
  lfa->add_option("--nu", x_lfa.nu, "threshold");
  lfa->add_option("--r", x_lfa.r, "head start");
  lfa->add_option("--k-list", x_lfa.ks, "window starts")->delimiter(',');
  lfa->add_option("--m-list", x_lfa.ms, "window lengths")->delimiter(',');

  CLI::App* validate = app.add_subcommand("validate", "MC vs Fredholm suite + grid diagnostic");
  add_common(validate, c_validate);
  validate->add_option("--replications", x_validate.replications, "MC replications");
  validate->add_option("--richardson-tol", x_validate.richardson_tol,
                       "relative N vs 2N tolerance");

  CLI::App* mc = app.add_subcommand("mc", "Monte Carlo estimate of one quantity");
  add_common(mc, c_mc);
  mc->add_option("--quantity", x_mc.quantity, "arl, add, or survival");
  mc->add_option("--tau", x_mc.tau, "change point for add/survival");
  mc->add_option("--replications", x_mc.replications, "MC replications");
  mc->add_option("--nu", x_mc.nu, "threshold");
  mc->add_option("--r", x_mc.r, "head start (cusum/ewma default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto dispatch = [](CLI::App* sub, CommonConfig& c, auto&& body) {
    if (!c.config_path.empty()) {
      try {
        apply_config_file(sub, c.config_path);
      } catch (const std::exception& e) {
        std::cerr << "config: " << e.what() << "\n";
        return 2;
      }
    }
    return body();
  };

  if (cal->parsed()) return dispatch(cal, c_cal, [&] { return cmd_calibrate(c_cal); });
  if (curve->parsed())
    return dispatch(curve, c_curve, [&] { return cmd_add_curve(c_curve, x_curve); });
  if (frontier->parsed()) return dispatch(frontier, c_frontier, [&] { return cmd_frontier(c_frontier); });
  if (qsd->parsed()) return dispatch(qsd, c_qsd, [&] { return cmd_qsd(c_qsd, qsd_nu); });
  if (lfa->parsed()) return dispatch(lfa, c_lfa, [&] { return cmd_lfa(c_lfa, x_lfa); });
  if (validate->parsed())
    return dispatch(validate, c_validate, [&] { return cmd_validate(c_validate, x_validate); });
  if (mc->parsed()) return dispatch(mc, c_mc, [&] { return cmd_mc(c_mc, x_mc); });
  return 2;
}
