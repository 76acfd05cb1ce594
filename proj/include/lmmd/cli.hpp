#pragma once

// The lmm-discover command line: analyze, discover, convergence, longtime.
// Lives in a header so the dispatcher can be driven from tests with
// in-memory streams.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lmmd/analysis.hpp"
#include "lmmd/discovery.hpp"
#include "lmmd/experiments.hpp"
#include "lmmd/reference.hpp"
#include "lmmd/schemes.hpp"

namespace lmmd::cli {

inline constexpr const char* kFormatTag = "lmm-discover v1";

enum class Subcommand { Analyze, Discover, Convergence, Longtime };

struct RunConfig {
  Subcommand subcommand = Subcommand::Analyze;
  Family family = Family::AB;
  int M_first = 1;
  int M_last = 1;
  std::vector<Direction> directions{Direction::Forward};
  std::string system = "cubic_2d";
  double t0 = 0.0;
  double t1 = 0.2;
  double h = 0.01;
  std::vector<double> h_list{0.02, 0.01, 0.005, 0.0025};
  std::vector<double> T_list{12.5, 25.0, 37.5};
  int refine = 100;
  double perturb_initial = 0.0;
  bool check = false;
  bool json = false;
  std::string output;  // empty: standard output

  std::vector<SchemeId> schemes() const {
    std::vector<SchemeId> out;
    for (int M = M_first; M <= M_last; ++M) out.push_back({family, M});
    return out;
  }
};

/// Thrown for invalid flag combinations; the message is shown to the user.
class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// --help was given; what() carries the formatted help text.
class help_requested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw usage_error(flag + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw usage_error(flag + " needs at least one value");
  return out;
}

// "7" or "7..10"
inline std::pair<int, int> parse_range(const std::string& text) {
  auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw usage_error("--M: '" + text + "' is not an integer or range a..b");
    }
  };
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    const int v = to_int(text);
    return {v, v};
  }
  return {to_int(text.substr(0, dots)), to_int(text.substr(dots + 2))};
}

inline void check_interval(double t0, double t1, double h, const std::string& what) {
  if (!(h > 0)) throw usage_error(what + " must be positive");
  if (!(t1 > t0)) throw usage_error("--t1 must be greater than --t0");
  const double ratio = (t1 - t0) / h;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "(t1 - t0) / h is not an integer: (" << t1 << " - " << t0 << ") / " << h << " = "
        << std::setprecision(12) << ratio;
    throw usage_error(msg.str());
  }
}

// Shortest text that reads back to the same value.
template <typename T>
std::string num(T v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

inline void header(std::ostream& os, const std::string& columns) {
  os << "# " << kFormatTag << '\n' << columns << '\n';
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand bodies. Each returns the process exit code.

inline int run_analyze(const RunConfig& cfg, std::ostream& out) {
  nlohmann::json report = nlohmann::json::array();
  if (!cfg.json) {
    detail::header(out, "family,M,direction,consistency_order,stability_class,max_root_modulus,witness_multiplicity");
  }
  for (const auto& id : cfg.schemes()) {
    const Scheme s = id.build();
    const auto cr = consistency_report(s, 40);
    for (Direction dir : cfg.directions) {
      const auto sc = classify_stability(s, dir);
      const int mult = sc.witness ? sc.witness->multiplicity : 0;
      if (cfg.json) {
        report.push_back({{"scheme", to_json(s)},
                          {"direction", std::string(to_string(dir))},
                          {"consistency_order", cr.order},
                          {"stability_class", sc.label()},
                          {"max_root_modulus", sc.max_root_modulus},
                          {"witness_multiplicity", mult}});
      } else {
        out << to_string(s.family()) << ',' << s.steps() << ',' << to_string(dir) << ',' << cr.order << ','
            << sc.label() << ',' << detail::num(sc.max_root_modulus) << ',' << mult << '\n';
      }
    }
  }
  if (cfg.json) out << nlohmann::json{{"format", kFormatTag}, {"analyze", report}}.dump(2) << '\n';
  return 0;
}

inline int run_discover(const RunConfig& cfg, std::ostream& out) {
  const DynamicalSystem sys = *system_by_name(cfg.system);
  const Scheme s = make_scheme(cfg.family, cfg.M_first);
  const GridFunction x = integrate_reference(sys, cfg.t0, cfg.t1, cfg.h, cfg.refine);
  const GridFunction f = exact_dynamics_on_grid(sys, x);
  if (x.N() < s.stencil()) {
    throw usage_error(s.name() + " needs at least " + std::to_string(s.stencil()) + " intervals, grid has " +
                      std::to_string(x.N()));
  }
  DiscoveryProblem p{s, x, initial_dynamics_from(s, f, cfg.perturb_initial)};
  const DiscoveryResult r = solve_discovery(p);
  const auto truth = restrict_to<double>(f, r.learned);
  const auto err = error_vs_truth(r.f_hat, truth);

  if (cfg.json) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < r.f_hat.points(); ++k) {
      const auto fh = r.f_hat.row(k);
      const auto ft = truth.row(k);
      rows.push_back({{"t", r.f_hat.t(k)},
                      {"f_hat", std::vector<double>(fh.begin(), fh.end())},
                      {"f_true", std::vector<double>(ft.begin(), ft.end())},
                      {"abs_err", err.per_index[k]}});
    }
    out << nlohmann::json{{"format", kFormatTag},
                          {"scheme", to_json(s)},
                          {"system", cfg.system},
                          {"h", cfg.h},
                          {"linf_error", err.linf},
                          {"l1_error", err.l1},
                          {"residual_norm", r.residual_norm},
                          {"rows", rows}}
               .dump(2)
        << '\n';
    return 0;
  }
  std::string cols = "t";
  for (std::size_t i = 1; i <= x.dim(); ++i) cols += ",f_hat_" + std::to_string(i);
  for (std::size_t i = 1; i <= x.dim(); ++i) cols += ",f_true_" + std::to_string(i);
  cols += ",abs_err";
  detail::header(out, cols);
  for (std::size_t k = 0; k < r.f_hat.points(); ++k) {
    out << detail::num(r.f_hat.t(k));
    for (double v : r.f_hat.row(k)) out << ',' << detail::num(v);
    for (double v : truth.row(k)) out << ',' << detail::num(v);
    out << ',' << detail::num(err.per_index[k]) << '\n';
  }
  return 0;
}

inline int report_violations(const std::vector<std::string>& violations, bool check, std::ostream& err) {
  if (!check) return 0;
  for (const auto& v : violations) err << "check failed: " << v << '\n';
  return violations.empty() ? 0 : 1;
}

inline int run_convergence_cmd(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  ConvergenceConfig cc;
  cc.schemes = cfg.schemes();
  cc.h_values = cfg.h_list;
  cc.t0 = cfg.t0;
  cc.t1 = cfg.t1;
  cc.system = cfg.system;
  cc.refine = cfg.refine;
  cc.perturb_initial = cfg.perturb_initial;
  const auto study = run_convergence(cc);

  auto fit_for = [&](const SchemeId& id) -> const SchemeConvergence& {
    for (const auto& sc : study.schemes) {
      if (sc.scheme == id) return sc;
    }
    throw std::logic_error("scheme missing from study");
  };
  if (cfg.json) {
    nlohmann::json schemes = nlohmann::json::array();
    for (const auto& sc : study.schemes) {
      nlohmann::json cells = nlohmann::json::array();
      for (const auto& c : study.cells) {
        if (c.scheme == sc.scheme) {
          cells.push_back({{"h", c.h}, {"linf_error", detail::num(c.linf_error)}, {"in_fit", c.in_fit}});
        }
      }
      schemes.push_back({{"family", std::string(to_string(sc.scheme.family))},
                         {"M", sc.scheme.M},
                         {"consistency_order", sc.consistency_order},
                         {"stability_class", sc.stability.label()},
                         {"estimated_order", sc.fit ? nlohmann::json(sc.fit->slope) : nlohmann::json()},
                         {"r_squared", sc.fit ? nlohmann::json(sc.fit->r_squared) : nlohmann::json()},
                         {"overflowed", sc.overflowed},
                         {"cells", cells}});
    }
    out << nlohmann::json{{"format", kFormatTag},
                          {"system", cfg.system},
                          {"t0", cfg.t0},
                          {"t1", cfg.t1},
                          {"convergence", schemes}}
               .dump(2)
        << '\n';
  } else {
    detail::header(out, "family,M,h_or_T,linf_error,estimated_order_or_growth");
    for (const auto& c : study.cells) {
      const auto& sc = fit_for(c.scheme);
      out << to_string(c.scheme.family) << ',' << c.scheme.M << ',' << detail::num(c.h) << ','
          << detail::num(c.linf_error) << ',' << (sc.fit ? detail::num(sc.fit->slope) : std::string("nan")) << '\n';
    }
  }
  return report_violations(check_convergence(study), cfg.check, err);
}

inline int run_longtime_cmd(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  LongTimeConfig lc;
  lc.schemes = cfg.schemes();
  lc.h = cfg.h;
  lc.T_values = cfg.T_list;
  lc.system = cfg.system;
  lc.refine = cfg.refine;
  lc.perturb_initial = cfg.perturb_initial;
  const auto study = run_longtime(lc);

  auto growth_for = [&](const SchemeId& id) -> const SchemeGrowth& {
    for (const auto& g : study.schemes) {
      if (g.scheme == id) return g;
    }
    throw std::logic_error("scheme missing from study");
  };
  if (cfg.json) {
    nlohmann::json schemes = nlohmann::json::array();
    for (const auto& g : study.schemes) {
      nlohmann::json cells = nlohmann::json::array();
      for (const auto& c : study.cells) {
        if (c.scheme == g.scheme) cells.push_back({{"T", c.T}, {"linf_error", detail::num(c.linf_error)}});
      }
      schemes.push_back({{"family", std::string(to_string(g.scheme.family))},
                         {"M", g.scheme.M},
                         {"growth", std::string(to_string(g.growth))},
                         {"log10_slope", detail::num(g.log10_slope)},
                         {"cells", cells}});
    }
    out << nlohmann::json{{"format", kFormatTag}, {"system", cfg.system}, {"h", cfg.h}, {"longtime", schemes}}
               .dump(2)
        << '\n';
  } else {
    detail::header(out, "family,M,h_or_T,linf_error,estimated_order_or_growth");
    for (const auto& c : study.cells) {
      out << to_string(c.scheme.family) << ',' << c.scheme.M << ',' << detail::num(c.T) << ','
          << detail::num(c.linf_error) << ',' << to_string(growth_for(c.scheme).growth) << '\n';
    }
  }
  return report_violations(check_longtime(study), cfg.check, err);
}

// ---------------------------------------------------------------------------

/// Parses argv into a validated RunConfig. Throws help_requested for --help,
/// usage_error or CLI::ParseError for bad input.
inline RunConfig parse(int argc, const char* const* argv) {
  CLI::App app{"Linear multistep methods for dynamics discovery", "lmm-discover"};
  // -h stays free: --h is the mesh size.
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);

  std::string family, M_text, direction = "Forward", system = "cubic_2d", h_list, T_list, output;
  double t0 = 0.0, t1 = 0.2, h = 0.01, perturb = 0.0;
  int refine = 100;
  bool check = false, json = false;

  auto common = [&](CLI::App* sub, bool need_M) {
    sub->add_option("--family", family, "AB, AM or BDF")->required();
    auto* m = sub->add_option("--M", M_text, "step count N or range a..b");
    if (need_M) m->required();
    sub->add_option("--output,-o", output, "output path (default: standard output)");
    sub->add_flag("--json", json, "structured JSON instead of CSV");
  };
  auto grid = [&](CLI::App* sub) {
    sub->add_option("--system", system, "benchmark system")->capture_default_str();
    sub->add_option("--t0", t0, "start time")->capture_default_str();
    sub->add_option("--t1", t1, "end time")->capture_default_str();
    sub->add_option("--refine", refine, "reference RK4 substeps per mesh interval")->capture_default_str();
    sub->add_option("--perturb-initial", perturb, "shift added to every supplied initial dynamics value");
  };

  auto* analyze = app.add_subcommand("analyze", "consistency order and stability class per scheme");
  common(analyze, false);
  analyze->add_option("--direction", direction, "Forward, Terminal or both")->capture_default_str();

  auto* discover = app.add_subcommand("discover", "recover the dynamics on one grid");
  common(discover, true);
  grid(discover);
  discover->add_option("--h", h, "mesh size")->required();

  auto* convergence = app.add_subcommand("convergence", "error against mesh size on a fixed domain");
  common(convergence, true);
  grid(convergence);
  convergence->add_option("--h-list", h_list, "comma-separated decreasing mesh sizes");
  convergence->add_flag("--check", check, "exit nonzero if slopes disagree with consistency orders");

  auto* longtime = app.add_subcommand("longtime", "error against horizon T at a fixed mesh");
  common(longtime, true);
  longtime->add_option("--system", system, "benchmark system")->capture_default_str();
  longtime->add_option("--refine", refine, "reference RK4 substeps per mesh interval")->capture_default_str();
  longtime->add_option("--perturb-initial", perturb, "shift added to every supplied initial dynamics value");
  longtime->add_option("--h", h, "mesh size")->capture_default_str();
  longtime->add_option("--T-list", T_list, "comma-separated increasing horizons");
  longtime->add_flag("--check", check, "exit nonzero if growth disagrees with stability class");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    for (const auto* sub : {analyze, discover, convergence, longtime}) {
      if (sub->parsed()) throw help_requested(sub->help());
    }
    throw help_requested(app.help());
  }

  RunConfig cfg;
  if (analyze->parsed()) cfg.subcommand = Subcommand::Analyze;
  if (discover->parsed()) cfg.subcommand = Subcommand::Discover;
  if (convergence->parsed()) cfg.subcommand = Subcommand::Convergence;
  if (longtime->parsed()) cfg.subcommand = Subcommand::Longtime;

  const auto fam = parse_family(family);
  if (!fam) throw usage_error("unknown family '" + family + "' (expected AB, AM or BDF)");
  cfg.family = *fam;
  if (M_text.empty()) {
    cfg.M_first = min_steps(cfg.family);
    cfg.M_last = kMaxSteps;
  } else {
    std::tie(cfg.M_first, cfg.M_last) = detail::parse_range(M_text);
  }
  const int lo = min_steps(cfg.family);
  if (cfg.M_first < lo || cfg.M_last > kMaxSteps || cfg.M_first > cfg.M_last) {
    throw usage_error("--M " + M_text + " out of range for " + family + " (allowed " + std::to_string(lo) + ".." +
                      std::to_string(kMaxSteps) + ")");
  }
  if (cfg.subcommand == Subcommand::Discover && cfg.M_first != cfg.M_last) {
    throw usage_error("discover takes a single --M, not a range");
  }

  if (direction == "Forward") {
    cfg.directions = {Direction::Forward};
  } else if (direction == "Terminal") {
    cfg.directions = {Direction::Terminal};
  } else if (direction == "both") {
    cfg.directions = {Direction::Forward, Direction::Terminal};
  } else {
    throw usage_error("unknown direction '" + direction + "' (expected Forward, Terminal or both)");
  }

  if (!system_by_name(system)) throw usage_error("unknown system '" + system + "'");
  if (refine < 1) throw usage_error("--refine must be at least 1");
  cfg.system = system;
  cfg.t0 = t0;
  cfg.t1 = t1;
  cfg.h = h;
  cfg.refine = refine;
  cfg.perturb_initial = perturb;
  cfg.check = check;
  cfg.json = json;
  cfg.output = output;
  if (!h_list.empty()) cfg.h_list = detail::parse_list(h_list, "--h-list");
  if (!T_list.empty()) cfg.T_list = detail::parse_list(T_list, "--T-list");

  switch (cfg.subcommand) {
    case Subcommand::Discover:
      detail::check_interval(cfg.t0, cfg.t1, cfg.h, "--h");
      break;
    case Subcommand::Convergence:
      if (cfg.h_list.size() < 2) throw usage_error("--h-list needs at least two values");
      for (std::size_t i = 0; i < cfg.h_list.size(); ++i) {
        detail::check_interval(cfg.t0, cfg.t1, cfg.h_list[i], "--h-list entries");
        if (i > 0 && !(cfg.h_list[i] < cfg.h_list[i - 1])) throw usage_error("--h-list must be strictly decreasing");
      }
      break;
    case Subcommand::Longtime:
      for (std::size_t i = 0; i < cfg.T_list.size(); ++i) {
        detail::check_interval(0.0, cfg.T_list[i], cfg.h, "--h");
        if (i > 0 && !(cfg.T_list[i] > cfg.T_list[i - 1])) throw usage_error("--T-list must be strictly increasing");
      }
      break;
    case Subcommand::Analyze:
      break;
  }
  return cfg;
}

inline int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  switch (cfg.subcommand) {
    case Subcommand::Analyze: return run_analyze(cfg, out);
    case Subcommand::Discover: return run_discover(cfg, out);
    case Subcommand::Convergence: return run_convergence_cmd(cfg, out, err);
    case Subcommand::Longtime: return run_longtime_cmd(cfg, out, err);
  }
  return 2;
}

/// Entry point: 0 on success, 1 when --check finds a violation, 2 on
/// invalid input or a failed computation.
inline int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                              std::ostream& err = std::cerr) {
  RunConfig cfg;
  try {
    cfg = parse(argc, argv);
  } catch (const help_requested& h) {
    out << h.what();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const usage_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (cfg.output.empty()) return dispatch(cfg, out, err);
    std::ostringstream buffer;
    const int code = dispatch(cfg, buffer, err);
    std::ofstream file(cfg.output, std::ios::binary);
    if (!file) {
      err << "error: cannot open output file '" << cfg.output << "'\n";
      return 2;
    }
    file << buffer.str();
    return code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace lmmd::cli
