#pragma once

// Mesh-refinement and long-time studies on top of the discovery solver.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lmmd/analysis.hpp"
#include "lmmd/discovery.hpp"
#include "lmmd/errors.hpp"
#include "lmmd/reference.hpp"
#include "lmmd/schemes.hpp"

namespace lmmd {

struct SchemeId {
  Family family = Family::AB;
  int M = 1;

  Scheme build() const { return make_scheme(family, M); }
  std::string name() const { return std::string(to_string(family)) + "-" + std::to_string(M); }
  friend bool operator==(const SchemeId&, const SchemeId&) = default;
};

/// Worker count: LMM_DISCOVER_THREADS if set and positive, else the
/// machine's hardware concurrency.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("LMM_DISCOVER_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(0..count-1) on up to `threads` workers. Each index writes only
/// its own output slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                         unsigned threads = default_thread_count()) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < count; i = next++) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct OrderFit {
  double slope = 0.0;
  double r_squared = 0.0;
};

/// Least-squares slope of log(error) against log(h). Points that are not
/// finite and positive are skipped; fewer than two usable points throws.
inline OrderFit estimate_order(const std::vector<double>& errors, const std::vector<double>& hs) {
  if (errors.size() != hs.size()) throw precondition_error("errors and h values differ in length");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (std::isfinite(errors[i]) && errors[i] > 0 && hs[i] > 0) {
      pts.emplace_back(std::log(hs[i]), std::log(errors[i]));
    }
  }
  if (pts.size() < 2) throw domain_error("order fit needs at least two finite positive points");
  const double n = static_cast<double>(pts.size());
  double sx = 0, sy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0) throw domain_error("order fit needs at least two distinct h values");
  OrderFit fit;
  fit.slope = sxy / sxx;
  fit.r_squared = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

// ---------------------------------------------------------------------------
// Fixed domain, varying mesh

struct ConvergenceConfig {
  std::vector<SchemeId> schemes;
  std::vector<double> h_values{0.02, 0.01, 0.005, 0.0025};
  double t0 = 0.0;
  double t1 = 0.2;
  std::string system = "cubic_2d";
  int refine = 100;
  double perturb_initial = 0.0;
  /// Errors below floor_rel * max|f| are treated as roundoff-limited and
  /// left out of the order fit.
  double floor_rel = 1e-12;
  unsigned threads = default_thread_count();

  void validate() const {
    if (schemes.empty()) throw precondition_error("convergence study needs at least one scheme");
    if (h_values.size() < 2) throw precondition_error("convergence study needs at least two h values");
    for (std::size_t i = 1; i < h_values.size(); ++i) {
      if (!(h_values[i] < h_values[i - 1])) throw precondition_error("h values must be strictly decreasing");
    }
    for (double h : h_values) {
      const double ratio = (t1 - t0) / h;
      if (std::abs(ratio - std::round(ratio)) > 1e-12 * std::max(1.0, ratio)) {
        throw domain_error("(t1 - t0) / h is not an integer for h = " + std::to_string(h));
      }
    }
    if (!system_by_name(system)) throw domain_error("unknown system '" + system + "'");
  }
};

struct ConvergenceCell {
  SchemeId scheme;
  double h = 0.0;
  /// +inf when the solve overflowed; NaN when the grid is too short for the stencil.
  double linf_error = 0.0;
  bool in_fit = false;
};

struct SchemeConvergence {
  SchemeId scheme;
  int consistency_order = 0;
  StabilityClass stability;
  std::optional<OrderFit> fit;
  /// Some cell overflowed.
  bool overflowed = false;
};

struct ConvergenceStudy {
  ConvergenceConfig config;
  std::vector<ConvergenceCell> cells;  // scheme-major, then h in config order
  std::vector<SchemeConvergence> schemes;

  std::vector<double> errors_for(const SchemeId& id) const {
    std::vector<double> out;
    for (const auto& c : cells) {
      if (c.scheme == id) out.push_back(c.linf_error);
    }
    return out;
  }
};

namespace detail {

struct ReferenceData {
  GridFunction state;
  GridFunction dynamics;
};

inline ReferenceData reference_data(const DynamicalSystem& sys, double t0, double t1, double h, int refine) {
  ReferenceData r;
  r.state = integrate_reference(sys, t0, t1, h, refine);
  r.dynamics = exact_dynamics_on_grid(sys, r.state);
  return r;
}

inline double max_abs(const GridFunction& g) {
  double m = 0.0;
  for (double v : g.data()) m = std::max(m, std::abs(v));
  return m;
}

template <typename Real>
Real discovery_linf(const Scheme& s, const ReferenceData& ref, double perturb) {
  DiscoveryProblem p{s, ref.state, initial_dynamics_from(s, ref.dynamics, perturb)};
  const auto result = solve_discovery<Real>(p);
  const Real e = error_vs_truth(result, ref.dynamics).linf;
  return (e != e) ? std::numeric_limits<Real>::infinity() : e;
}

}  // namespace detail

inline ConvergenceStudy run_convergence(const ConvergenceConfig& cfg) {
  cfg.validate();
  const DynamicalSystem sys = *system_by_name(cfg.system);

  std::vector<detail::ReferenceData> refs(cfg.h_values.size());
  parallel_for(
      refs.size(),
      [&](std::size_t k) { refs[k] = detail::reference_data(sys, cfg.t0, cfg.t1, cfg.h_values[k], cfg.refine); },
      cfg.threads);

  ConvergenceStudy study;
  study.config = cfg;
  std::vector<Scheme> schemes;
  for (const auto& id : cfg.schemes) {
    schemes.push_back(id.build());
    for (double h : cfg.h_values) study.cells.push_back({id, h, 0.0, false});
  }
  const std::size_t nh = cfg.h_values.size();
  parallel_for(
      study.cells.size(),
      [&](std::size_t c) {
        const Scheme& s = schemes[c / nh];
        const auto& ref = refs[c % nh];
        study.cells[c].linf_error = ref.state.N() < s.stencil()
                                        ? std::numeric_limits<double>::quiet_NaN()
                                        : detail::discovery_linf<double>(s, ref, cfg.perturb_initial);
      },
      cfg.threads);

  for (std::size_t si = 0; si < schemes.size(); ++si) {
    SchemeConvergence sc;
    sc.scheme = cfg.schemes[si];
    sc.consistency_order = consistency_report(schemes[si], 40).order;
    sc.stability = classify_stability(schemes[si], Direction::Forward);
    std::vector<double> errs, hs;
    for (std::size_t k = 0; k < nh; ++k) {
      auto& cell = study.cells[si * nh + k];
      if (std::isinf(cell.linf_error)) sc.overflowed = true;
      const double floor = cfg.floor_rel * std::max(1.0, detail::max_abs(refs[k].dynamics));
      cell.in_fit = std::isfinite(cell.linf_error) && cell.linf_error > floor;
      if (cell.in_fit) {
        errs.push_back(cell.linf_error);
        hs.push_back(cell.h);
      }
    }
    if (errs.size() >= 2) sc.fit = estimate_order(errs, hs);
    study.schemes.push_back(sc);
  }
  return study;
}

inline constexpr double kOrderTolerance = 0.35;

/// Concordance between measured slope and consistency order for every
/// Stable or MarginallyStable scheme. Returns one message per violation.
inline std::vector<std::string> check_convergence(const ConvergenceStudy& study,
                                                  double tolerance = kOrderTolerance) {
  std::vector<std::string> violations;
  for (const auto& sc : study.schemes) {
    if (sc.stability.tag == StabilityTag::Unstable) continue;
    if (!sc.fit) {
      violations.push_back(sc.scheme.name() + ": fewer than two usable error points");
      continue;
    }
    if (std::abs(sc.fit->slope - sc.consistency_order) > tolerance) {
      violations.push_back(sc.scheme.name() + ": slope " + std::to_string(sc.fit->slope) + " vs order " +
                           std::to_string(sc.consistency_order));
    }
  }
  return violations;
}

// ---------------------------------------------------------------------------
// Fixed mesh, growing horizon

enum class Growth { Constant, Exponential };

inline std::string_view to_string(Growth g) { return g == Growth::Constant ? "Constant" : "Exponential"; }

/// log10(error) slope per unit time above which growth counts as exponential.
inline constexpr double kExponentialSlope = 0.1;

struct LongTimeConfig {
  std::vector<SchemeId> schemes;
  double h = 0.01;
  std::vector<double> T_values{12.5, 25.0, 37.5};
  std::string system = "cubic_2d";
  /// Data is generated once over [0, max(T_values, data_horizon)] and sliced.
  double data_horizon = 0.0;
  int refine = 100;
  double perturb_initial = 0.0;
  unsigned threads = default_thread_count();

  void validate() const {
    if (schemes.empty()) throw precondition_error("long-time study needs at least one scheme");
    if (T_values.empty()) throw precondition_error("long-time study needs at least one T value");
    for (std::size_t i = 1; i < T_values.size(); ++i) {
      if (!(T_values[i] > T_values[i - 1])) throw precondition_error("T values must be strictly increasing");
    }
    for (double T : T_values) interval_count(0.0, T, h);
    if (!system_by_name(system)) throw domain_error("unknown system '" + system + "'");
  }
};

struct LongTimeCell {
  SchemeId scheme;
  double T = 0.0;
  /// Computed in extended precision so unstable growth stays representable.
  long double linf_error = 0.0L;
};

struct SchemeGrowth {
  SchemeId scheme;
  Growth growth = Growth::Constant;
  /// Least-squares slope of log10(error) against T; +inf after overflow.
  double log10_slope = 0.0;
};

struct LongTimeStudy {
  LongTimeConfig config;
  std::vector<LongTimeCell> cells;  // scheme-major, then T
  std::vector<SchemeGrowth> schemes;

  std::vector<long double> errors_for(const SchemeId& id) const {
    std::vector<long double> out;
    for (const auto& c : cells) {
      if (c.scheme == id) out.push_back(c.linf_error);
    }
    return out;
  }
};

inline Growth classify_growth(const std::vector<long double>& errors, const std::vector<double>& Ts,
                              double* slope_out = nullptr) {
  double slope = 0.0;
  bool overflow = false;
  for (auto e : errors) overflow = overflow || !std::isfinite(static_cast<double>(std::log10(e)));
  if (overflow) {
    slope = std::numeric_limits<double>::infinity();
  } else if (errors.size() >= 2) {
    const double n = static_cast<double>(errors.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
      mx += Ts[i] / n;
      my += static_cast<double>(std::log10(errors[i])) / n;
    }
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
      sxx += (Ts[i] - mx) * (Ts[i] - mx);
      sxy += (Ts[i] - mx) * (static_cast<double>(std::log10(errors[i])) - my);
    }
    slope = sxy / sxx;
  }
  if (slope_out) *slope_out = slope;
  return slope > kExponentialSlope ? Growth::Exponential : Growth::Constant;
}

inline LongTimeStudy run_longtime(const LongTimeConfig& cfg) {
  cfg.validate();
  const DynamicalSystem sys = *system_by_name(cfg.system);
  const double horizon = std::max(cfg.T_values.back(), cfg.data_horizon);
  const detail::ReferenceData full = detail::reference_data(sys, 0.0, horizon, cfg.h, cfg.refine);

  LongTimeStudy study;
  study.config = cfg;
  std::vector<Scheme> schemes;
  for (const auto& id : cfg.schemes) {
    schemes.push_back(id.build());
    for (double T : cfg.T_values) study.cells.push_back({id, T, 0.0L});
  }
  const std::size_t nT = cfg.T_values.size();
  parallel_for(
      study.cells.size(),
      [&](std::size_t c) {
        const Scheme& s = schemes[c / nT];
        const auto points = static_cast<std::size_t>(interval_count(0.0, cfg.T_values[c % nT], cfg.h)) + 1;
        const detail::ReferenceData slice{full.state.head(points), full.dynamics.head(points)};
        study.cells[c].linf_error = detail::discovery_linf<long double>(s, slice, cfg.perturb_initial);
      },
      cfg.threads);

  for (std::size_t si = 0; si < schemes.size(); ++si) {
    SchemeGrowth g;
    g.scheme = cfg.schemes[si];
    g.growth = classify_growth(study.errors_for(g.scheme), cfg.T_values, &g.log10_slope);
    study.schemes.push_back(g);
  }
  return study;
}

/// Stable and MarginallyStable schemes must show Constant growth, Unstable
/// ones Exponential.
inline std::vector<std::string> check_longtime(const LongTimeStudy& study) {
  std::vector<std::string> violations;
  for (const auto& g : study.schemes) {
    const bool unstable = classify_stability(g.scheme.build(), Direction::Forward).tag == StabilityTag::Unstable;
    const Growth expected = unstable ? Growth::Exponential : Growth::Constant;
    if (g.growth != expected) {
      violations.push_back(g.scheme.name() + ": growth " + std::string(to_string(g.growth)) + ", expected " +
                           std::string(to_string(expected)));
    }
  }
  return violations;
}

}  // namespace lmmd
