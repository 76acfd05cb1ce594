#pragma once

// Benchmark systems, reference trajectories and truncation-error evaluation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lmmd/errors.hpp"
#include "lmmd/grid.hpp"
#include "lmmd/schemes.hpp"

namespace lmmd {

/// Autonomous system dx/dt = f(x). f is evaluated in extended precision so
/// reference trajectories carry no visible integration roundoff.
struct DynamicalSystem {
  using Rhs = std::function<void(std::span<const long double> x, std::span<long double> dx)>;

  std::string name;
  std::size_t dimension = 0;
  Rhs f;
  std::vector<double> x0;

  std::vector<double> evaluate(std::span<const double> x) const {
    if (x.size() != dimension) throw precondition_error("state dimension mismatch for " + name);
    std::vector<long double> xl(x.begin(), x.end());
    std::vector<long double> dx(dimension);
    f(xl, dx);
    return {dx.begin(), dx.end()};
  }
};

/// Nonlinearly damped cubic oscillator:
///   x1' = -0.1 x1^3 + 2.0 x2^3,  x2' = -2.0 x1^3 - 0.1 x2^3,  x(0) = (2, 0).
inline DynamicalSystem cubic_2d() {
  return {"cubic_2d", 2,
          [](std::span<const long double> x, std::span<long double> dx) {
            const long double a = x[0] * x[0] * x[0];
            const long double b = x[1] * x[1] * x[1];
            dx[0] = -0.1L * a + 2.0L * b;
            dx[1] = -2.0L * a - 0.1L * b;
          },
          {2.0, 0.0}};
}

/// x' = x, x(0) = 1; solution e^t.
inline DynamicalSystem linear_scalar() {
  return {"linear_scalar", 1,
          [](std::span<const long double> x, std::span<long double> dx) { dx[0] = x[0]; },
          {1.0}};
}

/// x1' = -x2, x2' = x1, x(0) = (1, 0); solution (cos t, sin t).
inline DynamicalSystem rotation_2d() {
  return {"rotation_2d", 2,
          [](std::span<const long double> x, std::span<long double> dx) {
            dx[0] = -x[1];
            dx[1] = x[0];
          },
          {1.0, 0.0}};
}

inline std::vector<std::string_view> system_names() { return {"cubic_2d", "linear_scalar", "rotation_2d"}; }

inline std::optional<DynamicalSystem> system_by_name(std::string_view name) {
  if (name == "cubic_2d") return cubic_2d();
  if (name == "linear_scalar") return linear_scalar();
  if (name == "rotation_2d") return rotation_2d();
  return std::nullopt;
}

/// Number of mesh intervals in [t0, t1] for spacing h; throws unless the
/// ratio is integral to within 1e-9 relative.
inline int interval_count(double t0, double t1, double h) {
  if (!(h > 0)) throw domain_error("mesh size must be positive");
  if (!(t1 > t0)) throw domain_error("time interval must satisfy t1 > t0");
  const double ratio = (t1 - t0) / h;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    throw domain_error("(t1 - t0) / h = " + std::to_string(ratio) + " is not an integer");
  }
  return static_cast<int>(n);
}

inline constexpr double kReferenceRtol = 1e-10;

namespace detail {

inline BasicGrid<long double> rk4(const DynamicalSystem& sys, double t0, int intervals, double h_out,
                                  int refine) {
  const std::size_t d = sys.dimension;
  BasicGrid<long double> out(static_cast<std::size_t>(intervals) + 1, d, t0, h_out);
  std::vector<long double> x(sys.x0.begin(), sys.x0.end());
  std::vector<long double> k1(d), k2(d), k3(d), k4(d), tmp(d);
  const long double dt = static_cast<long double>(h_out) / refine;
  std::copy(x.begin(), x.end(), out.row(0).begin());
  for (int n = 1; n <= intervals; ++n) {
    for (int s = 0; s < refine; ++s) {
      sys.f(x, k1);
      for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5L * dt * k1[i];
      sys.f(tmp, k2);
      for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5L * dt * k2[i];
      sys.f(tmp, k3);
      for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + dt * k3[i];
      sys.f(tmp, k4);
      for (std::size_t i = 0; i < d; ++i) x[i] += dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
    std::copy(x.begin(), x.end(), out.row(static_cast<std::size_t>(n)).begin());
  }
  return out;
}

}  // namespace detail

/// Classical RK4 with internal step h_out/refine, sampled on the output grid.
/// The run is repeated with 2*refine; the two must agree to kReferenceRtol
/// (relative to the trajectory's max norm) or convergence_error is thrown.
inline GridFunction integrate_reference(const DynamicalSystem& sys, double t0, double t1, double h_out,
                                        int refine = 100) {
  if (refine < 1) throw domain_error("refine must be at least 1");
  if (sys.x0.size() != sys.dimension) throw precondition_error("x0 has the wrong dimension");
  const int intervals = interval_count(t0, t1, h_out);
  const auto coarse = detail::rk4(sys, t0, intervals, h_out, refine);
  const auto fine = detail::rk4(sys, t0, intervals, h_out, 2 * refine);
  long double diff = 0;
  long double scale = 1;
  for (std::size_t k = 0; k < fine.data().size(); ++k) {
    diff = std::max(diff, std::abs(fine.data()[k] - coarse.data()[k]));
    scale = std::max(scale, std::abs(fine.data()[k]));
  }
  if (!(diff <= kReferenceRtol * scale)) {
    throw convergence_error("reference integration not converged: refine levels " +
                            std::to_string(refine) + "/" + std::to_string(2 * refine) +
                            " differ by " + std::to_string(static_cast<double>(diff / scale)) +
                            " (relative)");
  }
  return fine.cast<double>();
}

/// f applied pointwise to a state grid.
inline GridFunction exact_dynamics_on_grid(const DynamicalSystem& sys, const GridFunction& x) {
  if (x.dim() != sys.dimension) throw precondition_error("grid dimension does not match " + sys.name);
  GridFunction out(x.points(), x.dim(), x.t0(), x.h());
  for (std::size_t n = 0; n < x.points(); ++n) {
    const auto v = sys.evaluate(x.row(n));
    std::copy(v.begin(), v.end(), out.row(n).begin());
  }
  return out;
}

/// (tau_h)_n = (1/h) sum_m alpha_m x_{n-m} - sum_m beta_m f_{n-m}, n = M..N.
/// Row k of the result holds n = stencil + k.
inline GridFunction truncation_on_grid(const Scheme& s, const GridFunction& x, const GridFunction& f) {
  if (x.points() != f.points() || x.dim() != f.dim()) {
    throw precondition_error("state and dynamics grids differ in shape");
  }
  const int M = s.stencil();
  const int N = x.N();
  if (N < M) throw precondition_error("grid has N=" + std::to_string(N) + " < stencil " + std::to_string(M));
  std::vector<double> alpha;
  std::vector<double> beta;
  for (const auto& a : s.alpha()) alpha.push_back(to_double(a));
  for (const auto& b : s.beta()) beta.push_back(to_double(b));

  GridFunction tau(static_cast<std::size_t>(N - M + 1), x.dim(), x.t(static_cast<std::size_t>(M)), x.h());
  for (int n = M; n <= N; ++n) {
    for (std::size_t i = 0; i < x.dim(); ++i) {
      double ax = 0.0;
      double bf = 0.0;
      for (int m = 0; m <= M; ++m) {
        ax += alpha[m] * x(static_cast<std::size_t>(n - m), i);
        bf += beta[m] * f(static_cast<std::size_t>(n - m), i);
      }
      tau(static_cast<std::size_t>(n - M), i) = ax / x.h() - bf;
    }
  }
  return tau;
}

}  // namespace lmmd
