#pragma once

// Dynamics discovery: given exact states x_0..x_N and a few starting
// dynamics values, solve
//
//   sum_{m=m0}^{M0} beta_m fhat_{n-m} = (1/h) sum_{m=0}^{M} alpha_m x_{n-m},  n = M..N
//
// for fhat on the learned index set I = {M-m0, ..., N-m0}. The starting
// values cover I_M = {M-M0, ..., M-m0-1}. In matrix form B fhat = A x / h - g,
// with B banded lower triangular and diagonal beta_{m0} != 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lmmd/errors.hpp"
#include "lmmd/grid.hpp"
#include "lmmd/reference.hpp"
#include "lmmd/schemes.hpp"

namespace lmmd {

/// Closed index range [first, last].
struct IndexRange {
  int first = 0;
  int last = -1;  // inclusive
  int size() const { return std::max(0, last - first + 1); }
  bool contains(int n) const { return n >= first && n <= last; }
};

/// I_M: indices whose dynamics must be supplied.
inline IndexRange initial_indices(const Scheme& s) {
  return {s.stencil() - s.M0(), s.stencil() - s.m0() - 1};
}

/// I: indices whose dynamics are learned, for a grid ending at N.
inline IndexRange learned_indices(const Scheme& s, int N) {
  return {s.stencil() - s.m0(), N - s.m0()};
}

struct DiscoveryProblem {
  Scheme scheme;
  GridFunction state;
  /// Starting dynamics keyed by grid index; must cover exactly I_M.
  std::map<int, std::vector<double>> initial_dynamics;

  void validate() const {
    const int M = scheme.stencil();
    if (state.N() < M) {
      throw precondition_error("state grid has N=" + std::to_string(state.N()) + " but the scheme needs N >= " +
                               std::to_string(M));
    }
    const IndexRange im = initial_indices(scheme);
    for (int n = im.first; n <= im.last; ++n) {
      const auto it = initial_dynamics.find(n);
      if (it == initial_dynamics.end()) {
        throw precondition_error("missing initial dynamics for index " + std::to_string(n));
      }
      if (it->second.size() != state.dim()) {
        throw precondition_error("initial dynamics at index " + std::to_string(n) + " has the wrong dimension");
      }
    }
    for (const auto& [n, v] : initial_dynamics) {
      if (!im.contains(n)) {
        throw precondition_error("initial dynamics supplied for index " + std::to_string(n) +
                                 " outside the starting index set");
      }
    }
  }
};

/// Starting dynamics taken from a full dynamics grid, each component shifted
/// by `perturbation`.
inline std::map<int, std::vector<double>> initial_dynamics_from(const Scheme& s, const GridFunction& f,
                                                               double perturbation = 0.0) {
  std::map<int, std::vector<double>> out;
  const IndexRange im = initial_indices(s);
  for (int n = im.first; n <= im.last; ++n) {
    auto row = f.row(static_cast<std::size_t>(n));
    std::vector<double> v(row.begin(), row.end());
    for (auto& c : v) c += perturbation;
    out.emplace(n, std::move(v));
  }
  return out;
}

template <typename Real = double>
struct BasicDiscoveryResult {
  /// Row k holds fhat at grid index learned.first + k.
  BasicGrid<Real> f_hat;
  IndexRange learned;
  /// ||B fhat - (A x / h - g)||_inf after the solve.
  Real residual_norm = 0;
};

using DiscoveryResult = BasicDiscoveryResult<double>;

namespace detail {

template <typename Real>
std::vector<Real> coeffs_as(const std::vector<Rational>& v) {
  std::vector<Real> out;
  for (const auto& r : v) out.push_back(r.convert_to<Real>());
  return out;
}

}  // namespace detail

/// A x / h - g, one row per equation n = M..N.
template <typename Real = double>
BasicGrid<Real> assemble_rhs(const DiscoveryProblem& p) {
  p.validate();
  const Scheme& s = p.scheme;
  const int M = s.stencil();
  const int N = p.state.N();
  const std::size_t d = p.state.dim();
  const auto alpha = detail::coeffs_as<Real>(s.alpha());
  const auto beta = detail::coeffs_as<Real>(s.beta());
  const IndexRange im = initial_indices(s);
  const Real h = static_cast<Real>(p.state.h());

  BasicGrid<Real> rhs(static_cast<std::size_t>(N - M + 1), d, p.state.t(static_cast<std::size_t>(M)), p.state.h());
  for (int n = M; n <= N; ++n) {
    for (std::size_t i = 0; i < d; ++i) {
      Real ax = 0;
      for (int m = 0; m <= M; ++m) ax += alpha[m] * static_cast<Real>(p.state(static_cast<std::size_t>(n - m), i));
      Real g = 0;
      // Known starting values that fall inside this equation's stencil.
      for (int j = std::max(im.first, n - s.M0()); j <= im.last; ++j) {
        g += beta[n - j] * static_cast<Real>(p.initial_dynamics.at(j)[i]);
      }
      rhs(static_cast<std::size_t>(n - M), i) = ax / h - g;
    }
  }
  return rhs;
}

/// Solve by forward substitution on the banded lower-triangular B, in
/// O(N (M0 - m0 + 1) d).
template <typename Real = double>
BasicDiscoveryResult<Real> solve_discovery(const DiscoveryProblem& p) {
  const BasicGrid<Real> rhs = assemble_rhs<Real>(p);
  const Scheme& s = p.scheme;
  const auto band = detail::coeffs_as<Real>(s.reduced_beta());
  const int width = static_cast<int>(band.size()) - 1;
  const std::size_t rows = rhs.points();
  const std::size_t d = rhs.dim();

  BasicDiscoveryResult<Real> out;
  out.learned = learned_indices(s, p.state.N());
  out.f_hat = BasicGrid<Real>(rows, d, p.state.t(static_cast<std::size_t>(out.learned.first)), p.state.h());
  for (std::size_t k = 0; k < rows; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      Real acc = rhs(k, i);
      for (int j = 1; j <= width && static_cast<std::size_t>(j) <= k; ++j) acc -= band[j] * out.f_hat(k - j, i);
      out.f_hat(k, i) = acc / band[0];
    }
  }

  Real res = 0;
  for (std::size_t k = 0; k < rows; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      Real bf = 0;
      for (int j = 0; j <= width && static_cast<std::size_t>(j) <= k; ++j) bf += band[j] * out.f_hat(k - j, i);
      using std::abs;
      res = std::max(res, abs(bf - rhs(k, i)));
    }
  }
  out.residual_norm = res;
  return out;
}

/// Rows of a full-grid function at the learned indices.
template <typename Real = double>
BasicGrid<Real> restrict_to(const GridFunction& full, IndexRange range) {
  if (range.first < 0 || range.last > full.N() || range.size() == 0) {
    throw precondition_error("index range does not fit the grid");
  }
  BasicGrid<Real> out(static_cast<std::size_t>(range.size()), full.dim(),
                      full.t(static_cast<std::size_t>(range.first)), full.h());
  for (int n = range.first; n <= range.last; ++n) {
    for (std::size_t i = 0; i < full.dim(); ++i) {
      out(static_cast<std::size_t>(n - range.first), i) = static_cast<Real>(full(static_cast<std::size_t>(n), i));
    }
  }
  return out;
}

template <typename Real = double>
struct ErrorNorms {
  Real linf = 0;
  Real l1 = 0;
  /// max-component error per learned index
  std::vector<Real> per_index;
};

/// Errors over the learned components only. Each index contributes the
/// max-norm of its d-vector; linf and l1 are taken over indices.
template <typename Real>
ErrorNorms<Real> error_vs_truth(const BasicGrid<Real>& f_hat, const BasicGrid<Real>& f_true) {
  if (f_hat.points() != f_true.points() || f_hat.dim() != f_true.dim()) {
    throw precondition_error("learned and true dynamics differ in shape");
  }
  ErrorNorms<Real> e;
  for (std::size_t n = 0; n < f_hat.points(); ++n) {
    Real v = 0;
    for (std::size_t i = 0; i < f_hat.dim(); ++i) {
      using std::abs;
      const Real diff = abs(f_hat(n, i) - f_true(n, i));
      // NaN from an overflowed solve must not be swallowed by max.
      v = (diff > v || diff != diff) ? diff : v;
    }
    e.per_index.push_back(v);
    e.linf = (v > e.linf || v != v) ? v : e.linf;
    e.l1 += v;
  }
  return e;
}

template <typename Real>
ErrorNorms<Real> error_vs_truth(const BasicDiscoveryResult<Real>& r, const GridFunction& f_full) {
  return error_vs_truth(r.f_hat, restrict_to<Real>(f_full, r.learned));
}

}  // namespace lmmd
