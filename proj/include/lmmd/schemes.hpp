#pragma once

// Exact coefficients for the Adams-Bashforth, Adams-Moulton and backward
// differentiation families of linear multistep methods
//
//   sum_m alpha_m x_{n-m} = h sum_m beta_m f(x_{n-m}),   m = 0..M.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lmmd/errors.hpp"
#include "lmmd/rational.hpp"

namespace lmmd {

inline constexpr int kMaxSteps = 20;

enum class Family { AB, AM, BDF };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::AB: return "AB";
    case Family::AM: return "AM";
    case Family::BDF: return "BDF";
  }
  return "?";
}

inline std::optional<Family> parse_family(std::string_view s) {
  if (s == "AB") return Family::AB;
  if (s == "AM") return Family::AM;
  if (s == "BDF") return Family::BDF;
  return std::nullopt;
}

/// Interpolation lattices relative to t_n: {-M..0} (includes t_n) and
/// {-M..-1} (excludes it).
enum class Lattice { WithCurrent, PreviousOnly };

/// An M-step scheme with exact coefficients. Immutable once built.
class Scheme {
 public:
  /// Validates the generic LMM structure only (alpha_0 != 0, some beta != 0,
  /// equal lengths). Family-specific structure is the generators' job.
  ///
  /// `steps` is the family's step number M. It equals the stencil width
  /// except for AM-0, whose backward-Euler stencil reaches back one step.
  static Scheme from_coefficients(Family family, int steps, std::vector<Rational> alpha,
                                  std::vector<Rational> beta) {
    if (alpha.size() < 2 || alpha.size() != beta.size()) {
      throw precondition_error("alpha and beta must have the same length of at least 2");
    }
    const int width = static_cast<int>(alpha.size()) - 1;
    if (steps != width && !(family == Family::AM && steps == 0 && width == 1)) {
      throw precondition_error("step count " + std::to_string(steps) +
                               " does not match coefficient count " + std::to_string(width + 1));
    }
    if (alpha.front() == 0) throw precondition_error("alpha_0 must be nonzero");
    const auto nz = [](const Rational& b) { return b != 0; };
    const auto first = std::find_if(beta.begin(), beta.end(), nz);
    if (first == beta.end()) throw precondition_error("beta must have a nonzero entry");
    const auto last = std::find_if(beta.rbegin(), beta.rend(), nz);
    Scheme s;
    s.family_ = family;
    s.steps_ = steps;
    s.m0_ = static_cast<int>(first - beta.begin());
    s.M0_ = static_cast<int>(beta.rend() - last) - 1;
    s.alpha_ = std::move(alpha);
    s.beta_ = std::move(beta);
    return s;
  }

  Family family() const { return family_; }
  /// Family step number M (0 for AM-0).
  int steps() const { return steps_; }
  /// Number of past states the stencil touches; equations start at n = stencil().
  int stencil() const { return static_cast<int>(alpha_.size()) - 1; }
  const std::vector<Rational>& alpha() const { return alpha_; }
  const std::vector<Rational>& beta() const { return beta_; }
  /// Smallest index with beta != 0.
  int m0() const { return m0_; }
  /// Largest index with beta != 0.
  int M0() const { return M0_; }

  /// Reduced beta support beta_{m0}..beta_{M0}.
  std::vector<Rational> reduced_beta() const {
    return {beta_.begin() + m0_, beta_.begin() + M0_ + 1};
  }

  /// Same scheme with (alpha, beta) multiplied by a nonzero constant.
  Scheme scaled(const Rational& c) const {
    if (c == 0) throw domain_error("scale factor must be nonzero");
    auto a = alpha_;
    auto b = beta_;
    for (auto& v : a) v *= c;
    for (auto& v : b) v *= c;
    return from_coefficients(family_, steps_, std::move(a), std::move(b));
  }

  std::string name() const { return std::string(to_string(family_)) + "-" + std::to_string(steps()); }

  friend bool operator==(const Scheme&, const Scheme&) = default;

 private:
  Scheme() = default;
  Family family_ = Family::AB;
  int steps_ = 0;
  std::vector<Rational> alpha_;
  std::vector<Rational> beta_;
  int m0_ = 0;
  int M0_ = 0;
};

namespace detail {

inline std::vector<int> lattice_nodes(Lattice lattice, int M) {
  std::vector<int> nodes;
  const int hi = lattice == Lattice::WithCurrent ? 0 : -1;
  for (int i = -M; i <= hi; ++i) nodes.push_back(i);
  return nodes;
}

// Scaled basis polynomial prod_{i != k} (u - 1 - i) / (k - i) in u, where
// u = (t - t_{n-1}) / h, so t_n sits at u = 1.
inline poly::Coeffs scaled_basis(int k, Lattice lattice, int M) {
  const auto nodes = lattice_nodes(lattice, M);
  if (std::find(nodes.begin(), nodes.end(), k) == nodes.end()) {
    throw domain_error("lattice index " + std::to_string(k) + " is not in the lattice for M=" +
                       std::to_string(M));
  }
  poly::Coeffs p{Rational(1)};
  Rational denom = 1;
  for (int i : nodes) {
    if (i == k) continue;
    p = poly::times_linear(p, Rational(1 + i));
    denom *= Rational(k - i);
  }
  for (auto& c : p) c /= denom;
  return p;
}

inline void check_steps(int M, int lo, std::string_view what) {
  if (M < lo || M > kMaxSteps) {
    throw domain_error(std::string(what) + " step count " + std::to_string(M) + " outside [" +
                       std::to_string(lo) + ", " + std::to_string(kMaxSteps) + "]");
  }
}

inline std::vector<Rational> adams_alpha(int M) {
  std::vector<Rational> alpha(static_cast<std::size_t>(M) + 1, Rational(0));
  alpha[0] = 1;
  if (M >= 1) alpha[1] = -1;
  return alpha;
}

}  // namespace detail

/// Exact integral over u in [0, 1] of the scaled Lagrange basis polynomial
/// for node k of the chosen lattice.
inline Rational lagrange_basis_integral(int k, Lattice lattice, int M) {
  if (M < 0 || (lattice == Lattice::PreviousOnly && M < 1)) {
    throw domain_error("invalid step count " + std::to_string(M) + " for lattice");
  }
  return poly::integrate_unit(detail::scaled_basis(k, lattice, M));
}

inline Scheme ab_scheme(int M) {
  detail::check_steps(M, 1, "AB");
  std::vector<Rational> beta(static_cast<std::size_t>(M) + 1, Rational(0));
  for (int m = 1; m <= M; ++m) beta[m] = lagrange_basis_integral(-m, Lattice::PreviousOnly, M);
  return Scheme::from_coefficients(Family::AB, M, detail::adams_alpha(M), std::move(beta));
}

/// AM-0 is backward Euler.
inline Scheme am_scheme(int M) {
  detail::check_steps(M, 0, "AM");
  // AM-0 integrates the constant through f_n but still differences
  // x_n - x_{n-1}, so its stencil has width 1 and beta is padded with a zero.
  const int width = std::max(M, 1);
  std::vector<Rational> beta(static_cast<std::size_t>(width) + 1, Rational(0));
  for (int m = 0; m <= M; ++m) beta[m] = lagrange_basis_integral(-m, Lattice::WithCurrent, M);
  return Scheme::from_coefficients(Family::AM, M, detail::adams_alpha(width), std::move(beta));
}

/// alpha_m is the u-derivative at t_n of the scaled basis polynomial for
/// node -m; normalized so beta = (1, 0, ..., 0).
inline Scheme bdf_scheme(int M) {
  detail::check_steps(M, 1, "BDF");
  std::vector<Rational> alpha(static_cast<std::size_t>(M) + 1);
  for (int m = 0; m <= M; ++m) {
    alpha[m] = poly::evaluate(poly::derivative(detail::scaled_basis(-m, Lattice::WithCurrent, M)),
                              Rational(1));
  }
  // h dl/dt = dl/du, so the raw weight on f_n is already 1.
  std::vector<Rational> beta(static_cast<std::size_t>(M) + 1, Rational(0));
  beta[0] = 1;
  return Scheme::from_coefficients(Family::BDF, M, std::move(alpha), std::move(beta));
}

inline Scheme make_scheme(Family family, int M) {
  switch (family) {
    case Family::AB: return ab_scheme(M);
    case Family::AM: return am_scheme(M);
    case Family::BDF: return bdf_scheme(M);
  }
  throw domain_error("unknown family");
}

/// Smallest admissible step count for a family.
inline int min_steps(Family family) { return family == Family::AM ? 0 : 1; }

/// Every generated scheme: AB 1..20, AM 0..20, BDF 1..20.
inline std::vector<Scheme> catalogue() {
  std::vector<Scheme> out;
  for (Family f : {Family::AB, Family::AM, Family::BDF}) {
    for (int M = min_steps(f); M <= kMaxSteps; ++M) out.push_back(make_scheme(f, M));
  }
  return out;
}

inline nlohmann::json to_json(const Scheme& s) {
  nlohmann::json j;
  j["family"] = std::string(to_string(s.family()));
  j["M"] = s.steps();
  auto strings = [](const std::vector<Rational>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : v) arr.push_back(to_string(r));
    return arr;
  };
  j["alpha"] = strings(s.alpha());
  j["beta"] = strings(s.beta());
  return j;
}

inline Scheme scheme_from_json(const nlohmann::json& j) {
  const auto family = parse_family(j.at("family").get<std::string>());
  if (!family) throw domain_error("unknown family '" + j.at("family").get<std::string>() + "'");
  auto rationals = [](const nlohmann::json& arr) {
    std::vector<Rational> v;
    for (const auto& e : arr) v.push_back(parse_rational(e.get<std::string>()));
    return v;
  };
  return Scheme::from_coefficients(*family, j.at("M").get<int>(), rationals(j.at("alpha")),
                                   rationals(j.at("beta")));
}

}  // namespace lmmd
