#pragma once

// Characteristic polynomials, their roots, the graded root conditions and
// truncation-error constants of a scheme.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lmmd/errors.hpp"
#include "lmmd/rational.hpp"
#include "lmmd/schemes.hpp"

namespace lmmd {

/// Polynomial with exact coefficients, highest degree first.
class CharPoly {
 public:
  explicit CharPoly(std::vector<Rational> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty() || coeffs_.front() == 0) {
      throw precondition_error("characteristic polynomial needs a nonzero leading coefficient");
    }
  }

  const std::vector<Rational>& coeffs() const { return coeffs_; }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }

  Rational operator()(const Rational& z) const {
    Rational acc = 0;
    for (const auto& c : coeffs_) acc = acc * z + c;
    return acc;
  }

  /// z^deg p(1/z): the polynomial whose roots are the reciprocals.
  /// Requires a nonzero constant term so the degree is preserved.
  CharPoly reversed() const {
    if (coeffs_.back() == 0) throw precondition_error("cannot reverse a polynomial with a root at 0");
    return CharPoly({coeffs_.rbegin(), coeffs_.rend()});
  }

  friend bool operator==(const CharPoly&, const CharPoly&) = default;

 private:
  std::vector<Rational> coeffs_;
};

/// rho(z) = sum_m alpha_{M-m} z^m.
inline CharPoly first_char_poly(const Scheme& s) { return CharPoly(s.alpha()); }

/// sigma-hat(r) = sum_{m=m0}^{M0} beta_m r^{M0-m}.
inline CharPoly reduced_second_char_poly(const Scheme& s) { return CharPoly(s.reduced_beta()); }

struct Root {
  std::complex<double> value;
  int multiplicity = 1;
};

struct RootSet {
  std::vector<Root> roots;
  /// Largest backward error |p(r)| / sum_k |c_k| |r|^k over the returned
  /// roots, evaluated in extended precision.
  double residual_bound = 0.0;

  int total_multiplicity() const {
    int n = 0;
    for (const auto& r : roots) n += r.multiplicity;
    return n;
  }

  double max_modulus() const {
    double m = 0.0;
    for (const auto& r : roots) m = std::max(m, std::abs(r.value));
    return m;
  }
};

struct RootOptions {
  double cluster_tol = 1e-6;
  double step_tol = 1e-14;
  int max_iterations = 500;
};

namespace detail {

using Coeffs = poly::Coeffs;  // lowest degree first

inline void trim(Coeffs& p) {
  while (p.size() > 1 && p.back() == 0) p.pop_back();
}

inline bool is_zero(const Coeffs& p) { return p.size() == 1 && p[0] == 0; }

inline std::pair<Coeffs, Coeffs> divmod(Coeffs num, const Coeffs& den) {
  trim(num);
  const std::size_t dd = den.size() - 1;
  if (num.size() - 1 < dd) return {Coeffs{Rational(0)}, num};
  Coeffs q(num.size() - dd, Rational(0));
  for (std::size_t i = num.size(); i-- > dd;) {
    const Rational f = num[i] / den.back();
    q[i - dd] = f;
    for (std::size_t j = 0; j <= dd; ++j) num[i - dd + j] -= f * den[j];
  }
  num.resize(std::max<std::size_t>(dd, 1));
  trim(num);
  return {q, num};
}

inline Coeffs monic(Coeffs p) {
  trim(p);
  const Rational lead = p.back();
  for (auto& c : p) c /= lead;
  return p;
}

inline Coeffs gcd(Coeffs a, Coeffs b) {
  trim(a);
  trim(b);
  while (!is_zero(b)) {
    auto r = divmod(a, b).second;
    a = std::move(b);
    b = std::move(r);
  }
  return monic(a);
}

// Sufficient test for square-freeness: if p and p' are coprime modulo a prime
// that keeps the degree, they are coprime over Q. Cheap, and true for every
// catalogued polynomial, so the exact Euclid below rarely runs.
inline bool coprime_with_derivative_mod_prime(const Coeffs& p) {
  constexpr std::uint64_t q = 2147483647;  // 2^31 - 1
  Integer lcm = 1;
  for (const auto& c : p) lcm = boost::multiprecision::lcm(lcm, denominator(c));
  std::vector<std::uint64_t> a;
  for (const auto& c : p) {
    Integer v = (numerator(c) * (lcm / denominator(c))) % q;
    if (v < 0) v += q;
    a.push_back(v.convert_to<std::uint64_t>());
  }
  if (a.back() == 0) return false;
  auto pow_mod = [](std::uint64_t b, std::uint64_t e) {
    std::uint64_t r = 1;
    for (b %= q; e; e >>= 1, b = b * b % q) {
      if (e & 1) r = r * b % q;
    }
    return r;
  };
  auto trim_mod = [](std::vector<std::uint64_t>& v) {
    while (!v.empty() && v.back() == 0) v.pop_back();
  };
  std::vector<std::uint64_t> b;
  for (std::size_t i = 1; i < a.size(); ++i) b.push_back(a[i] * (i % q) % q);
  trim_mod(b);
  if (b.empty()) return false;
  while (!b.empty()) {
    // a <- a mod b
    const std::uint64_t inv = pow_mod(b.back(), q - 2);
    while (a.size() >= b.size()) {
      const std::uint64_t f = a.back() * inv % q;
      const std::size_t shift = a.size() - b.size();
      for (std::size_t j = 0; j < b.size(); ++j) a[shift + j] = (a[shift + j] + q - f * b[j] % q) % q;
      trim_mod(a);
      if (a.empty()) break;
    }
    std::swap(a, b);
  }
  return a.size() == 1;  // nonzero constant gcd
}

// Yun's square-free decomposition: p = c * prod_i f_i^i with each f_i
// square-free and pairwise coprime. Returns (f_i, i) for nonconstant f_i.
inline std::vector<std::pair<Coeffs, int>> square_free(const Coeffs& p) {
  std::vector<std::pair<Coeffs, int>> out;
  Coeffs a = monic(p);
  if (a.size() <= 1) return out;
  if (coprime_with_derivative_mod_prime(a)) {
    out.emplace_back(std::move(a), 1);
    return out;
  }
  Coeffs da = poly::derivative(a);
  Coeffs g = gcd(a, da);
  Coeffs b = divmod(a, g).first;
  Coeffs c = divmod(da, g).first;
  Coeffs d = c;
  {
    const Coeffs db = poly::derivative(b);
    for (std::size_t i = 0; i < d.size() || i < db.size(); ++i) {
      if (i >= d.size()) d.push_back(Rational(0));
      if (i < db.size()) d[i] -= db[i];
    }
    trim(d);
  }
  int i = 1;
  while (b.size() > 1) {
    Coeffs f = gcd(b, d);
    if (f.size() > 1) out.emplace_back(f, i);
    b = divmod(b, f).first;
    c = divmod(d, f).first;
    const Coeffs db = poly::derivative(b);
    d = c;
    for (std::size_t k = 0; k < d.size() || k < db.size(); ++k) {
      if (k >= d.size()) d.push_back(Rational(0));
      if (k < db.size()) d[k] -= db[k];
    }
    trim(d);
    ++i;
  }
  return out;
}

using cld = std::complex<long double>;

template <typename T>
std::complex<T> horner(const std::vector<T>& c_high_first, std::complex<T> z) {
  std::complex<T> acc = 0;
  for (const auto& c : c_high_first) acc = acc * z + c;
  return acc;
}

inline double backward_error(const std::vector<long double>& c, std::complex<double> r) {
  const cld z(r.real(), r.imag());
  const long double a = std::abs(z);
  long double scale = 0;
  for (const auto& ck : c) scale = scale * a + std::abs(ck);
  if (scale == 0) return 0.0;
  return static_cast<double>(std::abs(horner(c, z)) / scale);
}

// Simultaneous Aberth-Ehrlich iteration on a square-free polynomial.
inline std::optional<std::vector<std::complex<double>>> aberth(const std::vector<long double>& c,
                                                               const RootOptions& opt) {
  const int n = static_cast<int>(c.size()) - 1;
  std::vector<long double> dc;
  for (int k = 0; k < n; ++k) dc.push_back(c[k] * static_cast<long double>(n - k));

  // Fujiwara-style radius bound for the starting circle.
  long double radius = 0;
  for (int k = 1; k <= n; ++k) {
    radius = std::max(radius, std::pow(std::abs(c[k] / c[0]), 1.0L / k));
  }
  radius = std::max(radius, 1e-3L);
  std::vector<cld> z(n);
  for (int k = 0; k < n; ++k) {
    const long double angle = 2 * std::numbers::pi_v<long double> * k / n + 0.4L;
    z[k] = std::polar(radius, angle);
  }
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    long double max_step = 0;
    for (int i = 0; i < n; ++i) {
      const cld p = horner(c, z[i]);
      if (p == cld(0)) continue;
      const cld ratio = p / horner(dc, z[i]);
      cld sum = 0;
      for (int j = 0; j < n; ++j) {
        if (j != i) sum += 1.0L / (z[i] - z[j]);
      }
      const cld w = ratio / (1.0L - ratio * sum);
      z[i] -= w;
      max_step = std::max(max_step, std::abs(w) / std::max(1.0L, std::abs(z[i])));
    }
    if (!std::isfinite(static_cast<double>(max_step))) return std::nullopt;
    if (max_step < opt.step_tol) {
      std::vector<std::complex<double>> out;
      for (const auto& r : z) out.emplace_back(static_cast<double>(r.real()), static_cast<double>(r.imag()));
      return out;
    }
  }
  return std::nullopt;
}

inline std::optional<std::vector<std::complex<double>>> companion_eigenvalues(
    const std::vector<long double>& c) {
  const int n = static_cast<int>(c.size()) - 1;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) C(0, j) = static_cast<double>(-c[j + 1] / c[0]);
  for (int i = 1; i < n; ++i) C(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(C, false);
  if (es.info() != Eigen::Success) return std::nullopt;
  // Eigenvalues carry double-precision error amplified by the root
  // conditioning; a few Newton steps in long double recover the rest.
  std::vector<long double> dc;
  for (int k = 0; k < n; ++k) dc.push_back(c[k] * static_cast<long double>(n - k));
  std::vector<std::complex<double>> out;
  for (int i = 0; i < n; ++i) {
    cld z(es.eigenvalues()[i].real(), es.eigenvalues()[i].imag());
    long double last = std::numeric_limits<long double>::infinity();
    for (int it = 0; it < 20; ++it) {
      const cld d = horner(dc, z);
      if (d == cld(0)) break;
      const cld step = horner(c, z) / d;
      if (!(std::abs(step) < last)) break;  // stopped contracting
      last = std::abs(step);
      z -= step;
    }
    out.emplace_back(static_cast<double>(z.real()), static_cast<double>(z.imag()));
  }
  return out;
}

}  // namespace detail

/// All complex roots with multiplicities.
///
/// The polynomial is first split exactly into square-free factors, so every
/// multiplicity comes from rational arithmetic. Each factor is solved by
/// Aberth-Ehrlich with a companion-matrix eigenvalue fallback; roots closer
/// than cluster_tol are then merged. Throws convergence_error if both
/// solvers fail.
inline RootSet poly_roots(const CharPoly& p, const RootOptions& opt = {}) {
  RootSet out;
  if (p.degree() == 0) return out;

  const std::vector<long double> full = [&] {
    std::vector<long double> v;
    for (const auto& c : p.coeffs()) v.push_back(to_long_double(c));
    return v;
  }();

  detail::Coeffs low(p.coeffs().rbegin(), p.coeffs().rend());
  std::vector<Root> found;
  for (const auto& [factor, mult] : detail::square_free(low)) {
    std::vector<long double> c;
    for (auto it = factor.rbegin(); it != factor.rend(); ++it) c.push_back(to_long_double(*it));
    std::vector<std::complex<double>> roots;
    if (c.size() == 2) {
      roots.emplace_back(static_cast<double>(-c[1] / c[0]), 0.0);
    } else if (auto a = detail::aberth(c, opt)) {
      roots = std::move(*a);
    } else if (auto e = detail::companion_eigenvalues(c)) {
      roots = std::move(*e);
    } else {
      throw convergence_error("root finding failed for a degree-" + std::to_string(c.size() - 1) +
                              " factor");
    }
    for (const auto& r : roots) found.push_back({r, mult});
  }

  // Merge near-coincident roots, accumulating multiplicity.
  std::vector<bool> used(found.size(), false);
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (used[i]) continue;
    Root merged = found[i];
    std::complex<double> weighted = found[i].value * static_cast<double>(found[i].multiplicity);
    for (std::size_t j = i + 1; j < found.size(); ++j) {
      if (!used[j] && std::abs(found[j].value - found[i].value) < opt.cluster_tol) {
        used[j] = true;
        merged.multiplicity += found[j].multiplicity;
        weighted += found[j].value * static_cast<double>(found[j].multiplicity);
      }
    }
    merged.value = weighted / static_cast<double>(merged.multiplicity);
    out.roots.push_back(merged);
  }

  for (const auto& r : out.roots) {
    out.residual_bound = std::max(out.residual_bound, detail::backward_error(full, r.value));
  }
  std::sort(out.roots.begin(), out.roots.end(), [](const Root& a, const Root& b) {
    return std::abs(a.value) > std::abs(b.value);
  });
  return out;
}

inline RootSet poly_roots(const CharPoly& p, double cluster_tol) {
  RootOptions opt;
  opt.cluster_tol = cluster_tol;
  return poly_roots(p, opt);
}

// ---------------------------------------------------------------------------
// Stability classification

enum class StabilityTag { Stable, MarginallyStable, WeaklyStable, Unstable };

/// Data direction: initial dynamics given (solve forward) or terminal
/// dynamics given (solve backward).
enum class Direction { Forward, Terminal };

inline std::string_view to_string(Direction d) { return d == Direction::Forward ? "Forward" : "Terminal"; }

struct StabilityClass {
  StabilityTag tag = StabilityTag::Stable;
  /// For WeaklyStable: the k in "degree -k", with unit-root multiplicity k-1.
  int weak_degree = 0;
  /// Root that determined the class; empty when the polynomial is constant.
  std::optional<Root> witness;
  /// Modulus of the witness, exactly 1.0 when certified in rational arithmetic.
  double witness_modulus = 0.0;
  double max_root_modulus = 0.0;

  std::string label() const {
    switch (tag) {
      case StabilityTag::Stable: return "Stable";
      case StabilityTag::MarginallyStable: return "MarginallyStable";
      case StabilityTag::WeaklyStable: return "WeaklyStable(-" + std::to_string(weak_degree) + ")";
      case StabilityTag::Unstable: return "Unstable";
    }
    return "?";
  }
};

inline constexpr double kUnitTol = 1e-8;

namespace detail {

// Exact multiplicity of a rational root z (0 if p(z) != 0).
inline int exact_root_multiplicity(const CharPoly& p, const Rational& z) {
  Coeffs c(p.coeffs().rbegin(), p.coeffs().rend());
  int mult = 0;
  while (c.size() > 1 && poly::evaluate(c, z) == 0) {
    ++mult;
    c = poly::derivative(c);
  }
  return mult;
}

}  // namespace detail

/// Classify the roots of p against the unit circle.
///
/// Roots at +1 or -1 are certified by exact evaluation; every other root is
/// compared with tolerance unit_tol.
inline StabilityClass classify_roots(const CharPoly& p, double unit_tol = kUnitTol) {
  StabilityClass out;
  if (p.degree() == 0) return out;  // empty recurrence, vacuously stable

  const RootSet rs = poly_roots(p);
  const int mult_plus = detail::exact_root_multiplicity(p, Rational(1));
  const int mult_minus = detail::exact_root_multiplicity(p, Rational(-1));

  struct Classified {
    Root root;
    double modulus;
    bool exact_unit;
  };
  std::vector<Classified> roots;
  for (const auto& r : rs.roots) {
    Classified c{r, std::abs(r.value), false};
    for (const auto& [target, mult] : {std::pair{1.0, mult_plus}, std::pair{-1.0, mult_minus}}) {
      if (mult > 0 && std::abs(r.value - target) < 1e-6) {
        c.root = {std::complex<double>(target, 0.0), mult};
        c.modulus = 1.0;
        c.exact_unit = true;
      }
    }
    roots.push_back(c);
  }
  for (const auto& c : roots) out.max_root_modulus = std::max(out.max_root_modulus, c.modulus);

  const auto outside = [&](const Classified& c) { return !c.exact_unit && c.modulus > 1.0 + unit_tol; };
  const auto on_unit = [&](const Classified& c) {
    return c.exact_unit || (c.modulus >= 1.0 - unit_tol && c.modulus <= 1.0 + unit_tol);
  };

  const Classified* witness = nullptr;
  for (const auto& c : roots) {
    if (outside(c) && (!witness || c.modulus > witness->modulus)) witness = &c;
  }
  if (witness) {
    out.tag = StabilityTag::Unstable;
  } else {
    for (const auto& c : roots) {
      if (on_unit(c) && (!witness || c.root.multiplicity > witness->root.multiplicity)) witness = &c;
    }
    if (witness) {
      const int m = witness->root.multiplicity;
      out.tag = m == 1 ? StabilityTag::MarginallyStable : StabilityTag::WeaklyStable;
      if (m >= 2) out.weak_degree = m + 1;
    } else {
      out.tag = StabilityTag::Stable;
      witness = &roots.front();  // sorted by decreasing modulus
    }
  }
  out.witness = witness->root;
  out.witness_modulus = witness->modulus;
  return out;
}

/// Forward: roots of sigma-hat. Terminal: roots of its reversal (the
/// reciprocal roots), which governs solving the recurrence backward.
inline StabilityClass classify_stability(const Scheme& s, Direction direction) {
  const CharPoly sigma = reduced_second_char_poly(s);
  return classify_roots(direction == Direction::Forward ? sigma : sigma.reversed());
}

// ---------------------------------------------------------------------------
// Truncation error constants

struct ConsistencyReport {
  /// C_0, C_1, ... up to and including the first nonzero one.
  std::vector<Rational> constants;
  /// Truncation-error order p: C_0 = ... = C_p = 0 != C_{p+1}. -1 if C_0 != 0.
  int order = -1;
  /// Consistency degree for discovery; equals the order.
  int degree = -1;
  bool strongly_consistent = false;
  /// Set when C_0..C_{max_order+1} all vanish; order is then only a lower bound.
  bool exceeds_max_order = false;
};

/// C_m, m >= 0, of the truncation-error expansion
///   C_0 = sum alpha_k,
///   C_m = (-1)^m [ (1/m!) sum k^m alpha_k + (1/(m-1)!) sum k^{m-1} beta_k ].
inline Rational truncation_constant(const Scheme& s, int m) {
  const auto& a = s.alpha();
  const auto& b = s.beta();
  if (m == 0) {
    Rational sum = 0;
    for (const auto& v : a) sum += v;
    return sum;
  }
  Rational sa = 0;
  Rational sb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Rational kk(static_cast<long long>(k));
    sa += pow(kk, static_cast<unsigned>(m)) * a[k];
    sb += pow(kk, static_cast<unsigned>(m - 1)) * b[k];  // 0^0 = 1
  }
  Rational c = sa / factorial(static_cast<unsigned>(m)) + sb / factorial(static_cast<unsigned>(m - 1));
  return (m % 2 == 0) ? c : Rational(-c);
}

inline ConsistencyReport consistency_report(const Scheme& s, int max_order) {
  if (max_order < 1) throw domain_error("max_order must be at least 1");
  ConsistencyReport r;
  for (int m = 0; m <= max_order + 1; ++m) {
    r.constants.push_back(truncation_constant(s, m));
    if (r.constants.back() != 0) {
      r.order = m - 1;
      break;
    }
  }
  if (r.constants.back() == 0) {
    r.order = max_order + 1;
    r.exceeds_max_order = true;
  }
  r.degree = r.order;
  r.strongly_consistent = r.order >= 2;
  return r;
}

// ---------------------------------------------------------------------------
// Companion matrix of the beta recurrence

/// (M0-m0) x (M0-m0): first row -(beta_{m0+1}, ..., beta_{M0}) / beta_{m0},
/// identity on the subdiagonal. Empty when the recurrence is trivial.
inline Eigen::MatrixXd companion_matrix(const Scheme& s) {
  const auto b = s.reduced_beta();
  const int n = static_cast<int>(b.size()) - 1;
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) Z(0, j) = to_double(-b[j + 1] / b[0]);
  for (int i = 1; i < n; ++i) Z(i, i - 1) = 1.0;
  return Z;
}

struct PowerNormProfile {
  double max_norm = 0.0;
  double sum_norm = 0.0;
  /// ||Z^n||_inf for n = 1..n_max (truncated at overflow).
  std::vector<double> per_step;
  /// First n at which ||Z^n|| overflowed; max/sum are +inf from there on.
  std::optional<int> overflow_step;
};

inline PowerNormProfile power_norm_profile(const Scheme& s, int n_max) {
  if (n_max < 1) throw domain_error("n_max must be at least 1");
  PowerNormProfile out;
  const Eigen::MatrixXd Z = companion_matrix(s);
  if (Z.rows() == 0) {
    out.per_step.assign(static_cast<std::size_t>(n_max), 0.0);
    return out;
  }
  Eigen::MatrixXd P = Z;
  for (int n = 1; n <= n_max; ++n) {
    if (n > 1) P = (Z * P).eval();
    const double norm = P.cwiseAbs().rowwise().sum().maxCoeff();
    if (!std::isfinite(norm)) {
      out.overflow_step = n;
      out.max_norm = std::numeric_limits<double>::infinity();
      out.sum_norm = std::numeric_limits<double>::infinity();
      break;
    }
    out.per_step.push_back(norm);
    out.max_norm = std::max(out.max_norm, norm);
    out.sum_norm += norm;
  }
  return out;
}

}  // namespace lmmd
