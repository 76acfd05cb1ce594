#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lmmd/errors.hpp"

namespace lmmd {

/// Values of a d-dimensional function on the N+1 points t_n = t0 + n h.
/// Row-major storage, one row per time point.
template <typename Real = double>
class BasicGrid {
 public:
  BasicGrid() = default;

  BasicGrid(std::size_t points, std::size_t dim, double t0, double h)
      : values_(points * dim, Real(0)), dim_(dim), t0_(t0), h_(h) {
    if (dim == 0) throw domain_error("grid dimension must be positive");
    if (!(h > 0)) throw domain_error("grid spacing must be positive");
    if (points == 0) throw domain_error("grid needs at least one point");
  }

  std::size_t points() const { return dim_ ? values_.size() / dim_ : 0; }
  /// Index of the last point.
  int N() const { return static_cast<int>(points()) - 1; }
  std::size_t dim() const { return dim_; }
  double t0() const { return t0_; }
  double h() const { return h_; }
  double t(std::size_t n) const { return t0_ + static_cast<double>(n) * h_; }

  std::span<Real> row(std::size_t n) { return {values_.data() + n * dim_, dim_}; }
  std::span<const Real> row(std::size_t n) const { return {values_.data() + n * dim_, dim_}; }
  Real& operator()(std::size_t n, std::size_t i) { return values_[n * dim_ + i]; }
  const Real& operator()(std::size_t n, std::size_t i) const { return values_[n * dim_ + i]; }

  const std::vector<Real>& data() const { return values_; }

  /// Points [0, count) as a new grid.
  BasicGrid head(std::size_t count) const {
    if (count == 0 || count > points()) throw domain_error("slice length out of range");
    BasicGrid out(count, dim_, t0_, h_);
    std::copy(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(count * dim_),
              out.values_.begin());
    return out;
  }

  template <typename Other>
  BasicGrid<Other> cast() const {
    BasicGrid<Other> out(points(), dim_, t0_, h_);
    for (std::size_t n = 0; n < points(); ++n) {
      for (std::size_t i = 0; i < dim_; ++i) out(n, i) = static_cast<Other>((*this)(n, i));
    }
    return out;
  }

 private:
  std::vector<Real> values_;
  std::size_t dim_ = 0;
  double t0_ = 0.0;
  double h_ = 1.0;
};

using GridFunction = BasicGrid<double>;

/// CSV with header "t,x_1,...,x_d" and 17 significant digits.
inline void write_grid_csv(std::ostream& os, const GridFunction& g, const std::string& prefix = "x") {
  os << "t";
  for (std::size_t i = 1; i <= g.dim(); ++i) os << ',' << prefix << '_' << i;
  os << '\n';
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t n = 0; n < g.points(); ++n) {
    os << g.t(n);
    for (double v : g.row(n)) os << ',' << v;
    os << '\n';
  }
  os.precision(old);
}

/// Reads the format written by write_grid_csv. The mesh is taken from the
/// first two time stamps and every later stamp must match it.
inline GridFunction read_grid_csv(std::istream& is) {
  std::string line;
  while (std::getline(is, line) && !line.empty() && line.front() == '#') {
  }
  if (line.rfind("t,", 0) != 0) throw precondition_error("grid CSV must start with a 't,...' header");
  const std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));

  std::vector<double> ts;
  std::vector<double> vals;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (cols == 0) {
        ts.push_back(v);
      } else {
        vals.push_back(v);
      }
      ++cols;
    }
    if (cols != dim + 1) throw precondition_error("grid CSV row has " + std::to_string(cols) + " columns");
  }
  if (ts.size() < 2) throw precondition_error("grid CSV needs at least two rows");
  const double h = ts[1] - ts[0];
  GridFunction g(ts.size(), dim, ts[0], h);
  for (std::size_t n = 0; n < ts.size(); ++n) {
    if (std::abs(ts[n] - g.t(n)) > 1e-9 * std::max(1.0, std::abs(ts[n]))) {
      throw precondition_error("grid CSV time stamps are not equidistant at row " + std::to_string(n));
    }
    for (std::size_t i = 0; i < dim; ++i) g(n, i) = vals[n * dim + i];
  }
  return g;
}

}  // namespace lmmd
