#pragma once

#include "quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace phasewitness {

/// Level function m(t) = ∫ Θ[Q - t] dμ and density-level μ(t) = -dm/dt on a t grid.
struct LevelCurve {
  std::vector<double> t;
  std::vector<double> m;
  std::vector<double> mu;
};

/// Logarithmically spaced thresholds in [t_max·ratio, t_max].
inline std::vector<double> log_t_grid(double t_max, int n = 400, double ratio = 1e-6) {
  if (n < 2) throw InvalidArgument("t grid needs at least two points");
  if (!(t_max > 0) || !(ratio > 0 && ratio < 1)) throw InvalidArgument("invalid t grid range");
  std::vector<double> t(n);
  const double l0 = std::log(t_max * ratio), l1 = std::log(t_max);
  for (int i = 0; i < n; ++i) t[i] = std::exp(l0 + (l1 - l0) * i / (n - 1));
  t.back() = t_max;
  return t;
}

/// Grid values of Q sorted for level queries. m(t) counts each cell by the
/// fraction of it above t, with ln Q linearized across the cell from central
/// differences; the value of a linear function over a rectangle follows a
/// trapezoidal law whose tail is evaluated in closed form.
class LevelTable {
 public:
  LevelTable(const Density2D& d, const QuadratureSpec& spec = {}) {
    spec.validate();
    const Box box = spec.box ? *spec.box : d.support;
    const DensityGrid grid(d, box, spec.base_resolution);
    cell_ = grid.cell_measure();
    logq_ = grid.log_values();
    std::sort(logq_.begin(), logq_.end());

    const int n = grid.resolution();
    const double hr = box.width() / n, hs = box.height() / n;
    cells_.reserve(static_cast<std::size_t>(n) * n);
    auto slope = [&](int i, int j, bool along_r) {
      const int lo = std::max(0, (along_r ? i : j) - 1), hi = std::min(n - 1, (along_r ? i : j) + 1);
      const double a = along_r ? grid.log_q(lo, j) : grid.log_q(i, lo);
      const double b = along_r ? grid.log_q(hi, j) : grid.log_q(i, hi);
      return (b - a) / ((hi - lo) * (along_r ? hr : hs));
    };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double l = grid.log_q(i, j);
        double ar = 0.5 * std::abs(slope(i, j, true)) * hr, as = 0.5 * std::abs(slope(i, j, false)) * hs;
        if (!std::isfinite(ar) || !std::isfinite(as) || ar + as > kMaxHalfWidth) ar = as = 0.0;
        Cell c{l, std::max(ar, as), std::min(ar, as)};
        cells_.push_back(c);
      }
    std::sort(cells_.begin(), cells_.end(), [](const Cell& x, const Cell& y) { return x.lower() < y.lower(); });
    lowers_.reserve(cells_.size());
    for (const auto& c : cells_) lowers_.push_back(c.lower());
  }

  /// m(t): measure of the region with Q ≥ t.
  double m(double t) const {
    if (!(t > 0)) return total_measure();
    const double l = std::log(t);
    const auto above = std::lower_bound(lowers_.begin(), lowers_.end(), l);
    const auto start = std::lower_bound(lowers_.begin(), above, l - 2 * kMaxHalfWidth);
    double part = 0.0;
    for (auto it = start; it != above; ++it) part += cells_[it - lowers_.begin()].fraction_above(l);
    return (static_cast<double>(lowers_.end() - above) + part) * cell_;
  }
  double q_min() const { return std::exp(logq_.front()); }
  double q_max() const { return std::exp(logq_.back()); }
  double total_measure() const { return static_cast<double>(logq_.size()) * cell_; }
  double cell_measure() const { return cell_; }
  /// Ascending log Q of all grid cells.
  const std::vector<double>& sorted_log_q() const { return logq_; }

 private:
  static constexpr double kMaxHalfWidth = 1.0;

  // ln Q = l + X + Y on the cell, X ~ U(-a, a), Y ~ U(-b, b), a ≥ b.
  struct Cell {
    double l, a, b;
    double lower() const { return l - a - b; }
    double fraction_above(double level) const {
      const double z = level - l;
      if (a + b == 0.0) return z <= 0 ? 1.0 : 0.0;
      if (z <= -(a + b)) return 1.0;
      if (z >= a + b) return 0.0;
      if (b <= 1e-12 * a) return 0.5 - z / (2 * a);
      if (z <= -(a - b)) return 1.0 - (z + a + b) * (z + a + b) / (8 * a * b);
      if (z < a - b) return 0.5 - z / (2 * a);
      return (a + b - z) * (a + b - z) / (8 * a * b);
    }
  };

  std::vector<double> logq_;
  std::vector<Cell> cells_;
  std::vector<double> lowers_;
  double cell_ = 0;
};

inline LevelCurve level_function(const Density2D& d, const std::vector<double>& t_grid, const QuadratureSpec& spec = {}) {
  if (t_grid.size() < 2) throw InvalidArgument("t grid needs at least two points");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw InvalidArgument("t grid must be strictly ascending");
  if (t_grid.front() < 0) throw InvalidArgument("t grid must be non-negative");
  const LevelTable table(d, spec);
  LevelCurve c;
  c.t = t_grid;
  c.m.resize(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) c.m[i] = table.m(t_grid[i]);
  const std::size_t n = t_grid.size();
  c.mu.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1, hi = i + 1 == n ? n - 1 : i + 1;
    c.mu[i] = -(c.m[hi] - c.m[lo]) / (t_grid[hi] - t_grid[lo]);
  }
  return c;
}

/// ∫ f(t) μ(t) dt assembled from the level-density histogram. Each interval of
/// t_grid is split into log sub-bins of width at most 0.01; per sub-bin the mass
/// and the first two moments of ln t give E[f] to second order. Levels below
/// the grid start down to the smallest Q on the box form an extra interval.
inline double functional_via_levels(const Density2D& d, const ConcaveFn& f, std::vector<double> t_grid,
                                    const QuadratureSpec& spec = {}) {
  if (t_grid.empty()) throw InvalidArgument("empty t grid");
  const LevelTable table(d, spec);
  const auto& lq = table.sorted_log_q();
  std::sort(t_grid.begin(), t_grid.end());
  std::vector<double> edges;  // log t edges
  for (double t : t_grid)
    if (t > 0) edges.push_back(std::log(t));
  if (edges.empty()) throw InvalidArgument("t grid has no positive level");
  if (lq.front() < edges.front()) edges.insert(edges.begin(), lq.front());
  if (lq.back() >= edges.back()) edges.push_back(std::nextafter(lq.back(), std::numeric_limits<double>::infinity()));
  std::vector<double> fine{edges.front()};
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double w = edges[k + 1] - edges[k];
    if (!(w > 0)) continue;
    const int parts = std::max(1, static_cast<int>(std::ceil(w / 0.01)));
    for (int p = 1; p <= parts; ++p) fine.push_back(p == parts ? edges[k + 1] : edges[k] + w * p / parts);
  }
  auto g = [&](double u) { return f.eval_log(u); };
  KahanSum acc;
  std::size_t i = std::lower_bound(lq.begin(), lq.end(), fine.front()) - lq.begin();
  for (std::size_t k = 0; k + 1 < fine.size() && i < lq.size(); ++k) {
    const double lo = fine[k], hi = fine[k + 1];
    double cnt = 0, su = 0, su2 = 0;
    const double c = 0.5 * (lo + hi);
    for (; i < lq.size() && lq[i] < hi; ++i) {
      const double du = lq[i] - c;
      cnt += 1;
      su += du;
      su2 += du * du;
    }
    if (cnt == 0) continue;
    const double mean = su / cnt, var = std::max(0.0, su2 / cnt - mean * mean);
    const double u = c + mean;
    double ef = g(u);
    if (var > 0) {
      const double h = std::max(1e-4, std::sqrt(var));
      ef += 0.5 * var * (g(u + h) - 2 * g(u) + g(u - h)) / (h * h);
    }
    acc.add(cnt * table.cell_measure() * ef);
  }
  return acc.value();
}

/// Default t grid for functional_via_levels: 400 log points from the smallest
/// Q on the box to its maximum.
inline std::vector<double> adaptive_t_grid(const Density2D& d, const QuadratureSpec& spec = {}, int n = 400) {
  const LevelTable table(d, spec);
  const double lo = std::max(table.q_min(), table.q_max() * 1e-300);
  return log_t_grid(table.q_max(), n, lo / table.q_max());
}

enum class Verdict { Yes, No, Undecided };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Yes: return "yes";
    case Verdict::No: return "no";
    case Verdict::Undecided: return "undecided";
  }
  return "?";
}

struct ProbeOutcome {
  std::string name;
  double param = 0;
  double lhs = 0, rhs = 0;  // ∫f(d1), ∫f(d2)
  double tolerance = 0;
};

struct MajorizationResult {
  Verdict verdict = Verdict::Undecided;
  std::vector<ProbeOutcome> probes;
};

/// Probe family of concave functions with f(0) = 0 on [0, domain_max].
inline std::vector<std::pair<ConcaveFn, double>> default_probe_family(double domain_max) {
  std::vector<std::pair<ConcaveFn, double>> fam;
  for (double b : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9})
    fam.emplace_back(make_concave(ConcaveKind::Monomial, domain_max, b), b);
  for (double b : {2.0, 3.0, 5.0, 8.0}) fam.emplace_back(neg_power(b, domain_max), b);
  fam.emplace_back(make_concave(ConcaveKind::NegTLogT, domain_max), 1.0);
  for (double c : {0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) fam.emplace_back(clipped_linear(c * domain_max, domain_max), c * domain_max);
  return fam;
}

/// Finite-family check of d1 ≺ d2, i.e. ∫f(d1) ≥ ∫f(d2) for every probe.
inline MajorizationResult majorizes(const Density2D& d1, const Density2D& d2,
                                    std::vector<std::pair<ConcaveFn, double>> family = {},
                                    const QuadratureSpec& spec = {}) {
  const double dmax = std::max(d1.peak_bound, d2.peak_bound);
  if (family.empty()) family = default_probe_family(dmax);
  MajorizationResult res;
  bool all_hold = true, any_fail = false;
  for (const auto& [f, param] : family) {
    QuadratureSpec s = spec;
    s.box.reset();
    const auto q1 = integrate_f_of_density(d1, f, s);
    const auto q2 = integrate_f_of_density(d2, f, s);
    ProbeOutcome o{f.name(), param, q1.value, q2.value, std::max(1e-9, 3.0 * (q1.error + q2.error))};
    const double diff = o.lhs - o.rhs;
    if (diff < -3 * o.tolerance) any_fail = true;
    if (diff < -o.tolerance) all_hold = false;
    res.probes.push_back(o);
  }
  res.verdict = any_fail ? Verdict::No : (all_hold ? Verdict::Yes : Verdict::Undecided);
  return res;
}

}  // namespace phasewitness
