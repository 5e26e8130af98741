#pragma once

#include "witnesses.hpp"

#include <functional>
#include <optional>
#include <tuple>
#include <vector>

namespace phasewitness {

/// ξ minimizing det V for a Wigner covariance in the rotated (unsqueezed) frame:
/// ξ² = (σ_s/σ_r) √((a1²+a2²)/(b1²+b2²)).
inline double optimal_xi_detv(const Cov2& wigner, double a1 = 1, double b1 = 1, double a2 = 1, double b2 = 1) {
  if (!(wigner.vrr > 0) || !(wigner.vss > 0)) throw InvalidArgument("optimal_xi_detv requires positive variances");
  const double sr = std::sqrt(wigner.vrr), ss = std::sqrt(wigner.vss);
  return std::sqrt(ss / sr * std::sqrt((a1 * a1 + a2 * a2) / (b1 * b1 + b2 * b2)));
}

/// det V after squeezing with ξ: (ξ²σr² + α)(σs²/ξ² + b) - σrs².
inline double squeezed_detv(const Cov2& w, double xi, double a1 = 1, double b1 = 1, double a2 = 1, double b2 = 1) {
  const double al = (a1 * a1 + a2 * a2) / 2, be = (b1 * b1 + b2 * b2) / 2;
  const double x = xi * xi;
  return (x * w.vrr + al) * (w.vss / x + be) - w.vrs * w.vrs;
}

/// Closed-form minimal detV witness over ξ: (σrσs + √((a1²+a2²)(b1²+b2²))/2)² - σrs² - (a1b1+a2b2)².
inline double optimal_detv_witness(const Cov2& w, double a1 = 1, double b1 = 1, double a2 = 1, double b2 = 1) {
  const double root = std::sqrt((a1 * a1 + a2 * a2) * (b1 * b1 + b2 * b2)) / 2;
  const double s = std::sqrt(w.vrr * w.vss) + root;
  const double A = a1 * b1 + a2 * b2;
  return s * s - w.vrs * w.vrs - A * A;
}

/// Golden-section minimum of g on [a, b]; returns (argmin, min).
inline std::pair<double, double> golden_section(const std::function<double(double)>& g, double a, double b,
                                                double tol = 1e-10, int max_iter = 200) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = g(c), fd = g(d);
  for (int it = 0; it < max_iter && b - a > tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = g(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = g(d);
    }
  }
  return fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
}

/// Numeric ξ minimizing squeezed_detv by golden section on ln ξ ∈ [-3, 3].
inline double optimal_xi_detv_numeric(const Cov2& w, double a1 = 1, double b1 = 1, double a2 = 1, double b2 = 1) {
  const auto [u, v] = golden_section([&](double u) { return squeezed_detv(w, std::exp(u), a1, b1, a2, b2); }, -3, 3, 1e-12);
  (void)v;
  return std::exp(u);
}

// ---------------------------------------------------------------------------
// General witness optimization.

/// Builds the Husimi density of a state in a given frame.
using StateFactory = std::function<Density2D(const NonLocalFrame&)>;

struct SearchSpace {
  std::vector<double> betas;                      // order grid for Rényi/Tsallis/χ families; empty: id's own order
  std::vector<double> phis = {0.0};               // φ grid
  std::optional<std::pair<double, double>> log_xi;  // golden section on ln ξ; nullopt: frame ξ fixed
  int xi_grid = 13;                               // coarse ln ξ grid before golden refinement
  bool scalings = false;                          // coordinate descent over (a1, a2, b1), b2 = a1 b1 / a2
  std::vector<Branch> branches = {Branch::Plus, Branch::Minus};
};

struct Budget {
  int max_evaluations = 100000;
};

struct TraceEntry {
  Branch branch = Branch::Plus;
  double beta = 0, phi = 0, xi = 1;
  double a1 = 1, b1 = 1, a2 = 1, b2 = 1;
  double value = 0;
};

struct OptimizationResult {
  WitnessReport best;
  std::vector<TraceEntry> trace;
  bool budget_exhausted = false;
  int evaluations = 0;
};

namespace detail {
struct BudgetExhausted {};

inline bool better(const TraceEntry& a, const TraceEntry& b) {
  return std::tie(a.value, a.beta, a.xi, a.phi) < std::tie(b.value, b.beta, b.xi, b.phi);
}

inline bool has_order(WitnessKind k) {
  return k == WitnessKind::RenyiWehrl || k == WitnessKind::TsallisWehrl || k == WitnessKind::DetVChi;
}
}  // namespace detail

/// Minimum of a witness over the search space. Grid over branch, β and φ;
/// golden section on ln ξ after a coarse grid; coordinate descent over the scalings.
inline OptimizationResult optimize_witness(const StateFactory& state, const WitnessId& family, const SearchSpace& space,
                                           const NonLocalFrame& base = NonLocalFrame::unit(), const Budget& budget = {},
                                           const QuadratureSpec& spec = {}) {
  OptimizationResult res;
  std::optional<WitnessReport> best_report;
  std::optional<TraceEntry> best_entry;
  std::vector<double> betas = space.betas;
  if (betas.empty() || !detail::has_order(family.kind)) betas = {family.p1};

  auto eval = [&](const NonLocalFrame& f, double beta) -> double {
    if (res.evaluations >= budget.max_evaluations) throw detail::BudgetExhausted{};
    ++res.evaluations;
    WitnessId id = family;
    if (detail::has_order(family.kind)) id.p1 = beta;
    const WitnessReport r = evaluate_witness(state(f), id, f, spec);
    TraceEntry e{f.branch(), beta, f.phi(), f.xi(), f.a1(), f.b1(), f.a2(), f.b2(), r.value};
    res.trace.push_back(e);
    if (!best_entry || detail::better(e, *best_entry)) {
      best_entry = e;
      best_report = r;
    }
    return r.value;
  };

  auto optimize_xi = [&](const NonLocalFrame& f, double beta) -> NonLocalFrame {
    if (!space.log_xi) {
      eval(f, beta);
      return f;
    }
    const auto [lo, hi] = *space.log_xi;
    const int n = std::max(2, space.xi_grid);
    const double h = (hi - lo) / (n - 1);
    int bi = 0;
    double bv = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double v = eval(f.with_xi(std::exp(lo + h * i)), beta);
      if (v < bv) {
        bv = v;
        bi = i;
      }
    }
    const double a = lo + h * std::max(0, bi - 1), b = lo + h * std::min(n - 1, bi + 1);
    const auto [u, v] = golden_section([&](double uu) { return eval(f.with_xi(std::exp(uu)), beta); }, a, b, 1e-4);
    (void)v;
    return f.with_xi(std::exp(u));
  };

  try {
    for (Branch br : space.branches)
      for (double beta : betas)
        for (double phi : space.phis) {
          NonLocalFrame f = optimize_xi(base.with_branch(br).with_phi(phi), beta);
          if (!space.scalings) continue;
          // Coordinate descent on (ln a1, ln a2, ln b1) with b2 = a1 b1 / a2.
          for (int sweep = 0; sweep < 3; ++sweep)
            for (int coord = 0; coord < 3; ++coord) {
              auto at = [&](double u) {
                double a1 = f.a1(), a2 = f.a2(), b1 = f.b1();
                (coord == 0 ? a1 : coord == 1 ? a2 : b1) = std::exp(u);
                return f.with_scalings(a1, b1, a2, a1 * b1 / a2);
              };
              const double cur = std::log(coord == 0 ? f.a1() : coord == 1 ? f.a2() : f.b1());
              const auto [u, v] = golden_section([&](double uu) { return eval(at(uu), beta); }, cur - 1.5, cur + 1.5, 1e-4);
              (void)v;
              f = optimize_xi(at(u), beta);
            }
        }
  } catch (const detail::BudgetExhausted&) {
    res.budget_exhausted = true;
  }
  if (!best_report) throw InvalidArgument("optimization made no evaluation (budget or empty search space)");
  res.best = *best_report;
  return res;
}

}  // namespace phasewitness
