#pragma once

#include "density.hpp"
#include "parallel.hpp"

#include <optional>
#include <vector>

namespace phasewitness {

struct QuadratureSpec {
  std::optional<Box> box;  // integration box; defaults to the f-aware density support
  int base_resolution = 512;
  int refinement = 3;
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;

  void validate() const {
    if (base_resolution < 32) throw InvalidArgument("quadrature resolution must be >= 32");
    if (refinement < 0) throw InvalidArgument("refinement count must be >= 0");
    if (!(abs_tol > 0) || !(rel_tol > 0)) throw InvalidArgument("quadrature tolerances must be positive");
    if (box && box->empty()) throw InvalidArgument("quadrature box is empty");
  }
  double tolerance(double value) const { return std::max(abs_tol, rel_tol * std::abs(value)); }
};

/// Integral value with an error estimate from the half-resolution rule.
struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
  int resolution = 0;
};

namespace detail {

// Midpoint tensor rule on n x n cells, multiplied by the cell area.
template <class G>
double midpoint_2d(const G& g, const Box& box, int n) {
  const double hr = box.width() / n, hs = box.height() / n;
  std::vector<double> rows(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const double r = box.r0 + (i + 0.5) * hr;
    KahanSum row;
    for (int j = 0; j < n; ++j) row.add(g(r, box.s0 + (j + 0.5) * hs));
    rows[i] = row.value();
  });
  KahanSum total;
  for (double v : rows) total.add(v);
  return total.value() * hr * hs;
}

template <class G>
double midpoint_1d(const G& g, double a, double b, int n) {
  const double h = (b - a) / n;
  KahanSum all;
  for (int i = 0; i < n; ++i) all.add(g(a + (i + 0.5) * h));
  return all.value() * h;
}

// Dyadic midpoint sequence with one Richardson step: the error of the rule at
// n is about (M_n - M_{n/2})/3 and that correction is added to the value.
template <class Rule>
QuadResult richardson_midpoint(const Rule& rule, const QuadratureSpec& spec, double scale) {
  QuadResult res;
  int n = spec.base_resolution;
  double coarse = rule(n / 2);
  for (int level = 0;; ++level) {
    const double fine = rule(n);
    const double delta = (fine - coarse) / 3.0;
    res.value = (fine + delta) * scale;
    res.error = std::abs(delta) * scale;
    res.resolution = n;
    res.converged = res.error <= spec.tolerance(res.value);
    if (res.converged || level >= spec.refinement) break;
    coarse = fine;
    n *= 2;
  }
  return res;
}

}  // namespace detail

/// ∫ g dμ over the box, dμ = dr ds/2π, with dyadic refinement until the
/// Richardson error estimate meets the tolerance.
template <class G>
QuadResult integrate_2d(const G& g, const Box& box, const QuadratureSpec& spec = {}) {
  spec.validate();
  if (box.empty()) throw InvalidArgument("integration box is empty");
  return detail::richardson_midpoint([&](int n) { return detail::midpoint_2d(g, box, n); }, spec, 1.0 / kTwoPi);
}

/// ∫_a^b g(x) dx (Lebesgue). Callers pick the base measure.
template <class G>
QuadResult integrate_1d(const G& g, double a, double b, const QuadratureSpec& spec = {}) {
  spec.validate();
  if (!(b > a)) throw InvalidArgument("integration interval is empty");
  return detail::richardson_midpoint([&](int n) { return detail::midpoint_1d(g, a, b, n); }, spec, 1.0);
}

/// Integration box adapted to f: the support, widened by 1/√β for monomials
/// with β < 1 whose integrand decays more slowly than Q.
inline Box f_aware_box(const Density2D& d, const ConcaveFn& f) {
  if (f.kind() == ConcaveKind::Monomial && f.beta() < 1.0) return d.support.scaled(1.0 / std::sqrt(f.beta()));
  return d.support;
}

inline Box f_aware_box(const Density2D& d, double beta) {
  return beta < 1.0 ? d.support.scaled(1.0 / std::sqrt(beta)) : d.support;
}

/// ∫ f(Q) dμ.
inline QuadResult integrate_f_of_density(const Density2D& d, const ConcaveFn& f, const QuadratureSpec& spec = {}) {
  const Box box = spec.box ? *spec.box : f_aware_box(d, f);
  return integrate_2d([&](double r, double s) { return f.eval_log(d.log_eval(r, s)); }, box, spec);
}

/// Cached log Q on a midpoint grid, reused across several functionals.
class DensityGrid {
 public:
  DensityGrid(const Density2D& d, const Box& box, int n) : box_(box), n_(n), logq_(static_cast<std::size_t>(n) * n) {
    if (n < 32 || n % 2 != 0) throw InvalidArgument("density grid resolution must be even and >= 32");
    if (box.empty()) throw InvalidArgument("density grid box is empty");
    hr_ = box.width() / n;
    hs_ = box.height() / n;
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      const double r = box.r0 + (i + 0.5) * hr_;
      for (int j = 0; j < n; ++j) logq_[i * n + j] = d.log_eval(r, box.s0 + (j + 0.5) * hs_);
    });
  }

  int resolution() const { return n_; }
  const Box& box() const { return box_; }
  double cell_measure() const { return hr_ * hs_ / kTwoPi; }
  double r_at(int i) const { return box_.r0 + (i + 0.5) * hr_; }
  double s_at(int j) const { return box_.s0 + (j + 0.5) * hs_; }
  double log_q(int i, int j) const { return logq_[static_cast<std::size_t>(i) * n_ + j]; }
  const std::vector<double>& log_values() const { return logq_; }

  /// ∫ g(log Q, r, s) dμ with the stride-2 error estimate.
  template <class G>
  QuadResult integrate(const G& g) const {
    std::vector<double> fine(n_), coarse(n_);
    parallel_for(static_cast<std::size_t>(n_), [&](std::size_t i) {
      KahanSum all, even;
      const double r = r_at(static_cast<int>(i));
      for (int j = 0; j < n_; ++j) {
        const double v = g(logq_[i * n_ + j], r, s_at(j));
        all.add(v);
        if (i % 2 == 0 && j % 2 == 0) even.add(v);
      }
      fine[i] = all.value();
      coarse[i] = even.value();
    });
    KahanSum f, c;
    for (int i = 0; i < n_; ++i) {
      f.add(fine[i]);
      c.add(coarse[i]);
    }
    QuadResult res;
    res.value = f.value() * cell_measure();
    res.error = std::abs(f.value() - 4.0 * c.value()) * cell_measure();
    res.resolution = n_;
    return res;
  }

  QuadResult integrate_f(const ConcaveFn& f) const {
    return integrate([&](double lq, double, double) { return f.eval_log(lq); });
  }

  /// log ∫ Q^β dμ, computed with a shifted exponent so that tiny values do not underflow.
  double log_power_integral(double beta) const {
    double mx = kNegInf;
    for (double v : logq_) mx = std::max(mx, v);
    const auto r = integrate([&](double lq, double, double) { return std::exp(beta * (lq - mx)); });
    return beta * mx + std::log(r.value);
  }

 private:
  Box box_;
  int n_;
  double hr_ = 0, hs_ = 0;
  std::vector<double> logq_;
};

}  // namespace phasewitness
