#pragma once

#include "core.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace phasewitness {

/// Axis-aligned rectangle [r0,r1]x[s0,s1].
struct Box {
  double r0 = 0, r1 = 0, s0 = 0, s1 = 0;

  double width() const { return r1 - r0; }
  double height() const { return s1 - s0; }
  double area() const { return width() * height(); }
  bool empty() const { return !(r1 > r0 && s1 > s0); }
  Eigen::Vector2d center() const { return {0.5 * (r0 + r1), 0.5 * (s0 + s1)}; }
  bool contains(double r, double s) const { return r >= r0 && r <= r1 && s >= s0 && s <= s1; }

  /// Half-widths multiplied by k about the centre.
  Box scaled(double k) const {
    const auto c = center();
    const double hw = 0.5 * width() * k, hh = 0.5 * height() * k;
    return {c.x() - hw, c.x() + hw, c.y() - hh, c.y() + hh};
  }
  Box padded(double dr, double ds) const { return {r0 - dr, r1 + dr, s0 - ds, s1 + ds}; }
  Box united(const Box& o) const {
    return {std::min(r0, o.r0), std::max(r1, o.r1), std::min(s0, o.s0), std::max(s1, o.s1)};
  }
  static Box around(const Eigen::Vector2d& c, double hr, double hs) {
    return {c.x() - hr, c.x() + hr, c.y() - hs, c.y() + hs};
  }
};

/// One bivariate normal component N(mean, cov) with mixture weight.
struct GaussComponent {
  double weight = 1.0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

/// Precomputed evaluation data for a Gaussian mixture density w.r.t. dμ:
/// Q(x) = 2π Σ w_c N(x; m_c, C_c).
class MixtureEvaluator {
 public:
  MixtureEvaluator() = default;
  explicit MixtureEvaluator(const std::vector<GaussComponent>& comps) {
    for (const auto& c : comps) {
      if (c.weight <= 0) continue;
      const double det = c.cov.determinant();
      if (!(det > 0) || !(c.cov(0, 0) > 0)) throw InvalidState("mixture component covariance not positive definite");
      Term t;
      t.log_pref = std::log(c.weight) - 0.5 * std::log(det);
      t.inv = c.cov.inverse();
      t.mean = c.mean;
      terms_.push_back(t);
    }
    if (terms_.empty()) throw InvalidState("mixture has no positive-weight component");
  }

  double log_eval(double r, double s) const {
    double best = kNegInf;
    double acc = 0.0;
    // Two-pass log-sum-exp without allocation.
    for (const auto& t : terms_) best = std::max(best, t.log_at(r, s));
    if (best == kNegInf) return kNegInf;
    for (const auto& t : terms_) acc += std::exp(t.log_at(r, s) - best);
    return best + std::log(acc);
  }

  std::size_t size() const { return terms_.size(); }

 private:
  struct Term {
    double log_pref = 0;
    Eigen::Matrix2d inv;
    Eigen::Vector2d mean;
    double log_at(double r, double s) const {
      const double dr = r - mean.x(), ds = s - mean.y();
      return log_pref - 0.5 * (inv(0, 0) * dr * dr + 2 * inv(0, 1) * dr * ds + inv(1, 1) * ds * ds);
    }
  };
  std::vector<Term> terms_;
};

/// Two-dimensional phase-space density normalized w.r.t. dμ = dr ds/2π.
/// Evaluation is through log Q so that tails and small powers stay finite.
struct Density2D {
  std::string name;
  NonLocalFrame frame;
  std::function<double(double, double)> log_fn;
  Box support;                // mass beyond is negligible (mean ± 8σ per axis)
  double peak_bound = 1.0;    // upper bound of Q
  bool husimi = true;         // false for Wigner-type (possibly signed) densities
  std::optional<Eigen::Vector2d> mean;       // closed-form first moment
  std::optional<Cov2> cov;                   // closed-form covariance
  std::vector<GaussComponent> mixture;       // Gaussian-mixture representation, if exact
  std::shared_ptr<const Density2D> wigner;   // associated Wigner density, if known

  double log_eval(double r, double s) const { return log_fn(r, s); }
  double eval(double r, double s) const { return std::exp(log_fn(r, s)); }
  double operator()(double r, double s) const { return eval(r, s); }

  bool is_gaussian() const { return mixture.size() == 1; }
  bool is_mixture() const { return !mixture.empty(); }
  bool separable_gaussian() const {
    return is_gaussian() && std::abs(mixture[0].cov(0, 1)) <= 1e-15 * std::sqrt(mixture[0].cov(0, 0) * mixture[0].cov(1, 1));
  }
  /// Determinant of the (single) Gaussian covariance.
  double gaussian_det() const {
    if (!is_gaussian()) throw InvalidArgument("density is not Gaussian");
    return mixture[0].cov.determinant();
  }
};

inline Box mixture_support(const std::vector<GaussComponent>& comps, double nsigma = 8.0) {
  std::optional<Box> box;
  for (const auto& c : comps) {
    if (c.weight <= 0) continue;
    const Box b = Box::around(c.mean, nsigma * std::sqrt(c.cov(0, 0)), nsigma * std::sqrt(c.cov(1, 1)));
    box = box ? box->united(b) : b;
  }
  if (!box) throw InvalidState("empty mixture");
  return *box;
}

inline std::pair<Eigen::Vector2d, Eigen::Matrix2d> mixture_moments(const std::vector<GaussComponent>& comps) {
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  double wsum = 0;
  for (const auto& c : comps) {
    m += c.weight * c.mean;
    second += c.weight * (c.cov + c.mean * c.mean.transpose());
    wsum += c.weight;
  }
  m /= wsum;
  second /= wsum;
  return {m, second - m * m.transpose()};
}

/// Density2D over a Gaussian mixture; peak bound from the largest component peak sum.
inline Density2D make_mixture_density(std::vector<GaussComponent> comps, NonLocalFrame frame, std::string name,
                                      bool husimi = true) {
  double wsum = 0;
  for (const auto& c : comps) wsum += c.weight;
  if (!(wsum > 0)) throw InvalidState("mixture weights must sum to a positive value");
  for (auto& c : comps) c.weight /= wsum;
  auto eval = std::make_shared<MixtureEvaluator>(comps);
  Density2D d;
  d.name = std::move(name);
  d.frame = std::move(frame);
  d.log_fn = [eval](double r, double s) { return eval->log_eval(r, s); };
  d.support = mixture_support(comps);
  double peak = 0;
  for (const auto& c : comps) peak += c.weight / std::sqrt(c.cov.determinant());
  d.peak_bound = peak;
  d.husimi = husimi;
  auto [m, cv] = mixture_moments(comps);
  d.mean = m;
  d.cov = Cov2::from(cv);
  d.mixture = std::move(comps);
  return d;
}

/// The density shifted by a phase-space displacement.
inline Density2D displace(const Density2D& d, const Eigen::Vector2d& shift) {
  if (shift.isZero(0.0)) return d;
  Density2D out = d;
  auto base = d.log_fn;
  const double dr = shift.x(), ds = shift.y();
  out.log_fn = [base, dr, ds](double r, double s) { return base(r - dr, s - ds); };
  out.support = {d.support.r0 + dr, d.support.r1 + dr, d.support.s0 + ds, d.support.s1 + ds};
  if (out.mean) *out.mean += shift;
  for (auto& c : out.mixture) c.mean += shift;
  if (d.wigner) out.wigner = std::make_shared<const Density2D>(displace(*d.wigner, shift));
  return out;
}

}  // namespace phasewitness
