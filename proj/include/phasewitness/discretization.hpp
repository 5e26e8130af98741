#pragma once

#include "witnesses.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace phasewitness {

enum class TilingScheme { RegularRect, Quadtree, Radial };

inline std::string to_string(TilingScheme s) {
  switch (s) {
    case TilingScheme::RegularRect: return "regular";
    case TilingScheme::Quadtree: return "quadtree";
    case TilingScheme::Radial: return "radial";
  }
  return "?";
}

inline TilingScheme tiling_scheme_from_string(const std::string& s) {
  for (auto k : {TilingScheme::RegularRect, TilingScheme::Quadtree, TilingScheme::Radial})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown tiling scheme '" + s + "'");
}

/// One tile: a rectangle, or an annulus around a centre for radial tilings.
struct Tile {
  int j = 0, k = 0;
  Box box;                      // rectangle, or bounding box of the annulus
  double r_in = 0, r_out = 0;   // annulus radii (radial only)
  bool annulus = false;
  double measure = 0;           // Δ = area / 2π
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  Eigen::Vector2d spread = Eigen::Vector2d::Zero();  // per-axis second moment of the uniform tile about its centroid
};

namespace detail {
inline Tile rect_tile(int j, int k, const Box& b) {
  Tile t;
  t.j = j;
  t.k = k;
  t.box = b;
  t.measure = b.area() / kTwoPi;
  t.centroid = b.center();
  t.spread = {b.width() * b.width() / 12, b.height() * b.height() / 12};
  return t;
}

inline Tile ring_tile(int j, const Eigen::Vector2d& c, double ri, double ro) {
  Tile t;
  t.j = j;
  t.annulus = true;
  t.r_in = ri;
  t.r_out = ro;
  t.box = Box::around(c, ro, ro);
  t.measure = (ro * ro - ri * ri) / 2;
  t.centroid = c;
  t.spread = Eigen::Vector2d::Constant((ro * ro + ri * ri) / 4);
  return t;
}
}  // namespace detail

/// Partition of a truncation box into tiles.
class Tiling {
 public:
  /// Regular δr x δs lattice with boundaries at offset + jδ; the default offset
  /// -δ/2 centres tiles on the lattice points jδ.
  static Tiling regular(const Box& box, double dr, double ds, std::optional<double> offset_r = {},
                        std::optional<double> offset_s = {}) {
    if (box.empty()) throw InvalidArgument("tiling box is empty");
    if (!(dr > 0) || !(ds > 0)) throw InvalidArgument("tile widths must be positive");
    Tiling t;
    t.scheme_ = TilingScheme::RegularRect;
    t.dr_ = dr;
    t.ds_ = ds;
    t.or_ = offset_r.value_or(-dr / 2);
    t.os_ = offset_s.value_or(-ds / 2);
    t.j0_ = static_cast<int>(std::floor((box.r0 - t.or_) / dr + 1e-12));
    t.k0_ = static_cast<int>(std::floor((box.s0 - t.os_) / ds + 1e-12));
    t.nr_ = std::max(1, static_cast<int>(std::ceil((box.r1 - t.or_) / dr - 1e-12)) - t.j0_);
    t.ns_ = std::max(1, static_cast<int>(std::ceil((box.s1 - t.os_) / ds - 1e-12)) - t.k0_);
    if (static_cast<double>(t.nr_) * t.ns_ > 4e7) throw InvalidArgument("regular tiling has too many tiles");
    t.box_ = {t.or_ + t.j0_ * dr, t.or_ + (t.j0_ + t.nr_) * dr, t.os_ + t.k0_ * ds, t.os_ + (t.k0_ + t.ns_) * ds};
    return t;
  }

  /// Quadtree leaves; built by quadtree_tiling from a density.
  static Tiling quadtree(const Box& root, int max_depth, double mass_threshold, std::vector<Tile> leaves) {
    Tiling t;
    t.scheme_ = TilingScheme::Quadtree;
    t.box_ = root;
    t.max_depth_ = max_depth;
    t.threshold_ = mass_threshold;
    t.tiles_ = std::move(leaves);
    return t;
  }

  /// Disc plus annuli with the given ascending outer radii.
  static Tiling radial(const Eigen::Vector2d& center, std::vector<double> radii) {
    if (radii.empty()) throw InvalidArgument("radial tiling needs at least one radius");
    for (std::size_t i = 0; i < radii.size(); ++i)
      if (!(radii[i] > (i ? radii[i - 1] : 0.0))) throw InvalidArgument("radii must be positive and ascending");
    Tiling t;
    t.scheme_ = TilingScheme::Radial;
    t.center_ = center;
    t.radii_ = std::move(radii);
    t.box_ = Box::around(center, t.radii_.back(), t.radii_.back());
    for (std::size_t i = 0; i < t.radii_.size(); ++i)
      t.tiles_.push_back(detail::ring_tile(static_cast<int>(i), center, i ? t.radii_[i - 1] : 0.0, t.radii_[i]));
    return t;
  }

  TilingScheme scheme() const { return scheme_; }
  /// Union of all tiles (bounding box for radial tilings).
  const Box& box() const { return box_; }
  std::size_t size() const {
    return scheme_ == TilingScheme::RegularRect ? static_cast<std::size_t>(nr_) * ns_ : tiles_.size();
  }
  Tile tile(std::size_t i) const {
    if (scheme_ != TilingScheme::RegularRect) return tiles_.at(i);
    const int a = static_cast<int>(i / ns_), b = static_cast<int>(i % ns_);
    const int j = j0_ + a, k = k0_ + b;
    return detail::rect_tile(j, k, {or_ + j * dr_, or_ + (j + 1) * dr_, os_ + k * ds_, os_ + (k + 1) * ds_});
  }

  double dr() const { return dr_; }
  double ds() const { return ds_; }
  double offset_r() const { return or_; }
  double offset_s() const { return os_; }
  int j0() const { return j0_; }
  int k0() const { return k0_; }
  int nr() const { return nr_; }
  int ns() const { return ns_; }
  int max_depth() const { return max_depth_; }
  double mass_threshold() const { return threshold_; }
  const Eigen::Vector2d& center() const { return center_; }
  const std::vector<double>& radii() const { return radii_; }

  /// Rectangle of a tile with the sides on the tiling boundary pushed to infinity,
  /// so that mass beyond the truncation box lands in the nearest boundary tile.
  Box lumped_box(const Tile& t) const {
    Box b = t.box;
    const double inf = std::numeric_limits<double>::infinity();
    auto on = [](double x, double y) { return std::abs(x - y) <= 1e-12 * (1 + std::abs(y)); };
    if (on(b.r0, box_.r0)) b.r0 = -inf;
    if (on(b.r1, box_.r1)) b.r1 = inf;
    if (on(b.s0, box_.s0)) b.s0 = -inf;
    if (on(b.s1, box_.s1)) b.s1 = inf;
    return b;
  }

 private:
  TilingScheme scheme_ = TilingScheme::RegularRect;
  Box box_;
  double dr_ = 0, ds_ = 0, or_ = 0, os_ = 0;
  int j0_ = 0, k0_ = 0, nr_ = 0, ns_ = 0;
  int max_depth_ = 0;
  double threshold_ = 0;
  Eigen::Vector2d center_ = Eigen::Vector2d::Zero();
  std::vector<double> radii_;
  std::vector<Tile> tiles_;
};

/// ±8σ box of the density, widened by 1/√β for β < 1.
inline Box truncation_box(const Density2D& d, double beta = 1.0) { return f_aware_box(d, beta); }

/// Equal-width annuli around a centre, out to the farthest corner of the box.
inline Tiling radial_tiling(const Box& box, const Eigen::Vector2d& center, int rings) {
  if (rings < 1) throw InvalidArgument("radial tiling needs at least one ring");
  double rmax = 0;
  for (double r : {box.r0, box.r1})
    for (double s : {box.s0, box.s1}) rmax = std::max(rmax, std::hypot(r - center.x(), s - center.y()));
  std::vector<double> radii(rings);
  for (int i = 0; i < rings; ++i) radii[i] = rmax * (i + 1) / rings;
  return Tiling::radial(center, radii);
}

// ---------------------------------------------------------------------------
// Tile masses.

namespace detail {

/// ln Q(x) for the standard normal upper tail Q(x) = ½ erfc(x/√2).
inline double log_upper_tail(double x) {
  if (x == std::numeric_limits<double>::infinity()) return kNegInf;
  if (x < 20) return std::log(0.5 * std::erfc(x / std::sqrt(2.0)));
  const double x2 = x * x;
  return -0.5 * x2 - std::log(x * std::sqrt(kTwoPi)) + std::log1p(-1 / x2 + 3 / (x2 * x2) - 15 / (x2 * x2 * x2));
}

/// ln(Φ(b) - Φ(a)) for the standard normal CDF, stable in both tails.
inline double log_normal_mass(double a, double b) {
  if (!(b > a)) return kNegInf;
  if (a > 0) {
    const double la = log_upper_tail(a), lb = log_upper_tail(b);
    return la + std::log1p(-std::exp(lb - la));
  }
  if (b < 0) return log_normal_mass(-b, -a);
  const double qa = std::exp(log_upper_tail(-a)), qb = std::exp(log_upper_tail(b));
  return std::log1p(-(qa + qb));
}

inline bool diagonal_mixture(const Density2D& d) {
  if (!d.is_mixture()) return false;
  for (const auto& c : d.mixture)
    if (std::abs(c.cov(0, 1)) > 1e-15 * std::sqrt(c.cov(0, 0) * c.cov(1, 1))) return false;
  return true;
}

/// ln ∫_b Q dμ for a mixture of axis-aligned Gaussians (infinite sides allowed).
inline double diagonal_log_rect(const Density2D& d, const Box& b) {
  double acc = kNegInf;
  for (const auto& c : d.mixture) {
    const double sr = std::sqrt(c.cov(0, 0)), ss = std::sqrt(c.cov(1, 1));
    const double lr = log_normal_mass((b.r0 - c.mean.x()) / sr, (b.r1 - c.mean.x()) / sr);
    const double ls = log_normal_mass((b.s0 - c.mean.y()) / ss, (b.s1 - c.mean.y()) / ss);
    acc = log_sum_exp(acc, std::log(c.weight) + lr + ls);
  }
  return acc;
}

inline constexpr double kGLx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                   -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                   0.7966664774136267,  0.9602898564975363};
inline constexpr double kGLw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                   0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                   0.2223810344533745, 0.1012285362903763};

/// Streaming log-sum-exp accumulator.
struct LogAccumulator {
  double max = kNegInf, sum = 0;
  void add(double l) {
    if (l == kNegInf) return;
    if (l <= max) {
      sum += std::exp(l - max);
    } else {
      sum = sum * std::exp(max - l) + 1.0;
      max = l;
    }
  }
  double value() const { return max == kNegInf ? kNegInf : max + std::log(sum); }
};

/// ln ∫_b Q dμ by 8x8 Gauss-Legendre on subcells no wider than h.
inline double quadrature_log_rect(const Density2D& d, const Box& b, double h) {
  const int nr = std::max(1, static_cast<int>(std::ceil(b.width() / h)));
  const int ns = std::max(1, static_cast<int>(std::ceil(b.height() / h)));
  const double wr = b.width() / nr, ws = b.height() / ns;
  const double lcell = std::log(0.25 * wr * ws / kTwoPi);
  LogAccumulator acc;
  for (int a = 0; a < nr; ++a)
    for (int c = 0; c < ns; ++c) {
      const double rc = b.r0 + (a + 0.5) * wr, sc = b.s0 + (c + 0.5) * ws;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          acc.add(lcell + std::log(kGLw[i] * kGLw[j]) + d.log_eval(rc + 0.5 * wr * kGLx[i], sc + 0.5 * ws * kGLx[j]));
    }
  return acc.value();
}

/// ln ∫ Q dμ over the annulus ri ≤ |x - c| ≤ ro.
inline double quadrature_log_annulus(const Density2D& d, const Eigen::Vector2d& c, double ri, double ro, double h) {
  const int panels = std::max(1, static_cast<int>(std::ceil((ro - ri) / h)));
  const int na = std::max(64, 8 * static_cast<int>(std::ceil(kTwoPi * ro / h / 8)));
  const double wp = (ro - ri) / panels, da = kTwoPi / na;
  LogAccumulator acc;
  for (int p = 0; p < panels; ++p) {
    const double pc = ri + (p + 0.5) * wp;
    for (int i = 0; i < 8; ++i) {
      const double rho = pc + 0.5 * wp * kGLx[i];
      const double lw = std::log(0.5 * wp * kGLw[i] * rho * da / kTwoPi);
      for (int k = 0; k < na; ++k) {
        const double th = (k + 0.5) * da;
        acc.add(lw + d.log_eval(c.x() + rho * std::cos(th), c.y() + rho * std::sin(th)));
      }
    }
  }
  return acc.value();
}

/// Smallest length scale of the density, used for subcell widths.
inline double density_scale(const Density2D& d) {
  double sig = std::numeric_limits<double>::infinity();
  auto from_cov = [&](const Eigen::Matrix2d& m) {
    const double tr = m.trace(), det = m.determinant();
    const double lmin = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4 * det)));
    sig = std::min(sig, std::sqrt(std::max(lmin, 1e-12)));
  };
  if (d.is_mixture()) {
    for (const auto& c : d.mixture) from_cov(c.cov);
  } else {
    from_cov(moments(d).cov.matrix());
  }
  return sig;
}

}  // namespace detail

struct DiscretizationSpec {
  double subcell = 0.15;     // quadrature subcell width in units of the smallest density scale
  double mass_tol = 1e-9;    // allowed uncovered mass and normalization defect
};

/// Tile-mass distribution Q^jk on a tiling. Masses are kept as logarithms so
/// that far-tail tiles keep their relative accuracy.
class DiscretizedDensity {
 public:
  const Tiling& tiling() const { return tiling_; }
  std::size_t size() const { return tiling_.size(); }
  bool separable() const { return !lr_.empty(); }
  bool exact() const { return exact_; }
  /// Mass inside the tiling before tail lumping.
  double coverage() const { return coverage_; }

  double log_mass(std::size_t i) const {
    if (separable()) return lr_[i / tiling_.ns()] + ls_[i % tiling_.ns()];
    return lm_[i];
  }
  double mass(std::size_t i) const { return std::exp(log_mass(i)); }
  double measure(std::size_t i) const {
    if (tiling_.scheme() == TilingScheme::RegularRect) return tiling_.dr() * tiling_.ds() / kTwoPi;
    return tiling_.tile(i).measure;
  }
  /// Q^Δ = Q^jk / Δ_jk on tile i.
  double step_density(std::size_t i) const { return mass(i) / measure(i); }
  double total_mass() const {
    KahanSum s;
    for (std::size_t i = 0; i < size(); ++i) s.add(mass(i));
    return s.value();
  }
  /// Per-axis log masses of the separable representation.
  const std::vector<double>& log_mass_r() const { return lr_; }
  const std::vector<double>& log_mass_s() const { return ls_; }

  friend DiscretizedDensity discretize(const Density2D&, const Tiling&, const DiscretizationSpec&);

 private:
  Tiling tiling_;
  std::vector<double> lm_, lr_, ls_;
  double coverage_ = 1.0;
  bool exact_ = false;
};

namespace detail {

inline std::vector<double> axis_log_masses(double mean, double sd, double o, double delta, int first, int n,
                                           bool lump) {
  std::vector<double> out(n);
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double lo = o + (first + i) * delta, hi = lo + delta;
    if (lump && i == 0) lo = -inf;
    if (lump && i == n - 1) hi = inf;
    out[i] = log_normal_mass((lo - mean) / sd, (hi - mean) / sd);
  }
  return out;
}

inline double log_tile_mass(const Density2D& d, const Tiling& t, const Tile& tile, bool lump, double h,
                            const Box& outer) {
  const bool diag = diagonal_mixture(d);
  if (tile.annulus) {
    const bool last = tile.r_out >= t.radii().back() * (1 - 1e-12);
    double ro = tile.r_out;
    if (lump && last) {
      for (double r : {outer.r0, outer.r1})
        for (double s : {outer.s0, outer.s1}) ro = std::max(ro, std::hypot(r - tile.centroid.x(), s - tile.centroid.y()));
    }
    return quadrature_log_annulus(d, tile.centroid, tile.r_in, ro, h);
  }
  Box b = lump ? t.lumped_box(tile) : tile.box;
  if (diag) return diagonal_log_rect(d, b);
  b = {std::max(b.r0, outer.r0), std::min(b.r1, outer.r1), std::max(b.s0, outer.s0), std::min(b.s1, outer.s1)};
  if (b.empty()) return kNegInf;
  return quadrature_log_rect(d, b, h);
}

inline bool on_boundary(const Tiling& t, const Tile& tile) {
  if (tile.annulus) return tile.r_out >= t.radii().back() * (1 - 1e-12);
  const Box l = t.lumped_box(tile);
  return std::isinf(l.r0) || std::isinf(l.r1) || std::isinf(l.s0) || std::isinf(l.s1);
}

}  // namespace detail

/// Tile masses Q^jk = ∫_tile Q dμ with out-of-box mass lumped into the boundary tiles.
inline DiscretizedDensity discretize(const Density2D& d, const Tiling& tiling, const DiscretizationSpec& spec = {}) {
  DiscretizedDensity dd;
  dd.tiling_ = tiling;
  const std::size_t n = tiling.size();
  if (n == 0) throw InvalidArgument("tiling has no tiles");
  if (tiling.scheme() == TilingScheme::RegularRect && d.is_gaussian() && detail::diagonal_mixture(d)) {
    const auto& c = d.mixture[0];
    const double sr = std::sqrt(c.cov(0, 0)), ss = std::sqrt(c.cov(1, 1));
    dd.lr_ = detail::axis_log_masses(c.mean.x(), sr, tiling.offset_r(), tiling.dr(), tiling.j0(), tiling.nr(), true);
    dd.ls_ = detail::axis_log_masses(c.mean.y(), ss, tiling.offset_s(), tiling.ds(), tiling.k0(), tiling.ns(), true);
    const Box& b = tiling.box();
    dd.coverage_ = std::exp(detail::log_normal_mass((b.r0 - c.mean.x()) / sr, (b.r1 - c.mean.x()) / sr) +
                            detail::log_normal_mass((b.s0 - c.mean.y()) / ss, (b.s1 - c.mean.y()) / ss));
    dd.exact_ = true;
  } else {
    const double h = spec.subcell * detail::density_scale(d);
    const Box outer = tiling.box().united(d.support.scaled(3.0));
    dd.lm_.assign(n, kNegInf);
    std::vector<double> inside(n, kNegInf);
    parallel_for(n, [&](std::size_t i) {
      const Tile tile = tiling.tile(i);
      dd.lm_[i] = detail::log_tile_mass(d, tiling, tile, true, h, outer);
      inside[i] = detail::on_boundary(tiling, tile) ? detail::log_tile_mass(d, tiling, tile, false, h, outer) : dd.lm_[i];
    });
    KahanSum cov;
    for (double l : inside) cov.add(std::exp(l));
    dd.coverage_ = cov.value();
    dd.exact_ = detail::diagonal_mixture(d) && tiling.scheme() != TilingScheme::Radial;
  }
  if (1.0 - dd.coverage_ > spec.mass_tol)
    throw InvalidArgument("tiling covers only " + format_param(dd.coverage_) + " of the mass");
  const double total = dd.total_mass();
  if (std::abs(total - 1.0) > spec.mass_tol) throw NumericError("tile masses sum to " + format_param(total), total - 1);
  return dd;
}

/// Quadtree over the root box: split any tile whose mass exceeds the threshold
/// until max_depth.
inline Tiling quadtree_tiling(const Density2D& d, const Box& root, int max_depth = 8, double mass_threshold = 0.05,
                              const DiscretizationSpec& spec = {}) {
  if (root.empty()) throw InvalidArgument("quadtree root box is empty");
  if (max_depth < 0) throw InvalidArgument("quadtree depth must be >= 0");
  if (!(mass_threshold > 0)) throw InvalidArgument("quadtree mass threshold must be positive");
  const double h = spec.subcell * detail::density_scale(d);
  const bool diag = detail::diagonal_mixture(d);
  std::vector<Tile> leaves;
  std::function<void(const Box&, int, int)> grow = [&](const Box& b, int depth, int index) {
    const double m = std::exp(diag ? detail::diagonal_log_rect(d, b) : detail::quadrature_log_rect(d, b, h));
    if (m > mass_threshold && depth < max_depth) {
      const auto c = b.center();
      grow({b.r0, c.x(), b.s0, c.y()}, depth + 1, 4 * index);
      grow({c.x(), b.r1, b.s0, c.y()}, depth + 1, 4 * index + 1);
      grow({b.r0, c.x(), c.y(), b.s1}, depth + 1, 4 * index + 2);
      grow({c.x(), b.r1, c.y(), b.s1}, depth + 1, 4 * index + 3);
      return;
    }
    leaves.push_back(detail::rect_tile(depth, index, b));
  };
  grow(root, 0, 0);
  return Tiling::quadtree(root, max_depth, mass_threshold, std::move(leaves));
}

/// Nested refinement: regular δ → δ/2 with the same offset, every quadtree leaf
/// into four children, every annulus split at its mid radius.
inline Tiling refine(const Tiling& t) {
  switch (t.scheme()) {
    case TilingScheme::RegularRect:
      return Tiling::regular(t.box(), t.dr() / 2, t.ds() / 2, t.offset_r(), t.offset_s());
    case TilingScheme::Quadtree: {
      std::vector<Tile> leaves;
      for (std::size_t i = 0; i < t.size(); ++i) {
        const Tile p = t.tile(i);
        const Box& b = p.box;
        const auto c = b.center();
        const Box kids[4] = {{b.r0, c.x(), b.s0, c.y()}, {c.x(), b.r1, b.s0, c.y()},
                             {b.r0, c.x(), c.y(), b.s1}, {c.x(), b.r1, c.y(), b.s1}};
        for (int q = 0; q < 4; ++q) leaves.push_back(detail::rect_tile(p.j + 1, 4 * p.k + q, kids[q]));
      }
      return Tiling::quadtree(t.box(), t.max_depth() + 1, t.mass_threshold(), std::move(leaves));
    }
    case TilingScheme::Radial: {
      std::vector<double> radii;
      double prev = 0;
      for (double r : t.radii()) {
        radii.push_back(0.5 * (prev + r));
        radii.push_back(r);
        prev = r;
      }
      return Tiling::radial(t.center(), radii);
    }
  }
  throw InvalidArgument("unknown tiling scheme");
}

// ---------------------------------------------------------------------------
// Discretized witnesses. Tiles with zero mass contribute nothing.

inline WitnessReport witness_discretized_general(const DiscretizedDensity& dd, const ConcaveFn& f,
                                                 const NonLocalFrame& frame) {
  if (!f.concave()) throw InvalidArgument("discretized witness requires a concave f");
  KahanSum s;
  for (std::size_t i = 0; i < dd.size(); ++i) {
    const double lm = dd.log_mass(i);
    if (lm == kNegInf) continue;
    const double delta = dd.measure(i);
    s.add(delta * f.eval_log(lm - std::log(delta)));
  }
  const double value = s.value() - VacuumRef(frame).integral_f(f);
  WitnessReport r = make_report(WitnessId::discretized(WitnessId::general()), frame, value,
                                dd.exact() ? Method::Analytic : Method::Quadrature, std::abs(dd.total_mass() - 1));
  return r;
}

/// Discrete Wehrl entropy of the step density, -Σ Q^jk ln(Q^jk/Δ_jk).
inline double discretized_wehrl_entropy(const DiscretizedDensity& dd) {
  KahanSum s;
  if (dd.separable()) {
    // Product masses: the entropy splits into the two axis entropies.
    for (const auto* v : {&dd.log_mass_r(), &dd.log_mass_s()})
      for (double l : *v)
        if (l != kNegInf) s.add(-std::exp(l) * l);
    s.add(std::log(dd.measure(0)) * dd.total_mass());
    return s.value();
  }
  for (std::size_t i = 0; i < dd.size(); ++i) {
    const double lm = dd.log_mass(i);
    if (lm == kNegInf) continue;
    s.add(-std::exp(lm) * (lm - std::log(dd.measure(i))));
  }
  return s.value();
}

/// ln Σ Δ^{1-β} (Q^jk)^β, factorized for separable regular tilings.
inline double discretized_log_power_sum(const DiscretizedDensity& dd, double beta) {
  detail::LogAccumulator acc;
  if (dd.separable()) {
    detail::LogAccumulator ar, as;
    for (double l : dd.log_mass_r()) ar.add(beta * l);
    for (double l : dd.log_mass_s()) as.add(beta * l);
    return (1 - beta) * std::log(dd.measure(0)) + ar.value() + as.value();
  }
  for (std::size_t i = 0; i < dd.size(); ++i) {
    const double lm = dd.log_mass(i);
    if (lm == kNegInf) continue;
    acc.add((1 - beta) * std::log(dd.measure(i)) + beta * lm);
  }
  return acc.value();
}

/// Rényi-Wehrl entropy of the step density, S_β(Q^Δ).
inline double discretized_renyi_entropy(const DiscretizedDensity& dd, double beta) {
  if (!(beta > 0) || beta == 1.0) throw InvalidArgument("Renyi order must be > 0 and != 1");
  return discretized_log_power_sum(dd, beta) / (1 - beta);
}

inline WitnessReport wehrl_discretized(const DiscretizedDensity& dd, const NonLocalFrame& frame) {
  const double value = discretized_wehrl_entropy(dd) - 1 - std::log(frame.A());
  return make_report(WitnessId::discretized(WitnessId::wehrl()), frame, value,
                     dd.exact() ? Method::Analytic : Method::Quadrature, std::abs(dd.total_mass() - 1));
}

inline WitnessReport renyi_wehrl_discretized(const DiscretizedDensity& dd, double beta, const NonLocalFrame& frame) {
  if (beta == 1.0) {
    auto r = wehrl_discretized(dd, frame);
    r.id = WitnessId::discretized(WitnessId::renyi(1.0));
    return r;
  }
  const double value = discretized_renyi_entropy(dd, beta) - std::log(beta) / (beta - 1) - std::log(frame.A());
  return make_report(WitnessId::discretized(WitnessId::renyi(beta)), frame, value,
                     dd.exact() ? Method::Analytic : Method::Quadrature, std::abs(dd.total_mass() - 1));
}

inline WitnessReport tsallis_wehrl_discretized(const DiscretizedDensity& dd, double gamma, const NonLocalFrame& frame) {
  if (!(gamma > 0)) throw InvalidArgument("Tsallis order must be > 0");
  if (gamma == 1.0) {
    auto r = wehrl_discretized(dd, frame);
    r.id = WitnessId::discretized(WitnessId::tsallis(1.0));
    return r;
  }
  const double sum = std::exp(discretized_log_power_sum(dd, gamma));
  const double value = (std::pow(frame.A(), 1 - gamma) / gamma - sum) / (gamma - 1);
  return make_report(WitnessId::discretized(WitnessId::tsallis(gamma)), frame, value,
                     dd.exact() ? Method::Analytic : Method::Quadrature, std::abs(dd.total_mass() - 1));
}

/// Mean and covariance of the step density Q^Δ: discrete moments of the tile
/// centroids plus the uniform within-tile second moments.
struct StepMoments {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Cov2 discrete;   // covariance of the tile masses placed at the centroids
  Cov2 step;       // covariance of Q^Δ
};

inline StepMoments step_moments(const DiscretizedDensity& dd) {
  StepMoments m;
  const Tiling& t = dd.tiling();
  if (dd.separable()) {
    auto axis = [](const std::vector<double>& lm, double o, double delta, int first) {
      KahanSum w, mu, sq;
      for (std::size_t i = 0; i < lm.size(); ++i) {
        const double p = std::exp(lm[i]), c = o + (first + static_cast<int>(i) + 0.5) * delta;
        w.add(p);
        mu.add(p * c);
      }
      const double mean = mu.value() / w.value();
      for (std::size_t i = 0; i < lm.size(); ++i) {
        const double c = o + (first + static_cast<int>(i) + 0.5) * delta - mean;
        sq.add(std::exp(lm[i]) * c * c);
      }
      return std::pair{mean, sq.value() / w.value()};
    };
    const auto [mr, vr] = axis(dd.log_mass_r(), t.offset_r(), t.dr(), t.j0());
    const auto [ms, vs] = axis(dd.log_mass_s(), t.offset_s(), t.ds(), t.k0());
    m.mean = {mr, ms};
    m.discrete = {vr, vs, 0.0};
    m.step = {vr + t.dr() * t.dr() / 12, vs + t.ds() * t.ds() / 12, 0.0};
    return m;
  }
  KahanSum w, mr, ms;
  for (std::size_t i = 0; i < dd.size(); ++i) {
    const double p = dd.mass(i);
    const auto c = t.tile(i).centroid;
    w.add(p);
    mr.add(p * c.x());
    ms.add(p * c.y());
  }
  m.mean = {mr.value() / w.value(), ms.value() / w.value()};
  KahanSum vrr, vss, vrs, er, es;
  for (std::size_t i = 0; i < dd.size(); ++i) {
    const double p = dd.mass(i);
    const Tile tile = t.tile(i);
    const Eigen::Vector2d c = tile.centroid - m.mean;
    vrr.add(p * c.x() * c.x());
    vss.add(p * c.y() * c.y());
    vrs.add(p * c.x() * c.y());
    er.add(p * tile.spread.x());
    es.add(p * tile.spread.y());
  }
  const double W = w.value();
  m.discrete = {vrr.value() / W, vss.value() / W, vrs.value() / W};
  m.step = {m.discrete.vrr + er.value() / W, m.discrete.vss + es.value() / W, m.discrete.vrs};
  return m;
}

inline WitnessReport detv_discretized(const DiscretizedDensity& dd, const NonLocalFrame& frame) {
  const auto m = step_moments(dd);
  return make_report(WitnessId::discretized(WitnessId::detv()), frame, m.step.det() - frame.A() * frame.A(),
                     dd.exact() ? Method::Analytic : Method::Quadrature, std::abs(dd.total_mass() - 1));
}

/// Discretized variant of a base witness (Wehrl, Rényi, Tsallis, detV).
inline WitnessReport evaluate_discretized(const DiscretizedDensity& dd, const WitnessId& base, const NonLocalFrame& frame) {
  const WitnessKind k = base.kind == WitnessKind::Discretized ? base.base : base.kind;
  switch (k) {
    case WitnessKind::Wehrl: return wehrl_discretized(dd, frame);
    case WitnessKind::RenyiWehrl: return renyi_wehrl_discretized(dd, base.p1, frame);
    case WitnessKind::TsallisWehrl: return tsallis_wehrl_discretized(dd, base.p1, frame);
    case WitnessKind::DetV: return detv_discretized(dd, frame);
    default: break;
  }
  throw InvalidArgument("no discretized variant of '" + base.label() + "'");
}

// ---------------------------------------------------------------------------
// Detection range under regular δ x δ tilings.

/// Default β scan for optimal discretized Rényi witnesses: 61 log points in [0.1, 100].
inline std::vector<double> default_beta_scan(int n = 61, double lo = 0.1, double hi = 100.0) {
  std::vector<double> b(n);
  for (int i = 0; i < n; ++i) b[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  return b;
}

/// Discretized witness of a base id on the regular δ tiling of the β-aware truncation box.
inline double regular_discretized_value(const Density2D& d, const WitnessId& base, double delta,
                                        const NonLocalFrame& frame) {
  const double beta = base.kind == WitnessKind::RenyiWehrl || base.kind == WitnessKind::TsallisWehrl ? base.p1 : 1.0;
  const Tiling t = Tiling::regular(truncation_box(d, beta), delta, delta);
  return evaluate_discretized(discretize(d, t), base, frame).value;
}

/// Minimum of the discretized Rényi witness over a β grid; returns (value, β).
inline std::pair<double, double> optimal_renyi_discretized(const Density2D& d, double delta, const NonLocalFrame& frame,
                                                           const std::vector<double>& betas = default_beta_scan()) {
  std::vector<double> v(betas.size());
  parallel_for(betas.size(), [&](std::size_t i) {
    v[i] = regular_discretized_value(d, WitnessId::renyi(betas[i]), delta, frame);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return {v[best], betas[best]};
}

struct BreakdownScan {
  double delta_min = 0.05;
  double delta_max = 8.0;
  double step = 0.05;
  double tol = 1e-4;  // bisection width
};

/// First δ (scanning upward) at which w(δ) ≥ 0, refined by bisection. Returns
/// delta_min if w(delta_min) ≥ 0 already and +∞ if no crossing below delta_max.
inline double delta_break(const std::function<double(double)>& w, const BreakdownScan& scan = {}) {
  if (!(scan.delta_min > 0) || !(scan.delta_max > scan.delta_min) || !(scan.step > 0))
    throw InvalidArgument("invalid breakdown scan range");
  double prev = scan.delta_min;
  if (w(prev) >= 0) return prev;
  for (double x = scan.delta_min + scan.step; x <= scan.delta_max + 1e-12; x += scan.step) {
    if (w(x) >= 0) {
      double a = prev, b = x;
      while (b - a > scan.tol) {
        const double c = 0.5 * (a + b);
        (w(c) >= 0 ? b : a) = c;
      }
      return 0.5 * (a + b);
    }
    prev = x;
  }
  return std::numeric_limits<double>::infinity();
}

/// Detection range of the discretized Rényi witness of order β (β = 1 is Wehrl).
inline double detection_range(const Density2D& d, double beta, const NonLocalFrame& frame,
                              const BreakdownScan& scan = {}) {
  const WitnessId id = beta == 1.0 ? WitnessId::wehrl() : WitnessId::renyi(beta);
  return delta_break([&](double delta) { return regular_discretized_value(d, id, delta, frame); }, scan);
}

struct BestBeta {
  double beta = 1.0;
  double range = 0.0;
  std::vector<double> ranges;  // per grid β
};

/// β of the grid with the largest detection range (ties: smallest β).
inline BestBeta best_beta_for_range(const Density2D& d, const NonLocalFrame& frame,
                                    const std::vector<double>& betas = default_beta_scan(),
                                    const BreakdownScan& scan = {}) {
  BestBeta res;
  res.ranges.resize(betas.size());
  parallel_for(betas.size(), [&](std::size_t i) { res.ranges[i] = detection_range(d, betas[i], frame, scan); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < betas.size(); ++i)
    if (res.ranges[i] > res.ranges[best]) best = i;
  res.beta = betas[best];
  res.range = res.ranges[best];
  return res;
}

}  // namespace phasewitness
