#include "phasewitness/densities.hpp"
#include "phasewitness/discretization.hpp"
#include "phasewitness/witnesses.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>

using namespace phasewitness;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::size_t tile_index(const Tiling& t, int j, int k) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Tile tile = t.tile(i);
    if (tile.j == j && tile.k == k) return i;
  }
  FAIL("tile not found");
  return 0;
}

// Rényi entropy of the bare tile masses, ln Σ p^β / (1-β).
double mass_renyi(const DiscretizedDensity& dd, double beta) {
  double mx = kNegInf;
  for (std::size_t i = 0; i < dd.size(); ++i) mx = std::max(mx, dd.log_mass(i));
  double s = 0;
  for (std::size_t i = 0; i < dd.size(); ++i) s += std::exp(beta * (dd.log_mass(i) - mx));
  return (beta * mx + std::log(s)) / (1 - beta);
}

std::vector<Tiling> battery_tilings(const Density2D& d, double delta) {
  const Box box = truncation_box(d);
  const int depth = std::max(0, static_cast<int>(std::ceil(std::log2(box.width() / delta))));
  return {Tiling::regular(box, delta, delta), quadtree_tiling(d, box, depth, 0.05),
          radial_tiling(box, d.mean.value_or(Eigen::Vector2d::Zero()), std::max(1, static_cast<int>(box.width() / (2 * delta))))};
}

}  // namespace

TEST_CASE("regular tile masses match the erf product", "[discretization][masses]") {
  const double l = 0.1;
  const auto q = tmsv_husimi(l, NonLocalFrame::unit());
  const double sd = std::sqrt(2 / (1 + l));
  for (double delta : {0.5, 1.5, 2.5}) {
    const Tiling t = Tiling::regular(truncation_box(q), delta, delta);
    const auto dd = discretize(q, t);
    CHECK(dd.separable());
    const double axis0 = phi_cdf(delta / 2 / sd) - phi_cdf(-delta / 2 / sd);
    CHECK_THAT(dd.mass(tile_index(t, 0, 0)), WithinAbs(axis0 * axis0, 1e-10));
    const double axis1 = phi_cdf(1.5 * delta / sd) - phi_cdf(0.5 * delta / sd);
    CHECK_THAT(dd.mass(tile_index(t, 1, 0)), WithinAbs(axis1 * axis0, 1e-10));
    // The last column carries the whole upper tail.
    const int jl = t.j0() + t.nr() - 1;
    const double tail = 0.5 * std::erfc((t.offset_r() + jl * delta) / sd / std::sqrt(2.0));
    CHECK_THAT(dd.mass(tile_index(t, jl, 0)), WithinRel(tail * axis0, 1e-8));
    CHECK_THAT(dd.total_mass(), WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("correlated Gaussian tile masses match a conditional oracle", "[discretization][masses]") {
  Eigen::Matrix2d cov;
  cov << 1.6, 0.7, 0.7, 1.1;
  const auto q = make_mixture_density({GaussComponent{1.0, Eigen::Vector2d::Zero(), cov}}, NonLocalFrame::unit(), "correlated");
  REQUIRE_FALSE(q.separable_gaussian());
  const Tiling t = Tiling::regular(truncation_box(q), 0.7, 0.7);
  const auto dd = discretize(q, t);
  CHECK_FALSE(dd.separable());
  // Rectangle mass as ∫ N(r; 0, vrr) [Φ((s1 - m(r))/c) - Φ((s0 - m(r))/c)] dr, with the
  // conditional mean m(r) = r vrs/vrr and sd c, by composite Simpson.
  const Eigen::Matrix2d v = q.mixture[0].cov;
  const double sr = std::sqrt(v(0, 0)), k = v(0, 1) / v(0, 0), c = std::sqrt(v(1, 1) - v(0, 1) * k);
  auto oracle = [&](const Box& b) {
    const int n = 2000;
    const double h = (b.r1 - b.r0) / n;
    double acc = 0;
    for (int i = 0; i <= n; ++i) {
      const double r = b.r0 + i * h;
      const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
      const double dens = std::exp(-r * r / (2 * sr * sr)) / (sr * std::sqrt(kTwoPi));
      acc += w * dens * (phi_cdf((b.s1 - k * r) / c) - phi_cdf((b.s0 - k * r) / c));
    }
    return acc * h / 3;
  };
  for (auto [j, kk] : {std::pair{0, 0}, {1, 0}, {1, 1}, {-2, 1}, {0, 3}}) {
    const std::size_t i = tile_index(t, j, kk);
    CHECK_THAT(dd.mass(i), WithinAbs(oracle(t.tile(i).box), 1e-10));
  }
}

TEST_CASE("tile masses sum to one for every scheme", "[discretization][normalization][property]") {
  const NonLocalFrame f = NonLocalFrame::unit();
  const std::vector<Density2D> states = {vacuum_husimi(f), tmsv_husimi(0.6, f), mixture_husimi({0.8, 2, 0.3}, f),
                                         example_state({1, 1.2}, f).second};
  for (const auto& d : states)
    for (const auto& t : battery_tilings(d, 0.8)) {
      INFO(d.name << " " << to_string(t.scheme()));
      const auto dd = discretize(d, t);
      CHECK_THAT(dd.total_mass(), WithinAbs(1.0, 1e-9));
      for (std::size_t i = 0; i < dd.size(); ++i) CHECK(dd.step_density(i) >= 0);
    }
  const auto vac = discretize(vacuum_husimi(f), Tiling::regular(truncation_box(vacuum_husimi(f)), 0.1, 0.1));
  CHECK_THAT(vac.total_mass(), WithinAbs(1.0, 1e-9));
}

TEST_CASE("a single tile carries a constant step density 1/Δ", "[discretization][single]") {
  const auto q = coherent_husimi();
  const Box b{-9, 9, -9, 9};
  const Tiling t = Tiling::regular(b, 18, 18, -9.0, -9.0);
  REQUIRE(t.size() == 1);
  const auto dd = discretize(q, t);
  CHECK_THAT(dd.step_density(0), WithinRel(kTwoPi / (18.0 * 18.0), 1e-12));
}

TEST_CASE("insufficient coverage is rejected", "[discretization][errors]") {
  const auto q = tmsv_husimi(0.3, NonLocalFrame::unit().with_phi(0.2));
  CHECK_THROWS_AS(discretize(q, Tiling::regular({-1, 1, -1, 1}, 0.5, 0.5)), InvalidArgument);
  CHECK_THROWS_AS(discretize(q, Tiling::radial(Eigen::Vector2d::Zero(), {1.0, 2.0})), InvalidArgument);
  CHECK_THROWS_AS(Tiling::regular({-1, 1, -1, 1}, 0.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(Tiling::radial(Eigen::Vector2d::Zero(), {2.0, 1.0}), InvalidArgument);
}

TEST_CASE("regular Rényi identity S_β(Q^Δ) = S_β(Q^jk) + ln Δ", "[discretization][renyi]") {
  for (const Density2D& q : {tmsv_husimi(0.3, NonLocalFrame::unit()), mixture_husimi({0.8, 2, 0.3}, NonLocalFrame::unit())}) {
    for (double delta : {0.4, 1.3}) {
      const auto dd = discretize(q, Tiling::regular(truncation_box(q), delta, delta));
      for (double b : {0.5, 2.0, 7.0})
        CHECK_THAT(discretized_renyi_entropy(dd, b) - mass_renyi(dd, b), WithinAbs(std::log(delta * delta / kTwoPi), 1e-10));
    }
  }
}

TEST_CASE("discretized Rényi witness is continuous at β = 1", "[discretization][renyi][property]") {
  const NonLocalFrame f = NonLocalFrame::unit();
  const auto q = tmsv_husimi(0.1, f);
  const auto dd = discretize(q, Tiling::regular(truncation_box(q), 0.5, 0.5));
  const double w = wehrl_discretized(dd, f).value;
  CHECK_THAT(renyi_wehrl_discretized(dd, 1 + 1e-5, f).value, WithinAbs(w, 1e-6));
  CHECK_THAT(renyi_wehrl_discretized(dd, 1 - 1e-5, f).value, WithinAbs(w, 1e-6));
}

TEST_CASE("step covariance against direct integration of the step density", "[discretization][moments]") {
  // Two-point Gauss-Legendre integrates x² exactly over each rectangle.
  auto direct = [](const DiscretizedDensity& dd) {
    const double g = 1 / std::sqrt(3.0);
    double w = 0, mr = 0, ms = 0, rr = 0, ss = 0, rs = 0;
    for (std::size_t i = 0; i < dd.size(); ++i) {
      const Box b = dd.tiling().tile(i).box;
      const double p = dd.mass(i) / 4;
      for (double u : {-g, g})
        for (double v : {-g, g}) {
          const double r = b.center().x() + 0.5 * b.width() * u, s = b.center().y() + 0.5 * b.height() * v;
          w += p;
          mr += p * r;
          ms += p * s;
          rr += p * r * r;
          ss += p * s * s;
          rs += p * r * s;
        }
    }
    mr /= w;
    ms /= w;
    return std::array<double, 5>{mr, ms, rr / w - mr * mr, ss / w - ms * ms, rs / w - mr * ms};
  };
  const NonLocalFrame f = NonLocalFrame::unit();
  const std::vector<Density2D> states = {tmsv_husimi(0.5, f), mixture_husimi({0.8, 2, 0.3}, f),
                                         tmsv_husimi(0.5, f.with_phi(0.7).with_xi(1.4))};
  for (const auto& q : states) {
    for (double delta : {0.3, 1.1}) {
      const Box box = truncation_box(q);
      for (const Tiling& t : {Tiling::regular(box, delta, delta), quadtree_tiling(q, box, 6, 0.02)}) {
        const auto dd = discretize(q, t);
        const auto m = step_moments(dd);
        const auto o = direct(dd);
        CHECK_THAT(m.mean.x(), WithinAbs(o[0], 1e-9));
        CHECK_THAT(m.mean.y(), WithinAbs(o[1], 1e-9));
        CHECK_THAT(m.step.vrr, WithinAbs(o[2], 1e-9));
        CHECK_THAT(m.step.vss, WithinAbs(o[3], 1e-9));
        CHECK_THAT(m.step.vrs, WithinAbs(o[4], 1e-9));
        if (t.scheme() == TilingScheme::RegularRect)
          CHECK_THAT(m.step.vrr - m.discrete.vrr, WithinAbs(delta * delta / 12, 1e-12));
      }
    }
  }
}

TEST_CASE("annulus tile second moments", "[discretization][moments][radial]") {
  const auto q = coherent_husimi();
  const Tiling t = radial_tiling({-10, 10, -10, 10}, Eigen::Vector2d::Zero(), 12);
  const auto dd = discretize(q, t);
  // Per-tile E[x²] of a uniform annulus, by radial midpoint sums.
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Tile tile = t.tile(i);
    const int n = 4000;
    double num = 0, den = 0;
    for (int k = 0; k < n; ++k) {
      const double r = tile.r_in + (k + 0.5) * (tile.r_out - tile.r_in) / n;
      num += r * r * r / 2;
      den += r;
    }
    CHECK_THAT(tile.spread.x(), WithinRel(num / den, 1e-6));
  }
  const auto m = step_moments(dd);
  CHECK(m.step.vrr > 1.0);
  CHECK_THAT(m.mean.norm(), WithinAbs(0.0, 1e-12));
}

TEST_CASE("continuum limits of the discretized witnesses", "[discretization][limits]") {
  const NonLocalFrame f = NonLocalFrame::unit();
  const auto q1 = tmsv_husimi(0.1, f);
  const auto dd = discretize(q1, Tiling::regular(truncation_box(q1), 0.05, 0.05));
  CHECK_THAT(wehrl_discretized(dd, f).value, WithinAbs(-std::log(1.1), 1e-3));
  const auto q5 = tmsv_husimi(0.5, f);
  const auto d5 = discretize(q5, Tiling::regular(truncation_box(q5), 0.05, 0.05));
  // Binned variance is σ² + δ²/12 (Sheppard); the within-tile spread adds δ²/12 more.
  const double v = 2 / 1.5, vd = v + 0.05 * 0.05 / 6;
  CHECK_THAT(step_moments(d5).step.det(), WithinRel(vd * vd, 1e-12));
  CHECK_THAT(detv_discretized(d5, f).value, WithinAbs(vd * vd - 4, 1e-12));
}

TEST_CASE("Jensen ordering of discretized witnesses", "[discretization][jensen][property]") {
  const NonLocalFrame f = NonLocalFrame::unit();
  const std::vector<Density2D> states = {tmsv_husimi(0.1, f), tmsv_husimi(0.6, f), mixture_husimi({0.8, 2, 0.3}, f),
                                         example_state({1, 1.2}, f).second};
  const std::vector<WitnessId> ids = {WitnessId::wehrl(), WitnessId::renyi(0.5), WitnessId::renyi(3), WitnessId::tsallis(2)};
  for (const auto& d : states) {
    std::vector<double> cont;
    for (const auto& id : ids) cont.push_back(evaluate_witness(d, id, f).value);
    for (double delta : {0.5, 1.5})
      for (const auto& t : battery_tilings(d, delta)) {
        const auto dd = discretize(d, t);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          INFO(d.name << " " << to_string(t.scheme()) << " δ=" << delta << " " << ids[k].label());
          CHECK(evaluate_discretized(dd, ids[k], f).value >= cont[k] - 1e-6);
        }
        const double dmax = std::max(1.0, d.peak_bound);
        const double g = witness_discretized_general(dd, make_concave(ConcaveKind::Monomial, dmax, 0.3), f).value;
        CHECK(g >= witness_general(d, make_concave(ConcaveKind::Monomial, dmax, 0.3), f).value - 1e-6);
      }
  }
}

TEST_CASE("general discretized witness reduces to Wehrl for -t ln t", "[discretization][general]") {
  const NonLocalFrame f = NonLocalFrame::unit();
  const auto q = mixture_husimi({0.8, 2, 0.3}, f);
  const auto dd = discretize(q, Tiling::regular(truncation_box(q), 0.9, 0.9));
  const double g = witness_discretized_general(dd, make_concave(ConcaveKind::NegTLogT, 1.0), f).value;
  CHECK_THAT(g, WithinAbs(wehrl_discretized(dd, f).value, 1e-9));
  CHECK_THROWS_AS(witness_discretized_general(dd, neg_power(0.5), f), InvalidArgument);
}

TEST_CASE("nested refinement never increases the witness", "[discretization][refine][property]") {
  const NonLocalFrame f = NonLocalFrame::unit();
  for (const Density2D& q : {tmsv_husimi(0.1, f), tmsv_husimi(0.7, f), mixture_husimi({0.8, 2, 0.3}, f)}) {
    const Box box = truncation_box(q);
    for (Tiling t : {Tiling::regular(box, 2.4, 2.4), quadtree_tiling(q, box, 3, 0.05),
                     radial_tiling(box, q.mean.value_or(Eigen::Vector2d::Zero()), 3)}) {
      double prev = wehrl_discretized(discretize(q, t), f).value;
      for (int level = 0; level < 3; ++level) {
        const Tiling next = refine(t);
        CHECK(next.size() > t.size());
        const auto dd = discretize(q, next);
        const double w = wehrl_discretized(dd, f).value;
        INFO(q.name << " " << to_string(t.scheme()) << " level " << level);
        CHECK(w <= prev + 1e-9);
        CHECK_THAT(dd.total_mass(), WithinAbs(1.0, 1e-9));
        prev = w;
        t = next;
      }
    }
  }
}

TEST_CASE("refined tiles are nested in their parents", "[discretization][refine]") {
  const auto q = tmsv_husimi(0.4, NonLocalFrame::unit());
  const Box box = truncation_box(q);
  for (const Tiling& t : {Tiling::regular(box, 1.0, 1.0), quadtree_tiling(q, box, 4, 0.05)}) {
    const Tiling r = refine(t);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const Box c = r.tile(i).box;
      int parents = 0;
      for (std::size_t k = 0; k < t.size(); ++k) {
        const Box p = t.tile(k).box;
        if (c.r0 >= p.r0 - 1e-12 && c.r1 <= p.r1 + 1e-12 && c.s0 >= p.s0 - 1e-12 && c.s1 <= p.s1 + 1e-12) ++parents;
      }
      CHECK(parents == 1);
    }
  }
}

TEST_CASE("vacuum is never flagged under any scheme", "[discretization][vacuum][property]") {
  for (const NonLocalFrame& f : {NonLocalFrame::unit(), NonLocalFrame::unit(Branch::Minus), NonLocalFrame(2, 1, 1, 2)}) {
    const auto v = vacuum_husimi(f);
    for (double delta : {0.2, 1.0, 3.0})
      for (const auto& t : battery_tilings(v, delta)) {
        const auto dd = discretize(v, t);
        for (const auto& id : {WitnessId::wehrl(), WitnessId::renyi(0.3), WitnessId::renyi(5), WitnessId::tsallis(0.5),
                               WitnessId::detv()}) {
          INFO(to_string(t.scheme()) << " δ=" << delta << " " << id.label());
          CHECK(evaluate_discretized(dd, id, f).value >= -1e-9);
        }
      }
  }
}

TEST_CASE("breakdown distance", "[discretization][breakdown]") {
  CHECK_THAT(delta_break([](double d) { return d - 1.3; }), WithinAbs(1.3, 1e-4));
  CHECK(delta_break([](double) { return 1.0; }) == 0.05);
  CHECK(std::isinf(delta_break([](double) { return -1.0; })));
  CHECK_THROWS_AS(delta_break([](double d) { return d; }, {1.0, 0.5, 0.1, 1e-4}), InvalidArgument);

  const NonLocalFrame f = NonLocalFrame::unit();
  const auto q = tmsv_husimi(0.1, f);
  const double wehrl = detection_range(q, 1.0, f);
  CHECK(wehrl > 1.4);
  CHECK(wehrl < 1.6);
  CHECK(regular_discretized_value(q, WitnessId::wehrl(), wehrl - 0.01, f) < 0);
  CHECK(regular_discretized_value(q, WitnessId::wehrl(), wehrl + 0.01, f) >= 0);
}

TEST_CASE("best β trend across entanglement strength", "[discretization][breakdown][beta]") {
  const NonLocalFrame f = NonLocalFrame::unit();
  const std::vector<double> betas = {0.2, 0.5, 1.0, 2.0, 5.0};
  const BreakdownScan scan{0.05, 8.0, 0.1, 1e-3};
  const auto weak = best_beta_for_range(tmsv_husimi(0.2, f), f, betas, scan);
  const auto strong = best_beta_for_range(tmsv_husimi(0.8, f), f, betas, scan);
  CHECK(weak.beta >= 1.0);
  CHECK(strong.beta <= 1.0);
  CHECK(weak.ranges.size() == betas.size());
}
