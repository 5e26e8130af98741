#include "phasewitness/densities.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>

using namespace phasewitness;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct RawMoments {
  double mass = 0, mr = 0, ms = 0, vrr = 0, vss = 0, vrs = 0;
};

// Plain midpoint sums, w.r.t. dμ = dr ds/2π, over a ±L box.
RawMoments raw_moments(const std::function<double(double, double)>& q, double L, int n = 1200) {
  const double h = 2 * L / n;
  double m = 0, r1 = 0, s1 = 0, rr = 0, ss = 0, rs = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double r = -L + (i + 0.5) * h, s = -L + (j + 0.5) * h;
      const double v = q(r, s);
      m += v;
      r1 += v * r;
      s1 += v * s;
      rr += v * r * r;
      ss += v * s * s;
      rs += v * r * s;
    }
  const double w = h * h / kTwoPi;
  RawMoments out;
  out.mass = m * w;
  out.mr = r1 * w / out.mass;
  out.ms = s1 * w / out.mass;
  out.vrr = rr * w / out.mass - out.mr * out.mr;
  out.vss = ss * w / out.mass - out.ms * out.ms;
  out.vrs = rs * w / out.mass - out.mr * out.ms;
  return out;
}

RawMoments raw_moments(const Density2D& d, double L, int n = 1200) {
  return raw_moments([&](double r, double s) { return d.eval(r, s); }, L, n);
}

}  // namespace

TEST_CASE("TMSV Husimi covariance is 2/(1±λ) on the two branches", "[densities][tmsv]") {
  for (double l : {0.0, 0.1, 1.0 / 3.0, 0.9}) {
    const auto qp = tmsv_husimi(l, NonLocalFrame::unit(Branch::Plus));
    const auto qm = tmsv_husimi(l, NonLocalFrame::unit(Branch::Minus));
    CHECK(qp.is_gaussian());
    CHECK(qp.separable_gaussian());
    CHECK_THAT(qp.mixture[0].cov(0, 0), WithinRel(2 / (1 + l), 1e-13));
    CHECK_THAT(qp.mixture[0].cov(1, 1), WithinRel(2 / (1 + l), 1e-13));
    CHECK_THAT(qm.mixture[0].cov(0, 0), WithinRel(2 / (1 - l), 1e-13));
    CHECK_THAT(qp.peak_bound, WithinRel((1 + l) / 2, 1e-13));
  }
  CHECK_THROWS_AS(tmsv_husimi(1.0, NonLocalFrame::unit()), InvalidArgument);
  CHECK_THROWS_AS(tmsv_husimi(-0.1, NonLocalFrame::unit()), InvalidArgument);
}

TEST_CASE("densities are normalized w.r.t. dμ", "[densities][normalization]") {
  const NonLocalFrame f = NonLocalFrame::unit();
  CHECK_THAT(raw_moments(tmsv_husimi(0.5, f), 14).mass, WithinAbs(1.0, 1e-9));
  CHECK_THAT(raw_moments(vacuum_husimi(NonLocalFrame(2, 1, 1, 2)), 20).mass, WithinAbs(1.0, 1e-9));
  CHECK_THAT(raw_moments(mixture_husimi({0.8, 2.0, 0.3}, f), 16).mass, WithinAbs(1.0, 1e-9));
  CHECK_THAT(raw_moments(coherent_husimi(), 10).mass, WithinAbs(1.0, 1e-9));
  CHECK_THAT(raw_moments(fock1_husimi(), 12).mass, WithinAbs(1.0, 1e-9));
  for (Branch b : {Branch::Plus, Branch::Minus})
    for (auto [phi, xi] : {std::pair{0.0, 1.0}, {kPi / 4, 1.0}, {0.0, 1.5}}) {
      const NonLocalFrame g = NonLocalFrame::unit(b).with_phi(phi).with_xi(xi);
      CHECK_THAT(raw_moments(example_state({1.0, 1.2}, g).second, 16).mass, WithinAbs(1.0, 1e-8));
    }
}

TEST_CASE("Fock state Husimi shape", "[densities][fock]") {
  const auto q = fock1_husimi();
  CHECK(q.eval(0, 0) == 0.0);
  // Maximum on the circle x² + p² = 2.
  CHECK_THAT(q.eval(std::sqrt(2.0), 0), WithinRel(std::exp(-1.0), 1e-14));
  CHECK(q.eval(1.3, 0) < q.eval(std::sqrt(2.0), 0));
  const auto m = raw_moments(q, 12);
  CHECK_THAT(m.vrr, WithinRel(2.0, 1e-8));
  CHECK_THAT(m.vrs, WithinAbs(0.0, 1e-10));
}

TEST_CASE("Husimi covariance is Wigner covariance plus vacuum", "[densities][weierstrass][property]") {
  for (Branch b : {Branch::Plus, Branch::Minus})
    for (auto [phi, xi] : {std::pair{0.0, 1.0}, {kPi / 4, 1.0}, {0.0, 1.5}, {1.1, 1.0}, {0.0, 0.7}}) {
      const NonLocalFrame g = NonLocalFrame::unit(b).with_phi(phi).with_xi(xi);
      const auto [w, q] = example_state({1.0, 1.2}, g);
      const auto mw = raw_moments(w, 16), mq = raw_moments(q, 16);
      const Eigen::Matrix2d vac = g.vacuum_wigner_cov();
      CHECK_THAT(mw.mass, WithinAbs(1.0, 1e-8));
      CHECK_THAT(mq.vrr, WithinAbs(mw.vrr + vac(0, 0), 1e-7));
      CHECK_THAT(mq.vss, WithinAbs(mw.vss + vac(1, 1), 1e-7));
      CHECK_THAT(mq.vrs, WithinAbs(mw.vrs, 1e-7));
    }
}

TEST_CASE("Gaussian Husimi covariance under squeezing and rotation", "[densities][gaussian]") {
  const auto nf = GaussianNormalForm::tmsv(0.4);
  const NonLocalFrame g = NonLocalFrame::unit().with_phi(0.6).with_xi(1.3);
  const auto q = gaussian_husimi(nf, g);
  // Branch-plus Wigner block for a TMSV is (1-λ)/(1+λ)·1; the congruence acts on it before adding the vacuum.
  const double w = (1 - 0.4) / (1 + 0.4);
  const Eigen::Matrix2d s = Eigen::Vector2d(1.3, 1 / 1.3).asDiagonal() * rotation(0.6);
  const Eigen::Matrix2d expected = w * s * s.transpose() + Eigen::Matrix2d::Identity();
  CHECK(q.mixture[0].cov.isApprox(expected, 1e-13));
  const auto m = raw_moments(q, 16);
  CHECK_THAT(m.vrr, WithinAbs(expected(0, 0), 1e-7));
  CHECK_THAT(m.vrs, WithinAbs(expected(0, 1), 1e-7));
}

TEST_CASE("mixture state moments", "[densities][mixture]") {
  const double l = 0.8, r = 2.0, p = 0.3;
  const auto q = mixture_husimi({l, r, p}, NonLocalFrame::unit());
  REQUIRE(q.mixture.size() == 2);
  const double v = 2 / (1 + l);
  const double mean = (1 - p) * r - p * r;
  const double var_r = v + r * r - mean * mean;
  REQUIRE(q.mean.has_value());
  CHECK_THAT(q.mean->x(), WithinAbs(mean, 1e-14));
  CHECK_THAT(q.cov->vrr, WithinRel(var_r, 1e-13));
  CHECK_THAT(q.cov->vss, WithinRel(v, 1e-13));
  const auto m = raw_moments(q, 16);
  CHECK_THAT(m.mr, WithinAbs(mean, 1e-8));
  CHECK_THAT(m.vrr, WithinAbs(var_r, 1e-7));

  const auto single = mixture_husimi({l, r, 0.0}, NonLocalFrame::unit());
  CHECK(single.mixture.size() == 1);
  CHECK_THAT(single.eval(r + 0.3, 0.1),
             WithinRel(std::exp(-(0.09 + 0.01) / (2 * v)) / v, 1e-13));
  CHECK_THROWS_AS(mixture_husimi({l, r, p}, NonLocalFrame(2, 1, 1, 2)), UnsupportedFrame);
  CHECK_THROWS_AS(mixture_husimi({l, r, 1.5}, NonLocalFrame::unit()), InvalidArgument);
}

TEST_CASE("example state frame restrictions", "[densities][example]") {
  CHECK_THROWS_AS(example_state({1, 1.2}, NonLocalFrame(2, 1, 1, 2)), UnsupportedFrame);
  CHECK_THROWS_AS(example_state({1, 1.2}, NonLocalFrame::unit().with_angles(0.3, 0)), UnsupportedFrame);
  CHECK_THROWS_AS(example_state({0, 1.2}, NonLocalFrame::unit()), InvalidArgument);
  const auto [w, q] = example_state({1, 1.2}, NonLocalFrame::unit());
  CHECK_FALSE(w.husimi);
  CHECK(q.husimi);
  CHECK(q.wigner != nullptr);
}

TEST_CASE("displacement shifts the density and its moments", "[densities][displacement][property]") {
  const auto q = mixture_husimi({0.5, 1.0, 0.4}, NonLocalFrame::unit());
  const Eigen::Vector2d shift(0.7, -1.3);
  const auto d = displace(q, shift);
  for (auto [r, s] : {std::pair{0.0, 0.0}, {1.0, 2.0}, {-3.0, 0.5}})
    CHECK_THAT(d.eval(r + shift.x(), s + shift.y()), WithinRel(q.eval(r, s), 1e-13));
  CHECK_THAT(d.mean->x(), WithinAbs(q.mean->x() + 0.7, 1e-14));
  CHECK(d.cov->vrr == q.cov->vrr);
  CHECK(d.wigner != nullptr);
  CHECK_THAT(d.support.r0, WithinAbs(q.support.r0 + 0.7, 1e-14));
  const auto mq = moments(q), md = moments(d);
  CHECK_THAT(md.cov.vrr, WithinRel(mq.cov.vrr, 1e-8));
  CHECK_THAT(md.mean.x() - mq.mean.x(), WithinAbs(0.7, 1e-8));
}

TEST_CASE("Wigner covariance recovered from Husimi covariance", "[densities][moments]") {
  const NonLocalFrame g(2, 1, 1, 2);
  const auto q = tmsv_husimi(0.3, g);
  const Cov2 v = Cov2::from(q.mixture[0].cov);
  const Cov2 w = wigner_from_husimi_cov(v, g);
  const Eigen::Matrix2d vac = g.vacuum_wigner_cov();
  CHECK_THAT(w.vrr, WithinAbs(v.vrr - vac(0, 0), 1e-14));
  CHECK_THAT(w.vss, WithinAbs(v.vss - vac(1, 1), 1e-14));
}
