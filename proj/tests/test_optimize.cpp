#include "phasewitness/densities.hpp"
#include "phasewitness/optimize.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>

using namespace phasewitness;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Physical two-mode Gaussian: TMSV plus independent thermal noise on each mode.
GaussianNormalForm noisy_tmsv(double lambda, double n1, double n2) {
  GaussianNormalForm g = GaussianNormalForm::tmsv(lambda);
  g.m1 += n1;
  g.m2 += n2;
  return g;
}

}  // namespace

TEST_CASE("optimal squeezing examples", "[optimize][xi]") {
  CHECK_THAT(optimal_xi_detv({2.0, 2.0, 0.3}), WithinAbs(1.0, 1e-15));
  CHECK_THAT(optimal_xi_detv({1.0, 16.0, 0.0}), WithinAbs(2.0, 1e-15));
  CHECK_THROWS_AS(optimal_xi_detv({0.0, 1.0, 0.0}), InvalidArgument);
}

TEST_CASE("closed-form ξ agrees with numeric minimization", "[optimize][xi][property]") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> var(0.01, 5.0), corr(-0.95, 0.95), sc(0.3, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double vr = var(rng), vs = var(rng);
    const Cov2 w{vr, vs, corr(rng) * std::sqrt(vr * vs)};
    const double a1 = sc(rng), b1 = sc(rng), a2 = sc(rng), b2 = a1 * b1 / a2;
    const double closed = optimal_xi_detv(w, a1, b1, a2, b2);
    CHECK_THAT(optimal_xi_detv_numeric(w, a1, b1, a2, b2), WithinRel(closed, 1e-6));
    CHECK_THAT(squeezed_detv(w, closed, a1, b1, a2, b2) - (a1 * b1 + a2 * b2) * (a1 * b1 + a2 * b2),
               WithinAbs(optimal_detv_witness(w, a1, b1, a2, b2), 1e-9 * (1 + vr * vs)));
  }
}

TEST_CASE("optimized detV matches a brute-force ξ scan of the Husimi state", "[optimize][xi][detv]") {
  for (const NonLocalFrame& base : {NonLocalFrame::unit(), NonLocalFrame(2, 0.5, 1, 1), NonLocalFrame::unit().with_phi(0.6)}) {
    for (const GaussianNormalForm& nf : {GaussianNormalForm::tmsv(0.4), noisy_tmsv(0.6, 0.3, 0.05), noisy_tmsv(0.2, 0.0, 0.7)}) {
      const Cov2 w = Cov2::from(branch_wigner_cov(nf, base));
      const double closed = optimal_detv_witness(w, base.a1(), base.b1(), base.a2(), base.b2());
      double brute = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 6000; ++i) {
        const NonLocalFrame f = base.with_xi(std::exp(-3 + 6.0 * i / 6000));
        brute = std::min(brute, evaluate_witness(gaussian_husimi(nf, f), WitnessId::detv(), f).value);
      }
      CHECK(closed <= brute + 1e-12);
      CHECK_THAT(closed, WithinAbs(brute, 1e-5));
    }
  }
}

TEST_CASE("golden section on a parabola", "[optimize][golden]") {
  const auto [x, v] = golden_section([](double u) { return (u - 1.3) * (u - 1.3) + 2; }, -4, 5);
  // A flat minimum pins the argmin only to about sqrt(eps).
  CHECK_THAT(x, WithinAbs(1.3, 1e-7));
  CHECK_THAT(v, WithinAbs(2.0, 1e-15));
  const auto [xe, ve] = golden_section([](double u) { return u; }, 0, 1);
  CHECK(xe < 1e-9);
  CHECK(ve < 1e-9);
}

TEST_CASE("TMSV optimum is the plus branch with the Gaussian closed form", "[optimize][tmsv]") {
  const double l = 1.0 / 3.0;
  SearchSpace sp;
  sp.betas = {0.3, 1.5, 4.0};
  sp.phis = {0.0, 0.8};
  const auto res = optimize_witness([&](const NonLocalFrame& f) { return tmsv_husimi(l, f); }, WitnessId::renyi(2), sp);
  CHECK(res.best.frame.branch() == Branch::Plus);
  CHECK_THAT(res.best.value, WithinAbs(-std::log(1 + l), 1e-9));
  CHECK(res.evaluations == 2 * 3 * 2);
  // Every plus-branch order gives the same value.
  for (const auto& e : res.trace)
    if (e.branch == Branch::Plus) CHECK_THAT(e.value, WithinAbs(-std::log(1 + l), 1e-9));
    else CHECK(e.value > 0);
}

TEST_CASE("trace and budget bookkeeping", "[optimize][budget]") {
  const auto state = [](const NonLocalFrame& f) { return tmsv_husimi(0.5, f); };
  SearchSpace sp;
  sp.phis = {0.0, 0.4, 0.9};
  sp.log_xi = std::pair{-1.0, 1.0};
  sp.xi_grid = 5;
  const auto full = optimize_witness(state, WitnessId::detv(), sp);
  CHECK_FALSE(full.budget_exhausted);
  CHECK(full.trace.size() == static_cast<std::size_t>(full.evaluations));
  double mn = std::numeric_limits<double>::infinity();
  for (const auto& e : full.trace) mn = std::min(mn, e.value);
  CHECK(full.best.value == mn);

  const auto cut = optimize_witness(state, WitnessId::detv(), sp, NonLocalFrame::unit(), Budget{7});
  CHECK(cut.budget_exhausted);
  CHECK(cut.evaluations == 7);
  CHECK(cut.trace.size() == 7u);
  for (std::size_t i = 0; i < cut.trace.size(); ++i) CHECK(cut.trace[i].value == full.trace[i].value);
  CHECK_THROWS_AS(optimize_witness(state, WitnessId::detv(), sp, NonLocalFrame::unit(), Budget{0}), InvalidArgument);
}

TEST_CASE("scaling descent keeps the product constraint", "[optimize][scalings]") {
  SearchSpace sp;
  sp.branches = {Branch::Plus};
  sp.log_xi = std::pair{-2.0, 2.0};
  sp.scalings = true;
  const auto res = optimize_witness([](const NonLocalFrame& f) { return gaussian_husimi(noisy_tmsv(0.5, 0.4, 0.0), f); },
                                    WitnessId::detv(), sp);
  for (const auto& e : res.trace) CHECK_THAT(e.a1 * e.b1, WithinRel(e.a2 * e.b2, 1e-12));
  // Optimizing scalings can only improve on the unit-scaling ξ optimum.
  const Cov2 w = Cov2::from(branch_wigner_cov(noisy_tmsv(0.5, 0.4, 0.0), NonLocalFrame::unit()));
  CHECK(res.best.value <= optimal_detv_witness(w) + 1e-6);
}

TEST_CASE("displacement never changes an optimized witness", "[optimize][displacement][property]") {
  const Eigen::Vector2d shift(1.7, -0.9);
  SearchSpace sp;
  sp.branches = {Branch::Plus};
  sp.phis = {0.0, 0.5};
  sp.log_xi = std::pair{-0.4, 0.4};
  sp.xi_grid = 3;
  const auto plain = [](const NonLocalFrame& f) { return mixture_husimi({0.8, 2, 0.3}, f); };
  const auto moved = [&](const NonLocalFrame& f) { return displace(mixture_husimi({0.8, 2, 0.3}, f), shift); };
  for (const WitnessId& id : {WitnessId::detv(), WitnessId::renyi(2), WitnessId::mgvt()}) {
    const auto a = optimize_witness(plain, id, sp), b = optimize_witness(moved, id, sp);
    INFO(id.label());
    CHECK_THAT(b.best.value, WithinAbs(a.best.value, 1e-6));
  }
}

TEST_CASE("MGVT and detV agree after optimization on a Gaussian battery", "[optimize][mgvt][property]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lam(0.05, 0.9), noise(0.0, 1.2);
  SearchSpace sp;
  sp.phis = {0.0, kPi / 4, kPi / 2, 3 * kPi / 4};
  sp.log_xi = std::pair{-3.0, 3.0};
  sp.scalings = true;
  int entangled = 0, separable = 0;
  for (int i = 0; i < 20; ++i) {
    const GaussianNormalForm nf = noisy_tmsv(lam(rng), noise(rng), noise(rng));
    const auto state = [&](const NonLocalFrame& f) { return gaussian_husimi(nf, f); };
    const double mg = optimize_witness(state, WitnessId::mgvt(), sp).best.value;
    const double dv = optimize_witness(state, WitnessId::detv(), sp).best.value;
    CAPTURE(i, nf.m1, nf.m2, nf.mplus, mg, dv);
    CHECK((mg < 0) == (dv < 0));
    (dv < 0 ? entangled : separable)++;
  }
  CHECK(entangled > 0);
  CHECK(separable > 0);
}
