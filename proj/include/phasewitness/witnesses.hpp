#pragma once

#include "densities.hpp"
#include "quadrature.hpp"

#include <array>
#include <cstdio>
#include <optional>
#include <string>

namespace phasewitness {

enum class WitnessKind { GeneralF, RenyiWehrl, TsallisWehrl, Wehrl, DetV, DetVChi, DGCZ, MGVT, WTSTD, STW, Discretized };
enum class Method { Analytic, Quadrature, Sampled };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Analytic: return "analytic";
    case Method::Quadrature: return "quadrature";
    case Method::Sampled: return "sampled";
  }
  return "?";
}

inline std::string format_param(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Witness identity with its order parameters.
struct WitnessId {
  WitnessKind kind = WitnessKind::Wehrl;
  double p1 = 0.0;  // β for Rényi/χ, γ for Tsallis, α for STW
  double p2 = 0.0;  // β for STW
  WitnessKind base = WitnessKind::Wehrl;  // underlying witness of a Discretized variant

  static WitnessId renyi(double beta) { return {WitnessKind::RenyiWehrl, beta}; }
  static WitnessId tsallis(double gamma) { return {WitnessKind::TsallisWehrl, gamma}; }
  static WitnessId wehrl() { return {WitnessKind::Wehrl}; }
  static WitnessId detv() { return {WitnessKind::DetV}; }
  static WitnessId detv_chi(double beta) { return {WitnessKind::DetVChi, beta}; }
  static WitnessId dgcz() { return {WitnessKind::DGCZ}; }
  static WitnessId mgvt() { return {WitnessKind::MGVT}; }
  static WitnessId wtstd() { return {WitnessKind::WTSTD}; }
  static WitnessId stw(double alpha, double beta) { return {WitnessKind::STW, alpha, beta}; }
  static WitnessId general() { return {WitnessKind::GeneralF}; }
  static WitnessId discretized(const WitnessId& b) { return {WitnessKind::Discretized, b.p1, b.p2, b.kind}; }

  static std::string kind_name(WitnessKind k) {
    switch (k) {
      case WitnessKind::GeneralF: return "general";
      case WitnessKind::RenyiWehrl: return "renyi";
      case WitnessKind::TsallisWehrl: return "tsallis";
      case WitnessKind::Wehrl: return "wehrl";
      case WitnessKind::DetV: return "detv";
      case WitnessKind::DetVChi: return "detv_chi";
      case WitnessKind::DGCZ: return "dgcz";
      case WitnessKind::MGVT: return "mgvt";
      case WitnessKind::WTSTD: return "wtstd";
      case WitnessKind::STW: return "stw";
      case WitnessKind::Discretized: return "discretized";
    }
    return "?";
  }

  std::string label() const {
    const WitnessKind k = kind == WitnessKind::Discretized ? base : kind;
    std::string s = kind_name(k);
    switch (k) {
      case WitnessKind::RenyiWehrl:
      case WitnessKind::TsallisWehrl:
      case WitnessKind::DetVChi: s += "(" + format_param(p1) + ")"; break;
      case WitnessKind::STW: s += "(" + format_param(p1) + "," + format_param(p2) + ")"; break;
      default: break;
    }
    return kind == WitnessKind::Discretized ? "discretized_" + s : s;
  }

  /// Parses "wehrl", "detv", "dgcz", "mgvt", "wtstd", "renyi", "tsallis", "detv_chi", "stw".
  static WitnessKind parse_kind(const std::string& s) {
    for (auto k : {WitnessKind::GeneralF, WitnessKind::RenyiWehrl, WitnessKind::TsallisWehrl, WitnessKind::Wehrl,
                   WitnessKind::DetV, WitnessKind::DetVChi, WitnessKind::DGCZ, WitnessKind::MGVT, WitnessKind::WTSTD,
                   WitnessKind::STW})
      if (kind_name(k) == s) return k;
    throw InvalidArgument("unknown witness '" + s + "'");
  }
};

struct WitnessReport {
  WitnessId id;
  NonLocalFrame frame;
  double value = 0.0;
  bool entangled = false;
  Method method = Method::Analytic;
  double error_estimate = 0.0;
};

/// A value counts as a violation only below -max(1e-9, 3·error).
inline double flag_tolerance(double error) { return std::max(1e-9, 3.0 * error); }

inline WitnessReport make_report(const WitnessId& id, const NonLocalFrame& frame, double value, Method method,
                                 double error = 0.0) {
  if (!std::isfinite(value)) throw NumericError("witness value is not finite", error);
  WitnessReport r;
  r.id = id;
  r.frame = frame;
  r.value = value;
  r.method = method;
  r.error_estimate = std::abs(error);
  r.entangled = value < -flag_tolerance(r.error_estimate);
  return r;
}

// ---------------------------------------------------------------------------
// Phase-space integrals with Gaussian fast paths.

/// log ∫ Q^β dμ and its absolute error on the log scale.
inline std::pair<double, double> log_power_integral(const Density2D& d, double beta, const QuadratureSpec& spec = {}) {
  if (d.is_gaussian()) {
    const double det = d.gaussian_det();
    return {0.5 * (1 - beta) * std::log(det) - std::log(beta), 0.0};
  }
  const double lp = std::log(d.peak_bound);
  const Box box = spec.box ? *spec.box : f_aware_box(d, beta);
  const auto res = integrate_2d([&](double r, double s) { return std::exp(beta * (d.log_eval(r, s) - lp)); }, box, spec);
  if (!(res.value > 0)) throw NumericError("power integral vanished", res.error);
  return {beta * lp + std::log(res.value), res.error / res.value};
}

/// Wehrl entropy -∫ Q ln Q dμ.
inline QuadResult wehrl_entropy(const Density2D& d, const QuadratureSpec& spec = {}) {
  if (d.is_gaussian()) return {1.0 + 0.5 * std::log(d.gaussian_det()), 0.0, true, 0};
  return integrate_f_of_density(d, make_concave(ConcaveKind::NegTLogT, d.peak_bound), spec);
}

/// Rényi-Wehrl entropy S_β = ln(∫Q^β dμ)/(1-β).
inline std::pair<double, double> renyi_wehrl_entropy(const Density2D& d, double beta, const QuadratureSpec& spec = {}) {
  if (!(beta > 0) || beta == 1.0) throw InvalidArgument("Renyi order must be > 0 and != 1");
  auto [li, err] = log_power_integral(d, beta, spec);
  return {li / (1 - beta), err / std::abs(1 - beta)};
}

// ---------------------------------------------------------------------------
// Phase-space witnesses.

inline WitnessReport witness_general(const Density2D& d, const ConcaveFn& f, const NonLocalFrame& frame,
                                     const QuadratureSpec& spec = {}) {
  if (!f.concave()) throw InvalidArgument("witness_general requires a concave f; convex monomials go through entropic witnesses");
  if (f.domain_max() < std::max(d.peak_bound, frame.t_max()) * (1 - 1e-12))
    throw InvalidArgument("domain of f does not cover the range of Q");
  const VacuumRef vac(frame);
  const double ref = vac.integral_f(f);
  if (d.is_gaussian() && f.kind() == ConcaveKind::Monomial) {
    const double det = d.gaussian_det(), b = f.beta();
    return make_report(WitnessId::general(), frame, std::pow(det, 0.5 * (1 - b)) / b - ref, Method::Analytic);
  }
  if (d.is_gaussian() && f.kind() == ConcaveKind::NegTLogT)
    return make_report(WitnessId::general(), frame, 1 + 0.5 * std::log(d.gaussian_det()) - ref, Method::Analytic);
  const auto q = integrate_f_of_density(d, f, spec);
  return make_report(WitnessId::general(), frame, q.value - ref, Method::Quadrature, q.error);
}

inline WitnessReport witness_wehrl(const Density2D& d, const NonLocalFrame& frame, const QuadratureSpec& spec = {}) {
  const auto s = wehrl_entropy(d, spec);
  const double value = s.value - 1.0 - std::log(frame.A());
  return make_report(WitnessId::wehrl(), frame, value, d.is_gaussian() ? Method::Analytic : Method::Quadrature, s.error);
}

inline WitnessReport witness_renyi_wehrl(const Density2D& d, double beta, const NonLocalFrame& frame,
                                         const QuadratureSpec& spec = {}) {
  if (beta == 1.0) {
    auto r = witness_wehrl(d, frame, spec);
    r.id = WitnessId::renyi(1.0);
    return r;
  }
  if (!(beta > 0)) throw InvalidArgument("Renyi order must be > 0");
  auto [s, err] = renyi_wehrl_entropy(d, beta, spec);
  const double value = s - std::log(beta) / (beta - 1) - std::log(frame.A());
  return make_report(WitnessId::renyi(beta), frame, value, d.is_gaussian() ? Method::Analytic : Method::Quadrature, err);
}

inline WitnessReport witness_tsallis_wehrl(const Density2D& d, double gamma, const NonLocalFrame& frame,
                                           const QuadratureSpec& spec = {}) {
  if (!(gamma > 0)) throw InvalidArgument("Tsallis order must be > 0");
  if (gamma == 1.0) {
    auto r = witness_wehrl(d, frame, spec);
    r.id = WitnessId::tsallis(1.0);
    return r;
  }
  auto [li, lerr] = log_power_integral(d, gamma, spec);
  const double integral = std::exp(li);
  const double ref = std::pow(frame.A(), 1 - gamma) / gamma;
  const double value = (ref - integral) / (gamma - 1);
  return make_report(WitnessId::tsallis(gamma), frame, value, d.is_gaussian() ? Method::Analytic : Method::Quadrature,
                     integral * lerr / std::abs(gamma - 1));
}

// ---------------------------------------------------------------------------
// Second-moment witnesses.

inline WitnessReport witness_detv(const Cov2& v, const NonLocalFrame& frame) {
  return make_report(WitnessId::detv(), frame, v.det() - frame.A() * frame.A(), Method::Analytic);
}

/// χ(β) = (2 - 1/β)^(-2β/(β-1)) β^(2/(β-1)) for β > 1/2, χ(1) = 1.
inline double chi(double beta) {
  if (!(beta > 0.5)) throw InvalidArgument("chi(beta) requires beta > 1/2");
  if (beta == 1.0) return 1.0;
  const double e = beta - 1;
  return std::exp(-2 * beta / e * std::log(2 - 1 / beta) + 2 / e * std::log(beta));
}

inline WitnessReport witness_detv_chi(const Cov2& v, double beta, const NonLocalFrame& frame) {
  if (!(beta > 0.5) || beta == 1.0) throw InvalidArgument("detv_chi requires beta > 1/2 and beta != 1");
  return make_report(WitnessId::detv_chi(beta), frame, v.det() - chi(beta) * frame.A() * frame.A(), Method::Analytic);
}

inline WitnessReport witness_dgcz(const Cov2& w, const NonLocalFrame& frame) {
  return make_report(WitnessId::dgcz(), frame, w.vrr + w.vss - frame.A(), Method::Analytic);
}

inline WitnessReport witness_mgvt(const Cov2& w, const NonLocalFrame& frame) {
  return make_report(WitnessId::mgvt(), frame, w.vrr * w.vss - frame.A() * frame.A() / 4, Method::Analytic);
}

// ---------------------------------------------------------------------------
// Marginal-based witnesses. Marginals are Lebesgue probability densities.

struct Marginal1D {
  std::function<double(double)> pdf;
  double lo = 0, hi = 0;
  // Gaussian-mixture representation (weight, mean, variance) when exact.
  std::vector<std::array<double, 3>> gauss;
};

namespace detail {

inline Marginal1D gaussian_marginal(const std::vector<GaussComponent>& comps, int axis) {
  Marginal1D m;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : comps) {
    const double mu = c.mean(axis), var = c.cov(axis, axis);
    m.gauss.push_back({c.weight, mu, var});
    lo = std::min(lo, mu - 12 * std::sqrt(var));
    hi = std::max(hi, mu + 12 * std::sqrt(var));
  }
  m.lo = lo;
  m.hi = hi;
  auto g = m.gauss;
  m.pdf = [g](double x) {
    double acc = 0;
    for (const auto& [w, mu, var] : g) acc += w * std::exp(-(x - mu) * (x - mu) / (2 * var)) / std::sqrt(kTwoPi * var);
    return acc;
  };
  return m;
}

inline Marginal1D numeric_marginal(std::shared_ptr<const Density2D> w, int axis) {
  Marginal1D m;
  const Box b = w->support;
  m.lo = axis == 0 ? b.r0 : b.s0;
  m.hi = axis == 0 ? b.r1 : b.s1;
  const double olo = axis == 0 ? b.s0 : b.r0, ohi = axis == 0 ? b.s1 : b.r1;
  m.pdf = [w, axis, olo, ohi](double x) {
    const int n = 1024;
    const double h = (ohi - olo) / n;
    KahanSum acc;
    for (int i = 0; i < n; ++i) {
      const double y = olo + (i + 0.5) * h;
      acc.add(axis == 0 ? w->eval(x, y) : w->eval(y, x));
    }
    return acc.value() * h / kTwoPi;
  };
  return m;
}

}  // namespace detail

/// True quadrature marginals (f of r, g of s) from the Wigner density attached to a Husimi density.
inline std::pair<Marginal1D, Marginal1D> wigner_marginals(const Density2D& husimi) {
  if (!husimi.wigner) throw InvalidArgument("density has no associated Wigner distribution");
  const auto& w = husimi.wigner;
  if (w->is_mixture()) return {detail::gaussian_marginal(w->mixture, 0), detail::gaussian_marginal(w->mixture, 1)};
  return {detail::numeric_marginal(w, 0), detail::numeric_marginal(w, 1)};
}

inline QuadratureSpec marginal_spec() {
  QuadratureSpec s;
  s.base_resolution = 2048;
  s.refinement = 2;
  s.abs_tol = 1e-10;
  s.rel_tol = 1e-8;
  return s;
}

/// Shannon differential entropy -∫ p ln p dx.
inline QuadResult marginal_entropy(const Marginal1D& m, const QuadratureSpec& spec = marginal_spec()) {
  const auto norm = integrate_1d(m.pdf, m.lo, m.hi, spec);
  if (std::abs(norm.value - 1) > 1e-6) throw InvalidArgument("marginal is not normalized");
  if (m.gauss.size() == 1) {
    const double var = m.gauss[0][2];
    return {0.5 * std::log(kTwoPi * std::exp(1.0) * var), 0.0, true, 0};
  }
  return integrate_1d(
      [&](double x) {
        const double p = m.pdf(x);
        return p > 0 ? -p * std::log(p) : 0.0;
      },
      m.lo, m.hi, spec);
}

/// Maximum of a marginal density: grid peak refined by golden-section search.
inline double marginal_max(const Marginal1D& m) {
  const int n = 2048;
  const double h = (m.hi - m.lo) / n;
  int best = 0;
  double bv = -1;
  for (int i = 0; i < n; ++i) {
    const double v = m.pdf(m.lo + (i + 0.5) * h);
    if (v > bv) {
      bv = v;
      best = i;
    }
  }
  double a = m.lo + (best - 0.5) * h, b = m.lo + (best + 1.5) * h;
  const double gr = 0.5 * (std::sqrt(5.0) - 1);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = m.pdf(c), fd = m.pdf(d);
  for (int it = 0; it < 100 && b - a > 1e-13 * (1 + std::abs(a)); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = m.pdf(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = m.pdf(d);
    }
  }
  return std::max({bv, fc, fd});
}

/// Rényi entropy of order α ∈ (0,∞]; α = 1 is the Shannon entropy, α = ∞ the min-entropy.
inline QuadResult marginal_renyi_entropy(const Marginal1D& m, double alpha, const QuadratureSpec& spec = marginal_spec()) {
  if (!(alpha > 0)) throw InvalidArgument("Renyi order must be > 0");
  if (alpha == 1.0) return marginal_entropy(m, spec);
  if (std::isinf(alpha)) return {-std::log(marginal_max(m)), 0.0, true, 0};
  if (m.gauss.size() == 1) {
    const double var = m.gauss[0][2];
    return {0.5 * std::log(kTwoPi * var) + std::log(alpha) / (2 * (alpha - 1)), 0.0, true, 0};
  }
  const auto q = integrate_1d([&](double x) { return std::pow(m.pdf(x), alpha); }, m.lo, m.hi, spec);
  return {std::log(q.value) / (1 - alpha), q.error / (q.value * std::abs(1 - alpha)), q.converged, q.resolution};
}

inline WitnessReport witness_wtstd(const Marginal1D& f, const Marginal1D& g, const NonLocalFrame& frame) {
  const auto sf = marginal_entropy(f), sg = marginal_entropy(g);
  const double value = sf.value + sg.value - 1 - std::log(kPi) - std::log(frame.A());
  const bool analytic = f.gauss.size() == 1 && g.gauss.size() == 1;
  return make_report(WitnessId::wtstd(), frame, value, analytic ? Method::Analytic : Method::Quadrature,
                     sf.error + sg.error);
}

namespace detail {
// ln x / (2(1-x)) with its limits at x = 1 and x = ∞.
inline double stw_term(double x) {
  if (std::isinf(x)) return 0.0;
  if (std::abs(x - 1) < 1e-7) return -0.5 + 0.25 * (x - 1);
  return std::log(x) / (2 * (1 - x));
}
}  // namespace detail

inline WitnessReport witness_stw(const Marginal1D& f, const Marginal1D& g, double alpha, double beta,
                                 const NonLocalFrame& frame) {
  if (!(alpha > 0) || !(beta > 0)) throw InvalidArgument("STW orders must be positive");
  const double lhs = 1 / alpha + (std::isinf(beta) ? 0.0 : 1 / beta);
  if (std::abs(lhs - 2) > 1e-9) throw InvalidArgument("STW orders must satisfy 1/alpha + 1/beta = 2");
  const auto sa = marginal_renyi_entropy(f, alpha), sb = marginal_renyi_entropy(g, beta);
  const double value = sa.value + sb.value + detail::stw_term(alpha) + detail::stw_term(beta) - std::log(kPi) -
                       std::log(frame.A());
  const bool analytic = f.gauss.size() == 1 && g.gauss.size() == 1;
  return make_report(WitnessId::stw(alpha, beta), frame, value, analytic ? Method::Analytic : Method::Quadrature,
                     sa.error + sb.error);
}

// ---------------------------------------------------------------------------
// Correlations and the entropic decomposition.

namespace detail {
inline double grid_mutual_information(const Density2D& d, const Box& box, int n) {
  const DensityGrid grid(d, box, n);
  std::vector<double> pr(n, 0.0), ps(n, 0.0);
  const double hr = box.width() / n, hs = box.height() / n;
  std::vector<double> p(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = std::exp(grid.log_q(i, j)) / kTwoPi;
      p[static_cast<std::size_t>(i) * n + j] = v;
      pr[i] += v * hs;
      ps[j] += v * hr;
    }
  KahanSum acc;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = p[static_cast<std::size_t>(i) * n + j];
      if (v > 0 && pr[i] > 0 && ps[j] > 0) acc.add(v * std::log(v / (pr[i] * ps[j])) * hr * hs);
    }
  return acc.value();
}
}  // namespace detail

/// Mutual information I(F:G) of the Husimi marginals.
inline QuadResult mutual_information(const Density2D& d, int resolution = 512) {
  if (d.is_gaussian()) {
    const auto& c = d.mixture[0].cov;
    const double rho2 = c(0, 1) * c(0, 1) / (c(0, 0) * c(1, 1));
    return {-0.5 * std::log1p(-rho2), 0.0, true, 0};
  }
  const double fine = detail::grid_mutual_information(d, d.support, resolution);
  const double coarse = detail::grid_mutual_information(d, d.support, resolution / 2);
  return {std::max(0.0, fine), std::abs(fine - coarse), true, resolution};
}

struct DecompositionResult {
  double w1 = 0, w_wtstd = 0, mi = 0;
  bool inequality_holds = false;
  double margin = 0;  // w1 - (w_wtstd/2 - mi)
};

inline DecompositionResult decomposition_check(const Density2D& d, const NonLocalFrame& frame,
                                               const QuadratureSpec& spec = {}) {
  DecompositionResult r;
  r.w1 = witness_wehrl(d, frame, spec).value;
  auto [f, g] = wigner_marginals(d);
  r.w_wtstd = witness_wtstd(f, g, frame).value;
  r.mi = mutual_information(d).value;
  r.margin = r.w1 - (0.5 * r.w_wtstd - r.mi);
  r.inequality_holds = r.margin >= -1e-6;
  return r;
}

// ---------------------------------------------------------------------------
// Dispatch on a witness identity for a Husimi density.

inline WitnessReport evaluate_witness(const Density2D& d, const WitnessId& id, const NonLocalFrame& frame,
                                      const QuadratureSpec& spec = {}) {
  switch (id.kind) {
    case WitnessKind::RenyiWehrl: return witness_renyi_wehrl(d, id.p1, frame, spec);
    case WitnessKind::TsallisWehrl: return witness_tsallis_wehrl(d, id.p1, frame, spec);
    case WitnessKind::Wehrl: return witness_wehrl(d, frame, spec);
    case WitnessKind::DetV: return witness_detv(moments(d, spec).cov, frame);
    case WitnessKind::DetVChi: return witness_detv_chi(moments(d, spec).cov, id.p1, frame);
    case WitnessKind::DGCZ: return witness_dgcz(wigner_from_husimi_cov(moments(d, spec).cov, frame), frame);
    case WitnessKind::MGVT: return witness_mgvt(wigner_from_husimi_cov(moments(d, spec).cov, frame), frame);
    case WitnessKind::WTSTD: {
      auto [f, g] = wigner_marginals(d);
      return witness_wtstd(f, g, frame);
    }
    case WitnessKind::STW: {
      auto [f, g] = wigner_marginals(d);
      return witness_stw(f, g, id.p1, id.p2, frame);
    }
    case WitnessKind::GeneralF:
    case WitnessKind::Discretized: break;
  }
  throw InvalidArgument("witness '" + id.label() + "' needs an explicit function or tiling");
}

}  // namespace phasewitness
