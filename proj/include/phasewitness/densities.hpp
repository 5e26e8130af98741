#pragma once

#include "density.hpp"
#include "quadrature.hpp"

#include <memory>

namespace phasewitness {

/// Simon normal form of a two-mode Wigner covariance matrix.
struct GaussianNormalForm {
  double m1 = 0.5, m2 = 0.5, mplus = 0.0, mminus = 0.0;

  /// 4x4 Wigner covariance in (X1,P1,X2,P2) ordering.
  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d g;
    g << m1, 0, mplus, 0,  //
        0, m1, 0, mminus,  //
        mplus, 0, m2, 0,   //
        0, mminus, 0, m2;
    return g;
  }

  static GaussianNormalForm vacuum() { return {}; }

  /// Two-mode squeezed vacuum with squeezing parameter λ ∈ [0,1).
  static GaussianNormalForm tmsv(double lambda) {
    if (!(lambda >= 0 && lambda < 1)) throw InvalidArgument("TMSV requires 0 <= lambda < 1");
    const double d = 1.0 - lambda * lambda;
    return {(1 + lambda * lambda) / (2 * d), (1 + lambda * lambda) / (2 * d), -lambda / d, lambda / d};
  }
};

struct ExampleStateParams {
  double sigma_plus = 1.0;
  double sigma_minus = 1.0;
};

struct MixtureParams {
  double lambda = 0.0;
  double r = 0.0;
  double p = 0.0;
};

/// Wigner covariance of the branch pair after the frame congruence, γ = S Γ_b Sᵀ.
inline Eigen::Matrix2d branch_wigner_cov(const GaussianNormalForm& nf, const NonLocalFrame& frame) {
  const Eigen::Matrix4d g = frame_matrix(frame);
  const Eigen::Matrix4d gamma = g * nf.matrix() * g.transpose();
  const int o = frame.branch() == Branch::Plus ? 0 : 2;
  const Eigen::Matrix2d block = gamma.block<2, 2>(o, o);
  const Eigen::Matrix2d s = frame.congruence();
  return s * block * s.transpose();
}

namespace detail {

inline bool positive_definite(const Eigen::Matrix2d& m) { return m(0, 0) > 0 && m.determinant() > 0; }

inline std::shared_ptr<const Density2D> wigner_of_mixture(const std::vector<GaussComponent>& wig,
                                                          const NonLocalFrame& frame, const std::string& name) {
  for (const auto& c : wig)
    if (!positive_definite(c.cov)) return nullptr;
  return std::make_shared<const Density2D>(make_mixture_density(wig, frame, name + "_wigner", false));
}

}  // namespace detail

/// Gaussian Husimi density V = S γ Sᵀ + γ̄ of the frame's branch pair.
inline Density2D gaussian_husimi(const GaussianNormalForm& nf, const NonLocalFrame& frame) {
  const Eigen::Matrix2d gamma = branch_wigner_cov(nf, frame);
  const Eigen::Matrix2d v = gamma + frame.vacuum_wigner_cov();
  if (!detail::positive_definite(v)) throw InvalidState("Husimi covariance is not positive definite");
  GaussComponent c{1.0, Eigen::Vector2d::Zero(), v};
  Density2D d = make_mixture_density({c}, frame, "gaussian");
  d.peak_bound = 1.0 / std::sqrt(v.determinant());
  d.wigner = detail::wigner_of_mixture({GaussComponent{1.0, Eigen::Vector2d::Zero(), gamma}}, frame, "gaussian");
  return d;
}

inline Density2D tmsv_husimi(double lambda, const NonLocalFrame& frame) {
  Density2D d = gaussian_husimi(GaussianNormalForm::tmsv(lambda), frame);
  d.name = "tmsv";
  return d;
}

inline Density2D vacuum_husimi(const NonLocalFrame& frame) {
  Density2D d = gaussian_husimi(GaussianNormalForm::vacuum(), frame);
  d.name = "vacuum";
  return d;
}

/// Mixture of two displaced TMSV states with weights (1-p, p) at (±r, 0).
inline Density2D mixture_husimi(const MixtureParams& mp, const NonLocalFrame& frame) {
  if (!frame.unit_scalings()) throw UnsupportedFrame("mixture state is defined for unit scalings only");
  if (!(mp.lambda >= 0 && mp.lambda < 1)) throw InvalidArgument("mixture requires 0 <= lambda < 1");
  if (!(mp.r >= 0)) throw InvalidArgument("mixture displacement must be >= 0");
  if (!(mp.p >= 0 && mp.p <= 1)) throw InvalidArgument("mixture probability must lie in [0,1]");
  const double l = mp.lambda;
  const double wig_var = frame.branch() == Branch::Plus ? (1 - l) / (1 + l) : (1 + l) / (1 - l);
  const Eigen::Matrix2d s = frame.congruence();
  const Eigen::Matrix2d gamma = s * (wig_var * Eigen::Matrix2d::Identity()) * s.transpose();
  const Eigen::Matrix2d v = gamma + frame.vacuum_wigner_cov();
  std::vector<GaussComponent> hus, wig;
  const double w[2] = {1 - mp.p, mp.p};
  const double x[2] = {mp.r, -mp.r};
  for (int k = 0; k < 2; ++k) {
    if (w[k] <= 0) continue;
    const Eigen::Vector2d m = s * Eigen::Vector2d(x[k], 0.0);
    hus.push_back({w[k], m, v});
    wig.push_back({w[k], m, gamma});
  }
  Density2D d = make_mixture_density(hus, frame, "mixture");
  d.wigner = detail::wigner_of_mixture(wig, frame, "mixture");
  return d;
}

/// Single-mode coherent-state (vacuum) Husimi Q(x,p) = exp(-(x²+p²)/2), peak 1.
inline Density2D coherent_husimi() {
  Density2D d = make_mixture_density({GaussComponent{1.0, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()}},
                                     NonLocalFrame::unit(), "coherent");
  d.peak_bound = 1.0;
  return d;
}

/// First excited Fock state Q(x,p) = ((x²+p²)/2) exp(-(x²+p²)/2).
inline Density2D fock1_husimi() {
  Density2D d;
  d.name = "fock1";
  d.frame = NonLocalFrame::unit();
  d.log_fn = [](double x, double p) {
    const double u = 0.5 * (x * x + p * p);
    return u > 0 ? std::log(u) - u : kNegInf;
  };
  d.support = Box{-9, 9, -9, 9};
  d.peak_bound = std::exp(-1.0);
  d.mean = Eigen::Vector2d::Zero();
  d.cov = Cov2::diagonal(2.0);
  return d;
}

/// Mean and covariance of a density: mixture closed forms or quadrature.
struct Moments {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Cov2 cov;
  double error = 0.0;
};

inline Moments moments_on_box(const Density2D& d, const Box& box, const QuadratureSpec& spec = {}) {
  QuadratureSpec sp = spec;
  sp.box.reset();
  auto mom = [&](auto g) { return integrate_2d([&](double r, double s) { return d.eval(r, s) * g(r, s); }, box, sp); };
  const auto n = mom([](double, double) { return 1.0; });
  const auto mr = mom([](double r, double) { return r; });
  const auto ms = mom([](double, double s) { return s; });
  Moments m;
  m.mean = {mr.value / n.value, ms.value / n.value};
  const double cr = m.mean.x(), cs = m.mean.y();
  const auto vrr = mom([&](double r, double) { return (r - cr) * (r - cr); });
  const auto vss = mom([&](double, double s) { return (s - cs) * (s - cs); });
  const auto vrs = mom([&](double r, double s) { return (r - cr) * (s - cs); });
  m.cov = {vrr.value / n.value, vss.value / n.value, vrs.value / n.value};
  m.error = std::max({n.error, vrr.error, vss.error, vrs.error});
  if (!(n.converged && vrr.converged && vss.converged && vrs.converged))
    throw NumericError("moment quadrature did not converge", m.error);
  return m;
}

inline Moments moments(const Density2D& d, const QuadratureSpec& spec = {}) {
  if (d.mean && d.cov) return {*d.mean, *d.cov, 0.0};
  return moments_on_box(d, spec.box ? *spec.box : d.support, spec);
}

/// Wigner-level covariance γ = V - γ̄ (the covariance entry passes through).
inline Cov2 wigner_from_husimi_cov(const Cov2& v, const NonLocalFrame& frame) {
  const Eigen::Matrix2d g = frame.vacuum_wigner_cov();
  Cov2 w{v.vrr - g(0, 0), v.vss - g(1, 1), v.vrs};
  if (w.vrr < 0 || w.vss < 0) throw InvalidState("Husimi covariance smaller than the vacuum contribution");
  return w;
}

namespace detail {

inline void require_example_frame(const NonLocalFrame& frame) {
  if (!frame.unit_scalings()) throw UnsupportedFrame("example state closed forms require unit scalings");
  if (frame.theta1() != 0 || frame.theta2() != 0)
    throw UnsupportedFrame("example state orientation is set through phi and xi; theta1, theta2 must be 0");
}

}  // namespace detail

/// Wigner and Husimi densities of the example pure state for the frame's branch.
inline std::pair<Density2D, Density2D> example_state(const ExampleStateParams& p, const NonLocalFrame& frame) {
  detail::require_example_frame(frame);
  if (!(p.sigma_plus > 0 && p.sigma_minus > 0)) throw InvalidArgument("example state widths must be positive");
  const double sp = p.sigma_plus, sm = p.sigma_minus, xi = frame.xi(), phi = frame.phi();
  const double c = std::cos(phi), sn = std::sin(phi);
  const bool plus = frame.branch() == Branch::Plus;
  const double s_mp = plus ? sm : sp;  // σ∓
  const double s_pm = plus ? sp : sm;  // σ±

  Density2D w;
  w.name = "example_wigner";
  w.frame = frame;
  w.husimi = false;
  {
    const double k_u = s_mp * s_mp / 2, k_v = 1 / (2 * s_pm * s_pm);
    const double pref = plus ? sm / (sp * sp * sp) : sp * sp * sp / sm;
    // Stored w.r.t. dμ: the Lebesgue-normalized expression times 2π.
    w.log_fn = [=](double r, double s) {
      const double u = xi * sn * r - c * s / xi;
      const double v = xi * c * r + sn * s / xi;
      const double poly = plus ? v * v : u * u;
      if (poly <= 0) return kNegInf;
      return -k_u * u * u - k_v * v * v + std::log(pref * poly);
    };
  }

  Density2D q;
  q.name = "example";
  q.frame = frame;
  {
    const double log_pre = -0.5 * std::log((xi * xi + sm * sm) * std::pow(xi * xi + sp * sp, 5));
    const double k_u = s_mp * s_mp / (2 * (xi * xi + s_mp * s_mp));
    const double k_v = xi * xi / (2 * (xi * xi + s_pm * s_pm));
    q.log_fn = [=](double r, double s) {
      const double u = sn * r - c * s;
      const double v = c * r + sn * s;
      const double poly = plus ? xi * xi * xi * sm * (xi * xi + sp * sp * (1 + v * v))
                               : xi * sp * sp * sp * (sp * sp + xi * xi * (1 + u * u));
      return log_pre - k_u * u * u - k_v * v * v + std::log(poly);
    };
  }

  // Support from quadrature moments over a generous box.
  const double scale = std::max(xi, 1 / xi) * std::sqrt(3.0) * std::max({sp, sm, 1 / sp, 1 / sm}) + 1.0;
  const Box big{-10 * scale, 10 * scale, -10 * scale, 10 * scale};
  QuadratureSpec sp_spec;
  sp_spec.refinement = 1;
  sp_spec.rel_tol = 1e-4;
  sp_spec.abs_tol = 1e-6;
  Moments mq;
  try {
    mq = moments_on_box(q, big, sp_spec);
  } catch (const NumericError&) {
    sp_spec.refinement = 3;
    mq = moments_on_box(q, big, sp_spec);
  }
  q.support = Box::around(mq.mean, 8 * std::sqrt(mq.cov.vrr), 8 * std::sqrt(mq.cov.vss));
  // Wigner spread is below the Husimi spread in every direction.
  w.support = q.support;
  // Q ≤ 1/A for any physical state in the unit frame.
  q.peak_bound = frame.t_max();
  double wpeak = 0;
  {
    const int n = 256;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double r = q.support.r0 + (i + 0.5) * q.support.width() / n;
        const double s = q.support.s0 + (j + 0.5) * q.support.height() / n;
        wpeak = std::max(wpeak, w.eval(r, s));
      }
  }
  w.peak_bound = 2 * wpeak;
  q.wigner = std::make_shared<const Density2D>(w);
  return {w, q};
}

}  // namespace phasewitness
