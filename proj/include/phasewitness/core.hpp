#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace phasewitness {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Error hierarchy. Every library failure derives from Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidArgument : Error {
  using Error::Error;
};
struct InvalidState : Error {
  using Error::Error;
};
struct UnsupportedFrame : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
  double estimate = 0.0;
  NumericError(const std::string& msg, double est) : Error(msg), estimate(est) {}
};

enum class Branch { Plus, Minus };

inline std::string to_string(Branch b) { return b == Branch::Plus ? "plus" : "minus"; }

inline Branch branch_from_string(const std::string& s) {
  if (s == "plus" || s == "+") return Branch::Plus;
  if (s == "minus" || s == "-") return Branch::Minus;
  throw InvalidArgument("unknown branch '" + s + "'");
}

inline double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

// 2x2 rotation T(theta) = [[cos, sin], [-sin, cos]].
inline Eigen::Matrix2d rotation(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d t;
  t << c, s, -s, c;
  return t;
}

/// Non-local frame: scalings, local rotation angles, non-local rotation phi,
/// squeezing xi and the variable pair selected by the branch.
class NonLocalFrame {
 public:
  NonLocalFrame() = default;

  NonLocalFrame(double a1, double b1, double a2, double b2, double theta1 = 0.0, double theta2 = 0.0,
                double phi = 0.0, double xi = 1.0, Branch branch = Branch::Plus)
      : a1_(a1), b1_(b1), a2_(a2), b2_(b2), theta1_(wrap_angle(theta1)), theta2_(wrap_angle(theta2)),
        phi_(wrap_angle(phi)), xi_(xi), branch_(branch) {
    if (!(a1 > 0 && b1 > 0 && a2 > 0 && b2 > 0))
      throw InvalidArgument("frame scalings must be strictly positive");
    if (!(xi > 0) || !std::isfinite(xi)) throw InvalidArgument("squeezing xi must be strictly positive");
    const double p1 = a1 * b1, p2 = a2 * b2;
    if (std::abs(p1 - p2) > 1e-12 * std::max(p1, p2))
      throw InvalidArgument("frame violates a1*b1 == a2*b2");
  }

  static NonLocalFrame unit(Branch branch = Branch::Plus) {
    return NonLocalFrame(1, 1, 1, 1, 0, 0, 0, 1, branch);
  }

  double a1() const { return a1_; }
  double b1() const { return b1_; }
  double a2() const { return a2_; }
  double b2() const { return b2_; }
  double theta1() const { return theta1_; }
  double theta2() const { return theta2_; }
  double phi() const { return phi_; }
  double xi() const { return xi_; }
  Branch branch() const { return branch_; }

  /// a1 b1 + a2 b2, the vacuum variance scale of the Husimi distribution.
  double A() const { return a1_ * b1_ + a2_ * b2_; }
  double t_max() const { return 1.0 / A(); }
  bool unit_scalings() const { return a1_ == 1 && b1_ == 1 && a2_ == 1 && b2_ == 1; }

  /// Vacuum Wigner covariance of the selected pair: diag((a1²+a2²)/2, (b1²+b2²)/2).
  Eigen::Matrix2d vacuum_wigner_cov() const {
    return Eigen::Vector2d((a1_ * a1_ + a2_ * a2_) / 2, (b1_ * b1_ + b2_ * b2_) / 2).asDiagonal();
  }

  /// Congruence S = Xi T(phi) applied to the Wigner part.
  Eigen::Matrix2d congruence() const {
    return Eigen::Vector2d(xi_, 1.0 / xi_).asDiagonal() * rotation(phi_);
  }

  NonLocalFrame with_branch(Branch b) const { return rebuild(a1_, b1_, a2_, b2_, theta1_, theta2_, phi_, xi_, b); }
  NonLocalFrame with_phi(double phi) const { return rebuild(a1_, b1_, a2_, b2_, theta1_, theta2_, phi, xi_, branch_); }
  NonLocalFrame with_xi(double xi) const { return rebuild(a1_, b1_, a2_, b2_, theta1_, theta2_, phi_, xi, branch_); }
  NonLocalFrame with_angles(double t1, double t2) const {
    return rebuild(a1_, b1_, a2_, b2_, t1, t2, phi_, xi_, branch_);
  }
  NonLocalFrame with_scalings(double a1, double b1, double a2, double b2) const {
    return rebuild(a1, b1, a2, b2, theta1_, theta2_, phi_, xi_, branch_);
  }

  bool operator==(const NonLocalFrame&) const = default;

 private:
  static NonLocalFrame rebuild(double a1, double b1, double a2, double b2, double t1, double t2, double phi,
                               double xi, Branch b) {
    return NonLocalFrame(a1, b1, a2, b2, t1, t2, phi, xi, b);
  }

  double a1_ = 1, b1_ = 1, a2_ = 1, b2_ = 1;
  double theta1_ = 0, theta2_ = 0, phi_ = 0, xi_ = 1;
  Branch branch_ = Branch::Plus;
};

/// Symmetric 2x2 covariance.
struct Cov2 {
  double vrr = 0, vss = 0, vrs = 0;

  double det() const { return vrr * vss - vrs * vrs; }
  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << vrr, vrs, vrs, vss;
    return m;
  }
  static Cov2 from(const Eigen::Matrix2d& m) { return {m(0, 0), m(1, 1), 0.5 * (m(0, 1) + m(1, 0))}; }
  static Cov2 diagonal(double v) { return {v, v, 0}; }
};

/// 4x4 frame matrix G = U (T(theta1) ⊕ T(theta2)) mapping (X1,P1,X2,P2) to (R+,S-,R-,S+).
inline Eigen::Matrix4d frame_matrix(const NonLocalFrame& f) {
  Eigen::Matrix4d u;
  u << f.a1(), 0, f.a2(), 0,  //
      0, f.b1(), 0, -f.b2(),  //
      f.a1(), 0, -f.a2(), 0,  //
      0, f.b1(), 0, f.b2();
  Eigen::Matrix4d t = Eigen::Matrix4d::Zero();
  t.block<2, 2>(0, 0) = rotation(f.theta1());
  t.block<2, 2>(2, 2) = rotation(f.theta2());
  return u * t;
}

/// Single-angle reduction for equal quadrature scalings: returns (theta, phi)
/// with G(theta1,theta2) = [T(phi) ⊕ T(phi)] G(theta,0). Angles in (-pi, pi].
inline std::pair<double, double> reduce_angles(double theta1, double theta2, double a1 = 1, double b1 = 1,
                                               double a2 = 1, double b2 = 1) {
  if (std::abs(a1 - b1) > 1e-12 * a1 || std::abs(a2 - b2) > 1e-12 * a2)
    throw InvalidArgument("reduce_angles requires a1 == b1 and a2 == b2");
  const double theta = std::atan2(std::sin(theta1 + theta2), std::cos(theta1 + theta2));
  const double phi = std::atan2(std::sin(-theta2), std::cos(-theta2));
  return {theta, phi};
}

enum class ConcaveKind { Monomial, NegTLogT, Custom };

/// Function f on [0, domain_max] with f(0) = 0. Monomials with beta > 1 are
/// stored but flagged convex.
class ConcaveFn {
 public:
  ConcaveKind kind() const { return kind_; }
  double beta() const { return beta_; }
  double domain_max() const { return domain_max_; }
  bool concave() const { return concave_; }
  const std::string& name() const { return name_; }

  double operator()(double t) const {
    if (t <= 0) return 0.0;
    switch (kind_) {
      case ConcaveKind::Monomial: return std::pow(t, beta_);
      case ConcaveKind::NegTLogT: return -t * std::log(t);
      case ConcaveKind::Custom: return custom_(t);
    }
    return 0.0;
  }

  /// f evaluated from log t; stays finite where t itself underflows.
  double eval_log(double log_t) const {
    if (log_t == kNegInf) return 0.0;
    switch (kind_) {
      case ConcaveKind::Monomial: return std::exp(beta_ * log_t);
      case ConcaveKind::NegTLogT: return -std::exp(log_t) * log_t;
      case ConcaveKind::Custom: return custom_(std::exp(log_t));
    }
    return 0.0;
  }

  friend ConcaveFn make_concave(ConcaveKind, double, double);
  friend ConcaveFn make_custom(std::function<double(double)>, double, std::string);

 private:
  ConcaveKind kind_ = ConcaveKind::NegTLogT;
  double beta_ = 1.0;
  double domain_max_ = 1.0;
  bool concave_ = true;
  std::string name_ = "neg_t_log_t";
  std::function<double(double)> custom_;
};

/// Midpoint concavity on random pairs in [0, domain_max].
inline bool midpoint_concave(const std::function<double(double)>& f, double domain_max, int pairs = 1000,
                             unsigned seed = 12345) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, domain_max);
  for (int i = 0; i < pairs; ++i) {
    const double x = u(rng), y = u(rng);
    const double lhs = f(0.5 * (x + y)), rhs = 0.5 * (f(x) + f(y));
    if (lhs < rhs - 1e-12 * (1.0 + std::abs(rhs))) return false;
  }
  return true;
}

inline ConcaveFn make_concave(ConcaveKind kind, double domain_max, double beta = 1.0) {
  if (!(domain_max > 0)) throw InvalidArgument("domain_max must be positive");
  ConcaveFn f;
  f.kind_ = kind;
  f.domain_max_ = domain_max;
  switch (kind) {
    case ConcaveKind::Monomial:
      if (!(beta > 0) || !std::isfinite(beta)) throw InvalidArgument("monomial exponent must be > 0");
      if (beta == 1.0) throw InvalidArgument("monomial exponent 1 is the identity; use make_custom");
      f.beta_ = beta;
      f.concave_ = beta < 1.0;
      f.name_ = "monomial";
      break;
    case ConcaveKind::NegTLogT:
      f.beta_ = 1.0;
      f.concave_ = true;
      f.name_ = "neg_t_log_t";
      break;
    case ConcaveKind::Custom: throw InvalidArgument("custom functions are built with make_custom");
  }
  return f;
}

inline ConcaveFn make_custom(std::function<double(double)> fn, double domain_max, std::string name = "custom") {
  if (!(domain_max > 0)) throw InvalidArgument("domain_max must be positive");
  if (!fn) throw InvalidArgument("empty custom function");
  if (fn(0.0) != 0.0) throw InvalidArgument("custom function must satisfy f(0) = 0");
  ConcaveFn f;
  f.kind_ = ConcaveKind::Custom;
  f.domain_max_ = domain_max;
  f.concave_ = midpoint_concave(fn, domain_max);
  f.name_ = std::move(name);
  f.custom_ = std::move(fn);
  return f;
}

inline ConcaveFn identity_fn(double domain_max = 1.0) {
  return make_custom([](double t) { return t; }, domain_max, "identity");
}
inline ConcaveFn clipped_linear(double c, double domain_max = 1.0) {
  return make_custom([c](double t) { return std::min(t, c); }, domain_max, "min_t_c");
}
inline ConcaveFn neg_power(double beta, double domain_max = 1.0) {
  return make_custom([beta](double t) { return -std::pow(t, beta); }, domain_max, "neg_power");
}

/// Non-local vacuum reference Q̄'(r,s) = (1/A) exp(-(r²+s²)/(2A)).
struct VacuumRef {
  NonLocalFrame frame;

  explicit VacuumRef(NonLocalFrame f) : frame(std::move(f)) {}

  double peak() const { return frame.t_max(); }
  Cov2 covariance() const { return Cov2::diagonal(frame.A()); }
  double det_cov() const { return frame.A() * frame.A(); }
  double log_eval(double r, double s) const {
    const double a = frame.A();
    return -std::log(a) - (r * r + s * s) / (2 * a);
  }
  double eval(double r, double s) const { return std::exp(log_eval(r, s)); }

  /// ∫ f(Q̄') dμ. Closed forms for monomials and -t ln t; otherwise the radial
  /// reduction A ∫_0^∞ f(e^{-u}/A) du by Gauss-Legendre on ln-spaced panels.
  double integral_f(const ConcaveFn& f) const {
    const double a = frame.A();
    switch (f.kind()) {
      case ConcaveKind::Monomial: return std::pow(a, 1.0 - f.beta()) / f.beta();
      case ConcaveKind::NegTLogT: return 1.0 + std::log(a);
      case ConcaveKind::Custom: break;
    }
    const double shift = std::log(a);
    double sum = 0.0;
    const double umax = 745.0;
    const int panels = 2000;
    const double h = umax / panels;
    for (int p = 0; p < panels; ++p) sum += adaptive_panel(f, shift, p * h, (p + 1) * h, 0);
    return a * sum;
  }

 private:
  static double gauss8(const ConcaveFn& f, double shift, double lo, double hi) {
    static constexpr double x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                    0.7966664774136267,  0.9602898564975363};
    static constexpr double w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                    0.2223810344533745, 0.1012285362903763};
    const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
    double s = 0.0;
    for (int i = 0; i < 8; ++i) s += w[i] * f.eval_log(-(c + r * x[i]) - shift);
    return r * s;
  }

  // Bisects panels whose halves disagree with the whole, which resolves kinks of f.
  static double adaptive_panel(const ConcaveFn& f, double shift, double lo, double hi, int depth) {
    const double mid = 0.5 * (lo + hi);
    const double whole = gauss8(f, shift, lo, hi);
    const double halves = gauss8(f, shift, lo, mid) + gauss8(f, shift, mid, hi);
    if (depth >= 40 || std::abs(halves - whole) <= 1e-15 * (hi - lo) + 1e-14 * std::abs(halves)) return halves;
    return adaptive_panel(f, shift, lo, mid, depth + 1) + adaptive_panel(f, shift, mid, hi, depth + 1);
  }
};

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace phasewitness
