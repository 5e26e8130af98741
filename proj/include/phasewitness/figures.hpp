#pragma once

#include "discretization.hpp"
#include "majorization.hpp"
#include "optimize.hpp"
#include "report.hpp"
#include "sampling.hpp"

#include <map>
#include <string>
#include <vector>

namespace phasewitness {

struct FigureOptions {
  int lambda_steps = 30;
  int delta_steps = 40;
  int grid_steps = 5;
  int phi_steps = 64;
  int beta_steps = 25;
  int n = 1000;
  int reps = 100;
  std::uint64_t seed = 1;
};

namespace figures {

inline std::vector<double> linspace(double a, double b, int n) {
  if (n < 1) throw InvalidArgument("grid needs at least one point");
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

inline std::vector<double> logspace(double a, double b, int n) {
  auto v = linspace(std::log(a), std::log(b), n);
  for (double& x : v) x = std::exp(x);
  return v;
}

/// λ_i = i/(steps+1), i = 1..steps: interior of (0, 1).
inline std::vector<double> lambda_grid(int steps) {
  if (steps < 1) throw InvalidArgument("lambda-steps must be >= 1");
  std::vector<double> v(steps);
  for (int i = 0; i < steps; ++i) v[i] = (i + 1.0) / (steps + 1.0);
  return v;
}

inline BreakdownScan scan_for(int delta_steps) {
  if (delta_steps < 1) throw InvalidArgument("delta-steps must be >= 1");
  BreakdownScan s;
  s.step = (s.delta_max - s.delta_min) / delta_steps;
  return s;
}

inline CsvTable levels_table(const std::vector<std::pair<std::string, Density2D>>& states, int points) {
  CsvTable t({"state", "t", "m", "mu"});
  for (const auto& [name, d] : states) {
    const auto curve = level_function(d, log_t_grid(d.peak_bound, points, 1e-4));
    for (std::size_t i = 0; i < curve.t.size(); ++i) t.row({name, curve.t[i], curve.m[i], curve.mu[i]});
  }
  return t;
}

/// Vacuum and first Fock state level and density-level curves.
inline CsvTable fig1c(const FigureOptions&) {
  auto t = levels_table({{"vacuum", vacuum_husimi(NonLocalFrame::unit())}, {"fock1", fock1_husimi()}}, 200);
  t.meta("states", std::string("vacuum,fock1"));
  return t;
}

/// χ(β) on a log grid in (1/2, 100].
inline CsvTable fig2(const FigureOptions& o) {
  CsvTable t({"beta", "chi"});
  for (double b : logspace(0.5 + 1e-3, 100.0, std::max(2, o.beta_steps * 8))) t.row({b, chi(b)});
  return t;
}

/// TMSV level curves for λ ∈ {0, 1/3, 2/3} on both branches, closed forms
/// m(t) = -√D ln(t√D), μ(t) = √D/t for t ≤ 1/√D.
inline CsvTable fig2c(const FigureOptions&) {
  CsvTable t({"lambda", "branch", "t", "m", "mu"});
  for (double lam : {0.0, 1.0 / 3.0, 2.0 / 3.0})
    for (Branch br : {Branch::Plus, Branch::Minus}) {
      const double rd = std::sqrt(tmsv_husimi(lam, NonLocalFrame::unit(br)).gaussian_det());
      for (double x : log_t_grid(1.0 / rd, 200, 1e-4)) t.row({lam, to_string(br), x, -rd * std::log(x * rd), rd / x});
    }
  t.meta("lambdas", std::string("0,1/3,2/3"));
  return t;
}

/// Example-state witness map over (σ₊, σ₋) for the three (φ, ξ) columns.
inline CsvTable fig4(const FigureOptions& o, Branch branch = Branch::Plus) {
  CsvTable t({"phi", "xi", "sigma_plus", "sigma_minus", "detv", "mgvt", "wehrl", "wtstd", "renyi_small_beta_opt_xi",
              "xi_opt"});
  const std::vector<std::pair<double, double>> panels = {{0.0, 1.0}, {kPi / 4, 1.0}, {0.0, 1.5}};
  const auto sig = linspace(0.5, 4.5, o.grid_steps);
  struct Row {
    double detv, mgvt, wehrl, wtstd, renyi, xi;
  };
  const std::size_t ns = sig.size(), cells = panels.size() * ns * ns;
  std::vector<Row> rows(cells);
  parallel_for(cells, [&](std::size_t c) {
    const auto [phi, xi] = panels[c / (ns * ns)];
    const double sp = sig[(c / ns) % ns], sm = sig[c % ns];
    const ExampleStateParams p{sp, sm};
    const NonLocalFrame f = NonLocalFrame::unit(branch).with_phi(phi).with_xi(xi);
    const Density2D q = example_state(p, f).second;
    Row& r = rows[c];
    r.detv = evaluate_witness(q, WitnessId::detv(), f).value;
    r.mgvt = evaluate_witness(q, WitnessId::mgvt(), f).value;
    r.wehrl = evaluate_witness(q, WitnessId::wehrl(), f).value;
    r.wtstd = evaluate_witness(q, WitnessId::wtstd(), f).value;
    SearchSpace sp_{};
    sp_.phis = {phi};
    sp_.branches = {branch};
    sp_.log_xi = std::pair{-1.0, 1.0};
    sp_.xi_grid = 9;
    const auto opt =
        optimize_witness([&](const NonLocalFrame& g) { return example_state(p, g).second; }, WitnessId::renyi(1e-3), sp_, f);
    r.renyi = opt.best.value;
    r.xi = opt.best.frame.xi();
  });
  for (std::size_t c = 0; c < cells; ++c) {
    const auto [phi, xi] = panels[c / (ns * ns)];
    const Row& r = rows[c];
    t.row({phi, xi, sig[(c / ns) % ns], sig[c % ns], r.detv, r.mgvt, r.wehrl, r.wtstd, r.renyi, r.xi});
  }
  t.meta("branch", to_string(branch));
  t.meta("grid_steps", static_cast<double>(o.grid_steps));
  return t;
}

/// Decomposition quantities along φ for σ₊ = 4, σ₋ = 1.5, ξ = 1 on the minus branch.
inline CsvTable fig6(const FigureOptions& o) {
  CsvTable t({"phi", "detv", "mgvt", "wehrl", "wtstd", "mutual_information", "margin"});
  if (o.phi_steps < 1) throw InvalidArgument("phi-steps must be >= 1");
  const int n = o.phi_steps;
  std::vector<std::array<double, 6>> rows(n);
  parallel_for(n, [&](std::size_t i) {
    const NonLocalFrame f = NonLocalFrame::unit(Branch::Minus).with_phi(kPi * static_cast<double>(i) / n);
    const Density2D q = example_state({4.0, 1.5}, f).second;
    const auto dec = decomposition_check(q, f);
    rows[i] = {evaluate_witness(q, WitnessId::detv(), f).value, evaluate_witness(q, WitnessId::mgvt(), f).value,
               dec.w1, dec.w_wtstd, dec.mi, dec.margin};
  });
  for (int i = 0; i < n; ++i) {
    const auto& r = rows[i];
    t.row({kPi * i / n, r[0], r[1], r[2], r[3], r[4], r[5]});
  }
  t.meta("sigma_plus", 4.0);
  t.meta("sigma_minus", 1.5);
  t.meta("branch", std::string("minus"));
  return t;
}

/// Breakdown δ of the discretized detV, Wehrl and optimized Rényi witnesses over λ.
inline CsvTable fig7a(const FigureOptions& o) {
  CsvTable t({"lambda", "witness", "delta_break"});
  const auto lams = lambda_grid(o.lambda_steps);
  const BreakdownScan scan = scan_for(o.delta_steps);
  const NonLocalFrame f = NonLocalFrame::unit();
  const auto betas = default_beta_scan();
  std::vector<std::array<double, 3>> out(lams.size());
  for (std::size_t i = 0; i < lams.size(); ++i) {
    const Density2D d = tmsv_husimi(lams[i], f);
    out[i][0] = delta_break([&](double x) { return regular_discretized_value(d, WitnessId::detv(), x, f); }, scan);
    out[i][1] = delta_break([&](double x) { return regular_discretized_value(d, WitnessId::wehrl(), x, f); }, scan);
    out[i][2] = delta_break([&](double x) { return optimal_renyi_discretized(d, x, f, betas).first; }, scan);
  }
  for (std::size_t i = 0; i < lams.size(); ++i) {
    t.row({lams[i], std::string("detv"), out[i][0]});
    t.row({lams[i], std::string("wehrl"), out[i][1]});
    t.row({lams[i], std::string("renyi_opt"), out[i][2]});
  }
  t.meta("lambda_steps", static_cast<double>(o.lambda_steps));
  t.meta("delta_steps", static_cast<double>(o.delta_steps));
  return t;
}

/// Witness values against δ at fixed λ: detV, Wehrl, Rényi at the overall best β
/// and Rényi at the per-δ best β.
inline CsvTable witness_vs_delta(double lambda, const FigureOptions& o) {
  CsvTable t({"delta", "witness_id", "beta", "value"});
  const NonLocalFrame f = NonLocalFrame::unit();
  const Density2D d = tmsv_husimi(lambda, f);
  const auto best = best_beta_for_range(d, f, default_beta_scan(), scan_for(o.delta_steps));
  const WitnessId best_id = best.beta == 1.0 ? WitnessId::wehrl() : WitnessId::renyi(best.beta);
  for (double x : linspace(0.05, 4.0, o.delta_steps)) {
    const auto [ov, ob] = optimal_renyi_discretized(d, x, f);
    t.row({x, std::string("detv"), std::nan(""), regular_discretized_value(d, WitnessId::detv(), x, f)});
    t.row({x, std::string("wehrl"), 1.0, regular_discretized_value(d, WitnessId::wehrl(), x, f)});
    t.row({x, std::string("renyi_best_overall"), best.beta, regular_discretized_value(d, best_id, x, f)});
    t.row({x, std::string("renyi_opt"), ob, ov});
  }
  t.meta("lambda", lambda);
  t.meta("delta_steps", static_cast<double>(o.delta_steps));
  return t;
}

/// Discretized Rényi witness over the (δ, β) plane at fixed λ.
inline CsvTable beta_delta_map(double lambda, const FigureOptions& o) {
  CsvTable t({"delta", "beta", "value"});
  const NonLocalFrame f = NonLocalFrame::unit();
  const Density2D d = tmsv_husimi(lambda, f);
  const auto deltas = linspace(0.05, 4.0, o.delta_steps);
  const auto betas = default_beta_scan();
  std::vector<double> v(deltas.size() * betas.size());
  parallel_for(v.size(), [&](std::size_t i) {
    const double b = betas[i % betas.size()];
    const WitnessId id = b == 1.0 ? WitnessId::wehrl() : WitnessId::renyi(b);
    v[i] = regular_discretized_value(d, id, deltas[i / betas.size()], f);
  });
  for (std::size_t i = 0; i < v.size(); ++i) t.row({deltas[i / betas.size()], betas[i % betas.size()], v[i]});
  t.meta("lambda", lambda);
  return t;
}

/// β with the largest detection range over λ.
inline CsvTable fig7d(const FigureOptions& o) {
  CsvTable t({"lambda", "best_beta", "delta_break"});
  const NonLocalFrame f = NonLocalFrame::unit();
  for (double lam : lambda_grid(o.lambda_steps)) {
    const auto best = best_beta_for_range(tmsv_husimi(lam, f), f, default_beta_scan(), scan_for(o.delta_steps));
    t.row({lam, best.beta, best.range});
  }
  t.meta("lambda_steps", static_cast<double>(o.lambda_steps));
  return t;
}

/// Sampled Rényi witness over β for the TMSV mixture: mean and ±kσ bands.
inline CsvTable fig8a(const FigureOptions& o) {
  CsvTable t({"beta", "mean", "std", "lo1", "hi1", "lo2", "hi2", "lo3", "hi3", "sigma_level", "fraction_within_3",
              "snr", "failures"});
  const NonLocalFrame f = NonLocalFrame::unit();
  const Density2D d = mixture_husimi({0.8, 2.0, 0.3}, f);
  auto betas = logspace(0.1, 100.0, o.beta_steps);
  const auto stats = run_experiment(d, f, static_cast<std::size_t>(o.n), o.reps, betas, o.seed);
  for (const auto& s : stats)
    t.row({s.beta, s.mean, s.std, s.mean - s.std, s.mean + s.std, s.mean - 2 * s.std, s.mean + 2 * s.std,
           s.mean - 3 * s.std, s.mean + 3 * s.std, static_cast<long long>(s.sigma_level), s.fraction_within[3], s.snr,
           static_cast<long long>(s.failures)});
  t.meta("lambda", 0.8);
  t.meta("r", 2.0);
  t.meta("p", 0.3);
  t.meta("n", static_cast<double>(o.n));
  t.meta("reps", static_cast<double>(o.reps));
  return t;
}

inline const std::vector<std::string>& ids() {
  static const std::vector<std::string> v = {"fig1c", "fig2",  "fig2c", "fig4",  "fig6",  "fig7a", "fig7b",
                                             "fig7c", "fig7d", "fig7e", "fig7f", "fig8a"};
  return v;
}

/// Table for a figure id; throws InvalidArgument for unknown ids.
inline CsvTable build(const std::string& id, const FigureOptions& o) {
  if (id == "fig1c") return fig1c(o);
  if (id == "fig2") return fig2(o);
  if (id == "fig2c") return fig2c(o);
  if (id == "fig4") return fig4(o);
  if (id == "fig6") return fig6(o);
  if (id == "fig7a") return fig7a(o);
  if (id == "fig7b") return witness_vs_delta(0.1, o);
  if (id == "fig7c") return beta_delta_map(0.1, o);
  if (id == "fig7d") return fig7d(o);
  if (id == "fig7e") return witness_vs_delta(0.9, o);
  if (id == "fig7f") return beta_delta_map(0.9, o);
  if (id == "fig8a") return fig8a(o);
  throw InvalidArgument("unknown figure id '" + id + "'");
}

}  // namespace figures
}  // namespace phasewitness
