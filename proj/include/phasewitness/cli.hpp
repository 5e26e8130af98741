#pragma once

#include "figures.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace phasewitness::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kComputation = 2;

/// Frame overrides shared by the state-consuming subcommands.
struct FrameFlags {
  std::string branch;
  double phi = 0, xi = 1, a1 = 1, b1 = 1, a2 = 1, b2 = 1, theta1 = 0, theta2 = 0;
  std::vector<CLI::Option*> opts;

  void attach(CLI::App* app) {
    opts = {app->add_option("--branch", branch, "plus or minus"), app->add_option("--phi", phi, "rotation angle"),
            app->add_option("--xi", xi, "squeezing parameter"),   app->add_option("--a1", a1),
            app->add_option("--b1", b1),                          app->add_option("--a2", a2),
            app->add_option("--b2", b2),                          app->add_option("--theta1", theta1),
            app->add_option("--theta2", theta2)};
  }
  bool given(std::size_t i) const { return opts[i]->count() > 0; }

  NonLocalFrame apply(const NonLocalFrame& f) const {
    const Branch br = given(0) ? branch_from_string(branch) : f.branch();
    return NonLocalFrame(given(3) ? a1 : f.a1(), given(4) ? b1 : f.b1(), given(5) ? a2 : f.a2(), given(6) ? b2 : f.b2(),
                         given(7) ? theta1 : f.theta1(), given(8) ? theta2 : f.theta2(), given(1) ? phi : f.phi(),
                         given(2) ? xi : f.xi(), br);
  }
};

/// Witness selection flags.
struct WitnessFlags {
  std::string name = "wehrl";
  double beta = 0, gamma = 0, alpha = 1;
  std::string stw_beta = "inf";
  std::string function;
  CLI::Option *beta_opt = nullptr, *gamma_opt = nullptr;

  void attach(CLI::App* app, bool required) {
    auto* w = app->add_option("--witness", name,
                              "wehrl, renyi, tsallis, detv, detv_chi, dgcz, mgvt, wtstd, stw, general");
    if (required) w->required();
    beta_opt = app->add_option("--beta", beta, "order of renyi / detv_chi");
    gamma_opt = app->add_option("--gamma", gamma, "order of tsallis");
    app->add_option("--alpha", alpha, "first STW order");
    app->add_option("--stw-beta", stw_beta, "second STW order (number or inf)");
    app->add_option("--function", function, "general f: neg_t_log_t, power:<b>, clipped:<c>, identity");
  }

  /// Witness id; `grid` supplies a default order for order-parameterized kinds.
  WitnessId id(const std::vector<double>& grid = {}) const {
    const WitnessKind k = WitnessId::parse_kind(name);
    auto order = [&](CLI::Option* o, double v, const char* flag) {
      if (o->count() != 0) return v;
      if (grid.empty()) throw InvalidArgument("witness '" + name + "' needs " + flag);
      return grid.front();
    };
    switch (k) {
      case WitnessKind::RenyiWehrl: return WitnessId::renyi(order(beta_opt, beta, "--beta"));
      case WitnessKind::DetVChi: return WitnessId::detv_chi(order(beta_opt, beta, "--beta"));
      case WitnessKind::TsallisWehrl: return WitnessId::tsallis(order(gamma_opt, gamma, "--gamma"));
      case WitnessKind::STW: return WitnessId::stw(alpha, parse_number(stw_beta));
      default: return WitnessId{k};
    }
  }

  ConcaveFn concave(double domain_max) const {
    if (function.empty()) throw InvalidArgument("witness 'general' needs --function");
    const auto colon = function.find(':');
    const std::string head = function.substr(0, colon);
    const bool has_arg = colon != std::string::npos;
    if (head == "neg_t_log_t" && !has_arg) return make_concave(ConcaveKind::NegTLogT, domain_max);
    if (head == "identity" && !has_arg) return identity_fn(domain_max);
    if (head == "power" && has_arg) return make_concave(ConcaveKind::Monomial, domain_max, parse_number(function.substr(colon + 1)));
    if (head == "clipped" && has_arg) return clipped_linear(parse_number(function.substr(colon + 1)), domain_max);
    throw InvalidArgument("unknown function '" + function + "'");
  }

  static double parse_number(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size()) throw InvalidArgument("not a number: '" + s + "'");
    return v;
  }
};

namespace detail {

inline void write_table(const CsvTable& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  t.write(out);
  if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_double(v[i]);
  return s;
}

/// Tiling with characteristic size δ: regular δ x δ squares, quadtree leaves no
/// wider than δ, or rings of width δ around the mean.
inline Tiling tiling_for(const Density2D& d, TilingScheme scheme, double delta, double beta, double threshold) {
  if (!(delta > 0)) throw InvalidArgument("delta must be positive");
  const Box box = truncation_box(d, beta);
  switch (scheme) {
    case TilingScheme::RegularRect: return Tiling::regular(box, delta, delta);
    case TilingScheme::Quadtree: {
      const int depth = std::clamp(static_cast<int>(std::ceil(std::log2(std::max(box.width(), box.height()) / delta))), 0, 12);
      return quadtree_tiling(d, box, depth, threshold);
    }
    case TilingScheme::Radial: {
      const Eigen::Vector2d c = d.mean.value_or(box.center());
      double rmax = 0;
      for (double r : {box.r0, box.r1})
        for (double s : {box.s0, box.s1}) rmax = std::max(rmax, std::hypot(r - c.x(), s - c.y()));
      return radial_tiling(box, c, std::max(1, static_cast<int>(std::ceil(rmax / delta))));
    }
  }
  throw InvalidArgument("unknown tiling scheme");
}

inline double order_of(const WitnessId& id) {
  if (id.kind == WitnessKind::RenyiWehrl || id.kind == WitnessKind::TsallisWehrl) return id.p1;
  if (id.kind == WitnessKind::Wehrl) return 1.0;
  return std::nan("");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands.

struct WitnessCmd {
  std::string state;
  FrameFlags frame;
  WitnessFlags witness;
  std::string tiling;
  double delta = 0.5, threshold = 0.05;

  void attach(CLI::App* app) {
    app->add_option("--state", state, "state-spec JSON")->required();
    witness.attach(app, true);
    frame.attach(app);
    app->add_option("--tiling", tiling, "discretize first: regular, quadtree, radial");
    app->add_option("--delta", delta, "tile size for --tiling");
    app->add_option("--threshold", threshold, "quadtree mass threshold");
  }

  int run(std::ostream& out) const {
    StateSpec spec = StateSpec::load(state);
    spec.frame = frame.apply(spec.frame);
    const Density2D d = spec.build();
    const WitnessId id = witness.id();
    WitnessReport r;
    if (!tiling.empty()) {
      const double order = std::isnan(detail::order_of(id)) ? 1.0 : detail::order_of(id);
      const Tiling t = detail::tiling_for(d, tiling_scheme_from_string(tiling), delta, order, threshold);
      r = evaluate_discretized(discretize(d, t), id, spec.frame);
    } else if (id.kind == WitnessKind::GeneralF) {
      r = witness_general(d, witness.concave(std::max(d.peak_bound, spec.frame.t_max())), spec.frame);
    } else {
      r = evaluate_witness(d, id, spec.frame);
    }
    json j = report_to_json(r);
    j["state"] = spec.to_json();
    if (!tiling.empty()) j["tiling"] = {{"scheme", tiling}, {"delta", delta}};
    out << j.dump(2) << '\n';
    return kOk;
  }
};

struct ScanCmd {
  std::string state, out_path;
  FrameFlags frame;
  WitnessFlags witness;
  std::vector<double> betas, log_xi;
  std::vector<std::string> branches = {"plus", "minus"};
  int phi_steps = 1, xi_grid = 13, max_evals = 100000;
  bool scalings = false;

  void attach(CLI::App* app) {
    app->add_option("--state", state, "state-spec JSON")->required();
    witness.attach(app, false);
    frame.attach(app);
    app->add_option("--beta-grid", betas, "orders to scan")->delimiter(',');
    app->add_option("--phi-steps", phi_steps, "phi grid points on [0, pi)");
    app->add_option("--log-xi", log_xi, "ln xi interval lo,hi")->delimiter(',')->expected(2);
    app->add_option("--xi-grid", xi_grid, "coarse ln xi grid before golden section");
    app->add_option("--branches", branches, "branches to scan")->delimiter(',');
    app->add_flag("--scalings", scalings, "coordinate descent over a1, a2, b1");
    app->add_option("--max-evals", max_evals, "evaluation budget");
    app->add_option("--out", out_path, "trace CSV")->required();
  }

  int run(std::ostream& out, const std::string& command) const {
    if (phi_steps < 1) throw InvalidArgument("phi-steps must be >= 1");
    StateSpec spec = StateSpec::load(state);
    const NonLocalFrame base = frame.apply(spec.frame);
    SearchSpace space;
    space.betas = betas;
    space.phis.clear();
    for (int i = 0; i < phi_steps; ++i) space.phis.push_back(phi_steps == 1 ? base.phi() : kPi * i / phi_steps);
    if (!log_xi.empty()) space.log_xi = std::pair{log_xi[0], log_xi[1]};
    space.xi_grid = xi_grid;
    space.scalings = scalings;
    space.branches.clear();
    for (const auto& b : branches) space.branches.push_back(branch_from_string(b));
    const WitnessId id = witness.id(betas);
    const auto res = optimize_witness([&](const NonLocalFrame& f) { return spec.build(f); }, id, space, base,
                                      Budget{max_evals});
    CsvTable t({"branch", "beta", "phi", "xi", "a1", "b1", "a2", "b2", "value"});
    t.meta("command", command);
    t.meta("state", spec.to_json().dump());
    t.meta("witness", id.label());
    for (const auto& e : res.trace) t.row({to_string(e.branch), e.beta, e.phi, e.xi, e.a1, e.b1, e.a2, e.b2, e.value});
    detail::write_table(t, out_path);
    json j{{"best", report_to_json(res.best)},
           {"evaluations", res.evaluations},
           {"budget_exhausted", res.budget_exhausted},
           {"trace", out_path}};
    out << j.dump(2) << '\n';
    return kOk;
  }
};

struct DiscretizeCmd {
  std::string state, out_path, tiling = "regular";
  FrameFlags frame;
  WitnessFlags witness;
  double delta_min = 0.05, delta_max = 4.0, threshold = 0.05;
  int delta_steps = 40;
  bool optimal_beta = false;
  std::vector<double> betas;

  void attach(CLI::App* app) {
    app->add_option("--state", state, "state-spec JSON")->required();
    witness.attach(app, false);
    frame.attach(app);
    app->add_option("--tiling", tiling, "regular, quadtree, radial");
    app->add_option("--delta-min", delta_min);
    app->add_option("--delta-max", delta_max);
    app->add_option("--delta-steps", delta_steps);
    app->add_option("--threshold", threshold, "quadtree mass threshold");
    app->add_flag("--optimal-beta", optimal_beta, "add the beta-optimized Renyi witness per delta");
    app->add_option("--beta-grid", betas, "orders for --optimal-beta")->delimiter(',');
    app->add_option("--out", out_path, "CSV output")->required();
  }

  int run(std::ostream& out, const std::string& command) const {
    if (delta_steps < 1 || !(delta_min > 0) || !(delta_max >= delta_min)) throw InvalidArgument("invalid delta range");
    StateSpec spec = StateSpec::load(state);
    spec.frame = frame.apply(spec.frame);
    const Density2D d = spec.build();
    const TilingScheme scheme = tiling_scheme_from_string(tiling);
    const WitnessId id = witness.id();
    const double order = std::isnan(detail::order_of(id)) ? 1.0 : detail::order_of(id);
    const auto grid = betas.empty() ? default_beta_scan() : betas;
    const auto deltas = figures::linspace(delta_min, delta_max, delta_steps);
    struct Row {
      double value = 0, opt_value = 0, opt_beta = 0;
    };
    std::vector<Row> rows(deltas.size());
    parallel_for(deltas.size(), [&](std::size_t i) {
      rows[i].value = evaluate_discretized(discretize(d, detail::tiling_for(d, scheme, deltas[i], order, threshold)), id,
                                           spec.frame)
                          .value;
      if (!optimal_beta) return;
      rows[i].opt_value = std::numeric_limits<double>::infinity();
      for (double b : grid) {
        const WitnessId rid = b == 1.0 ? WitnessId::wehrl() : WitnessId::renyi(b);
        const double v =
            evaluate_discretized(discretize(d, detail::tiling_for(d, scheme, deltas[i], b, threshold)), rid, spec.frame).value;
        if (v < rows[i].opt_value) {
          rows[i].opt_value = v;
          rows[i].opt_beta = b;
        }
      }
    });
    CsvTable t({"delta", "witness_id", "beta", "value"});
    t.meta("command", command);
    t.meta("state", spec.to_json().dump());
    t.meta("tiling", tiling);
    const std::string label = WitnessId::discretized(id).label();
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      t.row({deltas[i], label, detail::order_of(id), rows[i].value});
      if (optimal_beta) t.row({deltas[i], std::string("discretized_renyi_opt"), rows[i].opt_beta, rows[i].opt_value});
    }
    detail::write_table(t, out_path);
    out << json{{"rows", t.rows()}, {"out", out_path}, {"witness", label}, {"tiling", tiling}}.dump(2) << '\n';
    return kOk;
  }
};

struct SampleCmd {
  std::string state, out_path;
  FrameFlags frame;
  int n = 1000, reps = 100, k_max = 8;
  std::vector<double> betas = {1.0, 10.0};
  std::uint64_t seed = 1;

  void attach(CLI::App* app) {
    app->add_option("--state", state, "state-spec JSON")->required();
    frame.attach(app);
    app->add_option("--n", n, "samples per repetition");
    app->add_option("--reps", reps, "repetitions");
    app->add_option("--beta-grid", betas, "Renyi orders")->delimiter(',');
    app->add_option("--seed", seed, "master seed");
    app->add_option("--k-max", k_max, "largest mixture size in the BIC search");
    app->add_option("--out", out_path, "CSV output")->required();
  }

  int run(std::ostream& out, const std::string& command) const {
    if (n < 1 || reps < 1 || k_max < 1) throw InvalidArgument("n, reps and k-max must be positive");
    if (n < 60 * k_max) throw InvalidArgument("n must be at least 60 * k-max");
    if (betas.empty()) throw InvalidArgument("beta grid is empty");
    StateSpec spec = StateSpec::load(state);
    spec.frame = frame.apply(spec.frame);
    const Density2D d = spec.build();
    GmmOptions g;
    g.k_max = k_max;
    const auto stats = run_experiment(d, spec.frame, static_cast<std::size_t>(n), reps, betas, seed, g);
    CsvTable t({"beta", "rep", "value"});
    t.meta("command", command);
    t.meta("seed", std::to_string(seed));
    t.meta("n", std::to_string(n));
    t.meta("reps", std::to_string(reps));
    t.meta("betas", detail::join(betas));
    t.meta("state", spec.to_json().dump());
    json summary = json::array();
    for (const auto& s : stats) {
      for (std::size_t i = 0; i < s.values.size(); ++i) t.row({s.beta, static_cast<long long>(s.reps[i]), s.values[i]});
      summary.push_back(stats_to_json(s));
    }
    detail::write_table(t, out_path);
    out << json{{"stats", summary}, {"seed", seed}, {"out", out_path}}.dump(2) << '\n';
    return kOk;
  }
};

struct MajorizeCmd {
  std::string state, other, levels;
  FrameFlags frame;
  int t_points = 400;

  void attach(CLI::App* app) {
    app->add_option("--state", state, "state-spec JSON of the first density")->required();
    app->add_option("--other", other, "state-spec JSON of the second density")->required();
    frame.attach(app);
    app->add_option("--levels", levels, "CSV of the level curve of --state");
    app->add_option("--t-points", t_points, "thresholds in the level curve");
  }

  int run(std::ostream& out, const std::string& command) const {
    StateSpec s1 = StateSpec::load(state), s2 = StateSpec::load(other);
    s1.frame = frame.apply(s1.frame);
    s2.frame = frame.apply(s2.frame);
    const Density2D d1 = s1.build(), d2 = s2.build();
    const auto res = majorizes(d1, d2);
    json j = majorization_to_json(res);
    j["relation"] = "state majorized by other";
    if (!levels.empty()) {
      const auto curve = level_function(d1, adaptive_t_grid(d1, {}, t_points));
      CsvTable t({"t", "m", "mu"});
      t.meta("command", command);
      t.meta("state", s1.to_json().dump());
      for (std::size_t i = 0; i < curve.t.size(); ++i) t.row({curve.t[i], curve.m[i], curve.mu[i]});
      detail::write_table(t, levels);
      j["levels"] = levels;
    }
    out << j.dump(2) << '\n';
    return kOk;
  }
};

struct FigureCmd {
  std::string id, out_dir = ".";
  FigureOptions opts;

  void attach(CLI::App* app) {
    app->add_option("--id", id, "figure id")->required();
    app->add_option("--out", out_dir, "output directory");
    app->add_option("--lambda-steps", opts.lambda_steps);
    app->add_option("--delta-steps", opts.delta_steps);
    app->add_option("--grid-steps", opts.grid_steps, "sigma grid per axis (fig4)");
    app->add_option("--phi-steps", opts.phi_steps, "phi grid (fig6)");
    app->add_option("--beta-steps", opts.beta_steps, "beta grid (fig2, fig8a)");
    app->add_option("--n", opts.n, "samples per repetition (fig8a)");
    app->add_option("--reps", opts.reps, "repetitions (fig8a)");
    app->add_option("--seed", opts.seed, "master seed (fig8a)");
  }

  int run(std::ostream& out, const std::string& command) const {
    const auto& known = figures::ids();
    if (std::find(known.begin(), known.end(), id) == known.end()) throw InvalidArgument("unknown figure id '" + id + "'");
    CsvTable t = figures::build(id, opts);
    t.meta("command", command);
    t.meta("seed", std::to_string(opts.seed));
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw InvalidArgument("cannot create '" + out_dir + "': " + ec.message());
    const std::string path = (std::filesystem::path(out_dir) / (id + ".csv")).string();
    detail::write_table(t, path);
    out << json{{"figure", id}, {"files", {path}}, {"rows", t.rows()}}.dump(2) << '\n';
    return kOk;
  }
};

/// Runs the command line (args exclude the program name). Exit codes: 0 success,
/// 1 usage or input error, 2 computation error.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Continuous-variable entanglement witnesses from the Husimi Q-distribution", "phasewitness"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  WitnessCmd witness;
  ScanCmd scan;
  DiscretizeCmd discretize_cmd;
  SampleCmd sample;
  MajorizeCmd majorize;
  FigureCmd figure;
  auto* c_witness = app.add_subcommand("witness", "evaluate one witness and print a JSON report");
  auto* c_scan = app.add_subcommand("scan", "optimize a witness over frame parameters");
  auto* c_disc = app.add_subcommand("discretize", "coarse-grained witness curves over the tile size");
  auto* c_sample = app.add_subcommand("sample", "finite-statistics sampling experiment");
  auto* c_major = app.add_subcommand("majorize", "majorization check between two states");
  auto* c_fig = app.add_subcommand("figure", "write figure data as CSV");
  witness.attach(c_witness);
  scan.attach(c_scan);
  discretize_cmd.attach(c_disc);
  sample.attach(c_sample);
  majorize.attach(c_major);
  figure.attach(c_fig);

  std::vector<const char*> argv{"phasewitness"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  std::string command;
  for (const auto& a : args) command += (command.empty() ? "" : " ") + a;
  for (char& c : command)
    if (c == ' ') c = '_';

  try {
    if (c_witness->parsed()) return witness.run(out);
    if (c_scan->parsed()) return scan.run(out, command);
    if (c_disc->parsed()) return discretize_cmd.run(out, command);
    if (c_sample->parsed()) return sample.run(out, command);
    if (c_major->parsed()) return majorize.run(out, command);
    if (c_fig->parsed()) return figure.run(out, command);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidState& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UnsupportedFrame& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "computation error: " << e.what() << '\n';
    return kComputation;
  }
  err << "error: no subcommand\n";
  return kUsage;
}

}  // namespace phasewitness::cli
