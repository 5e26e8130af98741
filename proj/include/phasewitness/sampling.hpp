#pragma once

#include "witnesses.hpp"

#include <Eigen/Eigenvalues>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace phasewitness {

/// SplitMix64 step; used to derive independent sub-seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

struct SampleSet {
  std::vector<Eigen::Vector2d> points;
  std::uint64_t seed = 0;
  std::string source;
};

namespace detail {
// Standard normal by Box-Muller on the raw engine output, so samples do not
// depend on the standard library's distribution implementation.
struct NormalSource {
  std::mt19937_64 eng;
  bool has_spare = false;
  double spare = 0;
  explicit NormalSource(std::uint64_t seed) : eng(seed) {}
  double uniform() { return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53; }
  double normal() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    const double u = uniform(), v = uniform();
    const double rad = std::sqrt(-2 * std::log(u));
    spare = rad * std::sin(kTwoPi * v);
    has_spare = true;
    return rad * std::cos(kTwoPi * v);
  }
};
}  // namespace detail

/// n i.i.d. points from the Lebesgue density Q/(2π): exact for Gaussian
/// mixtures, rejection from the support box otherwise.
inline SampleSet draw_samples(const Density2D& d, std::size_t n, std::uint64_t seed) {
  SampleSet out;
  out.seed = seed;
  out.source = d.name;
  out.points.reserve(n);
  detail::NormalSource rng(seed);
  if (d.is_mixture()) {
    std::vector<double> cum;
    std::vector<Eigen::Matrix2d> chol;
    double acc = 0;
    for (const auto& c : d.mixture) {
      acc += c.weight;
      cum.push_back(acc);
      chol.push_back(c.cov.llt().matrixL());
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform() * acc;
      std::size_t k = 0;
      while (k + 1 < cum.size() && u > cum[k]) ++k;
      const double z1 = rng.normal(), z2 = rng.normal();
      out.points.push_back(d.mixture[k].mean + chol[k] * Eigen::Vector2d(z1, z2));
    }
    return out;
  }
  const Box& b = d.support;
  const double lpeak = std::log(d.peak_bound);
  std::size_t tries = 0;
  while (out.points.size() < n) {
    ++tries;
    const double r = b.r0 + rng.uniform() * b.width(), s = b.s0 + rng.uniform() * b.height();
    if (std::log(rng.uniform()) + lpeak < d.log_eval(r, s)) out.points.emplace_back(r, s);
    if (tries >= 100000 && static_cast<double>(out.points.size()) < 1e-3 * static_cast<double>(tries))
      throw NumericError("rejection acceptance rate below 1e-3; use a tighter support box",
                         static_cast<double>(out.points.size()) / static_cast<double>(tries));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian mixture estimation.

struct MixtureFit {
  int K = 0;
  std::vector<double> weights;
  std::vector<Eigen::Vector2d> means;
  std::vector<Eigen::Matrix2d> covs;
  double log_likelihood = 0;
  double bic = 0;
  int iterations = 0;
  int restarts = 0;
};

struct GmmOptions {
  int k_min = 1;
  int k_max = 8;
  double tol = 1e-7;          // change of the mean log-likelihood per sample
  int max_iter = 200;
  double eig_floor = 1e-6;
  int max_restarts = 5;
};

namespace detail {

inline Eigen::Matrix2d floor_cov(const Eigen::Matrix2d& c, double floor) {
  const Eigen::Matrix2d sym = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
  Eigen::Vector2d ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline double log_normal_pdf(const Eigen::Vector2d& x, const Eigen::Vector2d& m, const Eigen::Matrix2d& inv, double logdet) {
  const Eigen::Vector2d d = x - m;
  return -std::log(kTwoPi) - 0.5 * logdet - 0.5 * d.dot(inv * d);
}

struct EmOutcome {
  bool ok = false;
  MixtureFit fit;
};

inline EmOutcome run_em(const std::vector<Eigen::Vector2d>& x, int K, std::uint64_t seed, const GmmOptions& o) {
  const std::size_t n = x.size();
  EmOutcome out;
  MixtureFit& f = out.fit;
  f.K = K;
  NormalSource rng(seed);

  // k-means++ seeding.
  std::vector<Eigen::Vector2d> centers;
  centers.push_back(x[std::min(n - 1, static_cast<std::size_t>(rng.uniform() * n))]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < K) {
    double tot = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (x[i] - c).squaredNorm());
      d2[i] = best;
      tot += best;
    }
    if (!(tot > 0)) return out;
    double u = rng.uniform() * tot;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      u -= d2[i];
      if (u <= 0) {
        pick = i;
        break;
      }
    }
    centers.push_back(x[pick]);
  }

  // Hard assignment to the seeds gives the initial components.
  std::vector<std::vector<double>> resp(K, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int k = 1; k < K; ++k)
      if ((x[i] - centers[k]).squaredNorm() < (x[i] - centers[best]).squaredNorm()) best = k;
    resp[best][i] = 1.0;
  }

  f.weights.assign(K, 0);
  f.means.assign(K, Eigen::Vector2d::Zero());
  f.covs.assign(K, Eigen::Matrix2d::Identity());
  auto m_step = [&]() -> bool {
    for (int k = 0; k < K; ++k) {
      double nk = 0;
      Eigen::Vector2d mu = Eigen::Vector2d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[k][i];
        mu += resp[k][i] * x[i];
      }
      if (nk < 2.0) return false;  // collapsed component
      mu /= nk;
      Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d dx = x[i] - mu;
        c += resp[k][i] * dx * dx.transpose();
      }
      f.weights[k] = nk / static_cast<double>(n);
      f.means[k] = mu;
      f.covs[k] = floor_cov(c / nk, o.eig_floor);
    }
    return true;
  };
  if (!m_step()) return out;

  double prev = -std::numeric_limits<double>::infinity();
  std::vector<double> lp(K);
  for (int it = 1; it <= o.max_iter; ++it) {
    std::vector<Eigen::Matrix2d> inv(K);
    std::vector<double> logdet(K);
    for (int k = 0; k < K; ++k) {
      inv[k] = f.covs[k].inverse();
      logdet[k] = std::log(f.covs[k].determinant());
    }
    KahanSum ll;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = kNegInf;
      for (int k = 0; k < K; ++k) {
        lp[k] = std::log(f.weights[k]) + log_normal_pdf(x[i], f.means[k], inv[k], logdet[k]);
        mx = std::max(mx, lp[k]);
      }
      double s = 0;
      for (int k = 0; k < K; ++k) s += std::exp(lp[k] - mx);
      const double lse = mx + std::log(s);
      ll.add(lse);
      for (int k = 0; k < K; ++k) resp[k][i] = std::exp(lp[k] - lse);
    }
    if (!std::isfinite(ll.value())) return out;
    f.log_likelihood = ll.value();
    f.iterations = it;
    const double change = (ll.value() - prev) / static_cast<double>(n);
    prev = ll.value();
    if (std::abs(change) < o.tol) break;
    if (!m_step()) return out;
  }
  const int params = 6 * K - 1;
  f.bic = -2 * f.log_likelihood + params * std::log(static_cast<double>(n));
  out.ok = true;
  return out;
}

}  // namespace detail

/// EM fit for a fixed component count, restarting with fresh sub-seeds on collapse.
inline MixtureFit fit_gmm_fixed(const std::vector<Eigen::Vector2d>& x, int K, std::uint64_t seed,
                                const GmmOptions& o = {}) {
  if (K < 1) throw InvalidArgument("component count must be >= 1");
  for (int attempt = 0; attempt <= o.max_restarts; ++attempt) {
    auto r = detail::run_em(x, K, derive_seed(seed, static_cast<std::uint64_t>(1000 * K + attempt)), o);
    if (r.ok) {
      r.fit.restarts = attempt;
      return r.fit;
    }
  }
  throw NumericError("EM degenerated for K=" + std::to_string(K) + " after restarts", 0.0);
}

/// Gaussian mixture fit with K chosen by minimum BIC over [k_min, k_max].
inline MixtureFit fit_gmm(const SampleSet& s, const GmmOptions& o = {}, std::uint64_t seed = 0) {
  if (o.k_min < 1 || o.k_max < o.k_min) throw InvalidArgument("invalid component range");
  const std::size_t need = static_cast<std::size_t>(60 * o.k_max);
  if (s.points.size() < need)
    throw InvalidArgument("fit_gmm needs at least " + std::to_string(need) + " samples for k_max=" +
                          std::to_string(o.k_max));
  std::optional<MixtureFit> best;
  for (int K = o.k_min; K <= o.k_max; ++K) {
    MixtureFit f;
    try {
      f = fit_gmm_fixed(s.points, K, seed, o);
    } catch (const NumericError&) {
      if (K == o.k_min) throw;
      continue;
    }
    if (!best || f.bic < best->bic) best = f;
  }
  return *best;
}

/// Husimi density w.r.t. dμ built from a fit (Q = 2π Σ w N).
inline Density2D density_from_fit(const MixtureFit& fit, const NonLocalFrame& frame) {
  std::vector<GaussComponent> comps;
  for (int k = 0; k < fit.K; ++k) comps.push_back({fit.weights[k], fit.means[k], fit.covs[k]});
  return make_mixture_density(comps, frame, "gmm_fit");
}

inline WitnessReport witness_from_fit(const MixtureFit& fit, const WitnessId& id, const NonLocalFrame& frame,
                                      const QuadratureSpec& spec = {}) {
  if (id.kind == WitnessKind::WTSTD || id.kind == WitnessKind::STW)
    throw InvalidArgument("marginal witnesses need the Wigner distribution, which a Husimi fit does not provide");
  WitnessReport r = evaluate_witness(density_from_fit(fit, frame), id, frame, spec);
  r.method = Method::Sampled;
  return r;
}

// ---------------------------------------------------------------------------
// Repetition statistics.

struct ExperimentStats {
  double beta = 1.0;
  int repetitions = 0;
  int failures = 0;
  std::vector<double> values;   // per successful repetition, in repetition order
  std::vector<int> reps;        // repetition index of each value
  double mean = 0, std = 0;
  int sigma_level = -1;         // largest k in {0..3} with mean + k·std < 0, -1 if none
  double fraction_within[4] = {0, 0, 0, 0};  // k = 0..3: fraction of repetitions with value + k·std < 0
  double snr = 0;               // |mean| / std
};

inline ExperimentStats summarize(double beta, int repetitions, std::vector<double> values, std::vector<int> reps) {
  ExperimentStats st;
  st.beta = beta;
  st.repetitions = repetitions;
  st.failures = repetitions - static_cast<int>(values.size());
  st.values = std::move(values);
  st.reps = std::move(reps);
  const std::size_t n = st.values.size();
  if (n == 0) return st;
  KahanSum s;
  for (double v : st.values) s.add(v);
  st.mean = s.value() / static_cast<double>(n);
  KahanSum q;
  for (double v : st.values) q.add((v - st.mean) * (v - st.mean));
  st.std = n > 1 ? std::sqrt(q.value() / static_cast<double>(n - 1)) : 0.0;
  for (int k = 3; k >= 0; --k)
    if (st.mean + k * st.std < 0) {
      st.sigma_level = k;
      break;
    }
  for (int k = 0; k <= 3; ++k) {
    int c = 0;
    for (double v : st.values) c += v + k * st.std < 0 ? 1 : 0;
    st.fraction_within[k] = static_cast<double>(c) / static_cast<double>(n);
  }
  st.snr = st.std > 0 ? std::abs(st.mean) / st.std : std::numeric_limits<double>::infinity();
  return st;
}

/// R independent sample → fit → witness repetitions; one ExperimentStats per β.
/// Repetition i uses sub-seed derive_seed(seed, i), so results do not depend on scheduling.
inline std::vector<ExperimentStats> run_experiment(const Density2D& state, const NonLocalFrame& frame, std::size_t n,
                                                   int repetitions, const std::vector<double>& betas,
                                                   std::uint64_t seed, const GmmOptions& gmm = {}) {
  if (repetitions < 1) throw InvalidArgument("repetitions must be >= 1");
  if (betas.empty()) throw InvalidArgument("beta grid is empty");
  std::vector<std::vector<double>> vals(repetitions, std::vector<double>(betas.size(), 0.0));
  std::vector<char> ok(repetitions, 0);
  parallel_for(static_cast<std::size_t>(repetitions), [&](std::size_t rep) {
    try {
      const std::uint64_t rs = derive_seed(seed, rep);
      const auto samples = draw_samples(state, n, rs);
      const auto fit = fit_gmm(samples, gmm, derive_seed(rs, 1));
      for (std::size_t b = 0; b < betas.size(); ++b)
        vals[rep][b] = witness_from_fit(fit, WitnessId::renyi(betas[b]), frame).value;
      ok[rep] = 1;
    } catch (const Error&) {
      ok[rep] = 0;
    }
  });
  std::vector<ExperimentStats> out;
  for (std::size_t b = 0; b < betas.size(); ++b) {
    std::vector<double> v;
    std::vector<int> idx;
    for (int rep = 0; rep < repetitions; ++rep)
      if (ok[rep]) {
        v.push_back(vals[rep][b]);
        idx.push_back(rep);
      }
    out.push_back(summarize(betas[b], repetitions, std::move(v), std::move(idx)));
  }
  return out;
}

}  // namespace phasewitness
