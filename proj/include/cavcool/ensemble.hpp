#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cavcool/analysis.hpp"
#include "cavcool/format.hpp"
#include "cavcool/scenario.hpp"

namespace cavcool::ensemble {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Generator for run `index` of an ensemble seeded with `master`; streams
/// depend only on (master, index), never on scheduling.
inline std::mt19937_64 stream(std::uint64_t master, std::uint64_t index) {
  return std::mt19937_64(splitmix64(master ^ splitmix64(index)));
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// out[i] = fn(i) for i < n on a pool of worker threads. The first exception
/// thrown by any call is rethrown after all workers stop.
template <class Fn>
auto parallel_map(std::size_t n, Fn fn, unsigned threads = 0) -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> out(n);
  if (n == 0) return out;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads ? threads : default_threads(), n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i; !stop && (i = next.fetch_add(1)) < n;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

enum class Scale { linear, log };

// Closed interval sampled uniformly in the value (linear) or its logarithm.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  Scale scale = Scale::linear;

  double at(double u) const {
    if (lo == hi) return lo;
    if (scale == Scale::log) return std::exp(std::log(lo) + u * std::log(hi / lo));
    return lo + u * (hi - lo);
  }
};

inline void validate(const Range& r, const char* name) {
  const std::string n(name);
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) throw ConfigError(n + " range must be finite");
  if (r.lo > r.hi) throw ConfigError(n + " range is reversed");
  if (r.scale == Scale::log && !(r.lo > 0.0)) throw ConfigError(n + " log range needs a positive lower bound");
}

// Detection floor of the sweep analysis: the last fringe counts while the
// envelope exceeds this fraction of its peak.
inline constexpr double sweep_window_floor = 1e-2;

inline analysis::AnalysisOptions sweep_analysis() {
  auto o = analysis::AnalysisOptions::noise_free();
  o.classify.window_floor = sweep_window_floor;
  return o;
}

struct SweepSpec {
  CavityConfig cavity = with_detuning_over_kappa(CavityConfig{}, -1.0);
  ParticleConfig particle;
  Range coupling_over_kappa{0.023, 6.9, Scale::log};  // field strength U_x (force and shift)
  Range vx{0.02, 0.30};
  Range vz{0.7, 0.7};
  Range entry_phase{0.0, constants::pi};
  Range y_over_w{0.0, 0.5};
  std::size_t samples = 400;
  std::uint64_t seed = 1;
  double start_over_w = -3.0;
  double final_over_w = 3.0;  // v_final taken here, where f^2 < e^-18
  IntegrateOptions integrate;
  analysis::AnalysisOptions analysis = sweep_analysis();
  unsigned threads = 0;
};

inline void validate(const SweepSpec& s) {
  validate(s.coupling_over_kappa, "coupling_over_kappa");
  validate(s.vx, "vx");
  validate(s.vz, "vz");
  validate(s.entry_phase, "entry_phase");
  validate(s.y_over_w, "y_over_w");
  if (s.coupling_over_kappa.lo < 0.0) throw ConfigError("coupling must be non-negative");
  if (s.vx.lo < 0.0) throw ConfigError("v_x range must be non-negative");
  if (!(s.vz.lo > 0.0)) throw ConfigError("v_z range must be positive");
  if (s.y_over_w.lo < 0.0 || s.y_over_w.hi > 3.0) throw ConfigError("y offset must lie in [0, 3] waists");
  if (s.samples == 0) throw ConfigError("sweep needs at least one sample");
  if (!(s.final_over_w > 0.0) || !(s.start_over_w < 0.0)) {
    throw ConfigError("sweep must start before and end beyond the mode centre");
  }
  derive_cavity(s.cavity);
  validate(s.particle);
}

struct SweepSample {
  std::size_t index = 0;
  double coupling_over_kappa = 0.0;
  double vx = 0.0;
  double vz = 0.0;
  double entry_phase = 0.0;
  double y_over_w = 0.0;
};

inline SweepSample draw(const SweepSpec& spec, std::size_t index) {
  auto rng = stream(spec.seed, index);
  SweepSample s;
  s.index = index;
  s.coupling_over_kappa = spec.coupling_over_kappa.at(uniform01(rng));
  s.vx = spec.vx.at(uniform01(rng));
  s.vz = spec.vz.at(uniform01(rng));
  s.entry_phase = spec.entry_phase.at(uniform01(rng));
  s.y_over_w = spec.y_over_w.at(uniform01(rng));
  return s;
}

inline TransitConfig transit_of(const SweepSpec& spec, const SweepSample& s) {
  TransitConfig t;
  t.vx = s.vx;
  t.vz = s.vz;
  t.entry_phase = s.entry_phase;
  t.y_over_w = s.y_over_w;
  t.z_start_over_w = spec.start_over_w;
  t.z_end_over_w = spec.final_over_w;
  t.coupling_over_kappa = s.coupling_over_kappa;
  t.shift_coupling_over_kappa = s.coupling_over_kappa;
  return t;
}

struct CorrelationPoint {
  SweepSample sample;
  bool ok = false;
  std::string error;
  double v_measured = 0.0;  // last in-field fringe, m/s
  double v_final = 0.0;     // |v_x| at final_over_w, m/s
  double r_a = 0.0;
  double r_v = 0.0;
  bool trapped = false;
  std::size_t exit_turning_points = 0;
};

/// One transit: v_m from the last free fringe above the detection floor,
/// r_A over that fringe, v_f from the ground truth far beyond the mode.
/// Trapped means at least one turning-point minimum after the envelope
/// centre. Failures are recorded in the point, not thrown.
inline CorrelationPoint run_point(const SweepSpec& spec, const SweepSample& sample) {
  CorrelationPoint p;
  p.sample = sample;
  try {
    const auto sc = make_scenario(spec.cavity, spec.particle, transit_of(spec, sample), spec.integrate);
    const auto trace = simulate(sc);
    p.v_final = std::abs(trace.samples.back().velocity.x);
    const auto d = detect(sc, trace);
    const auto s = normalized_scattering(d);
    const auto env = analysis::fit_envelope(s, 0.0);
    auto co = spec.analysis.classify;
    co.noise_sigma = spec.analysis.noise_sigma.value_or(0.0);
    const auto cls = analysis::classify_extrema(s, env, co);
    for (const auto& e : cls.sequence) {
      if (e.kind == analysis::ExtremumKind::turning && e.t > env.center) ++p.exit_turning_points;
    }
    p.trapped = p.exit_turning_points > 0;
    const auto fringe = analysis::extract_vx(cls, env, sc.cavity.wavelength(), analysis::Wing::exit);
    p.v_measured = fringe.velocity;
    p.r_a = analysis::area_ratio(d, cls, env, fringe).ratio;
    if (!(p.v_final > 0.0)) throw AnalysisError("particle leaves the mode without transverse velocity");
    p.r_v = p.v_measured / p.v_final;
    p.ok = true;
  } catch (const Error& e) {
    p.error = std::string(e.kind()) + ": " + e.what();
  } catch (const std::exception& e) {
    p.error = std::string("error: ") + e.what();
  }
  return p;
}

/// All samples of the sweep in index order; deterministic for a given spec
/// regardless of the thread count.
inline std::vector<CorrelationPoint> run_sweep(const SweepSpec& spec) {
  validate(spec);
  return parallel_map(spec.samples, [&](std::size_t i) { return run_point(spec, draw(spec, i)); }, spec.threads);
}

struct Stats {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

inline Stats stats(std::vector<double> v) {
  Stats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return s;
}

/// Ranks with ties averaged (1-based).
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation; empty below three points or without spread.
inline std::optional<double> rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 3) return std::nullopt;
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

/// Threshold c that best separates r_v < 1 (r_A < c) from r_v > 1 (r_A > c),
/// as the midpoint of the widest run of thresholds with the fewest
/// misclassified points. Empty without points on both sides of 1.
inline std::optional<double> sign_crossover(std::vector<std::pair<double, double>> ra_rv) {
  std::sort(ra_rv.begin(), ra_rv.end());
  const std::size_t n = ra_rv.size();
  std::size_t above = 0;
  for (const auto& p : ra_rv) above += p.second > 1.0;
  if (above == 0 || above == n) return std::nullopt;
  // cut j: points [0, j) predicted below 1, [j, n) above
  std::size_t errors = n - above;
  std::size_t best = errors, best_lo = 0, best_hi = 0;
  for (std::size_t j = 1; j <= n; ++j) {
    if (ra_rv[j - 1].second > 1.0) {
      ++errors;
    } else {
      --errors;
    }
    if (errors < best) {
      best = errors;
      best_lo = best_hi = j;
    } else if (errors == best && best_hi == j - 1) {
      best_hi = j;
    }
  }
  auto cut = [&](std::size_t j) {
    if (j == 0) return ra_rv.front().first;
    if (j == n) return ra_rv.back().first;
    return 0.5 * (ra_rv[j - 1].first + ra_rv[j].first);
  };
  return 0.5 * (cut(best_lo) + cut(best_hi));
}

struct BranchSummary {
  Stats r_a;
  Stats r_v;
  std::optional<double> rank_correlation;  // Spearman r_A vs r_v
};

struct SweepSummary {
  std::size_t total = 0;
  std::size_t failed = 0;
  BranchSummary trapped;
  BranchSummary untrapped;
  std::optional<double> trapped_crossover;  // r_A where r_v - 1 changes sign
  std::optional<double> trapped_peak_rv;    // largest r_v with r_A in (0.9, 1)
};

inline BranchSummary branch(const std::vector<CorrelationPoint>& points, bool trapped) {
  std::vector<double> ra, rv;
  for (const auto& p : points) {
    if (p.ok && p.trapped == trapped) {
      ra.push_back(p.r_a);
      rv.push_back(p.r_v);
    }
  }
  BranchSummary b;
  b.rank_correlation = rank_correlation(ra, rv);
  b.r_a = stats(std::move(ra));
  b.r_v = stats(std::move(rv));
  return b;
}

inline SweepSummary summarize(const std::vector<CorrelationPoint>& points) {
  if (points.empty()) throw ConfigError("cannot summarize an empty sweep");
  SweepSummary s;
  s.total = points.size();
  for (const auto& p : points) s.failed += !p.ok;
  s.trapped = branch(points, true);
  s.untrapped = branch(points, false);
  std::vector<std::pair<double, double>> tr;
  for (const auto& p : points) {
    if (!p.ok || !p.trapped) continue;
    tr.emplace_back(p.r_a, p.r_v);
    if (p.r_a > 0.9 && p.r_a < 1.0) s.trapped_peak_rv = std::max(s.trapped_peak_rv.value_or(p.r_v), p.r_v);
  }
  s.trapped_crossover = sign_crossover(std::move(tr));
  return s;
}

inline void write_csv(std::ostream& os, const std::vector<CorrelationPoint>& points) {
  os << "index,coupling_over_kappa,vx_m_s,vz_m_s,entry_phase_rad,y_over_w,ok,trapped,exit_turning_points,"
        "v_measured_m_s,v_final_m_s,r_A,r_v,error\n";
  for (const auto& p : points) {
    const auto& s = p.sample;
    std::string err = p.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << s.index << ',' << format_number(s.coupling_over_kappa) << ',' << format_number(s.vx) << ','
       << format_number(s.vz) << ',' << format_number(s.entry_phase) << ',' << format_number(s.y_over_w) << ','
       << (p.ok ? 1 : 0) << ',' << (p.trapped ? 1 : 0) << ',' << p.exit_turning_points << ','
       << format_number(p.v_measured) << ',' << format_number(p.v_final) << ',' << format_number(p.r_a) << ','
       << format_number(p.r_v) << ',' << err << '\n';
  }
}

inline nlohmann::ordered_json to_json(const Stats& s) {
  return {{"count", s.count}, {"mean", s.mean},     {"stddev", s.stddev},
          {"median", s.median}, {"min", s.min}, {"max", s.max}};
}

inline nlohmann::ordered_json to_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json to_json(const BranchSummary& b) {
  return {{"r_A", to_json(b.r_a)}, {"r_v", to_json(b.r_v)}, {"rank_correlation", to_json(b.rank_correlation)}};
}

inline nlohmann::ordered_json to_json(const SweepSummary& s) {
  return {{"total", s.total},
          {"failed", s.failed},
          {"trapped", to_json(s.trapped)},
          {"untrapped", to_json(s.untrapped)},
          {"trapped_crossover_r_A", to_json(s.trapped_crossover)},
          {"trapped_peak_r_v_near_unity", to_json(s.trapped_peak_rv)}};
}

} // namespace cavcool::ensemble
