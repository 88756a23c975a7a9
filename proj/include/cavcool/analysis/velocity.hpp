#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "cavcool/analysis/extrema.hpp"

namespace cavcool::analysis {

enum class Wing { entry, exit };

/// One free fringe: antinode, node, antinode. The particle covers lambda/2
/// between the two antinode passages.
struct Fringe {
  double t_first = 0.0;
  double t_node = 0.0;
  double t_last = 0.0;
  double velocity = 0.0;   // |v_x|, m/s
  double amplitude = 0.0;  // envelope at the node passage

  double period() const { return t_last - t_first; }
};

/// First free fringe before the first turning point and the envelope centre
/// (entry), or the last one after the last turning point and the centre (exit).
inline Fringe extract_vx(const ExtremaClassification& cls, const EnvelopeFit& env, double wavelength, Wing which) {
  const auto& seq = cls.sequence;
  const auto turning = cls.turning_points();
  std::optional<Fringe> found;
  for (std::size_t j = 0; j + 2 < seq.size(); ++j) {
    if (seq[j].kind != ExtremumKind::antinode || seq[j + 1].kind != ExtremumKind::node ||
        seq[j + 2].kind != ExtremumKind::antinode) {
      continue;
    }
    Fringe f;
    f.t_first = seq[j].t;
    f.t_node = seq[j + 1].t;
    f.t_last = seq[j + 2].t;
    f.velocity = wavelength / (2.0 * f.period());
    f.amplitude = env(f.t_node);
    if (which == Wing::entry) {
      if (f.t_last > env.center) break;
      if (!turning.empty() && f.t_last > turning.front().t) break;
      found = f;
      break;
    }
    if (f.t_first < env.center) continue;
    if (!turning.empty() && f.t_first < turning.back().t) continue;
    found = f;
  }
  if (!found) {
    throw AnalysisError(which == Wing::entry ? "no complete free fringe in the entry wing"
                                             : "no complete free fringe in the exit wing");
  }
  return *found;
}

struct AreaRatio {
  double ratio = 0.0;  // 2 A1 / A2
  double a1 = 0.0;
  double a2 = 0.0;
  double offset = 0.0;
  double envelope_amplitude = 0.0;  // fitted I_s envelope height
};

namespace detail {

// Trapezoidal integral of samples over [lo, hi] with linear end pieces.
inline double integrate_samples(const std::vector<double>& t, const std::vector<double>& v, double lo, double hi,
                                double offset) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double a = std::max(t[i], lo), b = std::min(t[i + 1], hi);
    if (!(b > a)) continue;
    const double h = t[i + 1] - t[i];
    const double va = v[i] + (v[i + 1] - v[i]) * (a - t[i]) / h - offset;
    const double vb = v[i] + (v[i + 1] - v[i]) * (b - t[i]) / h - offset;
    acc += 0.5 * (va + vb) * (b - a);
  }
  return acc;
}

} // namespace detail

/// Offset-subtracted I_s integrated between the two antinode passages of
/// `fringe` (A1), against the Gaussian envelope of I_s over the same interval
/// (A2). The envelope keeps the shape of the S_N fit; its height is fitted to
/// the I_s maxima of the fringe and its neighbours, so slow changes of I_c
/// near the mode centre do not bias it.
inline AreaRatio area_ratio(const DetectorTraces& d, const ExtremaClassification& cls, const EnvelopeFit& env,
                            const Fringe& fringe, double offset = 0.0) {
  const double span = fringe.period();
  const double dt = d.size() > 1 ? d.t[1] - d.t[0] : 0.0;
  if (!(span > 4.0 * dt)) throw AnalysisError("exit fringe spans too few samples for an area ratio");
  double num = 0.0, den = 0.0;
  for (const auto& e : cls.sequence) {
    if (e.kind != ExtremumKind::antinode) continue;
    if (e.t < fringe.t_first - span || e.t > fringe.t_last + span) continue;
    const double g = env(e.t) / env.amplitude;
    const double is = d.scattered[e.index] - offset;
    num += is * g;
    den += g * g;
  }
  if (!(den > 0.0)) throw AnalysisError("no I_s maxima around the exit fringe");
  AreaRatio out;
  out.offset = offset;
  out.envelope_amplitude = num / den;
  out.a1 = detail::integrate_samples(d.t, d.scattered, fringe.t_first, fringe.t_last, offset);
  out.a2 = out.envelope_amplitude / env.amplitude * env.integral(fringe.t_first, fringe.t_last);
  if (!(out.a2 > 0.0)) throw AnalysisError("vanishing envelope area");
  out.ratio = 2.0 * out.a1 / out.a2;
  return out;
}

} // namespace cavcool::analysis
