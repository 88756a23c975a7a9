#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "cavcool/errors.hpp"
#include "cavcool/signals.hpp"

namespace cavcool::analysis {

struct Extremum {
  std::size_t index = 0;
  double t = 0.0;      // parabola-refined
  double value = 0.0;  // parabola-refined
  bool maximum = false;
};

namespace detail {

inline void refine(const std::vector<double>& t, const std::vector<double>& v, Extremum& e) {
  const std::size_t j = e.index;
  e.t = t[j];
  e.value = v[j];
  if (j == 0 || j + 1 >= v.size()) return;
  const double den = v[j - 1] - 2.0 * v[j] + v[j + 1];
  if (den == 0.0) return;
  const double d = std::clamp(0.5 * (v[j - 1] - v[j + 1]) / den, -0.5, 0.5);
  e.t = t[j] + d * (d > 0 ? t[j + 1] - t[j] : t[j] - t[j - 1]);
  e.value = v[j] - 0.25 * (v[j - 1] - v[j + 1]) * d;
}

} // namespace detail

/// Alternating maxima and minima of v over [begin, end) by hysteresis: an
/// extremum is accepted once the signal has moved away from it by more than
/// `hysteresis(i)`. Extrema on the range boundary are dropped.
template <class Hysteresis>
std::vector<Extremum> find_extrema(const std::vector<double>& t, const std::vector<double>& v, Hysteresis&& hysteresis,
                                   std::size_t begin = 0, std::size_t end = static_cast<std::size_t>(-1)) {
  end = std::min(end, v.size());
  std::vector<Extremum> out;
  if (end <= begin + 2) return out;
  enum class Mode { unknown, seek_max, seek_min } mode = Mode::unknown;
  std::size_t hi = begin, lo = begin;
  auto push = [&](std::size_t idx, bool is_max) {
    if (idx == begin || idx + 1 >= end) return;
    Extremum e;
    e.index = idx;
    e.maximum = is_max;
    detail::refine(t, v, e);
    out.push_back(e);
  };
  for (std::size_t i = begin; i < end; ++i) {
    const double h = hysteresis(i);
    switch (mode) {
      case Mode::unknown:
        if (v[i] > v[hi]) hi = i;
        if (v[i] < v[lo]) lo = i;
        if (v[i] < v[hi] - h) {
          push(hi, true);
          mode = Mode::seek_min;
          lo = i;
        } else if (v[i] > v[lo] + h) {
          push(lo, false);
          mode = Mode::seek_max;
          hi = i;
        }
        break;
      case Mode::seek_min:
        if (v[i] < v[lo]) lo = i;
        if (v[i] > v[lo] + h) {
          push(lo, false);
          mode = Mode::seek_max;
          hi = i;
        }
        break;
      case Mode::seek_max:
        if (v[i] > v[hi]) hi = i;
        if (v[i] < v[hi] - h) {
          push(hi, true);
          mode = Mode::seek_min;
          lo = i;
        }
        break;
    }
  }
  return out;
}

inline std::vector<Extremum> find_extrema(const std::vector<double>& t, const std::vector<double>& v,
                                          double hysteresis) {
  return find_extrema(t, v, [hysteresis](std::size_t) { return hysteresis; });
}

/// Gaussian envelope A exp(-2 (t - t0)^2 / tau^2); tau = w / v_z.
struct EnvelopeFit {
  double amplitude = 0.0;
  double center = 0.0;
  double half_width = 0.0;
  double rms_residual = 0.0;  // relative to amplitude
  std::size_t points = 0;
  bool from_peaks = true;     // false: fitted to all samples (no fringes)

  double operator()(double t) const {
    const double u = (t - center) / half_width;
    return amplitude * std::exp(-2.0 * u * u);
  }
  double vz(double waist) const { return waist / half_width; }
  // Integral of the envelope over [a, b].
  double integral(double a, double b) const {
    const double s = std::sqrt(2.0) / half_width;
    return amplitude * std::sqrt(constants::pi) / (2.0 * s) * (std::erf(s * (b - center)) - std::erf(s * (a - center)));
  }
};

namespace detail {

struct GaussianResiduals : Eigen::DenseFunctor<double> {
  const std::vector<double>* x;
  const std::vector<double>* y;
  GaussianResiduals(const std::vector<double>& xs, const std::vector<double>& ys)
      : Eigen::DenseFunctor<double>(3, static_cast<int>(xs.size())), x(&xs), y(&ys) {}

  int operator()(const InputType& p, ValueType& f) const {
    for (std::size_t i = 0; i < x->size(); ++i) {
      const double u = ((*x)[i] - p[1]) / p[2];
      f[i] = p[0] * std::exp(-2.0 * u * u) - (*y)[i];
    }
    return 0;
  }
  int df(const InputType& p, JacobianType& j) const {
    for (std::size_t i = 0; i < x->size(); ++i) {
      const double d = (*x)[i] - p[1];
      const double u = d / p[2];
      const double g = std::exp(-2.0 * u * u);
      j(i, 0) = g;
      j(i, 1) = p[0] * g * 4.0 * d / (p[2] * p[2]);
      j(i, 2) = p[0] * g * 4.0 * d * d / (p[2] * p[2] * p[2]);
    }
    return 0;
  }
};

} // namespace detail

/// Least-squares Gaussian through (t_i, y_i), started from the weighted
/// first and second moments of the points.
inline EnvelopeFit fit_gaussian(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() < 3) throw AnalysisError("Gaussian fit needs at least three points");
  double sw = 0.0, st = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sw += y[i];
    st += y[i] * t[i];
    peak = std::max(peak, y[i]);
  }
  if (!(sw > 0.0)) throw AnalysisError("Gaussian fit needs positive data");
  const double mean = st / sw;
  double var = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) var += y[i] * (t[i] - mean) * (t[i] - mean);
  var /= sw;
  const double scale = std::max(2.0 * std::sqrt(var), 1e-300);
  // Work in units of the initial width around the initial centre.
  std::vector<double> x(t.size()), yn(y.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    x[i] = (t[i] - mean) / scale;
    yn[i] = y[i] / peak;
  }
  detail::GaussianResiduals fn(x, yn);
  Eigen::LevenbergMarquardt<detail::GaussianResiduals> lm(fn);
  lm.setXtol(1e-15);
  lm.setFtol(1e-15);
  lm.setMaxfev(2000);
  Eigen::VectorXd p(3);
  p << 1.0, 0.0, 1.0;
  lm.minimize(p);
  if (!p.allFinite() || p[0] <= 0.0 || p[2] == 0.0) throw AnalysisError("Gaussian envelope fit diverged");
  EnvelopeFit fit;
  fit.amplitude = p[0] * peak;
  fit.center = mean + p[1] * scale;
  fit.half_width = std::abs(p[2]) * scale;
  fit.points = t.size();
  double ss = 0.0;
  Eigen::VectorXd r(x.size());
  fn(p, r);
  for (int i = 0; i < r.size(); ++i) ss += r[i] * r[i];
  fit.rms_residual = std::sqrt(ss / r.size()) / p[0];
  return fit;
}

namespace detail {

// Curvature of ln v at sample j from a least-squares parabola over the
// samples within 10% of v[j] (at least one on each side).
inline double log_curvature(const std::vector<double>& t, const std::vector<double>& v, std::size_t j) {
  if (j == 0 || j + 1 >= v.size() || !(v[j] > 0.0)) return 0.0;
  std::size_t lo = j - 1, hi = j + 1;
  while (lo > 0 && v[lo - 1] > 0.9 * v[j] && j - lo < 64) --lo;
  while (hi + 1 < v.size() && v[hi + 1] > 0.9 * v[j] && hi - j < 64) ++hi;
  const std::size_t m = std::min(j - lo, hi - j);
  lo = j - m;
  hi = j + m;
  if (v[lo] <= 0.0 || v[hi] <= 0.0) return 0.0;
  Eigen::MatrixXd a(hi - lo + 1, 3);
  Eigen::VectorXd y(hi - lo + 1);
  for (std::size_t i = lo; i <= hi; ++i) {
    const double x = t[i] - t[j];
    a.row(i - lo) << 1.0, x, x * x;
    y[i - lo] = std::log(std::max(v[i], 1e-300));
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(y);
  return 2.0 * c[2];
}

} // namespace detail

/// Gaussian fit to the local maxima of S_N (fringe tops). Maxima below
/// `min_relative` of the largest are ignored. Without enough fringes the
/// whole trace above that level is fitted instead.
///
/// A fringe top sits above the envelope by exp(g^2/(4 X'^2)), with g the
/// envelope log-slope and X' the fringe phase rate there; X'^2 follows from
/// the measured log-curvature of the peak minus the envelope's -4/tau^2.
/// The fit is repeated with the tops corrected by that factor.
inline EnvelopeFit fit_envelope(const SNTrace& s, double noise_sigma = 0.0, double min_relative = 0.02) {
  if (s.size() < 5) throw AnalysisError("trace too short for an envelope fit");
  const double top = *std::max_element(s.sn.begin(), s.sn.end());
  if (!(top > 0.0)) throw AnalysisError("no transit found: S_N is zero everywhere");
  const double h = std::max(3.0 * noise_sigma, 1e-6 * top);
  const double floor = std::max(min_relative * top, 5.0 * noise_sigma);
  std::vector<double> pt, pv, curv;
  for (const auto& e : find_extrema(s.t, s.sn, h)) {
    if (e.maximum && e.value >= floor) {
      pt.push_back(e.t);
      pv.push_back(e.value);
      curv.push_back(detail::log_curvature(s.t, s.sn, e.index));
    }
  }
  bool from_peaks = pt.size() >= 3;
  if (!from_peaks) {
    pt.clear();
    pv.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.sn[i] >= floor) {
        pt.push_back(s.t[i]);
        pv.push_back(s.sn[i]);
      }
    }
  }
  auto fit = fit_gaussian(pt, pv);
  if (from_peaks) {
    std::vector<double> corrected(pv);
    for (int pass = 0; pass < 6; ++pass) {
      const double tau2 = fit.half_width * fit.half_width;
      for (std::size_t i = 0; i < pt.size(); ++i) {
        const double rate2 = -0.5 * (curv[i] + 4.0 / tau2);
        const double g = -4.0 * (pt[i] - fit.center) / tau2;
        const double lift = rate2 > 0.0 ? g * g / (4.0 * rate2) : 0.0;
        corrected[i] = pv[i] * std::exp(std::min(lift, 0.5));
      }
      fit = fit_gaussian(pt, corrected);
    }
  }
  fit.from_peaks = from_peaks;
  if (fit.center < s.t.front() || fit.center > s.t.back()) {
    throw AnalysisError("no transit found: envelope centre lies outside the trace");
  }
  if (!(fit.amplitude > 0.0 && fit.amplitude <= 1.5) || !(fit.half_width > 0.0)) {
    throw AnalysisError("envelope fit returned unphysical parameters");
  }
  return fit;
}

enum class ExtremumKind { antinode, node, turning, turning_max };

inline const char* to_string(ExtremumKind k) {
  switch (k) {
    case ExtremumKind::antinode: return "antinode";
    case ExtremumKind::node: return "node";
    case ExtremumKind::turning: return "turning";
    case ExtremumKind::turning_max: return "turning_max";
  }
  return "?";
}

struct ClassifiedExtremum {
  std::size_t index = 0;
  double t = 0.0;
  double value = 0.0;  // S_N
  double ratio = 0.0;  // S_N / envelope
  ExtremumKind kind = ExtremumKind::antinode;
};

struct ClassifyOptions {
  double node_threshold = 0.05;    // minima below this fraction of the envelope are nodes
  double antinode_threshold = 0.9;  // maxima below this fraction are turning points
  double window_floor = 1e-3;       // analyse where envelope >= floor * amplitude
  double noise_sigma = 0.0;
};

struct ExtremaClassification {
  std::vector<ClassifiedExtremum> sequence;  // time ordered, alternating max/min
  double node_threshold = 0.05;
  double window_start = 0.0;
  double window_end = 0.0;
  std::size_t first_index = 0;  // sample range of the window
  std::size_t last_index = 0;   // exclusive

  std::vector<ClassifiedExtremum> of_kind(ExtremumKind k) const {
    std::vector<ClassifiedExtremum> out;
    for (const auto& e : sequence) {
      if (e.kind == k) out.push_back(e);
    }
    return out;
  }
  std::vector<ClassifiedExtremum> maxima() const { return of_kind(ExtremumKind::antinode); }
  std::vector<ClassifiedExtremum> nodes() const { return of_kind(ExtremumKind::node); }
  std::vector<ClassifiedExtremum> turning_points() const { return of_kind(ExtremumKind::turning); }
  bool trapped() const { return !turning_points().empty(); }
};

/// Sample range where the envelope is large enough to analyse. With noise,
/// the envelope must also keep the relative noise below a sixth of the node
/// threshold so node passages and turning points stay separable.
inline std::pair<std::size_t, std::size_t> analysis_window(const SNTrace& s, const EnvelopeFit& env, double floor,
                                                           double noise_sigma, double node_threshold = 0.0) {
  double level = std::max(floor * env.amplitude, 10.0 * noise_sigma);
  if (noise_sigma > 0.0 && node_threshold > 0.0) level = std::max(level, 6.0 * noise_sigma / node_threshold);
  std::size_t a = s.size(), b = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (env(s.t[i]) >= level) {
      a = std::min(a, i);
      b = i + 1;
    }
  }
  if (a >= b) throw AnalysisError("envelope never rises above the analysis floor");
  return {a, b};
}

/// Extrema of S_N divided by the fitted envelope, labelled as antinode
/// passages, node passages or turning points.
inline ExtremaClassification classify_extrema(const SNTrace& s, const EnvelopeFit& env,
                                              const ClassifyOptions& opt = {}) {
  ExtremaClassification out;
  out.node_threshold = opt.node_threshold;
  const auto [a, b] = analysis_window(s, env, opt.window_floor, opt.noise_sigma, opt.node_threshold);
  out.first_index = a;
  out.last_index = b;
  out.window_start = s.t[a];
  out.window_end = s.t[b - 1];
  std::vector<double> r(s.size(), 0.0);
  for (std::size_t i = a; i < b; ++i) r[i] = s.sn[i] / env(s.t[i]);
  auto hyst = [&](std::size_t i) { return std::max(1e-6, 3.0 * opt.noise_sigma / env(s.t[i])); };
  std::string ambiguous;
  for (const auto& e : find_extrema(s.t, r, hyst, a, b)) {
    ClassifiedExtremum c;
    c.index = e.index;
    c.t = e.t;
    c.ratio = e.value;
    c.value = e.value * env(e.t);
    if (e.maximum) {
      c.kind = e.value >= opt.antinode_threshold ? ExtremumKind::antinode : ExtremumKind::turning_max;
    } else {
      c.kind = e.value < opt.node_threshold ? ExtremumKind::node : ExtremumKind::turning;
      const double sigma_r = opt.noise_sigma / env(e.t);
      if (sigma_r > 0.0 && std::abs(e.value - opt.node_threshold) < 2.0 * sigma_r) {
        ambiguous += " t=" + std::to_string(e.t) + " (S_N/env=" + std::to_string(e.value) + ")";
      }
    }
    out.sequence.push_back(c);
  }
  if (!ambiguous.empty()) {
    throw AnalysisError("noise too large to separate node passages from turning points at" + ambiguous);
  }
  return out;
}

} // namespace cavcool::analysis
