#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cavcool/dynamics.hpp"
#include "cavcool/errors.hpp"
#include "cavcool/params.hpp"

namespace cavcool {

// Additive Gaussian detector noise, one standard deviation per channel.
// I_c and I_s noise are in intracavity photons, phase noise in radians.
struct NoiseOptions {
  double intensity_sigma = 0.0;
  double phase_sigma = 0.0;
  double scattered_sigma = 0.0;
  std::uint64_t seed = 0;

  bool enabled() const { return intensity_sigma > 0.0 || phase_sigma > 0.0 || scattered_sigma > 0.0; }
};

struct DetectorTraces {
  std::vector<double> t;
  std::vector<double> intensity;  // I_c = |a|^2
  std::vector<double> phase;      // unwrapped arg(a / a_empty)
  std::vector<double> scattered;  // I_s = |a|^2 f^2
  double sample_rate = 0.0;
  NoiseOptions noise;
  std::vector<std::string> warnings;

  std::size_t size() const { return t.size(); }
};

struct SNTrace {
  std::vector<double> t;
  std::vector<double> sn;
  double normalisation = 1.0;  // the value of I_s/I_c mapped to 1

  std::size_t size() const { return t.size(); }
  double sample_rate() const { return t.size() > 1 ? (t.size() - 1) / (t.back() - t.front()) : 0.0; }
};

/// Mode intensity f^2 at a point; x = 0 is an antinode.
inline double mode_intensity(const DerivedCavity& cav, const Vec3& p) {
  const double c = std::cos(cav.k * p.x);
  const double w = cav.waist();
  return c * c * std::exp(-2.0 * (p.y * p.y + p.z * p.z) / (w * w));
}

namespace detail {

inline std::vector<double> unwrap(const std::vector<double>& wrapped) {
  std::vector<double> out(wrapped.size());
  double offset = 0.0;
  for (std::size_t i = 0; i < wrapped.size(); ++i) {
    if (i > 0) {
      const double d = wrapped[i] + offset - out[i - 1];
      offset -= 2.0 * constants::pi * std::round(d / (2.0 * constants::pi));
    }
    out[i] = wrapped[i] + offset;
  }
  return out;
}

inline std::vector<double> resample(const std::vector<double>& t, const std::vector<double>& v,
                                    const std::vector<double>& t_new) {
  std::vector<double> out(t_new.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < t_new.size(); ++i) {
    while (j + 2 < t.size() && t[j + 1] < t_new[i]) ++j;
    const double s = (t_new[i] - t[j]) / (t[j + 1] - t[j]);
    out[i] = v[j] + std::clamp(s, 0.0, 1.0) * (v[j + 1] - v[j]);
  }
  return out;
}

} // namespace detail

/// Detector observables of a simulated transit, optionally resampled to
/// `sample_rate` (linear interpolation) and with additive Gaussian noise.
inline DetectorTraces synthesize(const SimTrace& trace, const DerivedCavity& cav, const NoiseOptions& noise = {},
                                 double sample_rate = 0.0) {
  const auto& s = trace.samples;
  if (s.size() < 2) throw ConfigError("trace needs at least two samples");
  const double native_rate = (s.size() - 1) / (s.back().t - s.front().t);
  const double fs = sample_rate > 0.0 ? sample_rate : native_rate;
  const std::complex<double> ref = cav.empty_amplitude();

  DetectorTraces d;
  d.sample_rate = fs;
  d.noise = noise;
  std::vector<double> t(s.size()), ic(s.size()), ph(s.size()), is(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    t[i] = s[i].t;
    ic[i] = std::norm(s[i].field);
    ph[i] = std::abs(ref) > 0.0 ? std::arg(s[i].field / ref) : 0.0;
    is[i] = ic[i] * mode_intensity(cav, s[i].position);
  }
  ph = detail::unwrap(ph);
  if (sample_rate > 0.0 && std::abs(sample_rate - native_rate) > 1e-9 * native_rate) {
    const long n = static_cast<long>(std::floor((t.back() - t.front()) * fs * (1.0 + 1e-12))) + 1;
    std::vector<double> tn(n);
    for (long i = 0; i < n; ++i) tn[i] = t.front() + i / fs;
    ic = detail::resample(t, ic, tn);
    ph = detail::resample(t, ph, tn);
    is = detail::resample(t, is, tn);
    t = std::move(tn);
  }
  const double f_trap = trace.meta.expected_trap_frequency;
  if (f_trap > 0.0 && fs < 4.0 * f_trap) {
    d.warnings.push_back("sample rate " + std::to_string(fs) + " Hz is below 4x the expected trap frequency " +
                         std::to_string(f_trap) + " Hz; channelled oscillations will alias");
  }
  if (noise.enabled()) {
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      ic[i] += noise.intensity_sigma * gauss(rng);
      ph[i] += noise.phase_sigma * gauss(rng);
      is[i] += noise.scattered_sigma * gauss(rng);
    }
  }
  d.t = std::move(t);
  d.intensity = std::move(ic);
  d.phase = std::move(ph);
  d.scattered = std::move(is);
  return d;
}

/// S_N = (I_s/I_c) / max(I_s/I_c). With noise the 99.9th percentile replaces
/// the maximum. Samples whose I_c falls below `guard` times the largest I_c
/// raise an AnalysisError.
inline SNTrace normalized_scattering(const DetectorTraces& d, double guard = 1e-6) {
  if (d.t.empty()) throw AnalysisError("empty detector trace");
  const double ic_max = *std::max_element(d.intensity.begin(), d.intensity.end());
  if (!(ic_max > 0.0)) throw AnalysisError("intracavity intensity is zero over the whole trace");
  SNTrace out;
  out.t = d.t;
  out.sn.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.intensity[i] < guard * ic_max) {
      throw AnalysisError("intracavity intensity vanishes at t=" + std::to_string(d.t[i]) +
                          " s; S_N is undefined there");
    }
    out.sn[i] = d.scattered[i] / d.intensity[i];
  }
  double norm = 0.0;
  if (d.noise.enabled()) {
    std::vector<double> sorted = out.sn;
    const std::size_t idx = static_cast<std::size_t>(std::floor(0.999 * (sorted.size() - 1)));
    std::nth_element(sorted.begin(), sorted.begin() + idx, sorted.end());
    norm = sorted[idx];
  } else {
    norm = *std::max_element(out.sn.begin(), out.sn.end());
  }
  if (!(norm > 0.0)) throw AnalysisError("no scattered light in trace");
  out.normalisation = norm;
  for (double& v : out.sn) v /= norm;
  return out;
}

/// Lag (s) at which `b` best follows `a`: argmax over |lag| <= max_lag of the
/// normalised cross-correlation of the mean-free series, refined parabolically.
/// Positive when features of `a` appear later in `b`.
inline double cross_correlation_lag(const std::vector<double>& a, const std::vector<double>& b,
                                    double sample_rate, double max_lag) {
  if (a.size() != b.size() || a.size() < 4) throw AnalysisError("series must have equal length >= 4");
  const long n = static_cast<long>(a.size());
  const long m = std::min<long>(static_cast<long>(std::ceil(max_lag * sample_rate)), n / 2);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
  };
  const double ma = mean(a), mb = mean(b);
  std::vector<double> c(2 * m + 1, 0.0);
  for (long lag = -m; lag <= m; ++lag) {
    double acc = 0.0;
    for (long i = std::max(0L, -lag); i < std::min(n, n - lag); ++i) acc += (a[i] - ma) * (b[i + lag] - mb);
    c[lag + m] = acc;
  }
  const long best = std::max_element(c.begin(), c.end()) - c.begin();
  double shift = 0.0;
  if (best > 0 && best < 2 * m) {
    const double den = c[best - 1] - 2.0 * c[best] + c[best + 1];
    if (den != 0.0) shift = 0.5 * (c[best - 1] - c[best + 1]) / den;
  }
  return (best - m + shift) / sample_rate;
}

} // namespace cavcool
