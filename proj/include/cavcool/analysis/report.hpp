#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cavcool/analysis/extrema.hpp"
#include "cavcool/analysis/physics.hpp"
#include "cavcool/analysis/trajectory.hpp"
#include "cavcool/analysis/velocity.hpp"

namespace cavcool::analysis {

// Noise-free traces: sampling at 10 MHz leaves true node minima below ~3e-4
// of the envelope, and fringes stay resolvable far into the wings.
inline constexpr double noise_free_node_threshold = 2e-3;
inline constexpr double noise_free_window_floor = 1e-4;

struct AnalysisOptions {
  ClassifyOptions classify;
  ReconstructOptions reconstruct;
  std::optional<double> noise_sigma;  // S_N units; estimated from the trace when absent
  AmplitudeReading amplitude_reading = AmplitudeReading::energy;
  RadiusOptions radius;
  double u_max_over_kappa = 10.0;

  // Simulated traces without detector noise.
  static AnalysisOptions noise_free() {
    AnalysisOptions o;
    o.noise_sigma = 0.0;
    o.classify.node_threshold = noise_free_node_threshold;
    o.classify.window_floor = noise_free_window_floor;
    return o;
  }
};

struct TrapMeasurement {
  double frequency = 0.0;         // Hz, from the turning-point spacing
  double energy_fraction = 0.0;   // 1 - S_N/env at the turning points
  double harmonic_frequency = 0.0;
  double depth = 1.0;             // local well depth relative to on-axis, resonant filling
  double nominal_frequency = 0.0; // harmonic frequency scaled to depth 1
  double time = 0.0;              // s, where it was measured
};

struct AnalysisReport {
  EnvelopeFit envelope;
  ExtremaClassification extrema;
  Trajectory trajectory;
  double noise_sigma = 0.0;
  double vz = 0.0;
  std::optional<Fringe> entry;
  std::optional<Fringe> exit;
  std::optional<double> cooling_factor;
  std::optional<AreaRatio> area;
  bool trapped = false;
  std::optional<TrapMeasurement> trap;
  std::optional<double> f_trap_formula;  // printed formula at the fitted U_x and inferred mass
  std::optional<UxEstimate> ux;
  std::optional<RadiusEstimate> radius;
  std::vector<std::string> warnings;
};

/// Robust noise level of S_N from samples far outside the mode (MAD of
/// first differences); zero when the trace has no such samples.
inline double estimate_noise(const SNTrace& s, const EnvelopeFit& env) {
  std::vector<double> diffs;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (env(s.t[i]) < 1e-6 * env.amplitude && env(s.t[i - 1]) < 1e-6 * env.amplitude) {
      diffs.push_back(std::abs(s.sn[i] - s.sn[i - 1]));
    }
  }
  if (diffs.size() < 50) return 0.0;
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  // median |N(0, 2 sigma^2)| = 0.6745 sqrt(2) sigma
  return diffs[diffs.size() / 2] / (0.6745 * std::sqrt(2.0));
}

/// Oscillation frequency from the pair of consecutive turning points closest
/// to the envelope centre (two turning points per period). The local depth is
/// (env/A) * I_c / n_res; the trap formula assumes depth 1, so the harmonic
/// frequency is also reported scaled by 1/sqrt(depth).
inline std::optional<TrapMeasurement> measure_trap(const DetectorTraces& d, const ExtremaClassification& cls,
                                                   const EnvelopeFit& env, const DerivedCavity& cav,
                                                   AmplitudeReading reading) {
  const auto tp = cls.turning_points();
  if (tp.size() < 2) return std::nullopt;
  std::size_t best = 0;
  double best_d = 1e300;
  for (std::size_t j = 0; j + 1 < tp.size(); ++j) {
    const double mid = 0.5 * (tp[j].t + tp[j + 1].t);
    if (std::abs(mid - env.center) < best_d) {
      best_d = std::abs(mid - env.center);
      best = j;
    }
  }
  TrapMeasurement m;
  m.frequency = 1.0 / (2.0 * (tp[best + 1].t - tp[best].t));
  const double r = 0.5 * (tp[best].ratio + tp[best + 1].ratio);
  m.energy_fraction = std::clamp(1.0 - r, 0.0, 0.999);
  m.time = 0.5 * (tp[best].t + tp[best + 1].t);
  if (reading == AmplitudeReading::position) {
    // position reading: k x_max / (pi/2), with cos^2(k x_max) = r
    m.energy_fraction = std::acos(std::sqrt(std::clamp(r, 0.0, 1.0))) / (0.5 * constants::pi);
  }
  m.harmonic_frequency = anharmonic_correction(m.frequency, m.energy_fraction, reading);
  double ic = 0.0;
  std::size_t n = 0;
  for (std::size_t i = tp[best].index; i <= tp[best + 1].index && i < d.size(); ++i, ++n) ic += d.intensity[i];
  if (n == 0) throw AnalysisError("trap measurement interval holds no samples");
  m.depth = env(m.time) / env.amplitude * (ic / static_cast<double>(n)) / cav.resonant_photon_number();
  if (!(m.depth > 0.0)) throw AnalysisError("cavity intensity vanishes at the trap measurement");
  m.nominal_frequency = m.harmonic_frequency / std::sqrt(m.depth);
  return m;
}

/// Full measurement pipeline on one transit. Envelope and extremum stages
/// are required; later stages record a warning and leave their field empty
/// when the trace does not support them.
inline AnalysisReport analyze(const DetectorTraces& d, const DerivedCavity& cav, const AnalysisOptions& opt = {}) {
  AnalysisReport rep;
  const auto s = normalized_scattering(d);
  const double lambda = cav.wavelength();
  rep.envelope = fit_envelope(s, opt.noise_sigma.value_or(0.0));
  rep.noise_sigma = opt.noise_sigma ? *opt.noise_sigma : estimate_noise(s, rep.envelope);
  if (rep.noise_sigma > 0.0 && !opt.noise_sigma) rep.envelope = fit_envelope(s, rep.noise_sigma);
  rep.vz = rep.envelope.vz(cav.waist());
  ClassifyOptions co = opt.classify;
  co.noise_sigma = rep.noise_sigma;
  rep.extrema = classify_extrema(s, rep.envelope, co);
  rep.trapped = rep.extrema.trapped();
  rep.trajectory = reconstruct_trajectory(s, rep.extrema, rep.envelope, lambda, opt.reconstruct);

  auto attempt = [&](auto&& fn) {
    try {
      fn();
    } catch (const AnalysisError& e) {
      rep.warnings.emplace_back(e.what());
    }
  };
  attempt([&] { rep.entry = extract_vx(rep.extrema, rep.envelope, lambda, Wing::entry); });
  attempt([&] { rep.exit = extract_vx(rep.extrema, rep.envelope, lambda, Wing::exit); });
  if (rep.entry && rep.exit) {
    const double q = rep.entry->velocity / rep.exit->velocity;
    rep.cooling_factor = q * q;
  }
  if (rep.exit) attempt([&] { rep.area = area_ratio(d, rep.extrema, rep.envelope, *rep.exit); });
  attempt([&] { rep.trap = measure_trap(d, rep.extrema, rep.envelope, cav, opt.amplitude_reading); });
  attempt([&] { rep.ux = ux_from_phase(d, s, rep.envelope, rep.extrema, cav, opt.u_max_over_kappa); });
  if (rep.trap && rep.ux && rep.ux->coupling > 0.0) {
    attempt([&] { rep.radius = infer_radius(rep.trap->nominal_frequency, rep.ux->coupling, cav, opt.radius); });
    if (rep.radius) {
      rep.f_trap_formula = trap_frequency(cav.config.input_power, rep.ux->coupling, rep.radius->mass, cav.kappa, lambda);
    }
  }
  return rep;
}

} // namespace cavcool::analysis
