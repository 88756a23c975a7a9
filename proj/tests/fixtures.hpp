#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cavcool/analysis/trajectory.hpp"
#include "cavcool/dynamics.hpp"
#include "cavcool/signals.hpp"

namespace fixtures {

namespace cc = cavcool;

// One transit through the mode from z = -3w to +3w.
struct Transit {
  cc::DerivedCavity cav;
  cc::ParticleDerived pd;
  double coupling = 0.0;
  cc::SimState init;
  cc::TimeSpan span;
  cc::IntegrateOptions opt;

  cc::SimTrace run() const { return cc::integrate(cav, pd, coupling, init, span, opt); }
};

inline Transit transit(double vx, double vz, double entry_phase, double y_over_w, double coupling_over_kappa = 2.3,
                       double detuning_over_kappa = -1.0) {
  Transit f;
  f.cav = cc::derive_cavity(cc::with_detuning_over_kappa(cc::CavityConfig{}, detuning_over_kappa));
  f.pd = cc::particle_properties(cc::ParticleConfig{}, f.cav);
  f.coupling = coupling_over_kappa * f.cav.kappa;
  const double w = f.cav.waist();
  f.init = cc::entry_state(f.cav, {entry_phase / f.cav.k, y_over_w * w, -3.0 * w}, {vx, 0.0, vz});
  f.span = {0.0, cc::transit_time(-3.0 * w, vz, 3.0 * w, true)};
  f.opt.shift_coupling = f.coupling;
  return f;
}

// v_x = 23 cm/s, v_z = 0.7 m/s, U_x = 2.3 kappa, Delta = -kappa.
inline Transit fig3(double detuning_over_kappa = -1.0) { return transit(0.23, 0.7, 0.3, 0.0, 2.3, detuning_over_kappa); }

// Ground-truth state at time t (nearest output sample).
inline const cc::SimState& at(const cc::SimTrace& tr, double t) {
  const double fs = tr.meta.options.sample_rate;
  const auto i = static_cast<std::size_t>(std::max(0.0, std::round((t - tr.samples.front().t) * fs)));
  return tr.samples[std::min(i, tr.samples.size() - 1)];
}

// Mean |v_x| over [t0, t1] from the ground truth.
inline double mean_speed(const cc::SimTrace& tr, double t0, double t1) {
  const auto& a = at(tr, t0);
  const auto& b = at(tr, t1);
  return std::abs(b.position.x - a.position.x) / (b.t - a.t);
}

// S_N trace sampled from a function on a uniform grid.
inline cc::SNTrace sampled(double t0, double t1, double fs, const std::function<double(double)>& f) {
  cc::SNTrace s;
  const auto n = static_cast<std::size_t>(std::floor((t1 - t0) * fs)) + 1;
  s.t.resize(n);
  s.sn.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.t[i] = t0 + static_cast<double>(i) / fs;
    s.sn[i] = f(s.t[i]);
  }
  return s;
}

// Detector traces with constant I_c = n and I_s = n S_N, zero phase.
inline cc::DetectorTraces constant_field(const cc::SNTrace& s, double photons) {
  cc::DetectorTraces d;
  d.t = s.t;
  d.intensity.assign(s.size(), photons);
  d.phase.assign(s.size(), 0.0);
  d.scattered.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) d.scattered[i] = photons * s.sn[i];
  d.sample_rate = s.sample_rate();
  return d;
}

inline double gaussian(double t, double t0, double tau) {
  const double u = (t - t0) / tau;
  return std::exp(-2.0 * u * u);
}

// RMS of the reconstruction against ground truth kx over the samples `keep`,
// after choosing the sign and lattice offset (multiple of pi) that fit best.
inline double aligned_rms(const cc::analysis::Trajectory& tr, const std::vector<double>& truth_kx,
                          const std::vector<std::size_t>& keep) {
  double best = 1e300;
  for (double sign : {-1.0, 1.0}) {
    double mean = 0.0;
    for (auto i : keep) mean += truth_kx[i] - sign * tr.kx[i];
    mean /= static_cast<double>(keep.size());
    const double offset = cc::constants::pi * std::round(mean / cc::constants::pi);
    double ss = 0.0;
    for (auto i : keep) {
      const double e = sign * tr.kx[i] + offset - truth_kx[i];
      ss += e * e;
    }
    best = std::min(best, std::sqrt(ss / static_cast<double>(keep.size())));
  }
  return best;
}

} // namespace fixtures
