#pragma once

#include <cmath>
#include <optional>

#include "cavcool/dynamics.hpp"
#include "cavcool/mie.hpp"
#include "cavcool/params.hpp"
#include "cavcool/signals.hpp"

namespace cavcool {

// One particle transit through the mode along +z. Lengths along y and z are
// in units of the waist; couplings in units of kappa.
struct TransitConfig {
  double vx = 0.23;           // m/s
  double vz = 0.7;            // m/s
  double entry_phase = 0.3;   // k x at the start, rad
  double y_over_w = 0.0;
  double z_start_over_w = -3.0;
  double z_end_over_w = 3.0;
  // Geometric force coupling U_x (offset-free); Mie-corrected U_0 when absent.
  std::optional<double> coupling_over_kappa;
  // Cavity-shift coupling; equals the force coupling when that is given,
  // otherwise the point-particle U_0.
  std::optional<double> shift_coupling_over_kappa;
  // Kinematic mode: v_x changes to this value around the mode centre and the
  // optical force is ignored.
  std::optional<double> prescribed_vx_out;
  double prescribed_width_over_tau = 0.3;
  bool particle = true;  // false: empty cavity, no scattering
};

// Detector noise relative to the empty-cavity photon number (I_c, I_s) and
// in radians (phase).
struct RelativeNoise {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct Scenario {
  DerivedCavity cavity;
  ParticleDerived particle;
  double force_coupling = 0.0;  // rad/s
  double shift_coupling = 0.0;  // rad/s
  SimState initial;
  TimeSpan span;
  IntegrateOptions options;
  std::optional<PrescribedVelocity> prescribed;
  bool empty = false;
};

inline void validate(const TransitConfig& t) {
  if (!std::isfinite(t.vx) || !std::isfinite(t.vz)) throw ConfigError("transit velocities must be finite");
  if (!(t.vz > 0.0)) throw ConfigError("forward velocity v_z must be positive");
  if (!(t.z_end_over_w > t.z_start_over_w)) throw ConfigError("transit must end above its start");
  if (!std::isfinite(t.entry_phase) || !std::isfinite(t.y_over_w)) throw ConfigError("entry point must be finite");
  if (t.coupling_over_kappa && !(*t.coupling_over_kappa >= 0.0)) throw ConfigError("coupling must be non-negative");
  if (t.shift_coupling_over_kappa && !(*t.shift_coupling_over_kappa >= 0.0)) {
    throw ConfigError("shift coupling must be non-negative");
  }
  if (t.prescribed_vx_out && !std::isfinite(*t.prescribed_vx_out)) throw ConfigError("prescribed v_x must be finite");
  if (!(t.prescribed_width_over_tau > 0.0)) throw ConfigError("prescribed velocity change width must be positive");
}

inline Scenario make_scenario(const CavityConfig& cavity, const ParticleConfig& particle, const TransitConfig& t,
                              const IntegrateOptions& options = {}) {
  validate(t);
  Scenario s;
  s.cavity = derive_cavity(cavity);
  s.particle = particle_properties(particle, s.cavity);
  s.options = options;
  s.empty = !t.particle;
  const double kappa = s.cavity.kappa;
  const double w = s.cavity.waist();
  if (s.empty) {
    s.force_coupling = 0.0;
    s.shift_coupling = 0.0;
  } else if (t.coupling_over_kappa) {
    s.force_coupling = *t.coupling_over_kappa * kappa;
    s.shift_coupling = t.shift_coupling_over_kappa.value_or(*t.coupling_over_kappa) * kappa;
  } else {
    const double ratio =
        mie::standing_wave_force_factor(particle.radius, particle.refractive_index(), s.cavity.k).ratio;
    s.force_coupling = s.particle.u0 * ratio;
    s.shift_coupling = t.shift_coupling_over_kappa ? *t.shift_coupling_over_kappa * kappa : s.particle.u0;
  }
  s.options.shift_coupling = s.shift_coupling;
  s.initial = entry_state(s.cavity, {t.entry_phase / s.cavity.k, t.y_over_w * w, t.z_start_over_w * w},
                          {t.vx, 0.0, t.vz});
  const double z0 = t.z_start_over_w * w, z1 = t.z_end_over_w * w;
  s.span = {0.0, transit_time(z0, t.vz, z1, s.options.gravity)};
  if (t.prescribed_vx_out) {
    const double tau = w / t.vz;
    const double t_center = z0 < 0.0 && z1 > 0.0 ? transit_time(z0, t.vz, 0.0, s.options.gravity) : 0.5 * s.span.end;
    s.prescribed = PrescribedVelocity{*t.prescribed_vx_out, t_center, t.prescribed_width_over_tau * tau};
  }
  return s;
}

inline SimTrace simulate(const Scenario& s) {
  if (s.prescribed) {
    return prescribed_transit(s.cavity, s.particle, s.shift_coupling, s.initial, s.span, *s.prescribed,
                              s.options.sample_rate, s.options.gravity);
  }
  return integrate(s.cavity, s.particle, s.force_coupling, s.initial, s.span, s.options);
}

/// Detector traces of a simulated transit; the scattered channel is zero
/// for an empty cavity.
inline DetectorTraces detect(const Scenario& s, const SimTrace& trace, const RelativeNoise& noise = {}) {
  NoiseOptions n;
  if (noise.sigma < 0.0) throw ConfigError("noise level must be non-negative");
  if (noise.sigma > 0.0) {
    const double photons = std::norm(s.cavity.empty_amplitude());
    n.intensity_sigma = noise.sigma * photons;
    n.scattered_sigma = s.empty ? 0.0 : noise.sigma * photons;
    n.phase_sigma = noise.sigma;
    n.seed = noise.seed;
  }
  auto d = synthesize(trace, s.cavity, n);
  if (s.empty) d.scattered.assign(d.size(), 0.0);
  return d;
}

} // namespace cavcool
