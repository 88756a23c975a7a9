#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "cavcool/constants.hpp"
#include "cavcool/errors.hpp"
#include "cavcool/ode.hpp"
#include "cavcool/params.hpp"
#include "cavcool/special.hpp"

namespace cavcool {

struct SimState {
  double t = 0.0;
  Vec3 position;
  Vec3 velocity;
  std::complex<double> field;  // photon-number normalised: |a|^2 = intracavity photons
};

struct TimeSpan {
  double start = 0.0;
  double end = 0.0;
};

struct IntegrateOptions {
  // Applied to the dimensionless state: x in 1/k, y and z in w, time in
  // 1/kappa, field in units of the resonant empty-cavity amplitude.
  ode::Tolerances tolerances{1e-8, 1e-12};
  double sample_rate = 10e6;  // Hz
  bool gravity = true;
  // Hold the field at its initial value (conservative test potential).
  bool freeze_field = false;
  // First-order AC coupling of the particle-induced resonance shift (Hz).
  std::optional<double> servo_corner;
  // Cavity-shift coupling; defaults to ParticleDerived::u0.
  std::optional<double> shift_coupling;
  long max_steps = 50'000'000;
};

struct SimMetadata {
  CavityConfig cavity;
  ParticleDerived particle;
  double force_coupling = 0.0;  // rad/s
  double shift_coupling = 0.0;  // rad/s
  IntegrateOptions options;
  SimState initial;
  TimeSpan span;
  double expected_trap_frequency = 0.0;  // Hz, particle at an antinode on the axis
  ode::StepStats steps;
  unsigned long long seed = 0;
};

struct SimTrace {
  std::vector<SimState> samples;
  SimMetadata meta;
};

/// Small-oscillation frequency at an antinode on the axis when the cavity
/// holds its resonant empty photon number P/(2 hbar omega kappa).
inline double harmonic_trap_frequency(const DerivedCavity& cav, double mass, double force_coupling) {
  if (mass <= 0.0 || force_coupling <= 0.0) return 0.0;
  const double omega2 = 2.0 * constants::hbar * cav.k * cav.k * force_coupling *
                        cav.resonant_photon_number() / mass;
  return std::sqrt(omega2) / (2.0 * constants::pi);
}

/// Entry state with the field at the empty-cavity steady state.
inline SimState entry_state(const DerivedCavity& cav, const Vec3& position, const Vec3& velocity) {
  return {0.0, position, velocity, cav.empty_amplitude()};
}

/// Time for z(t) = z0 + vz t - g t^2/2 to reach z_end.
inline double transit_time(double z0, double vz, double z_end, bool gravity) {
  const double dz = z_end - z0;
  if (!gravity) {
    if (vz == 0.0 || dz / vz < 0.0) throw ConfigError("particle never reaches the requested z");
    return dz / vz;
  }
  const double g = constants::g;
  const double disc = vz * vz - 2.0 * g * dz;
  if (disc < 0.0) throw ConfigError("particle falls back before reaching the requested z");
  // smaller positive root of g/2 t^2 - vz t + dz = 0
  const double t = dz / (0.5 * (vz + std::sqrt(disc)));
  if (t < 0.0) throw ConfigError("particle never reaches the requested z");
  return t;
}

namespace detail {

inline constexpr std::size_t state_size = 9;
using ScaledState = ode::Vector<state_size>;

// Coupled field/particle equations in dimensionless form.
struct CavityParticleRhs {
  double detuning = 0.0;  // Delta / kappa
  double shift = 0.0;     // U_shift / kappa
  double force = 0.0;     // hbar k^2 U_force n_res / (m kappa^2)
  double gravity = 0.0;   // g / (w kappa^2)
  double servo = 0.0;     // 2 pi f_c / kappa, 0 = off
  double drive = 1.0;     // 0 for an undriven cavity
  bool freeze_field = false;

  double mode_shift(const ScaledState& s) const {
    const double c = std::cos(s[0]);
    return shift * c * c * std::exp(-2.0 * (s[1] * s[1] + s[2] * s[2]));
  }

  void operator()(double, const ScaledState& s, ScaledState& ds) const {
    const double gauss = std::exp(-2.0 * (s[1] * s[1] + s[2] * s[2]));
    const double c = std::cos(s[0]);
    const double sn = std::sin(s[0]);
    const double raw_shift = shift * c * c * gauss;
    const double eff = servo > 0.0 ? raw_shift - s[8] : raw_shift;
    const double ar = s[6];
    const double ai = s[7];
    ds[0] = s[3];
    ds[1] = s[4];
    ds[2] = s[5];
    ds[3] = -force * (ar * ar + ai * ai) * 2.0 * sn * c * gauss;
    ds[4] = 0.0;
    ds[5] = -gravity;
    if (freeze_field) {
      ds[6] = 0.0;
      ds[7] = 0.0;
    } else {
      const double det = detuning + eff;
      ds[6] = drive - ar - det * ai;
      ds[7] = -ai + det * ar;
    }
    ds[8] = servo > 0.0 ? servo * (raw_shift - s[8]) : 0.0;
  }
};

} // namespace detail

/// Integrates the cavity field jointly with the particle motion.
///
/// Field:  da/dt = eta - [kappa - i Delta - i U_shift f^2] a
/// Motion: m x'' = -hbar k U_force |a|^2 sin(2kx) exp(-2(y^2+z^2)/w^2), z'' = -g
/// with f^2 = cos^2(kx) exp(-2(y^2+z^2)/w^2), so x = 0 is an antinode. The
/// transverse offset y enters only through the Gaussian factor; pass the
/// geometric (offset-free) coupling as `force_coupling`.
inline SimTrace integrate(const DerivedCavity& cav, const ParticleDerived& pd, double force_coupling,
                          const SimState& init, TimeSpan span, const IntegrateOptions& options = {}) {
  if (!std::isfinite(span.start) || !std::isfinite(span.end) || !(span.end > span.start)) {
    throw ConfigError("integration span must be finite and increasing");
  }
  if (!(options.sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
  if (!(options.tolerances.rtol > 0.0) || !(options.tolerances.atol >= 0.0)) {
    throw ConfigError("integrator tolerances must be positive");
  }
  if (pd.mass <= 0.0 && force_coupling != 0.0) {
    throw ConfigError("a massless particle cannot carry a force coupling");
  }
  const double kappa = cav.kappa;
  const double k = cav.k;
  const double w = cav.waist();
  const double n_res = cav.resonant_photon_number();
  // Field unit: resonant empty-cavity amplitude, or one photon if undriven.
  const double a_scale = n_res > 0.0 ? std::sqrt(n_res) : 1.0;
  const double shift_coupling = options.shift_coupling.value_or(pd.u0);

  detail::CavityParticleRhs rhs;
  rhs.detuning = cav.detuning() / kappa;
  rhs.shift = shift_coupling / kappa;
  rhs.force = pd.mass > 0.0
                  ? constants::hbar * k * k * force_coupling * a_scale * a_scale / (pd.mass * kappa * kappa)
                  : 0.0;
  rhs.gravity = options.gravity ? constants::g / (w * kappa * kappa) : 0.0;
  rhs.freeze_field = options.freeze_field;
  rhs.drive = n_res > 0.0 ? 1.0 : 0.0;
  if (options.servo_corner) {
    if (!(*options.servo_corner > 0.0)) throw ConfigError("servo corner frequency must be positive");
    if (*options.servo_corner >= 0.5 * options.sample_rate) {
      throw ConfigError("servo corner frequency above the Nyquist frequency of the output grid");
    }
    rhs.servo = 2.0 * constants::pi * *options.servo_corner / kappa;
  }

  detail::ScaledState y0{};
  y0[0] = k * init.position.x;
  y0[1] = init.position.y / w;
  y0[2] = init.position.z / w;
  y0[3] = k * init.velocity.x / kappa;
  y0[4] = init.velocity.y / (w * kappa);
  y0[5] = init.velocity.z / (w * kappa);
  const std::complex<double> a0 = init.field / a_scale;
  y0[6] = a0.real();
  y0[7] = a0.imag();
  y0[8] = rhs.mode_shift(y0);  // servo starts locked

  SimTrace trace;
  trace.meta.cavity = cav.config;
  trace.meta.particle = pd;
  trace.meta.force_coupling = force_coupling;
  trace.meta.shift_coupling = shift_coupling;
  trace.meta.options = options;
  trace.meta.initial = init;
  trace.meta.span = span;
  trace.meta.expected_trap_frequency = harmonic_trap_frequency(cav, pd.mass, force_coupling);

  const double duration = span.end - span.start;
  const long count = static_cast<long>(std::floor(duration * options.sample_rate * (1.0 + 1e-12))) + 1;
  trace.samples.resize(count);
  ode::OutputGrid grid{span.start * kappa, kappa / options.sample_rate, count};

  ode::StepperOptions sopt;
  sopt.tol = options.tolerances;
  sopt.max_steps = options.max_steps;
  ode::DormandPrince<detail::state_size> stepper(sopt);
  auto observer = [&](long i, double, const detail::ScaledState& s) {
    SimState& out = trace.samples[i];
    out.t = span.start + static_cast<double>(i) / options.sample_rate;
    out.position = {s[0] / k, s[1] * w, s[2] * w};
    out.velocity = {s[3] * kappa / k, s[4] * w * kappa, s[5] * w * kappa};
    out.field = std::complex<double>(s[6], s[7]) * a_scale;
  };
  stepper.integrate(rhs, y0, span.start * kappa, span.end * kappa, grid, observer);
  trace.meta.steps = stepper.stats();
  return trace;
}

struct FieldSolution {
  std::vector<double> t;
  std::vector<std::complex<double>> field;
  // Set when the standing-wave phase advances by more than one radian
  // between samples; the interpolated trajectory is then unreliable.
  bool undersampled = false;
};

/// Cavity field from the delay integral
///   a(t) = a(t0) e^{-(kappa - i Delta)(t - t0) + i U Phi(t0,t)}
///        + eta * int_{t0}^{t} dt' e^{-(kappa - i Delta)(t - t') + i U Phi(t',t)},
/// Phi(t',t) = int_{t'}^{t} f^2(x(t'')) dt'', evaluated interval by interval
/// with Gauss-Legendre quadrature on a cubic Hermite interpolant of the
/// sampled trajectory. `a(t0)` is the empty-cavity steady state.
inline FieldSolution formal_field_solution(const std::vector<SimState>& trajectory,
                                           const DerivedCavity& cav, double shift_coupling,
                                           int gauss_points = 8) {
  FieldSolution out;
  const std::size_t n = trajectory.size();
  if (n == 0) return out;
  const double k = cav.k;
  const double w = cav.waist();
  const std::complex<double> decay(cav.kappa, -cav.detuning());
  const auto rule = special::gauss_legendre(gauss_points);

  out.t.resize(n);
  out.field.resize(n);
  out.t[0] = trajectory[0].t;
  out.field[0] = cav.empty_amplitude();

  for (std::size_t i = 0; i + 1 < n; ++i) {
    const SimState& s0 = trajectory[i];
    const SimState& s1 = trajectory[i + 1];
    const double t0 = s0.t;
    const double h = s1.t - t0;
    if (!(h > 0.0)) throw ConfigError("trajectory times must be strictly increasing");
    if (k * std::abs(s1.position.x - s0.position.x) > 1.0) out.undersampled = true;

    auto hermite = [h](double p0, double v0, double p1, double v1, double s) {
      const double s2 = s * s;
      const double s3 = s2 * s;
      return (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * h * v0 + (-2 * s3 + 3 * s2) * p1 +
             (s3 - s2) * h * v1;
    };
    auto mode2 = [&](double t) {
      const double s = (t - t0) / h;
      const double x = hermite(s0.position.x, s0.velocity.x, s1.position.x, s1.velocity.x, s);
      const double y = hermite(s0.position.y, s0.velocity.y, s1.position.y, s1.velocity.y, s);
      const double z = hermite(s0.position.z, s0.velocity.z, s1.position.z, s1.velocity.z, s);
      const double c = std::cos(k * x);
      return c * c * std::exp(-2.0 * (y * y + z * z) / (w * w));
    };
    // int_{a}^{t1} f^2
    auto phase_integral = [&](double a) {
      const double half = 0.5 * (s1.t - a);
      const double mid = 0.5 * (s1.t + a);
      double acc = 0.0;
      for (int j = 0; j < gauss_points; ++j) acc += rule.weights[j] * mode2(mid + half * rule.nodes[j]);
      return acc * half;
    };

    const double phi_full = phase_integral(t0);
    std::complex<double> drive(0.0, 0.0);
    for (int j = 0; j < gauss_points; ++j) {
      const double tp = t0 + 0.5 * h * (1.0 + rule.nodes[j]);
      const std::complex<double> expo = -decay * (s1.t - tp) +
                                        std::complex<double>(0.0, shift_coupling * phase_integral(tp));
      drive += rule.weights[j] * std::exp(expo);
    }
    drive *= 0.5 * h * cav.pump;
    const std::complex<double> propagate =
        std::exp(-decay * h + std::complex<double>(0.0, shift_coupling * phi_full));
    out.t[i + 1] = s1.t;
    out.field[i + 1] = out.field[i] * propagate + drive;
  }
  return out;
}

// Prescribed transverse velocity: v_x(t) = v_in + (v_out - v_in) (1 + tanh((t - t_c)/width)) / 2.
struct PrescribedVelocity {
  double vx_out = 0.0;     // m/s
  double t_center = 0.0;   // s
  double width = 1e-5;     // s
};

/// Kinematic transit: x follows `pv` from the initial v_x, z is ballistic,
/// y stays fixed. The particle feels no optical force; the field is the
/// delay-integral response to the prescribed path.
inline SimTrace prescribed_transit(const DerivedCavity& cav, const ParticleDerived& pd, double shift_coupling,
                                   const SimState& init, TimeSpan span, const PrescribedVelocity& pv,
                                   double sample_rate = 10e6, bool gravity = true) {
  if (!std::isfinite(span.start) || !std::isfinite(span.end) || !(span.end > span.start)) {
    throw ConfigError("integration span must be finite and increasing");
  }
  if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
  if (!(pv.width > 0.0)) throw ConfigError("velocity change width must be positive");
  const double g = gravity ? constants::g : 0.0;
  const double vin = init.velocity.x;
  // log cosh without overflow
  auto lcosh = [](double u) { return std::abs(u) + std::log1p(std::exp(-2.0 * std::abs(u))) - std::log(2.0); };
  const double l0 = lcosh((span.start - pv.t_center) / pv.width);

  SimTrace trace;
  const long count = static_cast<long>(std::floor((span.end - span.start) * sample_rate * (1.0 + 1e-12))) + 1;
  trace.samples.resize(count);
  for (long i = 0; i < count; ++i) {
    const double dt = static_cast<double>(i) / sample_rate;
    const double t = span.start + dt;
    const double u = (t - pv.t_center) / pv.width;
    SimState& s = trace.samples[i];
    s.t = t;
    s.position = {init.position.x + vin * dt + (pv.vx_out - vin) * 0.5 * (dt + pv.width * (lcosh(u) - l0)),
                  init.position.y, init.position.z + init.velocity.z * dt - 0.5 * g * dt * dt};
    s.velocity = {vin + (pv.vx_out - vin) * 0.5 * (1.0 + std::tanh(u)), 0.0, init.velocity.z - g * dt};
  }
  const auto field = formal_field_solution(trace.samples, cav, shift_coupling);
  if (field.undersampled) throw ConfigError("sample rate too low for the prescribed transverse velocity");
  for (long i = 0; i < count; ++i) trace.samples[i].field = field.field[i];

  trace.meta.cavity = cav.config;
  trace.meta.particle = pd;
  trace.meta.shift_coupling = shift_coupling;
  trace.meta.options.sample_rate = sample_rate;
  trace.meta.options.gravity = gravity;
  trace.meta.options.shift_coupling = shift_coupling;
  trace.meta.initial = init;
  trace.meta.span = span;
  return trace;
}

/// First-order high-pass (AC coupling) of a uniformly sampled series.
///
/// Implemented as `input - lowpass(input)` with the low-pass integrated
/// exactly for piecewise-linear input. The low-pass starts at zero unless
/// `settled`, in which case it starts at the first input value.
inline std::vector<double> servo_filter(const std::vector<double>& input, double sample_rate,
                                        double corner_frequency, bool settled = false) {
  if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
  if (!(corner_frequency > 0.0)) throw ConfigError("corner frequency must be positive");
  if (corner_frequency >= 0.5 * sample_rate) {
    throw ConfigError("corner frequency lies above the Nyquist frequency");
  }
  std::vector<double> out(input.size());
  if (input.empty()) return out;
  const double dt = 1.0 / sample_rate;
  const double wc = 2.0 * constants::pi * corner_frequency;
  const double e = std::exp(-wc * dt);
  const double ramp = (1.0 - e) / (wc * dt);
  double low = settled ? input[0] : 0.0;
  out[0] = input[0] - low;
  for (std::size_t i = 1; i < input.size(); ++i) {
    const double slope = input[i] - input[i - 1];
    low = input[i] + e * (low - input[i - 1]) - slope * ramp;
    out[i] = input[i] - low;
  }
  return out;
}

} // namespace cavcool
