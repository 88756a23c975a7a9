#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/minima.hpp>

#include "cavcool/analysis/extrema.hpp"
#include "cavcool/mie.hpp"
#include "cavcool/params.hpp"
#include "cavcool/special.hpp"

namespace cavcool::analysis {

// Weak-field transit: x = v0 t, z = v_z t (mode centre at t = 0), constant
// intracavity photon number. `coupling` is U_x in rad/s.
struct WeakTransit {
  double v0 = 0.0;            // m/s
  double vz = 0.0;            // m/s
  double coupling = 0.0;      // rad/s
  double photon_number = 0.0;
  double mass = 0.0;          // kg
  double k = 0.0;             // 1/m
  double waist = 0.0;         // m
};

struct VelocityPerturbation {
  double velocity = 0.0;
  double relative_change = 0.0;  // |v - v0| / v0, first-order validity monitor
  bool quadrature = false;        // closed form was not representable
};

/// Direct quadrature of
///   v(t) = v0 - (hbar k U |a|^2 / m) int_{-inf}^{t} sin(2 k v0 t') exp(-2 v_z^2 t'^2 / w^2) dt'
/// in half-period panels of 20-point Gauss-Legendre, starting 7 envelope
/// half-widths before the centre.
inline double velocity_perturbation_quadrature(const WeakTransit& p, double t) {
  const double force = constants::hbar * p.k * p.coupling * p.photon_number / p.mass;
  const double tau = p.waist / p.vz;
  const double start = -7.0 * tau;
  if (t <= start) return p.v0;
  const double omega = 2.0 * p.k * p.v0;
  const double panel = omega > 0.0 ? std::min(constants::pi / omega, tau / 8.0) : tau / 8.0;
  auto integrand = [&](double s) { return std::sin(omega * s) * std::exp(-2.0 * s * s / (tau * tau)); };
  double acc = 0.0;
  for (double a = start; a < t; a += panel) {
    const double b = std::min(a + panel, t);
    acc += boost::math::quadrature::gauss<double, 20>::integrate(integrand, a, b);
  }
  return p.v0 - force * acc;
}

/// First-order closed form
///   v(t) = v0 + sqrt(pi/8) (hbar k U |a|^2 w / (m v_z)) exp(-k^2 w^2 v0^2 / 2 v_z^2)
///          * Im erf(sqrt(2) v_z t / w + i k w v0 / (sqrt(2) v_z)),
/// with the Gaussian prefactor folded into a scaled complex error function.
inline VelocityPerturbation velocity_perturbation(const WeakTransit& p, double t) {
  if (!(p.vz > 0.0) || !(p.mass > 0.0) || !(p.waist > 0.0)) {
    throw ConfigError("velocity perturbation needs positive v_z, mass and waist");
  }
  VelocityPerturbation out;
  const double amp = std::sqrt(constants::pi / 8.0) * constants::hbar * p.k * p.coupling * p.photon_number * p.waist /
                     (p.mass * p.vz);
  const double u = std::sqrt(2.0) * p.vz * t / p.waist;
  const double v = p.k * p.waist * p.v0 / (std::sqrt(2.0) * p.vz);
  const double im = special::erf_scaled(u, v).imag();
  if (std::isfinite(im)) {
    out.velocity = p.v0 + amp * im;
  } else {
    out.velocity = velocity_perturbation_quadrature(p, t);
    out.quadrature = true;
  }
  out.relative_change = p.v0 != 0.0 ? std::abs(out.velocity - p.v0) / std::abs(p.v0) : 0.0;
  return out;
}

/// f_trap = (1/2 pi) sqrt(k P U_x / (m c kappa)).
inline double trap_frequency(double input_power, double coupling, double mass, double kappa, double wavelength) {
  if (!(input_power > 0.0) || !(coupling > 0.0) || !(mass > 0.0) || !(kappa > 0.0) || !(wavelength > 0.0)) {
    throw ConfigError("trap frequency needs positive inputs");
  }
  const double k = 2.0 * constants::pi / wavelength;
  return std::sqrt(k * input_power * coupling / (mass * constants::c * kappa)) / (2.0 * constants::pi);
}

/// How an amplitude "fraction of the trap" is read.
enum class AmplitudeReading {
  energy,    // E / V0
  position,  // k x_max / (pi/2)
};

/// Pendulum parameter m = E/V0 for the potential -V0 cos^2(kx).
inline double pendulum_parameter(double fraction, AmplitudeReading reading) {
  if (reading == AmplitudeReading::energy) return fraction;
  const double s = std::sin(0.5 * constants::pi * fraction);
  return s * s;
}

/// Harmonic (small-amplitude) frequency from an oscillation frequency
/// measured at finite amplitude: f_h = f_m (2/pi) K(m), K in parameter
/// convention (K(0) = pi/2).
inline double anharmonic_correction(double f_measured, double fraction,
                                    AmplitudeReading reading = AmplitudeReading::energy) {
  if (!(fraction >= 0.0) || fraction >= 1.0) throw AnalysisError("oscillation is not bound (fraction >= 1)");
  const double m = pendulum_parameter(fraction, reading);
  return f_measured * 2.0 / constants::pi * special::ellint_k(m);
}

enum class PhaseInversion { quasi_static, full_model, none };

struct UxEstimate {
  double coupling = 0.0;        // rad/s
  PhaseInversion method = PhaseInversion::none;
  double phase_peak_to_peak = 0.0;
  double fringe_frequency = 0.0;  // Hz, near the envelope centre
  double residual_rms = 0.0;      // rad, full-model fit
};

namespace detail {

// Field phase arg(a/a_empty) driven by shift u * S_N(t) (u in units of kappa),
// RK4 on the sample grid from the empty-cavity state at t[0].
inline std::vector<double> model_phase(const std::vector<double>& t, const std::vector<double>& sn, double kappa,
                                       double detuning, double u) {
  const double dk = detuning / kappa;
  using C = std::complex<double>;
  const C a_empty = 1.0 / C(1.0, -dk);
  auto rhs = [&](double shift, C a) { return 1.0 - C(1.0, -(dk + u * shift)) * a; };
  std::vector<double> out(t.size());
  C a = a_empty;
  out[0] = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double h = (t[i + 1] - t[i]) * kappa;
    const double s0 = sn[i], s1 = sn[i + 1], sm = 0.5 * (s0 + s1);
    const C k1 = rhs(s0, a);
    const C k2 = rhs(sm, a + 0.5 * h * k1);
    const C k3 = rhs(sm, a + 0.5 * h * k2);
    const C k4 = rhs(s1, a + h * k3);
    a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    double ph = std::arg(a / a_empty);
    ph += 2.0 * constants::pi * std::round((prev - ph) / (2.0 * constants::pi));
    out[i + 1] = ph;
    prev = ph;
  }
  return out;
}

} // namespace detail

/// Effective coupling from the cavity phase modulation. When the fringe
/// rate is well below kappa the quasi-stationary phase
/// atan((Delta + U S_N)/kappa) - atan(Delta/kappa) is inverted on the
/// peak-to-peak modulation at the centre; otherwise U is fitted by driving
/// the field equation with U S_N(t) and matching the phase trace.
inline UxEstimate ux_from_phase(const DetectorTraces& d, const SNTrace& s, const EnvelopeFit& env,
                                const ExtremaClassification& cls, const DerivedCavity& cav, double u_max_over_kappa = 10.0) {
  UxEstimate out;
  const double kappa = cav.kappa;
  const double delta = cav.detuning();
  // Fringe rate from antinode passages nearest the centre.
  const auto maxima = cls.maxima();
  std::size_t best = 0;
  for (std::size_t j = 0; j < maxima.size(); ++j) {
    if (std::abs(maxima[j].t - env.center) < std::abs(maxima[best].t - env.center)) best = j;
  }
  double period = 0.0;
  if (maxima.size() >= 2) {
    const std::size_t j = best + 1 < maxima.size() ? best : best - 1;
    period = maxima[j + 1].t - maxima[j].t;
    out.fringe_frequency = 1.0 / period;
  }
  // Peak-to-peak phase over one fringe around the centre.
  const double half = period > 0.0 ? period : 0.1 * env.half_width;
  double pmin = 1e300, pmax = -1e300, smax = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (std::abs(d.t[i] - env.center) > half) continue;
    pmin = std::min(pmin, d.phase[i]);
    pmax = std::max(pmax, d.phase[i]);
    smax = std::max(smax, s.sn[i]);
  }
  if (!(pmax > pmin)) return out;
  out.phase_peak_to_peak = pmax - pmin;
  if (out.phase_peak_to_peak < 1e-9) {
    out.method = PhaseInversion::quasi_static;
    return out;
  }
  const bool quasi_static = out.fringe_frequency > 0.0 && 2.0 * constants::pi * out.fringe_frequency < 0.2 * kappa;
  if (quasi_static) {
    out.method = PhaseInversion::quasi_static;
    const double target = out.phase_peak_to_peak + std::atan(delta / kappa);
    if (target >= 0.5 * constants::pi) throw AnalysisError("phase modulation exceeds the quasi-static range");
    out.coupling = (kappa * std::tan(target) - delta) / smax;
    return out;
  }
  out.method = PhaseInversion::full_model;
  const double level = 0.05 * env.amplitude;
  auto sse = [&](double u) {
    const auto model = detail::model_phase(d.t, s.sn, kappa, delta, u);
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (env(d.t[i]) < level) continue;
      const double r = model[i] - d.phase[i];
      acc += r * r;
    }
    return acc;
  };
  const int grid = 101;
  double best_u = 0.0, best_v = sse(0.0);
  for (int i = 1; i < grid; ++i) {
    const double u = u_max_over_kappa * i / (grid - 1);
    const double v = sse(u);
    if (v < best_v) {
      best_v = v;
      best_u = u;
    }
  }
  const double du = u_max_over_kappa / (grid - 1);
  const auto res = boost::math::tools::brent_find_minima(sse, std::max(0.0, best_u - du), best_u + du, 40);
  std::size_t used = 0;
  for (std::size_t i = 0; i < d.size(); ++i) used += env(d.t[i]) >= level;
  out.coupling = res.first * kappa;
  out.residual_rms = used > 0 ? std::sqrt(res.second / used) : 0.0;
  return out;
}

struct RadiusEstimate {
  double radius = 0.0;      // m
  double y_offset = 0.0;    // m
  double mass = 0.0;        // kg
  double point_coupling = 0.0;  // U_0(R), rad/s
  double force_factor = 1.0;    // U_x/U_0 from Mie theory at R
};

struct RadiusOptions {
  double mass_density = 2330.0;
  double relative_permittivity = 3.47 * 3.47;
  double max_radius = 400e-9;
  bool point_particle = false;  // ignore the finite-size force factor
};

/// Solves {trap_frequency(U_x, m(R)) = f, U_0(R) F(R) exp(-2 y^2/w^2) = U_x} for
/// (R, y). The first constraint fixes the mass directly; y follows from the
/// second.
inline RadiusEstimate infer_radius(double f_trap_harmonic, double coupling, const DerivedCavity& cav,
                                   const RadiusOptions& opt = {}) {
  if (!(f_trap_harmonic > 0.0) || !(coupling > 0.0)) throw AnalysisError("radius inference needs f_trap > 0 and U_x > 0");
  RadiusEstimate out;
  const double om = 2.0 * constants::pi * f_trap_harmonic;
  out.mass = cav.k * cav.config.input_power * coupling / (constants::c * cav.kappa * om * om);
  out.radius = std::cbrt(3.0 * out.mass / (4.0 * constants::pi * opt.mass_density));
  if (out.radius > opt.max_radius) {
    throw AnalysisError("inferred radius " + std::to_string(out.radius * 1e9) + " nm lies outside (0, " +
                        std::to_string(opt.max_radius * 1e9) + "] nm");
  }
  out.point_coupling = coupling_u0_from_radius(out.radius, opt.relative_permittivity, cav);
  out.force_factor = opt.point_particle
                         ? 1.0
                         : mie::standing_wave_force_factor(out.radius, std::sqrt(opt.relative_permittivity), cav.k).ratio;
  const double on_axis = out.point_coupling * out.force_factor;
  if (on_axis < coupling * (1.0 - 1e-12)) {
    throw AnalysisError("measured U_x exceeds the on-axis coupling of the inferred sphere (" +
                        std::to_string(on_axis / cav.kappa) + " kappa); no offset solves both constraints");
  }
  out.y_offset = on_axis > coupling ? cav.waist() * std::sqrt(0.5 * std::log(on_axis / coupling)) : 0.0;
  return out;
}

} // namespace cavcool::analysis
