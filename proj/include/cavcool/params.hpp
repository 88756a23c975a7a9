#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <string>

#include "cavcool/constants.hpp"
#include "cavcool/errors.hpp"

namespace cavcool {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Which solution of the plano-concave waist relation to use when the cavity
// length is derived from the waist.
enum class LengthRoot { shorter, longer };

// Physical description of the optical resonator and its drive. SI units;
// detuning is omega_L - omega_C (negative = red).
struct CavityConfig {
  double wavelength = 1560e-9;
  double finesse = 3e5;
  double waist = 65e-6;
  double curved_mirror_radius = 25e-3;
  std::optional<double> cavity_length;
  LengthRoot length_root = LengthRoot::shorter;
  double input_power = 1e-3;
  double detuning = 0.0;
};

struct DerivedCavity {
  CavityConfig config;
  double k = 0.0;            // 1/m
  double omega_laser = 0.0;  // rad/s
  double kappa = 0.0;        // field decay rate, rad/s
  double fsr = 0.0;          // Hz
  double length = 0.0;       // m
  double mode_volume = 0.0;  // m^3
  double pump = 0.0;         // eta, sqrt(photons)/s

  double wavelength() const { return config.wavelength; }
  double waist() const { return config.waist; }
  double detuning() const { return config.detuning; }

  // Steady-state field of the empty cavity, eta / (kappa - i Delta).
  std::complex<double> empty_amplitude() const {
    return pump / std::complex<double>(kappa, -config.detuning);
  }

  // Intracavity photon number of the empty cavity driven on resonance.
  double resonant_photon_number() const { return pump * pump / (kappa * kappa); }
};

// Waist at the flat mirror of a plano-concave resonator of length L.
inline double plano_concave_waist(double wavelength, double length, double mirror_radius) {
  const double prod = length * (mirror_radius - length);
  if (prod <= 0.0) return 0.0;
  return std::sqrt(wavelength / constants::pi * std::sqrt(prod));
}

struct LengthRoots {
  double shorter;
  double longer;
};

// Solves w^2 = (lambda/pi) sqrt(L (R2 - L)) for L.
inline LengthRoots cavity_length_roots(double wavelength, double waist, double mirror_radius) {
  const double b = constants::pi * waist * waist / wavelength;
  const double disc = mirror_radius * mirror_radius - 4.0 * b * b;
  if (disc < 0.0) {
    throw GeometryError("waist " + std::to_string(waist) +
                        " m is not reachable with curved mirror radius " +
                        std::to_string(mirror_radius) + " m");
  }
  const double s = std::sqrt(disc);
  // The shorter root via the product of roots avoids cancellation.
  const double longer = 0.5 * (mirror_radius + s);
  return {b * b / longer, longer};
}

inline void validate(const CavityConfig& c) {
  if (!(c.wavelength > 0.0)) throw ConfigError("wavelength must be positive");
  if (!(c.finesse > 1.0)) throw ConfigError("finesse must exceed 1");
  if (!(c.waist > 0.0)) throw ConfigError("waist must be positive");
  if (!(c.curved_mirror_radius > 0.0)) throw ConfigError("curved mirror radius must be positive");
  if (!(c.input_power >= 0.0)) throw ConfigError("input power must be non-negative");
  if (!std::isfinite(c.detuning)) throw ConfigError("detuning must be finite");
  if (c.cavity_length) {
    if (!(*c.cavity_length > 0.0)) throw ConfigError("cavity length must be positive");
    if (*c.cavity_length >= c.curved_mirror_radius) {
      throw GeometryError("cavity length must be shorter than the curved mirror radius "
                          "for a stable plano-concave resonator");
    }
  }
}

inline DerivedCavity derive_cavity(const CavityConfig& config) {
  validate(config);
  DerivedCavity d;
  d.config = config;
  if (config.cavity_length) {
    d.length = *config.cavity_length;
  } else {
    const auto roots = cavity_length_roots(config.wavelength, config.waist, config.curved_mirror_radius);
    d.length = config.length_root == LengthRoot::shorter ? roots.shorter : roots.longer;
    d.config.cavity_length = d.length;
  }
  using constants::c;
  using constants::pi;
  d.k = 2.0 * pi / config.wavelength;
  d.omega_laser = 2.0 * pi * c / config.wavelength;
  d.fsr = c / (2.0 * d.length);
  d.kappa = pi * c / (2.0 * d.length * config.finesse);
  d.mode_volume = pi * config.waist * config.waist * d.length / 4.0;
  d.pump = std::sqrt(d.kappa * config.input_power / (2.0 * constants::hbar * d.omega_laser));
  return d;
}

inline CavityConfig with_detuning_over_kappa(CavityConfig config, double ratio) {
  config.detuning = 0.0;
  config.detuning = ratio * derive_cavity(config).kappa;
  return config;
}

struct ParticleConfig {
  double radius = 150e-9;
  double mass_density = 2330.0;
  double relative_permittivity = 3.47 * 3.47;
  Vec3 position;
  Vec3 velocity;
  // Overrides accepted at the configuration boundary (amu / cubic angstrom
  // are converted by the loader).
  std::optional<double> mass;
  std::optional<double> polarizability;
  bool silicon = true;

  static double permittivity_from_index(double n) { return n * n; }
  double refractive_index() const { return std::sqrt(relative_permittivity); }
};

struct ParticleDerived {
  double mass = 0.0;            // kg
  double polarizability = 0.0;  // C m^2 / V
  double atom_count = 0.0;
  double u0 = 0.0;              // rad/s
};

inline void validate(const ParticleConfig& p) {
  if (!(p.radius >= 0.0)) throw ConfigError("particle radius must be non-negative");
  if (!(p.mass_density > 0.0)) throw ConfigError("mass density must be positive");
  if (!(p.relative_permittivity >= 1.0)) {
    throw ConfigError("relative permittivity below 1 (low-field seekers are not modelled)");
  }
  if (p.mass && !(*p.mass >= 0.0)) throw ConfigError("mass override must be non-negative");
  if (p.polarizability && !(*p.polarizability >= 0.0)) {
    throw ConfigError("polarizability override must be non-negative");
  }
}

// Clausius-Mossotti factor (eps - 1)/(eps + 2).
inline double clausius_mossotti(double eps) { return (eps - 1.0) / (eps + 2.0); }

inline double sphere_polarizability(double radius, double eps) {
  return 4.0 * constants::pi * constants::epsilon0 * radius * radius * radius * clausius_mossotti(eps);
}

inline double sphere_mass(double radius, double density) {
  return density * 4.0 / 3.0 * constants::pi * radius * radius * radius;
}

inline double coupling_u0(double polarizability, const DerivedCavity& cav) {
  return polarizability * cav.omega_laser / (2.0 * constants::epsilon0 * cav.mode_volume);
}

inline double coupling_u0(const ParticleDerived& pd, const DerivedCavity& cav) {
  return coupling_u0(pd.polarizability, cav);
}

// Same coupling written through the radius: (2 pi omega_L R^3 / V) CM(eps).
inline double coupling_u0_from_radius(double radius, double eps, const DerivedCavity& cav) {
  return 2.0 * constants::pi * cav.omega_laser * radius * radius * radius / cav.mode_volume *
         clausius_mossotti(eps);
}

inline ParticleDerived particle_properties(const ParticleConfig& p, const DerivedCavity& cav) {
  validate(p);
  ParticleDerived d;
  d.mass = p.mass ? *p.mass : sphere_mass(p.radius, p.mass_density);
  d.polarizability = p.polarizability ? *p.polarizability
                                      : sphere_polarizability(p.radius, p.relative_permittivity);
  d.atom_count = p.silicon ? d.mass / (constants::silicon_atom_mass_amu * constants::amu) : 0.0;
  d.u0 = coupling_u0(d.polarizability, cav);
  return d;
}

} // namespace cavcool
