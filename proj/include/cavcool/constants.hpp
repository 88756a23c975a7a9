#pragma once

#include <numbers>

// CODATA 2018 values, SI units.
namespace cavcool::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double c = 299792458.0;              // m/s
inline constexpr double hbar = 1.054571817e-34;       // J s
inline constexpr double epsilon0 = 8.8541878128e-12;  // F/m
inline constexpr double amu = 1.66053906660e-27;      // kg
inline constexpr double g = 9.80665;                  // m/s^2
inline constexpr double angstrom3 = 1e-30;            // m^3
inline constexpr double silicon_atom_mass_amu = 28.086;

} // namespace cavcool::constants
