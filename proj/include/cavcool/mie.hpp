#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "cavcool/constants.hpp"
#include "cavcool/errors.hpp"
#include "cavcool/params.hpp"

namespace cavcool::mie {

using cplx = std::complex<double>;

inline constexpr int default_order_cap = 20000;

// Partial-wave coefficients of a homogeneous lossless sphere in the
// Bohren-Huffman sign convention (exp(-i omega t), a_1 ~ -2i/3 x^3 (m^2-1)/(m^2+2)).
struct MieCoefficients {
  double size_parameter = 0.0;
  double relative_index = 1.0;
  std::vector<cplx> a;  // a[n-1] is a_n
  std::vector<cplx> b;

  int order() const { return static_cast<int>(a.size()); }
};

// Wiscombe truncation order.
inline int wiscombe_order(double x) {
  return static_cast<int>(std::ceil(x + 4.0 * std::cbrt(x) + 2.0));
}

namespace detail {

// psi_n(x) = x j_n(x) for n = 0..nmax by Miller's downward recurrence.
inline std::vector<double> riccati_psi(int nmax, double x) {
  std::vector<double> psi(nmax + 1, 0.0);
  const int start = nmax + 16 + static_cast<int>(std::sqrt(100.0 * (nmax + x)));
  // j_n ratios; values rescaled on the fly to stay in range.
  double jp1 = 0.0;
  double j = 1e-300;
  std::vector<double> jn(nmax + 1, 0.0);
  for (int n = start; n >= 1; --n) {
    const double jm1 = (2.0 * n + 1.0) / x * j - jp1;
    jp1 = j;
    j = jm1;
    if (n - 1 <= nmax) jn[n - 1] = j;
    if (std::abs(j) > 1e200) {
      j *= 1e-200;
      jp1 *= 1e-200;
      for (int m = n - 1; m <= nmax; ++m) jn[m] *= 1e-200;
    }
  }
  // Normalise against whichever of j_0, j_1 is further from a zero.
  const double j0 = std::sin(x) / x;
  const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  const double scale = (nmax >= 1 && std::abs(j1) > std::abs(j0)) ? j1 / jn[1] : j0 / jn[0];
  for (int n = 0; n <= nmax; ++n) psi[n] = x * jn[n] * scale;
  return psi;
}

// chi_n(x) = -x y_n(x) by upward recurrence (dominant solution, stable).
inline std::vector<double> riccati_chi(int nmax, double x) {
  std::vector<double> chi(nmax + 1, 0.0);
  double chim1 = -std::sin(x);  // chi_{-1}
  chi[0] = std::cos(x);
  double prev = chim1;
  for (int n = 0; n < nmax; ++n) {
    const double next = (2.0 * n + 1.0) / x * chi[n] - prev;
    prev = chi[n];
    chi[n + 1] = next;
  }
  return chi;
}

// Logarithmic derivative D_n(z) = psi_n'(z)/psi_n(z) by downward recurrence.
inline std::vector<cplx> log_derivative(int nmax, cplx z) {
  const int start = std::max(nmax, static_cast<int>(std::abs(z))) + 16;
  std::vector<cplx> d(start + 1, cplx(0.0, 0.0));
  for (int n = start; n >= 1; --n) {
    const cplx nz = static_cast<double>(n) / z;
    d[n - 1] = nz - 1.0 / (d[n] + nz);
  }
  d.resize(nmax + 1);
  return d;
}

} // namespace detail

inline MieCoefficients mie_coefficients(double x, double n_rel, int order_cap = default_order_cap,
                                        int nmax_override = 0) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("size parameter must be finite and >= 0");
  if (!(n_rel > 0.0) || !std::isfinite(n_rel)) throw ConfigError("relative index must be positive");
  MieCoefficients out;
  out.size_parameter = x;
  out.relative_index = n_rel;
  if (x == 0.0) return out;
  const int nmax = nmax_override > 0 ? nmax_override : wiscombe_order(x);
  if (nmax > order_cap) {
    throw ResourceError("Mie series needs " + std::to_string(nmax) + " orders, cap is " +
                        std::to_string(order_cap));
  }
  const auto psi = detail::riccati_psi(nmax, x);
  const auto chi = detail::riccati_chi(nmax, x);
  const auto D = detail::log_derivative(nmax, cplx(n_rel * x, 0.0));
  out.a.resize(nmax);
  out.b.resize(nmax);
  for (int n = 1; n <= nmax; ++n) {
    const cplx xi_n(psi[n], -chi[n]);
    const cplx xi_nm1(psi[n - 1], -chi[n - 1]);
    const cplx ta = D[n] / n_rel + static_cast<double>(n) / x;
    const cplx tb = D[n] * n_rel + static_cast<double>(n) / x;
    out.a[n - 1] = (ta * psi[n] - psi[n - 1]) / (ta * xi_n - xi_nm1);
    out.b[n - 1] = (tb * psi[n] - psi[n - 1]) / (tb * xi_n - xi_nm1);
  }
  return out;
}

inline double scattering_efficiency(const MieCoefficients& c) {
  if (c.size_parameter == 0.0) return 0.0;
  double sum = 0.0;
  for (int n = 1; n <= c.order(); ++n) {
    sum += (2.0 * n + 1.0) * (std::norm(c.a[n - 1]) + std::norm(c.b[n - 1]));
  }
  return 2.0 / (c.size_parameter * c.size_parameter) * sum;
}

inline double extinction_efficiency(const MieCoefficients& c) {
  if (c.size_parameter == 0.0) return 0.0;
  double sum = 0.0;
  for (int n = 1; n <= c.order(); ++n) {
    sum += (2.0 * n + 1.0) * (c.a[n - 1] + c.b[n - 1]).real();
  }
  return 2.0 / (c.size_parameter * c.size_parameter) * sum;
}

// Axial force amplitude on a sphere centred at z0 in the standing wave
// E = E0 x^ (e^{ikz} + e^{-ikz}): F_z = -amplitude * sin(2 k z0), in units of
// epsilon0 E0^2 / k^2. Interference of the two counter-propagating partial-wave
// expansions; the plane-wave radiation pressure cancels.
inline double standing_wave_force_amplitude(const MieCoefficients& c) {
  const int N = c.order();
  auto coeff = [](const std::vector<cplx>& v, int n) {
    return n <= static_cast<int>(v.size()) ? v[n - 1] : cplx(0.0, 0.0);
  };
  double sum = 0.0;
  for (int n = 1; n <= N; ++n) {
    const cplx an = coeff(c.a, n);
    const cplx bn = coeff(c.b, n);
    const cplx an1 = coeff(c.a, n + 1);
    const cplx bn1 = coeff(c.b, n + 1);
    const double nn = n;
    const double adjacent =
        nn * (nn + 2.0) / (nn + 1.0) *
        (-(an + std::conj(an1) - 2.0 * an * std::conj(an1)).imag() +
         (bn + std::conj(bn1) - 2.0 * bn * std::conj(bn1)).imag());
    const double mixed =
        -(2.0 * nn + 1.0) / (nn * (nn + 1.0)) * (an + std::conj(bn) - 2.0 * an * std::conj(bn)).imag();
    sum += (n % 2 == 0 ? 1.0 : -1.0) * (adjacent + mixed);
  }
  return -2.0 * constants::pi * sum;
}

// Point-dipole force amplitude in the same units: 4 pi x^3 (m^2-1)/(m^2+2).
inline double dipole_force_amplitude(double x, double n_rel) {
  return 4.0 * constants::pi * x * x * x * clausius_mossotti(n_rel * n_rel);
}

struct ForceFactor {
  double radius = 0.0;
  double ratio = 1.0;      // U_x / U_0
  double amplitude = 0.0;  // axial force amplitude, units of epsilon0 E0^2 / k^2
};

// U_x/U_0 for a sphere of radius R on the axis of a plane standing wave.
// An index-matched sphere feels no force; its ratio is reported as 1.
inline ForceFactor standing_wave_force_factor(double radius, double n_rel, double k,
                                              int order_cap = default_order_cap) {
  if (!(radius >= 0.0)) throw ConfigError("radius must be non-negative");
  ForceFactor f;
  f.radius = radius;
  const double x = k * radius;
  if (x == 0.0) return f;
  const auto coeffs = mie_coefficients(x, n_rel, order_cap);
  f.amplitude = standing_wave_force_amplitude(coeffs);
  const double dipole = dipole_force_amplitude(x, n_rel);
  f.ratio = dipole == 0.0 ? 1.0 : f.amplitude / dipole;
  return f;
}

inline double gaussian_offset_factor(double y_offset, double waist) {
  return std::exp(-2.0 * y_offset * y_offset / (waist * waist));
}

// Effective coupling along the standing wave for a sphere that passes the
// cavity axis at transverse offset y: U_0(R) * (U_x/U_0)(R) * exp(-2 y^2/w^2).
inline double effective_ux(double radius, double relative_permittivity, double y_offset,
                           const DerivedCavity& cav) {
  const double u0 = coupling_u0_from_radius(radius, relative_permittivity, cav);
  if (u0 == 0.0) return 0.0;
  const double ratio = standing_wave_force_factor(radius, std::sqrt(relative_permittivity), cav.k).ratio;
  return u0 * ratio * gaussian_offset_factor(y_offset, cav.waist());
}

inline double effective_ux(const ParticleConfig& p, double y_offset, const DerivedCavity& cav) {
  return effective_ux(p.radius, p.relative_permittivity, y_offset, cav);
}

} // namespace cavcool::mie
