#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "cavcool/constants.hpp"

namespace cavcool::special {

namespace detail {

// Weideman's rational series for the Faddeeva function in the upper half
// plane: w(z) = 2 p(Z)/(L - iz)^2 + 1/(sqrt(pi) (L - iz)), Z = (L+iz)/(L-iz).
struct WeidemanSeries {
  static constexpr int terms = 48;
  double L = 0.0;
  std::array<double, terms> coeff{};  // coeff[j] multiplies Z^j

  WeidemanSeries() {
    constexpr int M = 2 * terms;
    constexpr int M2 = 2 * M;
    L = std::sqrt(terms / std::sqrt(2.0));
    std::vector<double> f(M2, 0.0);
    for (int i = 1; i < M2; ++i) {
      const int kk = i - M;
      const double theta = kk * constants::pi / M;
      const double t = L * std::tan(0.5 * theta);
      f[i] = std::exp(-t * t) * (L * L + t * t);
    }
    // Real part of the DFT of the half-rotated samples.
    for (int j = 1; j <= terms; ++j) {
      double acc = 0.0;
      for (int n = 0; n < M2; ++n) {
        acc += f[(n + M) % M2] * std::cos(2.0 * constants::pi * j * n / M2);
      }
      coeff[j - 1] = acc / M2;
    }
  }

  std::complex<double> operator()(std::complex<double> z) const {
    const std::complex<double> iz(-z.imag(), z.real());
    const std::complex<double> den = L - iz;
    const std::complex<double> Z = (L + iz) / den;
    std::complex<double> p = coeff[terms - 1];
    for (int j = terms - 2; j >= 0; --j) p = p * Z + coeff[j];
    return 2.0 * p / (den * den) + 1.0 / (std::sqrt(constants::pi) * den);
  }
};

inline const WeidemanSeries& weideman() {
  static const WeidemanSeries series;
  return series;
}

} // namespace detail

/// Faddeeva function w(z) = exp(-z^2) erfc(-iz).
///
/// Accurate to roughly 1e-13 relative in the upper half plane; the lower
/// half plane uses w(z) = 2 exp(-z^2) - w(-z), which overflows once
/// Im(z)^2 - Re(z)^2 exceeds ~700.
inline std::complex<double> faddeeva(std::complex<double> z) {
  if (z.imag() >= 0.0) return detail::weideman()(z);
  return 2.0 * std::exp(-z * z) - detail::weideman()(-z);
}

/// erf for complex argument through the Faddeeva function.
inline std::complex<double> erf(std::complex<double> z) {
  const std::complex<double> iz(-z.imag(), z.real());
  return 1.0 - std::exp(-z * z) * faddeeva(iz);
}

/// exp(-v^2) * erf(u + i v) evaluated without forming the exponentially
/// large erf value. Valid for any real u, v.
inline std::complex<double> erf_scaled(double u, double v) {
  // exp(-v^2) erf(z) = exp(-v^2) - exp(-u^2 - 2iuv) w(iz), iz = -v + iu.
  const std::complex<double> phase = std::exp(std::complex<double>(-u * u, -2.0 * u * v));
  const double gauss = std::exp(-v * v);
  if (u >= 0.0) return gauss - phase * detail::weideman()({-v, u});
  return -gauss + phase * detail::weideman()({v, -u});
}

/// Complete elliptic integral of the first kind K(m) in the *parameter*
/// convention, m = k^2 (so K(0) = pi/2 and K diverges as m -> 1).
inline double ellint_k(double m) {
  if (m < 0.0 || m >= 1.0) throw std::domain_error("ellint_k: parameter must lie in [0, 1)");
  return std::comp_ellint_1(std::sqrt(m));
}

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// Gauss-Legendre rule by Newton iteration on P_n.
inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(constants::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0;
    double p1 = x;
    for (int j = 2; j <= n; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

} // namespace cavcool::special
