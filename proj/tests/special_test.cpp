#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "cavcool/special.hpp"

namespace sp = cavcool::special;
using cplx = std::complex<double>;

namespace {

// w(z) = (i/pi) int exp(-t^2)/(z - t) dt for Im z > 0, by composite Gauss-Legendre
// on a wide finite interval.
cplx faddeeva_quadrature(cplx z) {
  const auto rule = sp::gauss_legendre(64);
  cplx acc(0.0, 0.0);
  const double lo = -9.0, hi = 9.0;
  const int panels = 2000;
  const double width = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * width;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double t = mid + 0.5 * width * rule.nodes[j];
      acc += rule.weights[j] * std::exp(-t * t) / (z - t);
    }
  }
  return cplx(0.0, 1.0 / cavcool::constants::pi) * acc * (0.5 * width);
}

} // namespace

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
  for (int n : {1, 2, 5, 8, 16}) {
    const auto rule = sp::gauss_legendre(n);
    for (int deg = 0; deg <= 2 * n - 1; ++deg) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += rule.weights[j] * std::pow(rule.nodes[j], deg);
      const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
      EXPECT_NEAR(acc, exact, 1e-13) << "n=" << n << " deg=" << deg;
    }
  }
}

TEST(Faddeeva, ImaginaryAxisMatchesScaledErfc) {
  for (double y : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    const double exact = std::exp(y * y) * std::erfc(y);
    EXPECT_NEAR(sp::faddeeva({0.0, y}).real(), exact, 1e-13 * exact);
    EXPECT_NEAR(sp::faddeeva({0.0, y}).imag(), 0.0, 1e-13);
  }
}

TEST(Faddeeva, MatchesQuadratureInUpperHalfPlane) {
  for (double re : {-6.0, -2.0, -0.5, 0.0, 0.7, 3.0, 8.0}) {
    for (double im : {0.05, 0.3, 1.0, 4.0}) {
      const cplx z(re, im);
      const cplx q = faddeeva_quadrature(z);
      EXPECT_LT(std::abs(sp::faddeeva(z) - q), 1e-10 * std::abs(q)) << z;
    }
  }
}

TEST(Faddeeva, LargeArgumentAsymptote) {
  const cplx z(-55.0, 0.3);
  const cplx asym = cplx(0.0, 1.0) / (std::sqrt(cavcool::constants::pi) * z) * (1.0 + 0.5 / (z * z));
  EXPECT_LT(std::abs(sp::faddeeva(z) - asym), 1e-7 * std::abs(asym));
}

TEST(ComplexErf, RealAxisAgreesWithStdErf) {
  for (double x : {-3.0, -0.4, 0.0, 0.2, 1.0, 2.5}) {
    EXPECT_NEAR(sp::erf({x, 0.0}).real(), std::erf(x), 1e-13);
    EXPECT_NEAR(sp::erf({x, 0.0}).imag(), 0.0, 1e-13);
  }
}

TEST(ComplexErf, ScaledFormMatchesDirectWhereRepresentable) {
  for (double u : {-2.0, -0.3, 0.0, 0.4, 1.5}) {
    for (double v : {0.0, 0.5, 2.0, 5.0}) {
      const cplx direct = std::exp(-v * v) * sp::erf({u, v});
      const cplx scaled = sp::erf_scaled(u, v);
      EXPECT_LT(std::abs(direct - scaled), 1e-12 * std::max(1.0, std::abs(direct))) << u << "," << v;
    }
  }
  // Far beyond the range of the unscaled value the scaled one stays finite.
  const cplx far = sp::erf_scaled(0.5, 60.0);
  EXPECT_TRUE(std::isfinite(far.real()) && std::isfinite(far.imag()));
}

TEST(EllipticK, LimitsAndKnownValue) {
  EXPECT_NEAR(sp::ellint_k(0.0), cavcool::constants::pi / 2.0, 1e-15);
  // K(1/2) = Gamma(1/4)^2 / (4 sqrt(pi))
  const double k_half = std::pow(std::tgamma(0.25), 2) / (4.0 * std::sqrt(cavcool::constants::pi));
  EXPECT_NEAR(sp::ellint_k(0.5), k_half, 1e-14);
  EXPECT_THROW(sp::ellint_k(1.0), std::domain_error);
}
