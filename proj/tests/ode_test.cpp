#include <gtest/gtest.h>

#include <cmath>

#include "cavcool/ode.hpp"

namespace ode = cavcool::ode;

namespace {

struct Oscillator {
  double omega = 2.0;
  void operator()(double, const ode::Vector<2>& y, ode::Vector<2>& dy) const {
    dy[0] = y[1];
    dy[1] = -omega * omega * y[0];
  }
};

} // namespace

TEST(DormandPrince, HarmonicOscillatorEndpoint) {
  ode::DormandPrince<2> stepper(ode::StepperOptions{{1e-10, 1e-12}});
  const Oscillator rhs;
  const auto y = stepper.integrate(rhs, ode::Vector<2>{1.0, 0.0}, 0.0, 10.0, ode::OutputGrid{},
                                   [](long, double, const ode::Vector<2>&) {});
  EXPECT_NEAR(y[0], std::cos(20.0), 1e-8);
  EXPECT_NEAR(y[1], -2.0 * std::sin(20.0), 1e-8);
  EXPECT_GT(stepper.stats().accepted, 0);
}

TEST(DormandPrince, DenseOutputOnUniformGrid) {
  ode::DormandPrince<2> stepper(ode::StepperOptions{{1e-10, 1e-12}});
  const Oscillator rhs;
  const ode::OutputGrid grid{0.0, 0.01, 1001};
  long seen = 0;
  double worst = 0.0;
  stepper.integrate(rhs, ode::Vector<2>{1.0, 0.0}, 0.0, 10.0, grid,
                    [&](long i, double t, const ode::Vector<2>& y) {
                      EXPECT_EQ(i, seen);
                      EXPECT_DOUBLE_EQ(t, grid.time(i));
                      worst = std::max(worst, std::abs(y[0] - std::cos(2.0 * t)));
                      ++seen;
                    });
  EXPECT_EQ(seen, grid.count);
  EXPECT_LT(worst, 1e-7);
}

TEST(DormandPrince, ConvergesAtFifthOrder) {
  // Tightening rtol by 1e5 should cut the error by roughly that factor.
  const Oscillator rhs;
  auto err_at = [&](double rtol) {
    ode::DormandPrince<2> stepper(ode::StepperOptions{{rtol, 0.0}});
    const auto y = stepper.integrate(rhs, ode::Vector<2>{1.0, 0.0}, 0.0, 5.0, ode::OutputGrid{},
                                     [](long, double, const ode::Vector<2>&) {});
    return std::abs(y[0] - std::cos(10.0));
  };
  EXPECT_LT(err_at(1e-11), 1e-3 * err_at(1e-6));
}

TEST(DormandPrince, StepBudgetExhausted) {
  ode::StepperOptions opt;
  opt.max_steps = 10;
  ode::DormandPrince<2> stepper(opt);
  const Oscillator rhs;
  EXPECT_THROW(stepper.integrate(rhs, ode::Vector<2>{1.0, 0.0}, 0.0, 1000.0, ode::OutputGrid{},
                                 [](long, double, const ode::Vector<2>&) {}),
               cavcool::IntegrationError);
}

TEST(DormandPrince, FiniteTimeBlowUpIsReported) {
  ode::DormandPrince<1> stepper;
  auto rhs = [](double, const ode::Vector<1>& y, ode::Vector<1>& dy) { dy[0] = y[0] * y[0]; };
  // y = 1/(1 - t) blows up at t = 1.
  EXPECT_THROW(stepper.integrate(rhs, ode::Vector<1>{1.0}, 0.0, 2.0, ode::OutputGrid{},
                                 [](long, double, const ode::Vector<1>&) {}),
               cavcool::NumericError);
}
