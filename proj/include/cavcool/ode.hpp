#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>

#include "cavcool/errors.hpp"

namespace cavcool::ode {

template <std::size_t N>
using Vector = std::array<double, N>;

struct Tolerances {
  double rtol = 1e-8;
  double atol = 1e-12;
};

struct StepperOptions {
  Tolerances tol;
  double initial_step = 0.0;  // 0 picks a step from the tolerances
  double max_step = 0.0;      // 0 means unbounded
  long max_steps = 50'000'000;
};

// Uniform output times start + i*dt, i = 0..count-1.
struct OutputGrid {
  double start = 0.0;
  double dt = 0.0;
  long count = 0;

  double time(long i) const { return start + static_cast<double>(i) * dt; }
};

struct StepStats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

// Dormand-Prince 5(4) with Hairer's fourth-order continuous extension.
//
// `integrate` walks from t0 to t1 and hands every grid time to
// `observer(i, t, y)` via dense output, so output sampling never shortens steps.
template <std::size_t N>
class DormandPrince {
public:
  using State = Vector<N>;

  explicit DormandPrince(StepperOptions options = {}) : opt_(options) {}

  const StepStats& stats() const { return stats_; }

  template <class Rhs, class Observer>
  State integrate(Rhs&& rhs, State y, double t0, double t1, const OutputGrid& grid,
                  Observer&& observer) {
    stats_ = {};
    double t = t0;
    State k1{};
    rhs(t, y, k1);
    ++stats_.evaluations;
    double h = opt_.initial_step > 0.0 ? opt_.initial_step : initial_step(rhs, t, y, k1, t1);
    long next = 0;
    while (next < grid.count && grid.time(next) <= t) {
      observer(next, grid.time(next), y);
      ++next;
    }
    const double min_step = 64.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t0), std::abs(t1));
    State k2, k3, k4, k5, k6, k7, y_new, y_err, tmp;
    double err_prev = 1e-4;
    while (t < t1) {
      if (stats_.accepted + stats_.rejected >= opt_.max_steps) {
        throw IntegrationError("step budget exhausted at t=" + std::to_string(t));
      }
      if (opt_.max_step > 0.0) h = std::min(h, opt_.max_step);
      bool last = false;
      if (t + h >= t1 || t + 1.01 * h >= t1) {
        h = t1 - t;
        last = true;
      }
      if (h < min_step && !last) {
        std::ostringstream msg;
        msg << "step size underflow (h=" << h << ") at t=" << t << " after " << stats_.accepted
            << " accepted steps; the system is likely stiff or singular here";
        throw IntegrationError(msg.str());
      }

      for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a21 * k1[i]);
      rhs(t + c2 * h, tmp, k2);
      for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
      rhs(t + c3 * h, tmp, k3);
      for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      rhs(t + c4 * h, tmp, k4);
      for (std::size_t i = 0; i < N; ++i) {
        tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      }
      rhs(t + c5 * h, tmp, k5);
      for (std::size_t i = 0; i < N; ++i) {
        tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      }
      rhs(t + h, tmp, k6);
      for (std::size_t i = 0; i < N; ++i) {
        y_new[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      }
      rhs(t + h, y_new, k7);
      stats_.evaluations += 6;

      double err = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        y_err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = scale(std::max(std::abs(y[i]), std::abs(y_new[i])));
        const double r = y_err[i] / sc;
        err += r * r;
      }
      err = std::sqrt(err / N);
      if (!std::isfinite(err)) {
        bool state_ok = true;
        for (double v : y) state_ok = state_ok && std::isfinite(v);
        if (!state_ok) throw DivergenceError("non-finite state at t=" + std::to_string(t));
        h *= 0.1;
        ++stats_.rejected;
        continue;
      }

      if (err <= 1.0) {
        const double t_new = last ? t1 : t + h;
        // Dense output on [t, t_new] for every pending output time.
        if (next < grid.count && grid.time(next) <= t_new) {
          State r1 = y, r2, r3, r4, r5;
          for (std::size_t i = 0; i < N; ++i) {
            r2[i] = y_new[i] - y[i];
            r3[i] = h * k1[i] - r2[i];
            r4[i] = r2[i] - h * k7[i] - r3[i];
            r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
          }
          State y_out;
          while (next < grid.count && grid.time(next) <= t_new) {
            const double t_out = grid.time(next);
            const double th = (t_out - t) / (t_new - t);
            const double th1 = 1.0 - th;
            for (std::size_t i = 0; i < N; ++i) {
              y_out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
            }
            observer(next, t_out, y_out);
            ++next;
          }
        }
        for (double v : y_new) {
          if (!std::isfinite(v)) throw DivergenceError("non-finite state at t=" + std::to_string(t_new));
        }
        t = t_new;
        y = y_new;
        k1 = k7;
        ++stats_.accepted;
        // PI step-size controller (Hairer, beta = 0.04).
        const double fac = err == 0.0 ? 10.0
                                      : std::clamp(0.9 * std::pow(err, -0.17) * std::pow(err_prev, 0.04), 0.2, 10.0);
        err_prev = std::max(err, 1e-4);
        h *= fac;
        if (last) break;
      } else {
        h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
        ++stats_.rejected;
      }
    }
    return y;
  }

private:
  // Error weight; never zero, so pure relative tolerances work at y = 0.
  double scale(double magnitude) const {
    return std::max(opt_.tol.atol + opt_.tol.rtol * magnitude, std::numeric_limits<double>::min());
  }

  template <class Rhs>
  double initial_step(Rhs& rhs, double t, const State& y, const State& f0, double t1) {
    // Hairer's starting-step heuristic.
    double d0 = 0.0, d1n = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = scale(std::abs(y[i]));
      if (sc <= std::numeric_limits<double>::min()) continue;  // no weight for this component yet
      d0 += (y[i] / sc) * (y[i] / sc);
      d1n += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / N);
    d1n = std::sqrt(d1n / N);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, std::abs(t1 - t));
    State y1, f1;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + h0 * f0[i];
    rhs(t + h0, y1, f1);
    ++stats_.evaluations;
    double d2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = scale(std::abs(y[i]));
      if (sc <= std::numeric_limits<double>::min()) continue;
      const double r = (f1[i] - f0[i]) / sc;
      d2 += r * r;
    }
    d2 = std::sqrt(d2 / N) / h0;
    const double dm = std::max(d1n, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min({100.0 * h0, h1, std::abs(t1 - t)});
  }

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  // Error estimate: fifth-order minus embedded fourth-order weights.
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  StepperOptions opt_;
  StepStats stats_;
};

} // namespace cavcool::ode
