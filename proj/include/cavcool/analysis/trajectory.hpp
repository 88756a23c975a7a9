#pragma once

#include <cmath>
#include <vector>

#include "cavcool/analysis/extrema.hpp"

namespace cavcool::analysis {

struct ReconstructOptions {
  double band_low = 0.15;   // S_N/env below this is insensitive (near a node)
  double band_high = 0.85;  // above this is insensitive (near an antinode)
  bool repair = true;
};

/// x(t) over the analysis window, determined up to sign and a multiple of
/// lambda/2. `trapped` marks samples between the first and last turning point.
struct Trajectory {
  std::vector<double> t;
  std::vector<double> x;   // m
  std::vector<double> kx;  // rad
  std::vector<bool> trapped;
  std::vector<bool> repaired;
};

/// Inverts S_N/env = cos^2(kx) branch by branch: maxima are antinode passages
/// (branch side flips), node minima advance the lattice site, turning points
/// keep the branch. Values near maxima and nodes, where the inverse is
/// insensitive, are replaced by a line fitted to the sensitive samples within
/// a quarter fringe on either side.
inline Trajectory reconstruct_trajectory(const SNTrace& s, const ExtremaClassification& cls, const EnvelopeFit& env,
                                         double wavelength, const ReconstructOptions& opt = {}) {
  const std::size_t a = cls.first_index, b = cls.last_index;
  const auto& seq = cls.sequence;
  for (std::size_t j = 1; j < seq.size(); ++j) {
    const bool prev_max = seq[j - 1].kind == ExtremumKind::antinode || seq[j - 1].kind == ExtremumKind::turning_max;
    const bool cur_max = seq[j].kind == ExtremumKind::antinode || seq[j].kind == ExtremumKind::turning_max;
    if (prev_max == cur_max || !(seq[j].t > seq[j - 1].t)) {
      throw AnalysisError("inconsistent extremum sequence near t=" + std::to_string(seq[j].t) + " s");
    }
  }
  Trajectory out;
  const std::size_t n = b - a;
  out.t.assign(s.t.begin() + a, s.t.begin() + b);
  out.kx.resize(n);
  out.trapped.assign(n, false);
  out.repaired.assign(n, false);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = std::clamp(s.sn[a + i] / env(out.t[i]), 0.0, 1.0);

  // Branch state valid before the first extremum.
  double base = 0.0;
  double side = 1.0;
  if (!seq.empty() && seq.front().kind == ExtremumKind::antinode) side = -1.0;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (next < seq.size() && out.t[i] > seq[next].t) {
      switch (seq[next].kind) {
        case ExtremumKind::antinode: side = -side; break;
        case ExtremumKind::node:
          base += side * constants::pi;
          side = -side;
          break;
        case ExtremumKind::turning:
        case ExtremumKind::turning_max: break;
      }
      ++next;
    }
    out.kx[i] = base + side * std::acos(std::sqrt(r[i]));
  }

  const auto turning = cls.turning_points();
  if (!turning.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      out.trapped[i] = out.t[i] >= turning.front().t && out.t[i] <= turning.back().t;
    }
  }

  if (opt.repair) {
    std::vector<double> fixed = out.kx;
    for (std::size_t j = 0; j < seq.size(); ++j) {
      if (seq[j].kind != ExtremumKind::antinode && seq[j].kind != ExtremumKind::node) continue;
      double span = 0.0;
      if (j > 0 && j + 1 < seq.size()) {
        span = seq[j + 1].t - seq[j - 1].t;
      } else if (j > 0) {
        span = 2.0 * (seq[j].t - seq[j - 1].t);
      } else if (j + 1 < seq.size()) {
        span = 2.0 * (seq[j + 1].t - seq[j].t);
      } else {
        continue;
      }
      const double lo = seq[j].t - 0.25 * span, hi = seq[j].t + 0.25 * span;
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      int left = 0, right = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (out.t[i] < lo || out.t[i] > hi) continue;
        if (r[i] < opt.band_low || r[i] > opt.band_high) continue;
        const double x = out.t[i] - seq[j].t;
        sx += x;
        sy += out.kx[i];
        sxx += x * x;
        sxy += x * out.kx[i];
        (x < 0 ? left : right)++;
      }
      const int m = left + right;
      if (left < 1 || right < 1 || m < 3) continue;
      const double den = m * sxx - sx * sx;
      if (den == 0.0) continue;
      const double slope = (m * sxy - sx * sy) / den;
      const double icpt = (sy - slope * sx) / m;
      for (std::size_t i = 0; i < n; ++i) {
        if (out.t[i] < lo || out.t[i] > hi) continue;
        if (r[i] >= opt.band_low && r[i] <= opt.band_high) continue;
        fixed[i] = icpt + slope * (out.t[i] - seq[j].t);
        out.repaired[i] = true;
      }
    }
    out.kx = std::move(fixed);
  }
  const double k = 2.0 * constants::pi / wavelength;
  out.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.x[i] = out.kx[i] / k;
  return out;
}

} // namespace cavcool::analysis
