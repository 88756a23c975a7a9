// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cavcool/analysis.hpp"
#include "cavcool/ensemble.hpp"
#include "cavcool/io.hpp"
#include "cavcool/mie.hpp"
#include "cavcool/scenario.hpp"
#include "fixtures.hpp"
#include "oracles/stress_tensor.hpp"

namespace cc = cavcool;
namespace an = cavcool::analysis;
namespace ens = cavcool::ensemble;
namespace fs = std::filesystem;
using cc::constants::pi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

const char* mark(bool ok) { return ok ? "ok" : "FAIL"; }

cc::DerivedCavity red_cavity() { return cc::derive_cavity(cc::with_detuning_over_kappa(cc::CavityConfig{}, -1.0)); }

cc::io::RunConfig preset(const char* name) {
  return cc::io::load_config(fs::path(CAVCOOL_PRESET_DIR) / (std::string(name) + ".json"));
}

// 1. Empty cavity relaxes to eta/(kappa - i Delta).
Outcome steady_state() {
  const auto cav = red_cavity();
  cc::ParticleConfig p;
  p.radius = 0.0;
  const auto pd = cc::particle_properties(p, cav);
  const auto ss = cav.empty_amplitude();
  cc::IntegrateOptions opt;
  opt.gravity = false;
  // (a) the default entry state is the steady state and stays there
  const auto held = cc::integrate(cav, pd, 0.0, cc::entry_state(cav, {}, {}), {0.0, 10.0 / cav.kappa}, opt);
  double drift = 0.0;
  for (const auto& s : held.samples) drift = std::max(drift, std::abs(s.field - ss) / std::abs(ss));
  // (b) from an empty cavity the field follows the exact transient
  cc::SimState zero;
  const auto tr = cc::integrate(cav, pd, 0.0, zero, {0.0, 20.0 / cav.kappa}, opt);
  const std::complex<double> rate(cav.kappa, -cav.detuning());
  double transient = 0.0, at10 = 0.0, settle = -1.0;
  for (const auto& s : tr.samples) {
    const double e = std::abs(s.field - ss * (1.0 - std::exp(-rate * s.t))) / std::abs(ss);
    transient = std::max(transient, e);
    const double dev = std::abs(s.field - ss) / std::abs(ss);
    if (std::abs(s.t * cav.kappa - 10.0) < 0.5 * cav.kappa / opt.sample_rate) at10 = dev;
    if (dev < 1e-6 && settle < 0.0) settle = s.t * cav.kappa;
  }
  // (c) the steady state is reached within 1e-6
  const double final_dev = std::abs(tr.samples.back().field - ss) / std::abs(ss);
  const bool ok = drift < 1e-6 && transient < 1e-6 && final_dev < 1e-6;
  return {ok, fmt("entry-state drift %.1e [%s]; transient error %.1e [%s]; |a-a_ss|/|a_ss| %.1e at 20/kappa [%s], "
                  "below 1e-6 from t=%.1f/kappa (from a(0)=0 at 10/kappa: %.1e = e^-10)",
                  drift, mark(drift < 1e-6), transient, mark(transient < 1e-6), final_dev, mark(final_dev < 1e-6),
                  settle, at10)};
}

// 2. Co-integrated field against the delay-integral solution.
Outcome field_equivalence() {
  const auto f = fixtures::fig3();
  const auto tr = f.run();
  const auto sol = cc::formal_field_solution(tr.samples, f.cav, f.coupling);
  double scale = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < sol.field.size(); ++i) {
    scale = std::max(scale, std::abs(tr.samples[i].field));
    worst = std::max(worst, std::abs(sol.field[i] - tr.samples[i].field));
  }
  const double rel = worst / scale;
  return {!sol.undersampled && rel < 1e-4, fmt("max |a_ode - a_quad| / max|a| = %.2e over %zu samples", rel,
                                               sol.field.size())};
}

// 3. Exit kinetic energy ordered by detuning.
Outcome cooling_sign() {
  const std::size_t runs = 100;
  const auto order = ens::parallel_map(
      runs,
      [](std::size_t i) {
        auto rng = ens::stream(3, i);
        cc::TransitConfig t;
        t.vx = 0.10 + 0.20 * ens::uniform01(rng);
        t.entry_phase = pi * ens::uniform01(rng);
        t.y_over_w = 0.5 * ens::uniform01(rng);
        t.coupling_over_kappa = 2.3;
        double e[3];
        const double det[3] = {-1.0, 0.0, 1.0};
        for (int j = 0; j < 3; ++j) {
          const auto sc = cc::make_scenario(cc::with_detuning_over_kappa(cc::CavityConfig{}, det[j]),
                                            cc::ParticleConfig{}, t);
          const double v = cc::simulate(sc).samples.back().velocity.x;
          e[j] = v * v;
        }
        return e[0] < e[1] && e[1] < e[2];
      },
      0);
  std::size_t good = 0;
  for (bool b : order) good += b;
  return {good >= 95, fmt("E(-kappa) < E(0) < E(+kappa) in %zu/%zu runs (v_x 10-30 cm/s, seed 3)", good, runs)};
}

// 4. Cooling factor of the fig3 preset and a small (phase, y) grid.
Outcome quantitative_cooling() {
  const auto cfg = preset("fig3");
  auto analyze = [&](const cc::TransitConfig& t) -> std::optional<double> {
    try {
      const auto sc = cc::make_scenario(cfg.cavity(), cfg.particle, t, cfg.integrator);
      const auto d = cc::detect(sc, cc::simulate(sc));
      return an::analyze(d, sc.cavity, cfg.analysis_options()).cooling_factor;
    } catch (const cc::Error&) {
      return std::nullopt;
    }
  };
  const auto base = analyze(cfg.transit);
  double best = 0.0;
  int analysed = 0, cells = 0;
  for (double ph : {0.0, 0.25 * pi, 0.5 * pi, 0.75 * pi}) {
    for (double y : {0.0, 0.2, 0.4}) {
      auto t = cfg.transit;
      t.entry_phase = ph;
      t.y_over_w = y;
      ++cells;
      if (const auto c = analyze(t)) {
        ++analysed;
        best = std::max(best, *c);
      }
    }
  }
  const bool ok = base && *base > 5.0 && best > 20.0;
  return {ok, fmt("fig3 preset cooling %.1f [%s]; grid max %.1f over %d/%d analysed cells [%s]", base.value_or(0.0),
                  mark(base && *base > 5.0), best, analysed, cells, mark(best > 20.0))};
}

// 5. Trap frequency formula.
Outcome trap_frequency() {
  const auto cav = red_cavity();
  const double m = 2e10 * cc::constants::amu;
  const double f = an::trap_frequency(1e-3, 2.3 * cav.kappa, m, cav.kappa, 1560e-9);
  const auto pd = cc::particle_properties(cc::ParticleConfig{}, cav);
  const double fp = an::trap_frequency(1e-3, pd.u0, m, cav.kappa, 1560e-9);
  const bool a = std::abs(f - 150e3) <= 1e3;
  const bool b = std::abs(f / 145e3 - 1.0) <= 0.10;
  const bool c = std::abs(fp / 183e3 - 1.0) <= 0.15;
  return {a && b && c, fmt("f = %.1f kHz vs 150 +/- 1 kHz [%s]; vs 145 kHz %+.1f%% [%s]; point particle "
                           "(U0 = %.3f kappa) %.1f kHz vs 183 kHz %+.1f%% [%s]",
                           f / 1e3, mark(a), 100.0 * (f / 145e3 - 1.0), mark(b), pd.u0 / cav.kappa, fp / 1e3,
                           100.0 * (fp / 183e3 - 1.0), mark(c))};
}

// 6. Anharmonic correction.
Outcome anharmonicity() {
  const double fh = an::anharmonic_correction(138e3, 0.33);
  const bool published = std::abs(fh / 145e3 - 1.0) <= 0.05;
  const auto cav = cc::derive_cavity(cc::CavityConfig{});
  const auto pd = cc::particle_properties(cc::ParticleConfig{}, cav);
  const double u = 2.3 * cav.kappa;
  const double depth = cc::constants::hbar * u * cav.resonant_photon_number();
  const double f0 = cc::harmonic_trap_frequency(cav, pd.mass, u);
  double worst = 0.0;
  for (double m : {0.05, 0.33, 0.6, 0.9}) {
    cc::IntegrateOptions opt;
    opt.freeze_field = true;
    opt.gravity = false;
    opt.shift_coupling = u;
    opt.tolerances = {1e-11, 1e-14};
    const auto init = cc::entry_state(cav, {}, {std::sqrt(2.0 * m * depth / pd.mass), 0.0, 0.0});
    const auto tr = cc::integrate(cav, pd, u, init, {0.0, 45.0 / f0}, opt);
    std::vector<double> up;
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
      const double a = tr.samples[i - 1].position.x, b = tr.samples[i].position.x;
      if (a < 0.0 && b >= 0.0) up.push_back(tr.samples[i - 1].t + (tr.samples[i].t - tr.samples[i - 1].t) * a / (a - b));
    }
    const double f_sim = (up.size() - 1) / (up.back() - up.front());
    worst = std::max(worst, std::abs(an::anharmonic_correction(f_sim, m) / f0 - 1.0));
  }
  return {published && worst < 1e-3,
          fmt("138 kHz at 0.33 -> %.1f kHz, %+.2f%% from 145 kHz [%s]; elliptic vs simulated periods max %.1e [%s]",
              fh / 1e3, 100.0 * (fh / 145e3 - 1.0), mark(published), worst, mark(worst < 1e-3))};
}

// 7. Mie force factor.
Outcome mie_curve() {
  const double n = 3.47, k = 2.0 * pi / 1560e-9;
  auto ratio = [&](double r_nm) { return cc::mie::standing_wave_force_factor(r_nm * 1e-9, n, k).ratio; };
  double small = 0.0;
  for (double r = 1.0; r <= 30.0; r += 1.0) small = std::max(small, std::abs(ratio(r) - 1.0));
  const double dev130 = std::abs(ratio(130.0) - 1.0);
  cc::io::MieScanConfig scan;
  scan.radius_min_nm = 100.0;
  scan.radius_max_nm = 300.0;
  scan.points = 2001;
  const auto zero = cc::io::mie_scan_summary(cc::io::mie_scan(scan, n, k))["zero_crossing_nm"];
  const double z = zero.is_number() ? zero.get<double>() : -1.0;
  double oracle_err = 0.0;
  for (double r : {50.0, 100.0, 150.0, 220.0, 300.0}) {
    const double x = k * r * 1e-9;
    const auto c = cc::mie::mie_coefficients(x, n);
    const double series = -cc::mie::standing_wave_force_amplitude(c) * std::sin(2.0 * (pi / 4.0));
    const double quad = oracle::standing_wave_force(x, n, pi / 4.0, c.order() + 4);
    oracle_err = std::max(oracle_err, std::abs(series / quad - 1.0));
  }
  const bool a = small <= 0.01, b = dev130 > 0.05, c = z >= 170.0 && z <= 210.0, d = oracle_err < 1e-4;
  return {a && b && c && d, fmt("max |ratio-1| for R <= 30 nm %.1e [%s]; |ratio-1| at 130 nm %.3f [%s]; zero crossing "
                                "%.1f nm [%s]; series vs stress tensor max %.1e at 5 radii [%s]",
                                small, mark(a), dev130, mark(b), z, mark(c), oracle_err, mark(d))};
}

// 8. Reconstruction round trip on seeded noise-free transits.
struct RoundTrip {
  bool ok = false;
  double rms = 0.0, vin = 0.0, vout = 0.0, vz = 0.0;
  std::string why;
};

RoundTrip round_trip(std::uint64_t seed, std::size_t i) {
  auto rng = ens::stream(seed, i);
  cc::TransitConfig t;
  t.vx = 0.05 + 0.45 * ens::uniform01(rng);
  t.vz = 0.5 + 2.5 * ens::uniform01(rng);
  t.entry_phase = pi * ens::uniform01(rng);
  t.y_over_w = 0.5 * ens::uniform01(rng);
  t.coupling_over_kappa = 2.3;
  RoundTrip r;
  try {
    const auto sc = cc::make_scenario(cc::with_detuning_over_kappa(cc::CavityConfig{}, -1.0), cc::ParticleConfig{}, t);
    const auto truth = cc::simulate(sc);
    const auto rep = an::analyze(cc::detect(sc, truth), sc.cavity, an::AnalysisOptions::noise_free());
    if (!rep.entry || !rep.exit) throw cc::AnalysisError("missing entry or exit fringe");
    const auto& tr = rep.trajectory;
    const double k = sc.cavity.k;
    std::vector<double> truth_kx(tr.t.size());
    for (std::size_t j = 0; j < tr.t.size(); ++j) truth_kx[j] = k * fixtures::at(truth, tr.t[j]).position.x;
    const auto turning = rep.extrema.turning_points();
    std::vector<std::size_t> before, after;
    for (std::size_t j = 0; j < tr.t.size(); ++j) {
      if (turning.empty() || tr.t[j] < turning.front().t) before.push_back(j);
      if (!turning.empty() && tr.t[j] > turning.back().t) after.push_back(j);
    }
    for (const auto* seg : {&before, &after}) {
      if (!seg->empty()) r.rms = std::max(r.rms, fixtures::aligned_rms(tr, truth_kx, *seg) / k);
    }
    const double in = fixtures::mean_speed(truth, rep.entry->t_first, rep.entry->t_last);
    const double out = fixtures::mean_speed(truth, rep.exit->t_first, rep.exit->t_last);
    r.vin = std::abs(rep.entry->velocity / in - 1.0);
    r.vout = std::abs(rep.exit->velocity / out - 1.0);
    r.vz = std::abs(rep.vz / fixtures::at(truth, rep.envelope.center).velocity.z - 1.0);
    const double lambda = sc.cavity.wavelength();
    r.ok = r.rms < lambda / 20.0 && r.vin < 0.05 && r.vout < 0.05 && r.vz < 0.02;
    if (!r.ok) r.why = fmt("rms %.3g lambda, vin %.3f, vout %.3f, vz %.3f", r.rms / lambda, r.vin, r.vout, r.vz);
  } catch (const cc::Error& e) {
    r.why = std::string(e.kind()) + ": " + e.what();
  }
  return r;
}

Outcome reconstruction() {
  const std::size_t runs = 50;
  const auto res = ens::parallel_map(runs, [](std::size_t i) { return round_trip(1, i); }, 0);
  std::size_t good = 0;
  double rms = 0.0, vin = 0.0, vout = 0.0, vz = 0.0;
  std::string first_bad;
  for (std::size_t i = 0; i < runs; ++i) {
    if (res[i].ok) {
      ++good;
      rms = std::max(rms, res[i].rms);
      vin = std::max(vin, res[i].vin);
      vout = std::max(vout, res[i].vout);
      vz = std::max(vz, res[i].vz);
    } else if (first_bad.empty()) {
      first_bad = fmt("; run %zu: %s", i, res[i].why.c_str());
    }
  }
  const double lambda = red_cavity().wavelength();
  return {good == runs, fmt("%zu/%zu runs within bounds (seed 1); worst passing: rms %.4f lambda, v_in %.2f%%, "
                            "v_out %.2f%%, v_z %.2f%%%s",
                            good, runs, rms / lambda, 100.0 * vin, 100.0 * vout, 100.0 * vz, first_bad.c_str())};
}

// 9. Area-ratio study.
Outcome area_ratio_study() {
  const auto cfg = preset("figS4");
  const auto points = ens::run_sweep(cfg.sweep_spec());
  const auto s = ens::summarize(points);
  const auto& u = s.untrapped;
  const double z = u.rank_correlation ? *u.rank_correlation * std::sqrt(double(u.r_a.count) - 1.0) : 0.0;
  const bool a = u.rank_correlation && *u.rank_correlation > 0.0 && z > 2.0;
  const double peak = s.trapped_peak_rv.value_or(0.0);
  const bool b = peak >= 1.05 && peak <= 1.15;
  const double x = s.trapped_crossover.value_or(-1.0);
  const bool c = x >= 0.8 && x <= 1.0;
  const auto f = preset("fig3");
  const auto sc = cc::make_scenario(f.cavity(), f.particle, f.transit, f.integrator);
  const auto rep = an::analyze(cc::detect(sc, cc::simulate(sc)), sc.cavity, f.analysis_options());
  const double ra = rep.area ? rep.area->ratio : -1.0;
  const bool d = ra >= 0.92 && ra <= 1.04;
  return {a && b && c && d,
          fmt("%zu runs, %zu failed; untrapped n=%zu Spearman %.3f (z=%.1f) [%s]; trapped n=%zu peak r_v for "
              "r_A in (0.9,1) %.3f vs ~1.1 [%s]; r_v-1 sign change at r_A %.3f [%s]; fig3 r_A %.3f [%s]",
              s.total, s.failed, u.r_a.count, u.rank_correlation.value_or(0.0), z, mark(a), s.trapped.r_a.count, peak,
              mark(b), x, mark(c), ra, mark(d))};
}

// 10. Closed-form velocity perturbation against quadrature.
Outcome velocity_perturbation() {
  const auto cav = red_cavity();
  const double mass = 2e10 * cc::constants::amu;
  double worst = 0.0, late = 0.0;
  int points = 0;
  for (double v0 : {0.02, 0.05, 0.1, 0.2, 0.4}) {
    for (double vz : {0.5, 1.0, 2.0, 3.0}) {
      an::WeakTransit p{v0, vz, 2.3 * cav.kappa, cav.resonant_photon_number(), mass, cav.k, cav.waist()};
      const double tau = p.waist / vz;
      const double force = cc::constants::hbar * p.k * p.coupling * p.photon_number / mass;
      const double omega = 2.0 * p.k * v0;
      auto f = [&](double s) { return std::sin(omega * s) * std::exp(-2.0 * s * s / (tau * tau)); };
      for (double tt : {-1.0, -0.2, 0.0, 0.37, 1.5}) {
        const double t = tt * tau;
        const double panel = 2.0 * pi / omega;
        double acc = 0.0;
        for (double a = -8.0 * tau; a < t; a += panel) {
          acc += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, std::min(a + panel, t), 10, 1e-14);
        }
        const double oracle = v0 - force * acc;
        worst = std::max(worst, std::abs(an::velocity_perturbation(p, t).velocity - oracle) / std::abs(oracle));
      }
      late = std::max(late, std::abs(an::velocity_perturbation(p, 10.0 * tau).velocity - v0) / v0);
      ++points;
    }
  }
  return {points == 20 && worst < 1e-3 && late < 1e-9,
          fmt("%d grid points, max relative deviation %.1e [%s]; |v(10 tau)-v0|/v0 max %.1e [%s]", points, worst,
              mark(worst < 1e-3), late, mark(late < 1e-9))};
}

// 11. Energy conservation with a frozen field.
Outcome energy_conservation() {
  const auto cav = red_cavity();
  const auto pd = cc::particle_properties(cc::ParticleConfig{}, cav);
  const double u = 2.3 * cav.kappa;
  cc::IntegrateOptions opt;
  opt.gravity = false;
  opt.freeze_field = true;
  opt.sample_rate = 2e6;
  const auto init = cc::entry_state(cav, {0.5 / cav.k, 0.0, 0.0}, {0.02, 0.0, 0.0});
  const double f_trap = cc::harmonic_trap_frequency(cav, pd.mass, u);
  const auto tr = cc::integrate(cav, pd, u, init, {0.0, 100.0 / f_trap}, opt);
  const double n = std::norm(init.field);
  auto energy = [&](const cc::SimState& s) {
    return 0.5 * pd.mass * s.velocity.x * s.velocity.x -
           cc::constants::hbar * u * n * std::pow(std::cos(cav.k * s.position.x), 2);
  };
  const double e0 = energy(tr.samples.front());
  double drift = 0.0;
  for (const auto& s : tr.samples) drift = std::max(drift, std::abs(energy(s) - e0));
  const double rel = drift / std::abs(e0);
  return {rel < 1e-6, fmt("max |E-E0|/|E0| = %.1e over 100 periods (%zu samples)", rel, tr.samples.size())};
}

// 12. Sweep determinism through the CLI.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("cavcool_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  auto run = [&](const char* sub) {
    const std::string cmd = std::string(CAVCOOL_CLI) + " sweep --preset figS4 --seed 1 --out " + (dir / sub).string() +
                            " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const int a = run("a"), b = run("b");
  const auto ca = slurp(dir / "a/sweep.csv"), cb = slurp(dir / "b/sweep.csv");
  const auto ja = slurp(dir / "a/sweep_summary.json"), jb = slurp(dir / "b/sweep_summary.json");
  fs::remove_all(dir);
  const bool ok = a == 0 && b == 0 && !ca.empty() && ca == cb && ja == jb;
  return {ok, fmt("exit codes %d/%d; sweep.csv %zu bytes %s; summary %s", a, b, ca.size(),
                  ca == cb ? "identical" : "DIFFERENT", ja == jb ? "identical" : "DIFFERENT")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> check;
};

} // namespace

int main() {
  const std::vector<Criterion> all{
      {1, "steady state", 1.0, steady_state},
      {2, "field-solution equivalence", 10.0, field_equivalence},
      {3, "cooling sign", 120.0, cooling_sign},
      {4, "quantitative cooling", 300.0, quantitative_cooling},
      {5, "trap frequency", 1.0, trap_frequency},
      {6, "anharmonicity", 30.0, anharmonicity},
      {7, "Mie curve", 60.0, mie_curve},
      {8, "reconstruction round trip", 300.0, reconstruction},
      {9, "area-ratio study", 600.0, area_ratio_study},
      {10, "velocity perturbation", 30.0, velocity_perturbation},
      {11, "frozen-field energy", 30.0, energy_conservation},
      {12, "sweep determinism", 60.0, determinism},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s: %s; %.2f s of %.0f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), dt,
                c.budget_s, in_time ? "" : " [over budget]");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria pass\n", static_cast<int>(all.size()) - failed, all.size());
  return failed;
}
