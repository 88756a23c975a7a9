// Command-line front end: simulate, analyze, mie-scan and sweep.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cavcool/analysis.hpp"
#include "cavcool/ensemble.hpp"
#include "cavcool/io.hpp"
#include "cavcool/scenario.hpp"

namespace fs = std::filesystem;
using cavcool::io::json;

namespace {

constexpr const char* tool_version = "1.0.0";

enum Exit { ok = 0, config_failure = 2, numeric_failure = 3, io_failure = 4 };

struct Common {
  std::string config;
  std::string preset;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> sample_rate_mhz;
  std::optional<double> noise;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path preset_path(const std::string& name) {
  fs::path p = fs::path(CAVCOOL_PRESET_DIR) / (name + ".json");
  if (!fs::exists(p)) throw cavcool::ConfigError("unknown preset '" + name + "' (looked for " + p.string() + ")");
  return p;
}

// Preset first, then the config file on top, then flags.
cavcool::io::RunConfig resolve(const Common& c, std::vector<std::string>& inputs) {
  cavcool::io::RunConfig cfg;
  if (!c.preset.empty()) {
    const auto p = preset_path(c.preset);
    cfg = cavcool::io::load_config(p, cfg);
    inputs.push_back(p.string());
  }
  if (!c.config.empty()) {
    cfg = cavcool::io::load_config(c.config, cfg);
    inputs.push_back(c.config);
  }
  if (c.seed) cfg.seed = *c.seed;
  if (c.sample_rate_mhz) {
    if (!(*c.sample_rate_mhz > 0.0)) throw cavcool::ConfigError("--sample-rate must be positive");
    cfg.integrator.sample_rate = *c.sample_rate_mhz * 1e6;
  }
  if (c.noise) {
    if (!(*c.noise >= 0.0)) throw cavcool::ConfigError("--noise must be non-negative");
    cfg.noise.sigma = *c.noise;
  }
  return cfg;
}

fs::path prepare_out(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw cavcool::IoError("cannot create output directory " + out);
  return fs::path(out);
}

class Manifest {
public:
  Manifest(std::string command, const cavcool::io::RunConfig& cfg, std::vector<std::string> inputs)
      : command_(std::move(command)), cfg_(cfg), inputs_(std::move(inputs)), started_(utc_now()),
        t0_(std::chrono::steady_clock::now()) {}

  void output(const fs::path& p) { outputs_.push_back(p.filename().string()); }

  void write(const fs::path& dir, json extra = json::object()) const {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    json m;
    m["tool"] = "cavcool";
    m["version"] = tool_version;
    m["command"] = command_;
    m["seed"] = cfg_.seed;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["started_utc"] = started_;
    m["wall_clock_s"] = elapsed;
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    m["config"] = cavcool::io::to_json(cfg_);
    cavcool::io::write_json(dir / "manifest.json", m);
  }

private:
  std::string command_;
  cavcool::io::RunConfig cfg_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
};

template <class Fn>
fs::path write_file(Manifest& m, const fs::path& dir, const char* name, Fn&& fn) {
  const fs::path p = dir / name;
  auto out = cavcool::io::open_output(p);
  fn(out);
  cavcool::io::close_output(out, p);
  m.output(p);
  return p;
}

int cmd_simulate(const Common& c) {
  std::vector<std::string> inputs;
  const auto cfg = resolve(c, inputs);
  const auto dir = prepare_out(c.out);
  Manifest m("simulate", cfg, inputs);
  const auto sc = cavcool::make_scenario(cfg.cavity(), cfg.particle, cfg.transit, cfg.integrator);
  const auto trace = cavcool::simulate(sc);
  const auto det = cavcool::detect(sc, trace, cfg.detector_noise());
  write_file(m, dir, "sim_trace.csv", [&](std::ostream& os) { cavcool::io::write_sim_trace(os, trace); });
  const auto meta = dir / "sim_trace.json";
  cavcool::io::write_json(meta, cavcool::io::sim_metadata(trace));
  m.output(meta);
  write_file(m, dir, "detector.csv", [&](std::ostream& os) { cavcool::io::write_detector_traces(os, det); });
  m.write(dir, {{"kappa_rad_s", sc.cavity.kappa},
                {"force_coupling_over_kappa", sc.force_coupling / sc.cavity.kappa},
                {"shift_coupling_over_kappa", sc.shift_coupling / sc.cavity.kappa},
                {"prescribed_kinematics", sc.prescribed.has_value()}});
  const auto& last = trace.samples.back();
  std::printf("simulate: %zu samples, vx %.4f -> %.4f m/s, written to %s\n", trace.samples.size(),
              trace.samples.front().velocity.x, last.velocity.x, dir.string().c_str());
  return ok;
}

int cmd_analyze(const Common& c, const std::string& trace_path) {
  std::vector<std::string> inputs;
  // Reuse the configuration that produced the trace when none is given.
  const fs::path sibling = fs::path(trace_path).parent_path() / "manifest.json";
  std::optional<cavcool::io::RunConfig> from_manifest;
  if (c.config.empty() && c.preset.empty() && fs::exists(sibling)) {
    const auto mj = cavcool::io::read_json(sibling);
    if (mj.contains("config")) {
      from_manifest = cavcool::io::parse_config(mj.at("config"));
      inputs.push_back(sibling.string());
    }
  }
  const auto cfg = from_manifest ? *from_manifest : resolve(c, inputs);
  const auto det = cavcool::io::read_detector_traces(fs::path(trace_path));
  inputs.push_back(trace_path);
  const auto dir = prepare_out(c.out);
  Manifest m("analyze", cfg, inputs);
  const auto cav = cavcool::derive_cavity(cfg.cavity());
  const auto report = cavcool::analysis::analyze(det, cav, cfg.analysis_options());
  const auto rp = dir / "report.json";
  cavcool::io::write_json(rp, cavcool::io::to_json(report, cav));
  m.output(rp);
  const auto sn = cavcool::normalized_scattering(det);
  write_file(m, dir, "envelope.csv", [&](std::ostream& os) { cavcool::io::write_envelope(os, sn, report.envelope); });
  write_file(m, dir, "extrema.csv", [&](std::ostream& os) { cavcool::io::write_extrema(os, report.extrema); });
  write_file(m, dir, "trajectory.csv", [&](std::ostream& os) { cavcool::io::write_trajectory(os, report.trajectory); });
  m.write(dir);
  auto show = [](const std::optional<double>& v) { return v ? cavcool::format_number(*v) : std::string("n/a"); };
  std::optional<double> vin, vout, ra;
  if (report.entry) vin = report.entry->velocity;
  if (report.exit) vout = report.exit->velocity;
  if (report.area) ra = report.area->ratio;
  std::printf("analyze: vx_in %s, vx_out %s, cooling %s, r_A %s, trapped %s\n", show(vin).c_str(), show(vout).c_str(),
              show(report.cooling_factor).c_str(), show(ra).c_str(), report.trapped ? "yes" : "no");
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return ok;
}

int cmd_mie_scan(const Common& c) {
  std::vector<std::string> inputs;
  const auto cfg = resolve(c, inputs);
  const auto dir = prepare_out(c.out);
  Manifest m("mie-scan", cfg, inputs);
  const auto cav = cavcool::derive_cavity(cfg.cavity());
  const double n = cfg.mie_scan.refractive_index.value_or(cfg.particle.refractive_index());
  const auto rows = cavcool::io::mie_scan(cfg.mie_scan, n, cav.k);
  write_file(m, dir, "mie_scan.csv", [&](std::ostream& os) { cavcool::io::write_mie_scan(os, rows); });
  auto summary = cavcool::io::mie_scan_summary(rows);
  summary["refractive_index"] = n;
  summary["wavelength_nm"] = cfg.cavity_base.wavelength / 1e-9;
  const auto sp = dir / "mie_summary.json";
  cavcool::io::write_json(sp, summary);
  m.output(sp);
  m.write(dir);
  std::printf("mie-scan: %zu radii, zero crossing %s nm\n", rows.size(), summary["zero_crossing_nm"].dump().c_str());
  return ok;
}

int cmd_sweep(const Common& c, std::optional<std::size_t> samples, std::optional<unsigned> threads) {
  std::vector<std::string> inputs;
  auto cfg = resolve(c, inputs);
  if (samples) cfg.sweep.samples = *samples;
  if (threads) cfg.sweep.threads = *threads;
  const auto dir = prepare_out(c.out);
  Manifest m("sweep", cfg, inputs);
  const auto spec = cfg.sweep_spec();
  const auto points = cavcool::ensemble::run_sweep(spec);
  write_file(m, dir, "sweep.csv", [&](std::ostream& os) { cavcool::ensemble::write_csv(os, points); });
  const auto summary = cavcool::ensemble::summarize(points);
  const auto sp = dir / "sweep_summary.json";
  cavcool::io::write_json(sp, cavcool::ensemble::to_json(summary));
  m.output(sp);
  m.write(dir);
  std::printf("sweep: %zu runs, %zu failed, %zu trapped, %zu untrapped\n", summary.total, summary.failed,
              summary.trapped.r_a.count, summary.untrapped.r_a.count);
  if (summary.failed > 0) {
    std::fprintf(stderr, "sweep: %zu runs failed; see the error column of sweep.csv\n", summary.failed);
  }
  if (summary.failed == summary.total) {
    throw cavcool::NumericError("every sweep run failed: " + points.front().error);
  }
  return ok;
}

int fail(int code, const std::exception& e, const char* kind, const std::string& out) {
  json err{{"error", kind}, {"message", e.what()}, {"exit_code", code}};
  std::fprintf(stderr, "error (%s): %s\n", kind, e.what());
  std::error_code ec;
  if (!out.empty() && (fs::create_directories(out, ec), fs::is_directory(out, ec))) {
    try {
      cavcool::io::write_json(fs::path(out) / "error.json", err);
    } catch (const std::exception&) {
    }
  }
  std::fprintf(stdout, "%s\n", err.dump().c_str());
  return code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cavity cooling of a levitated nanoparticle: simulation and trace analysis"};
  app.set_version_flag("--version", tool_version);
  app.require_subcommand(1);

  Common common;
  std::string trace_path;
  std::optional<std::size_t> samples;
  std::optional<unsigned> threads;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--preset", common.preset, "built-in configuration (fig3, figS4, figS5, empty-cavity, blue-detuned)");
    sub->add_option("--out", common.out, "output directory")->capture_default_str();
    sub->add_option("--seed", common.seed, "master seed");
    sub->add_option("--sample-rate", common.sample_rate_mhz, "detector sample rate in MHz");
    sub->add_option("--noise", common.noise, "detector noise relative to the empty-cavity photon number");
  };

  auto* sim = app.add_subcommand("simulate", "integrate one transit and write trajectory and detector traces");
  add_common(sim);
  auto* ana = app.add_subcommand("analyze", "reconstruct motion from a detector trace");
  ana->add_option("trace", trace_path, "detector CSV (t_s,I_c,phase_rad,I_s[,S_N])")->required();
  add_common(ana);
  auto* mie = app.add_subcommand("mie-scan", "finite-size force factor versus radius");
  add_common(mie);
  auto* swp = app.add_subcommand("sweep", "seeded Monte Carlo area-ratio study");
  add_common(swp);
  swp->add_option("--samples", samples, "number of runs");
  swp->add_option("--threads", threads, "worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : config_failure;
  }

  try {
    if (*sim) return cmd_simulate(common);
    if (*ana) return cmd_analyze(common, trace_path);
    if (*mie) return cmd_mie_scan(common);
    if (*swp) return cmd_sweep(common, samples, threads);
  } catch (const cavcool::ConfigError& e) {
    return fail(config_failure, e, e.kind(), common.out);
  } catch (const cavcool::IoError& e) {
    return fail(io_failure, e, e.kind(), common.out);
  } catch (const cavcool::Error& e) {
    return fail(numeric_failure, e, e.kind(), common.out);
  } catch (const std::exception& e) {
    return fail(numeric_failure, e, "internal", common.out);
  }
  return ok;
}
