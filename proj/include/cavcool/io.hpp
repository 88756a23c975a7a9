#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavcool/analysis.hpp"
#include "cavcool/ensemble.hpp"
#include "cavcool/format.hpp"
#include "cavcool/mie.hpp"
#include "cavcool/scenario.hpp"

namespace cavcool::io {

using json = nlohmann::ordered_json;

struct MieScanConfig {
  double radius_min_nm = 10.0;
  double radius_max_nm = 400.0;
  std::size_t points = 391;
  std::optional<double> refractive_index;  // particle index when absent
};

// Everything a command needs; JSON keys carry their units.
struct RunConfig {
  CavityConfig cavity_base;  // detuning applied from detuning_over_kappa
  double detuning_over_kappa = -1.0;
  ParticleConfig particle;
  TransitConfig transit;
  IntegrateOptions integrator;
  RelativeNoise noise;  // seeded from `seed`
  analysis::AnalysisOptions analysis;
  bool noise_free_analysis = false;
  MieScanConfig mie_scan;
  ensemble::SweepSpec sweep;
  std::uint64_t seed = 1;

  CavityConfig cavity() const { return with_detuning_over_kappa(cavity_base, detuning_over_kappa); }
  analysis::AnalysisOptions analysis_options() const {
    auto o = analysis;
    if (noise_free_analysis) o.noise_sigma = 0.0;
    o.radius.mass_density = particle.mass_density;
    o.radius.relative_permittivity = particle.relative_permittivity;
    return o;
  }
  RelativeNoise detector_noise() const { return {noise.sigma, seed}; }
  ensemble::SweepSpec sweep_spec() const {
    auto s = sweep;
    s.cavity = cavity();
    s.particle = particle;
    s.integrate = integrator;
    s.seed = seed;
    return s;
  }
};

namespace detail {

// Reads the keys of one JSON object, rejecting unknown ones.
class Section {
public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.emplace_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("'" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.emplace_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    T v{};
    try {
      v = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("'" + name_ + "." + key + "' has the wrong type");
    }
    out = v;
  }

  // Scaled number: stored value = json value * scale.
  void get_scaled(const char* key, double& out, double scale) {
    std::optional<double> v;
    get(key, v);
    if (v) out = *v * scale;
  }
  void get_scaled(const char* key, std::optional<double>& out, double scale) {
    seen_.emplace_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    if (!it->is_number()) throw ConfigError("'" + name_ + "." + key + "' must be a number");
    out = it->get<double>() * scale;
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) {
    seen_.emplace_back(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        throw ConfigError("unknown key '" + name_ + "." + it.key() + "'");
      }
    }
  }

private:
  const json& j_;
  std::string name_;
  std::vector<std::string> seen_;
};

inline ensemble::Range parse_range(const json& j, const std::string& name, double scale = 1.0) {
  ensemble::Range r;
  if (j.is_number()) {
    r.lo = r.hi = j.get<double>() * scale;
    return r;
  }
  Section s(j, name);
  std::string sc = "linear";
  double lo = 0.0, hi = 0.0;
  if (!s.has("min") || !s.has("max")) throw ConfigError("'" + name + "' needs min and max");
  s.get("min", lo);
  s.get("max", hi);
  s.get("scale", sc);
  s.finish();
  if (sc == "linear") {
    r.scale = ensemble::Scale::linear;
  } else if (sc == "log") {
    r.scale = ensemble::Scale::log;
  } else {
    throw ConfigError("'" + name + ".scale' must be \"linear\" or \"log\"");
  }
  r.lo = lo * scale;
  r.hi = hi * scale;
  return r;
}

inline json range_json(const ensemble::Range& r, double scale = 1.0) {
  return {{"min", r.lo / scale}, {"max", r.hi / scale}, {"scale", r.scale == ensemble::Scale::log ? "log" : "linear"}};
}

} // namespace detail

inline constexpr double polarizability_volume_unit = 4.0 * constants::pi * constants::epsilon0 * constants::angstrom3;

/// Parses a configuration document on top of `base`.
inline RunConfig parse_config(const json& doc, RunConfig cfg = {}) {
  using detail::Section;
  Section top(doc, "config");
  top.get("seed", cfg.seed);
  if (doc.contains("cavity")) {
    Section s(top.at("cavity"), "cavity");
    auto& c = cfg.cavity_base;
    s.get_scaled("wavelength_nm", c.wavelength, 1e-9);
    s.get("finesse", c.finesse);
    s.get_scaled("waist_um", c.waist, 1e-6);
    s.get_scaled("mirror_radius_mm", c.curved_mirror_radius, 1e-3);
    s.get_scaled("length_mm", c.cavity_length, 1e-3);
    std::string root = c.length_root == LengthRoot::shorter ? "shorter" : "longer";
    s.get("length_root", root);
    if (root == "shorter") {
      c.length_root = LengthRoot::shorter;
    } else if (root == "longer") {
      c.length_root = LengthRoot::longer;
    } else {
      throw ConfigError("'cavity.length_root' must be \"shorter\" or \"longer\"");
    }
    s.get_scaled("power_mW", c.input_power, 1e-3);
    s.get("detuning_over_kappa", cfg.detuning_over_kappa);
    s.finish();
  }
  if (doc.contains("particle")) {
    Section s(top.at("particle"), "particle");
    auto& p = cfg.particle;
    s.get_scaled("radius_nm", p.radius, 1e-9);
    s.get("density_kg_m3", p.mass_density);
    std::optional<double> n, eps;
    s.get("refractive_index", n);
    s.get("relative_permittivity", eps);
    if (n && eps) throw ConfigError("give either particle.refractive_index or particle.relative_permittivity");
    if (n) p.relative_permittivity = ParticleConfig::permittivity_from_index(*n);
    if (eps) p.relative_permittivity = *eps;
    s.get_scaled("mass_amu", p.mass, constants::amu);
    s.get_scaled("polarizability_A3", p.polarizability, polarizability_volume_unit);
    s.get("silicon", p.silicon);
    s.finish();
  }
  if (doc.contains("transit")) {
    Section s(top.at("transit"), "transit");
    auto& t = cfg.transit;
    s.get("vx_m_s", t.vx);
    s.get("vz_m_s", t.vz);
    s.get("entry_phase_rad", t.entry_phase);
    s.get("y_over_w", t.y_over_w);
    s.get("z_start_over_w", t.z_start_over_w);
    s.get("z_end_over_w", t.z_end_over_w);
    s.get("coupling_over_kappa", t.coupling_over_kappa);
    s.get("shift_coupling_over_kappa", t.shift_coupling_over_kappa);
    s.get("prescribed_vx_out_m_s", t.prescribed_vx_out);
    s.get("prescribed_width_over_tau", t.prescribed_width_over_tau);
    s.get("particle", t.particle);
    s.finish();
  }
  if (doc.contains("integrator")) {
    Section s(top.at("integrator"), "integrator");
    auto& o = cfg.integrator;
    s.get("rtol", o.tolerances.rtol);
    s.get("atol", o.tolerances.atol);
    s.get_scaled("sample_rate_MHz", o.sample_rate, 1e6);
    s.get("gravity", o.gravity);
    s.get("freeze_field", o.freeze_field);
    s.get_scaled("servo_corner_kHz", o.servo_corner, 1e3);
    s.get("max_steps", o.max_steps);
    s.finish();
  }
  if (doc.contains("noise")) {
    Section s(top.at("noise"), "noise");
    s.get("sigma", cfg.noise.sigma);
    s.finish();
  }
  if (doc.contains("analysis")) {
    Section s(top.at("analysis"), "analysis");
    auto& a = cfg.analysis;
    std::string mode = cfg.noise_free_analysis ? "noise_free" : "lab";
    s.get("mode", mode);
    if (mode == "noise_free") {
      a = analysis::AnalysisOptions::noise_free();
      cfg.noise_free_analysis = true;
    } else if (mode == "lab") {
      cfg.noise_free_analysis = false;
    } else {
      throw ConfigError("'analysis.mode' must be \"lab\" or \"noise_free\"");
    }
    s.get("node_threshold", a.classify.node_threshold);
    s.get("antinode_threshold", a.classify.antinode_threshold);
    s.get("window_floor", a.classify.window_floor);
    s.get("noise_sigma", a.noise_sigma);
    std::string reading = a.amplitude_reading == analysis::AmplitudeReading::energy ? "energy" : "position";
    s.get("amplitude_reading", reading);
    if (reading == "energy") {
      a.amplitude_reading = analysis::AmplitudeReading::energy;
    } else if (reading == "position") {
      a.amplitude_reading = analysis::AmplitudeReading::position;
    } else {
      throw ConfigError("'analysis.amplitude_reading' must be \"energy\" or \"position\"");
    }
    s.get("u_max_over_kappa", a.u_max_over_kappa);
    s.finish();
  }
  if (doc.contains("mie_scan")) {
    Section s(top.at("mie_scan"), "mie_scan");
    auto& m = cfg.mie_scan;
    s.get("radius_min_nm", m.radius_min_nm);
    s.get("radius_max_nm", m.radius_max_nm);
    s.get("points", m.points);
    s.get("refractive_index", m.refractive_index);
    s.finish();
  }
  if (doc.contains("sweep")) {
    Section s(top.at("sweep"), "sweep");
    auto& w = cfg.sweep;
    s.get("samples", w.samples);
    if (s.has("coupling_over_kappa")) w.coupling_over_kappa = detail::parse_range(s.at("coupling_over_kappa"), "sweep.coupling_over_kappa");
    if (s.has("vx_m_s")) w.vx = detail::parse_range(s.at("vx_m_s"), "sweep.vx_m_s");
    if (s.has("vz_m_s")) w.vz = detail::parse_range(s.at("vz_m_s"), "sweep.vz_m_s");
    if (s.has("entry_phase_rad")) w.entry_phase = detail::parse_range(s.at("entry_phase_rad"), "sweep.entry_phase_rad");
    if (s.has("y_over_w")) w.y_over_w = detail::parse_range(s.at("y_over_w"), "sweep.y_over_w");
    s.get("start_over_w", w.start_over_w);
    s.get("final_over_w", w.final_over_w);
    s.get("window_floor", w.analysis.classify.window_floor);
    s.get("node_threshold", w.analysis.classify.node_threshold);
    s.get("threads", w.threads);
    s.finish();
  }
  top.finish();
  return cfg;
}

/// Resolved configuration with every key, suitable for re-running.
inline json to_json(const RunConfig& cfg) {
  const auto& c = cfg.cavity_base;
  const auto& p = cfg.particle;
  const auto& t = cfg.transit;
  const auto& o = cfg.integrator;
  const auto& a = cfg.analysis;
  const auto& w = cfg.sweep;
  auto opt = [](const std::optional<double>& v, double scale = 1.0) {
    return v ? json(*v / scale) : json(nullptr);
  };
  json j;
  j["seed"] = cfg.seed;
  j["cavity"] = {{"wavelength_nm", c.wavelength / 1e-9},
                 {"finesse", c.finesse},
                 {"waist_um", c.waist / 1e-6},
                 {"mirror_radius_mm", c.curved_mirror_radius / 1e-3},
                 {"length_mm", opt(c.cavity_length, 1e-3)},
                 {"length_root", c.length_root == LengthRoot::shorter ? "shorter" : "longer"},
                 {"power_mW", c.input_power / 1e-3},
                 {"detuning_over_kappa", cfg.detuning_over_kappa}};
  j["particle"] = {{"radius_nm", p.radius / 1e-9},
                   {"density_kg_m3", p.mass_density},
                   {"relative_permittivity", p.relative_permittivity},
                   {"mass_amu", opt(p.mass, constants::amu)},
                   {"polarizability_A3", opt(p.polarizability, polarizability_volume_unit)},
                   {"silicon", p.silicon}};
  j["transit"] = {{"vx_m_s", t.vx},
                  {"vz_m_s", t.vz},
                  {"entry_phase_rad", t.entry_phase},
                  {"y_over_w", t.y_over_w},
                  {"z_start_over_w", t.z_start_over_w},
                  {"z_end_over_w", t.z_end_over_w},
                  {"coupling_over_kappa", opt(t.coupling_over_kappa)},
                  {"shift_coupling_over_kappa", opt(t.shift_coupling_over_kappa)},
                  {"prescribed_vx_out_m_s", opt(t.prescribed_vx_out)},
                  {"prescribed_width_over_tau", t.prescribed_width_over_tau},
                  {"particle", t.particle}};
  j["integrator"] = {{"rtol", o.tolerances.rtol},
                     {"atol", o.tolerances.atol},
                     {"sample_rate_MHz", o.sample_rate / 1e6},
                     {"gravity", o.gravity},
                     {"freeze_field", o.freeze_field},
                     {"servo_corner_kHz", opt(o.servo_corner, 1e3)},
                     {"max_steps", o.max_steps}};
  j["noise"] = {{"sigma", cfg.noise.sigma}};
  j["analysis"] = {{"mode", cfg.noise_free_analysis ? "noise_free" : "lab"},
                   {"node_threshold", a.classify.node_threshold},
                   {"antinode_threshold", a.classify.antinode_threshold},
                   {"window_floor", a.classify.window_floor},
                   {"noise_sigma", opt(a.noise_sigma)},
                   {"amplitude_reading", a.amplitude_reading == analysis::AmplitudeReading::energy ? "energy" : "position"},
                   {"u_max_over_kappa", a.u_max_over_kappa}};
  j["mie_scan"] = {{"radius_min_nm", cfg.mie_scan.radius_min_nm},
                   {"radius_max_nm", cfg.mie_scan.radius_max_nm},
                   {"points", cfg.mie_scan.points},
                   {"refractive_index", opt(cfg.mie_scan.refractive_index)}};
  j["sweep"] = {{"samples", w.samples},
                {"coupling_over_kappa", detail::range_json(w.coupling_over_kappa)},
                {"vx_m_s", detail::range_json(w.vx)},
                {"vz_m_s", detail::range_json(w.vz)},
                {"entry_phase_rad", detail::range_json(w.entry_phase)},
                {"y_over_w", detail::range_json(w.y_over_w)},
                {"start_over_w", w.start_over_w},
                {"final_over_w", w.final_over_w},
                {"window_floor", w.analysis.classify.window_floor},
                {"node_threshold", w.analysis.classify.node_threshold},
                {"threads", w.threads}};
  return j;
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  return parse_config(read_json(path), std::move(base));
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  close_output(out, path);
}

/// t, position, velocity and field per sample.
inline void write_sim_trace(std::ostream& os, const SimTrace& trace) {
  os << "t_s,x_m,y_m,z_m,vx_m_s,vy_m_s,vz_m_s,re_a,im_a\n";
  for (const auto& s : trace.samples) {
    os << format_number(s.t) << ',' << format_number(s.position.x) << ',' << format_number(s.position.y) << ','
       << format_number(s.position.z) << ',' << format_number(s.velocity.x) << ','
       << format_number(s.velocity.y) << ',' << format_number(s.velocity.z) << ','
       << format_number(s.field.real()) << ',' << format_number(s.field.imag()) << '\n';
  }
}

inline json sim_metadata(const SimTrace& trace) {
  const auto& m = trace.meta;
  return {{"samples", trace.samples.size()},
          {"span_s", {m.span.start, m.span.end}},
          {"sample_rate_Hz", m.options.sample_rate},
          {"force_coupling_rad_s", m.force_coupling},
          {"shift_coupling_rad_s", m.shift_coupling},
          {"mass_kg", m.particle.mass},
          {"polarizability_C_m2_V", m.particle.polarizability},
          {"u0_rad_s", m.particle.u0},
          {"expected_trap_frequency_Hz", m.expected_trap_frequency},
          {"rtol", m.options.tolerances.rtol},
          {"atol", m.options.tolerances.atol},
          {"gravity", m.options.gravity},
          {"accepted_steps", m.steps.accepted},
          {"rejected_steps", m.steps.rejected},
          {"seed", m.seed}};
}

/// S_N column of a detector trace; zero where it is undefined.
inline std::vector<double> sn_column(const DetectorTraces& d) {
  try {
    return normalized_scattering(d).sn;
  } catch (const AnalysisError&) {
    return std::vector<double>(d.size(), 0.0);
  }
}

inline void write_detector_traces(std::ostream& os, const DetectorTraces& d) {
  const auto sn = sn_column(d);
  os << "t_s,I_c,phase_rad,I_s,S_N\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    os << format_number(d.t[i]) << ',' << format_number(d.intensity[i]) << ',' << format_number(d.phase[i]) << ','
       << format_number(d.scattered[i]) << ',' << format_number(sn[i]) << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

} // namespace detail

/// Reads the detector CSV schema (t_s, I_c, phase_rad, I_s, optional S_N).
/// Rows must be uniformly sampled in increasing time.
inline DetectorTraces read_detector_traces(std::istream& is, const std::string& source = "trace") {
  std::string line;
  if (!std::getline(is, line)) throw SchemaError(source + ": empty file");
  const auto header = detail::split_csv(line);
  const std::vector<std::string> want{"t_s", "I_c", "phase_rad", "I_s"};
  const bool with_sn = header.size() == 5 && header[4] == "S_N";
  if (!(header.size() == 4 || with_sn) || !std::equal(want.begin(), want.end(), header.begin())) {
    throw SchemaError(source + ": header must be 't_s,I_c,phase_rad,I_s[,S_N]', got '" + line + "'");
  }
  DetectorTraces d;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) {
      throw SchemaError(source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " columns, expected " + std::to_string(header.size()));
    }
    double v[4];
    for (int c = 0; c < 4; ++c) {
      char* end = nullptr;
      v[c] = std::strtod(cells[c].c_str(), &end);
      if (cells[c].empty() || *end != '\0' || !std::isfinite(v[c])) {
        throw SchemaError(source + ": row " + std::to_string(row) + " column " + header[c] + " is not a finite number");
      }
    }
    d.t.push_back(v[0]);
    d.intensity.push_back(v[1]);
    d.phase.push_back(v[2]);
    d.scattered.push_back(v[3]);
  }
  if (d.size() < 2) throw SchemaError(source + ": need at least two samples");
  const double dt = (d.t.back() - d.t.front()) / static_cast<double>(d.size() - 1);
  if (!(dt > 0.0)) throw SchemaError(source + ": time column must increase");
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (std::abs(d.t[i] - d.t[i - 1] - dt) > 1e-3 * dt) {
      throw SchemaError(source + ": non-uniform sampling at row " + std::to_string(i + 2));
    }
  }
  d.sample_rate = 1.0 / dt;
  return d;
}

inline DetectorTraces read_detector_traces(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_detector_traces(in, path.string());
}

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const analysis::AnalysisReport& r, const DerivedCavity& cav) {
  json j;
  j["envelope"] = {{"amplitude", r.envelope.amplitude},
                   {"center_s", r.envelope.center},
                   {"half_width_s", r.envelope.half_width},
                   {"rms_residual", r.envelope.rms_residual},
                   {"from_peaks", r.envelope.from_peaks}};
  j["vz_m_s"] = r.vz;
  j["noise_sigma"] = r.noise_sigma;
  j["extrema"] = {{"count", r.extrema.sequence.size()},
                  {"antinodes", r.extrema.maxima().size()},
                  {"nodes", r.extrema.nodes().size()},
                  {"turning_points", r.extrema.turning_points().size()},
                  {"window_s", {r.extrema.window_start, r.extrema.window_end}}};
  j["trapped"] = r.trapped;
  auto fringe = [](const std::optional<analysis::Fringe>& f) {
    if (!f) return json(nullptr);
    return json{{"velocity_m_s", f->velocity},
                {"t_first_s", f->t_first},
                {"t_node_s", f->t_node},
                {"t_last_s", f->t_last},
                {"envelope", f->amplitude}};
  };
  j["vx_in"] = fringe(r.entry);
  j["vx_out"] = fringe(r.exit);
  j["cooling_factor"] = opt_json(r.cooling_factor);
  j["area_ratio"] = r.area ? json{{"r_A", r.area->ratio}, {"A1", r.area->a1}, {"A2", r.area->a2},
                                  {"envelope_amplitude", r.area->envelope_amplitude}}
                           : json(nullptr);
  j["trap"] = r.trap ? json{{"frequency_Hz", r.trap->frequency},
                            {"energy_fraction", r.trap->energy_fraction},
                            {"harmonic_frequency_Hz", r.trap->harmonic_frequency},
                            {"depth", r.trap->depth},
                            {"nominal_frequency_Hz", r.trap->nominal_frequency},
                            {"time_s", r.trap->time}}
                     : json(nullptr);
  j["f_trap_formula_Hz"] = opt_json(r.f_trap_formula);
  j["u_x"] = r.ux ? json{{"coupling_rad_s", r.ux->coupling},
                         {"coupling_over_kappa", r.ux->coupling / cav.kappa},
                         {"phase_peak_to_peak_rad", r.ux->phase_peak_to_peak},
                         {"fringe_frequency_Hz", r.ux->fringe_frequency},
                         {"residual_rms_rad", r.ux->residual_rms}}
                  : json(nullptr);
  j["radius"] = r.radius ? json{{"radius_m", r.radius->radius},
                                {"y_offset_m", r.radius->y_offset},
                                {"y_over_w", r.radius->y_offset / cav.waist()},
                                {"mass_kg", r.radius->mass},
                                {"mass_amu", r.radius->mass / constants::amu},
                                {"force_factor", r.radius->force_factor}}
                         : json(nullptr);
  j["warnings"] = r.warnings;
  return j;
}

inline void write_envelope(std::ostream& os, const SNTrace& s, const analysis::EnvelopeFit& env) {
  os << "t_s,S_N,envelope\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << format_number(s.t[i]) << ',' << format_number(s.sn[i]) << ',' << format_number(env(s.t[i])) << '\n';
  }
}

inline void write_extrema(std::ostream& os, const analysis::ExtremaClassification& cls) {
  os << "t_s,kind,S_N,ratio\n";
  for (const auto& e : cls.sequence) {
    os << format_number(e.t) << ',' << analysis::to_string(e.kind) << ',' << format_number(e.value) << ','
       << format_number(e.ratio) << '\n';
  }
}

inline void write_trajectory(std::ostream& os, const analysis::Trajectory& tr) {
  os << "t_s,x_m,kx_rad,trapped,repaired\n";
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    os << format_number(tr.t[i]) << ',' << format_number(tr.x[i]) << ',' << format_number(tr.kx[i]) << ','
       << (tr.trapped[i] ? 1 : 0) << ',' << (tr.repaired[i] ? 1 : 0) << '\n';
  }
}

struct MieScanRow {
  double radius_nm = 0.0;
  double ratio = 1.0;
  double amplitude = 0.0;
};

inline std::vector<MieScanRow> mie_scan(const MieScanConfig& m, double n_rel, double k) {
  if (!(m.radius_min_nm >= 0.0) || !(m.radius_max_nm >= m.radius_min_nm)) throw ConfigError("mie scan radius range is invalid");
  if (m.points < 1) throw ConfigError("mie scan needs at least one point");
  if (m.points == 1 && m.radius_max_nm != m.radius_min_nm) throw ConfigError("a one-point mie scan needs min == max");
  if (!(n_rel >= 1.0)) throw ConfigError("mie scan refractive index must be at least 1");
  const double lo = m.radius_min_nm, hi = m.radius_max_nm;
  std::vector<MieScanRow> rows(m.points);
  for (std::size_t i = 0; i < m.points; ++i) {
    const double r_nm = m.points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m.points - 1);
    const auto f = mie::standing_wave_force_factor(r_nm * 1e-9, n_rel, k);
    rows[i] = {r_nm, f.ratio, f.amplitude};
  }
  return rows;
}

inline void write_mie_scan(std::ostream& os, const std::vector<MieScanRow>& rows) {
  os << "radius_nm,ux_over_u0,force_amplitude\n";
  for (const auto& r : rows) {
    os << format_number(r.radius_nm) << ',' << format_number(r.ratio) << ',' << format_number(r.amplitude) << '\n';
  }
}

/// Zero crossing of U_x/U_0 (linear interpolation) and the first radius
/// where |ratio - 1| exceeds 5%.
inline json mie_scan_summary(const std::vector<MieScanRow>& rows) {
  std::optional<double> zero, dev5;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!dev5 && std::abs(rows[i].ratio - 1.0) > 0.05) dev5 = rows[i].radius_nm;
    if (!zero && i > 0 && rows[i - 1].ratio > 0.0 && rows[i].ratio <= 0.0) {
      const double a = rows[i - 1].ratio, b = rows[i].ratio;
      zero = rows[i - 1].radius_nm + (rows[i].radius_nm - rows[i - 1].radius_nm) * a / (a - b);
    }
  }
  return {{"points", rows.size()},
          {"zero_crossing_nm", opt_json(zero)},
          {"deviation_5pct_nm", opt_json(dev5)}};
}

} // namespace cavcool::io
