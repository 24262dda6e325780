#pragma once

// Experiment configuration files. JSON with explicit units in field names
// (dead_time_us, tau_us, vpi_volts, ...) so no unit inference ever happens;
// unknown keys are rejected to catch typos before they silently change runs.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "homsim/errors.hpp"
#include "homsim/montecarlo.hpp"

namespace homsim {

enum class RunMode { Analytic, AnalyticAfterpulse, MonteCarlo };

enum class SweepAxis { DeadTime, PhotonNumber, IntensityRatio,
                       PolarizationVoltage };

/// Axis values are microseconds for dead_time, mean photon number for
/// photon_number, mu_b/mu_a for intensity_ratio, volts for
/// polarization_voltage.
struct SweepSpec {
  SweepAxis axis = SweepAxis::PhotonNumber;
  double start = 0.0;
  double stop = 1.0;
  unsigned steps = 2;

  void validate() const {
    if (steps < 2) throw ConfigError("sweep.steps must be >= 2");
    if (!(start < stop)) throw ConfigError("sweep.start must be < sweep.stop");
    if (!std::isfinite(start) || !std::isfinite(stop))
      throw ConfigError("sweep bounds must be finite");
    if (axis != SweepAxis::PolarizationVoltage && start < 0.0)
      throw ConfigError("sweep.start must be >= 0 for this axis");
  }

  double value_at(unsigned i) const {
    return start + (stop - start) * static_cast<double>(i) /
                       static_cast<double>(steps - 1);
  }
};

struct PolarizationDrive {
  double vg_volts = 0.0;
  double vpi_volts = 5.25;
};

struct ExperimentConfig {
  SimConfig sim = default_sim();
  RunMode mode = RunMode::Analytic;
  std::optional<SweepSpec> sweep;
  std::optional<PolarizationDrive> polarization;
  double coincidence_window = 5e-9;
  double pair_window = 7e-9;
  unsigned replicas = 1;

  /// Baseline mirrors the free-gated polarization run: 10% efficiency,
  /// 7-us dead time, 1-MHz gating, 7-ns gates, recorded dark counts.
  static SimConfig default_sim() {
    SimConfig s;
    s.source = SourcePair(0.45, 0.45, 1.0);
    s.bs = BeamSplitter();
    s.det = DetectorPair(0.1, 0.1, 5.5e-5, 2.0e-5);
    s.gating_c = GatingConfig(7e-6, 1e-6, 7e-9);
    s.gating_d = GatingConfig(7e-6, 1e-6, 7e-9);
    s.ap_c = AfterpulseParams(0.0, 1e-6);
    s.ap_d = AfterpulseParams(0.0, 1e-6);
    s.n_gates = 1'000'000;
    s.seed = 1;
    s.ap_mode = ApMode::MostRecent;
    return s;
  }

  double vpi_volts() const {
    return polarization ? polarization->vpi_volts : 5.25;
  }
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) { ok = true; break; }
    if (!ok)
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

inline double get_num(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ConfigError(std::string("'") + key + "' must be a number");
  return obj[key].get<double>();
}

inline std::uint64_t get_u64(const json& obj, const char* key,
                             std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_unsigned())
    throw ConfigError(std::string("'") + key +
                      "' must be an unsigned integer");
  return obj[key].get<std::uint64_t>();
}

inline GatingConfig parse_gating(const json& obj, const std::string& where,
                                 const GatingConfig& base) {
  check_keys(obj, where, {"dead_time_us", "gate_period_us", "gate_width_ns"});
  return GatingConfig(get_num(obj, "dead_time_us", base.dead_time * 1e6) * 1e-6,
                      get_num(obj, "gate_period_us", base.gate_period * 1e6) * 1e-6,
                      get_num(obj, "gate_width_ns", base.gate_width * 1e9) * 1e-9);
}

inline AfterpulseParams parse_afterpulse(const json& obj,
                                         const std::string& where) {
  check_keys(obj, where, {"p0", "tau_us"});
  return AfterpulseParams(get_num(obj, "p0", 0.0),
                          get_num(obj, "tau_us", 1.0) * 1e-6);
}

} // namespace detail

inline ExperimentConfig load_config(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::get_num;
  using detail::get_u64;

  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(j, "config",
             {"source", "beam_splitter", "detectors", "gating", "gating_c",
              "gating_d", "afterpulse_c", "afterpulse_d", "polarization",
              "simulation", "analysis", "mode", "sweep"});

  ExperimentConfig cfg;

  bool explicit_cos_phi = false;
  if (j.contains("source")) {
    const auto& s = j["source"];
    check_keys(s, "source", {"mu_a", "mu_b", "cos_phi"});
    explicit_cos_phi = s.contains("cos_phi");
    cfg.sim.source = SourcePair(get_num(s, "mu_a", cfg.sim.source.mu_a),
                                get_num(s, "mu_b", cfg.sim.source.mu_b),
                                get_num(s, "cos_phi", cfg.sim.source.cos_phi));
  }
  if (j.contains("beam_splitter")) {
    const auto& b = j["beam_splitter"];
    check_keys(b, "beam_splitter", {"transmittance"});
    cfg.sim.bs = BeamSplitter::from_transmittance(
        get_num(b, "transmittance", cfg.sim.bs.transmittance()));
  }
  if (j.contains("detectors")) {
    const auto& d = j["detectors"];
    check_keys(d, "detectors", {"eta_c", "eta_d", "dark_c", "dark_d"});
    cfg.sim.det = DetectorPair(get_num(d, "eta_c", cfg.sim.det.eta_c),
                               get_num(d, "eta_d", cfg.sim.det.eta_d),
                               get_num(d, "dark_c", cfg.sim.det.dark_c),
                               get_num(d, "dark_d", cfg.sim.det.dark_d));
  }
  if (j.contains("gating")) {
    const auto g = detail::parse_gating(j["gating"], "gating", cfg.sim.gating_c);
    cfg.sim.gating_c = g;
    cfg.sim.gating_d = g;
  }
  if (j.contains("gating_c"))
    cfg.sim.gating_c =
        detail::parse_gating(j["gating_c"], "gating_c", cfg.sim.gating_c);
  if (j.contains("gating_d"))
    cfg.sim.gating_d =
        detail::parse_gating(j["gating_d"], "gating_d", cfg.sim.gating_d);
  if (j.contains("afterpulse_c"))
    cfg.sim.ap_c = detail::parse_afterpulse(j["afterpulse_c"], "afterpulse_c");
  if (j.contains("afterpulse_d"))
    cfg.sim.ap_d = detail::parse_afterpulse(j["afterpulse_d"], "afterpulse_d");

  if (j.contains("polarization")) {
    const auto& p = j["polarization"];
    check_keys(p, "polarization", {"vg_volts", "vpi_volts"});
    if (explicit_cos_phi)
      throw ConfigError(
          "give either source.cos_phi or a polarization drive, not both");
    PolarizationDrive drive;
    drive.vg_volts = get_num(p, "vg_volts", 0.0);
    drive.vpi_volts = get_num(p, "vpi_volts", 5.25);
    cfg.polarization = drive;
    cfg.sim.source =
        SourcePair(cfg.sim.source.mu_a, cfg.sim.source.mu_b,
                   cos_phi_from_voltage(drive.vg_volts, drive.vpi_volts));
  }

  if (j.contains("simulation")) {
    const auto& s = j["simulation"];
    check_keys(s, "simulation", {"n_gates", "seed", "ap_mode", "replicas"});
    cfg.sim.n_gates = get_u64(s, "n_gates", cfg.sim.n_gates);
    cfg.sim.seed = get_u64(s, "seed", cfg.sim.seed);
    cfg.replicas = static_cast<unsigned>(get_u64(s, "replicas", cfg.replicas));
    if (cfg.replicas == 0) throw ConfigError("simulation.replicas must be >= 1");
    if (s.contains("ap_mode")) {
      const auto mode = s["ap_mode"].get<std::string>();
      if (mode == "most-recent") cfg.sim.ap_mode = ApMode::MostRecent;
      else if (mode == "superposed") cfg.sim.ap_mode = ApMode::Superposed;
      else throw ConfigError("ap_mode must be 'most-recent' or 'superposed'");
    }
  }

  if (j.contains("analysis")) {
    const auto& a = j["analysis"];
    check_keys(a, "analysis", {"coincidence_window_ns", "pair_window_ns"});
    cfg.coincidence_window =
        get_num(a, "coincidence_window_ns", cfg.coincidence_window * 1e9) * 1e-9;
    cfg.pair_window = get_num(a, "pair_window_ns", cfg.pair_window * 1e9) * 1e-9;
    if (!(cfg.coincidence_window > 0.0) || !(cfg.pair_window > 0.0))
      throw ConfigError("analysis windows must be positive");
  }

  if (j.contains("mode")) {
    const auto mode = j["mode"].get<std::string>();
    if (mode == "analytic") cfg.mode = RunMode::Analytic;
    else if (mode == "analytic+afterpulse") cfg.mode = RunMode::AnalyticAfterpulse;
    else if (mode == "montecarlo") cfg.mode = RunMode::MonteCarlo;
    else
      throw ConfigError(
          "mode must be 'analytic', 'analytic+afterpulse' or 'montecarlo'");
  }

  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    check_keys(s, "sweep", {"axis", "start", "stop", "steps"});
    SweepSpec spec;
    if (!s.contains("axis")) throw ConfigError("sweep.axis is required");
    const auto axis = s["axis"].get<std::string>();
    if (axis == "dead_time") spec.axis = SweepAxis::DeadTime;
    else if (axis == "photon_number") spec.axis = SweepAxis::PhotonNumber;
    else if (axis == "intensity_ratio") spec.axis = SweepAxis::IntensityRatio;
    else if (axis == "polarization_voltage")
      spec.axis = SweepAxis::PolarizationVoltage;
    else
      throw ConfigError("unknown sweep axis '" + axis + "'");
    spec.start = get_num(s, "start", 0.0);
    spec.stop = get_num(s, "stop", 0.0);
    spec.steps = static_cast<unsigned>(get_u64(s, "steps", 0));
    spec.validate();
    cfg.sweep = spec;
  }

  cfg.sim.validate();
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
  return load_config(j);
}

/// Serializes a config so that loading the result reproduces the same runs.
inline nlohmann::json save_config(const ExperimentConfig& cfg) {
  nlohmann::json j;
  if (!cfg.polarization)
    j["source"] = {{"mu_a", cfg.sim.source.mu_a},
                   {"mu_b", cfg.sim.source.mu_b},
                   {"cos_phi", cfg.sim.source.cos_phi}};
  else {
    j["source"] = {{"mu_a", cfg.sim.source.mu_a},
                   {"mu_b", cfg.sim.source.mu_b}};
    j["polarization"] = {{"vg_volts", cfg.polarization->vg_volts},
                         {"vpi_volts", cfg.polarization->vpi_volts}};
  }
  j["beam_splitter"] = {{"transmittance", cfg.sim.bs.transmittance()}};
  j["detectors"] = {{"eta_c", cfg.sim.det.eta_c},
                    {"eta_d", cfg.sim.det.eta_d},
                    {"dark_c", cfg.sim.det.dark_c},
                    {"dark_d", cfg.sim.det.dark_d}};
  auto gating_json = [](const GatingConfig& g) {
    return nlohmann::json{{"dead_time_us", g.dead_time * 1e6},
                          {"gate_period_us", g.gate_period * 1e6},
                          {"gate_width_ns", g.gate_width * 1e9}};
  };
  j["gating_c"] = gating_json(cfg.sim.gating_c);
  j["gating_d"] = gating_json(cfg.sim.gating_d);
  j["afterpulse_c"] = {{"p0", cfg.sim.ap_c.p0}, {"tau_us", cfg.sim.ap_c.tau * 1e6}};
  j["afterpulse_d"] = {{"p0", cfg.sim.ap_d.p0}, {"tau_us", cfg.sim.ap_d.tau * 1e6}};
  j["simulation"] = {
      {"n_gates", cfg.sim.n_gates},
      {"seed", cfg.sim.seed},
      {"ap_mode",
       cfg.sim.ap_mode == ApMode::MostRecent ? "most-recent" : "superposed"},
      {"replicas", cfg.replicas}};
  j["analysis"] = {{"coincidence_window_ns", cfg.coincidence_window * 1e9},
                   {"pair_window_ns", cfg.pair_window * 1e9}};
  switch (cfg.mode) {
    case RunMode::Analytic: j["mode"] = "analytic"; break;
    case RunMode::AnalyticAfterpulse: j["mode"] = "analytic+afterpulse"; break;
    case RunMode::MonteCarlo: j["mode"] = "montecarlo"; break;
  }
  if (cfg.sweep) {
    const char* axis = "photon_number";
    switch (cfg.sweep->axis) {
      case SweepAxis::DeadTime: axis = "dead_time"; break;
      case SweepAxis::PhotonNumber: axis = "photon_number"; break;
      case SweepAxis::IntensityRatio: axis = "intensity_ratio"; break;
      case SweepAxis::PolarizationVoltage: axis = "polarization_voltage"; break;
    }
    j["sweep"] = {{"axis", axis},
                  {"start", cfg.sweep->start},
                  {"stop", cfg.sweep->stop},
                  {"steps", cfg.sweep->steps}};
  }
  return j;
}

} // namespace homsim
