#pragma once

// Parameter sweeps over dead time, photon number, intensity ratio, and
// polarization drive voltage, evaluated analytically (with or without
// after-pulse corrections) or by Monte Carlo, and emitted as CSV or JSON.

#include <cstdio>
#include <optional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "homsim/afterpulse.hpp"
#include "homsim/config.hpp"
#include "homsim/model.hpp"
#include "homsim/montecarlo.hpp"

namespace homsim {

struct SweepRow {
  double axis_value = 0.0;
  double p_coin = 0.0;
  double p_c = 0.0;
  double p_d = 0.0;
  double v_hom = 0.0;
  std::optional<double> se_v;    // Monte Carlo mode only
  std::optional<double> eta_mu;  // photon_number axis only
};

struct RunResult {
  VisibilityReport report;
  std::optional<double> se_v;
  std::optional<std::uint64_t> n_open_pairs;
};

namespace detail {

inline SimConfig sim_at(const ExperimentConfig& cfg, double x) {
  SimConfig s = cfg.sim;
  switch (cfg.sweep->axis) {
    case SweepAxis::DeadTime: {
      // axis in microseconds, both detectors swept together
      s.gating_c = GatingConfig(x * 1e-6, s.gating_c.gate_period,
                                s.gating_c.gate_width);
      s.gating_d = GatingConfig(x * 1e-6, s.gating_d.gate_period,
                                s.gating_d.gate_width);
      break;
    }
    case SweepAxis::PhotonNumber:
      s.source = SourcePair(x, x, s.source.cos_phi);
      break;
    case SweepAxis::IntensityRatio:
      s.source = SourcePair(s.source.mu_a, x * s.source.mu_a, s.source.cos_phi);
      break;
    case SweepAxis::PolarizationVoltage:
      s.source = SourcePair(s.source.mu_a, s.source.mu_b,
                            cos_phi_from_voltage(x, cfg.vpi_volts()));
      break;
  }
  return s;
}

} // namespace detail

/// Single-point evaluation in the configured mode.
inline RunResult run_visibility(const ExperimentConfig& cfg) {
  RunResult res;
  switch (cfg.mode) {
    case RunMode::Analytic:
      res.report = visibility(cfg.sim.source, cfg.sim.bs, cfg.sim.det);
      break;
    case RunMode::AnalyticAfterpulse:
      res.report = visibility_with_afterpulse(cfg.sim.source, cfg.sim.bs,
                                              cfg.sim.det, cfg.sim.ap_c,
                                              cfg.sim.ap_d, cfg.sim.gating_c,
                                              cfg.sim.gating_d);
      break;
    case RunMode::MonteCarlo: {
      const SimEstimate est = simulate_replicated(cfg.sim, cfg.replicas);
      res.report.p_coin = est.p_coin_hat;
      res.report.p_c = est.p_c_hat;
      res.report.p_d = est.p_d_hat;
      res.report.v_hom = est.v_hom_hat;
      res.se_v = est.se_v;
      res.n_open_pairs = est.n_open_pairs();
      break;
    }
  }
  return res;
}

/// One row per sweep step, in axis order. Monte Carlo points run on seed
/// streams derived from (config seed, step index), so rows are independent
/// and the whole table is reproducible.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("config has no sweep block");
  cfg.sweep->validate();
  std::vector<SweepRow> rows;
  rows.reserve(cfg.sweep->steps);
  for (unsigned i = 0; i < cfg.sweep->steps; ++i) {
    const double x = cfg.sweep->value_at(i);
    ExperimentConfig point = cfg;
    point.sim = detail::sim_at(cfg, x);
    if (cfg.mode == RunMode::MonteCarlo)
      point.sim.seed = derive_seed(cfg.sim.seed, i);
    const RunResult res = run_visibility(point);
    SweepRow row;
    row.axis_value = x;
    row.p_coin = res.report.p_coin;
    row.p_c = res.report.p_c;
    row.p_d = res.report.p_d;
    row.v_hom = res.report.v_hom;
    row.se_v = res.se_v;
    if (cfg.sweep->axis == SweepAxis::PhotonNumber)
      row.eta_mu = cfg.sim.det.eta_c * x;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output. Numeric fields print with 10 significant digits; the base header
// is fixed and optional columns (se_v in Monte Carlo mode, eta_mu on the
// photon_number axis) append after it.
// ---------------------------------------------------------------------------

inline void write_sweep_csv(std::ostream& os,
                            const std::vector<SweepRow>& rows) {
  const bool with_se = !rows.empty() && rows.front().se_v.has_value();
  const bool with_eta_mu = !rows.empty() && rows.front().eta_mu.has_value();
  os << "axis_value,p_coin,p_c,p_d,v_hom";
  if (with_se) os << ",se_v";
  if (with_eta_mu) os << ",eta_mu";
  os << '\n';
  char buf[256];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g",
                  row.axis_value, row.p_coin, row.p_c, row.p_d, row.v_hom);
    os << buf;
    if (with_se) {
      std::snprintf(buf, sizeof(buf), ",%.10g", row.se_v.value_or(0.0));
      os << buf;
    }
    if (with_eta_mu) {
      std::snprintf(buf, sizeof(buf), ",%.10g", row.eta_mu.value_or(0.0));
      os << buf;
    }
    os << '\n';
  }
}

inline nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r = {{"axis_value", row.axis_value},
                        {"p_coin", row.p_coin},
                        {"p_c", row.p_c},
                        {"p_d", row.p_d},
                        {"v_hom", row.v_hom}};
    if (row.se_v) r["se_v"] = *row.se_v;
    if (row.eta_mu) r["eta_mu"] = *row.eta_mu;
    arr.push_back(r);
  }
  return arr;
}

} // namespace homsim
