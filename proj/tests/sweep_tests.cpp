#include <catch2/catch_amalgamated.hpp>

#include <regex>
#include <sstream>

#include <json.hpp>

#include "homsim/config.hpp"
#include "homsim/sweep.hpp"

using namespace homsim;
using nlohmann::json;

namespace {

ExperimentConfig config_from_text(const std::string& text) {
  return load_config(json::parse(text));
}

} // namespace

TEST_CASE("defaults mirror the free-gated polarization run") {
  const auto cfg = config_from_text("{}");
  CHECK(cfg.sim.source.mu_a == 0.45);
  CHECK(cfg.sim.source.mu_b == 0.45);
  CHECK(cfg.sim.det.eta_c == 0.1);
  CHECK(cfg.sim.det.dark_c == 5.5e-5);
  CHECK(cfg.sim.det.dark_d == 2.0e-5);
  CHECK(cfg.sim.gating_c.dead_time == 7e-6);
  CHECK(cfg.sim.gating_c.gate_period == 1e-6);
  CHECK(cfg.sim.gating_c.gate_width == 7e-9);
  CHECK(cfg.coincidence_window == 5e-9);
  CHECK(cfg.mode == RunMode::Analytic);
  CHECK(cfg.replicas == 1);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(config_from_text(R"({"sorce": {}})"), ConfigError);
  CHECK_THROWS_AS(config_from_text(R"({"source": {"mu": 1}})"), ConfigError);
  CHECK_THROWS_AS(config_from_text(R"({"gating": {"dead_time": 7}})"),
                  ConfigError);
  CHECK_THROWS_AS(config_from_text(R"({"mode": "fast"})"), ConfigError);
  CHECK_THROWS_AS(
      config_from_text(R"({"sweep": {"axis": "up", "start": 0, "stop": 1, "steps": 5}})"),
      ConfigError);
  CHECK_THROWS_AS(
      config_from_text(
          R"({"sweep": {"axis": "photon_number", "start": 1, "stop": 0, "steps": 5}})"),
      ConfigError);
  CHECK_THROWS_AS(
      config_from_text(
          R"({"sweep": {"axis": "photon_number", "start": 0.1, "stop": 1, "steps": 1}})"),
      ConfigError);
  CHECK_THROWS_AS(config_from_text(R"({"beam_splitter": {"transmittance": 1.2}})"),
                  InvalidBeamSplitter);
  CHECK_THROWS_AS(
      config_from_text(
          R"({"source": {"cos_phi": 1.0}, "polarization": {"vg_volts": 0}})"),
      ConfigError);
  CHECK_THROWS_AS(config_from_text(R"({"simulation": {"replicas": 0}})"),
                  ConfigError);
}

TEST_CASE("gating block applies to both detectors, overrides are local") {
  const auto cfg = config_from_text(R"({
    "gating": {"dead_time_us": 2.0, "gate_period_us": 0.5, "gate_width_ns": 7.0},
    "gating_d": {"dead_time_us": 3.5}
  })");
  CHECK(cfg.sim.gating_c.dead_time == 2e-6);
  CHECK_THAT(cfg.sim.gating_d.dead_time,
             Catch::Matchers::WithinRel(3.5e-6, 1e-12));
  CHECK(cfg.sim.gating_d.gate_period == 0.5e-6);
}

TEST_CASE("polarization drive sets the overlap") {
  const auto cfg = config_from_text(
      R"({"polarization": {"vg_volts": 5.25, "vpi_volts": 5.25}})");
  CHECK(cfg.sim.source.cos_phi <= 1e-12);
  CHECK(cfg.vpi_volts() == 5.25);
}

TEST_CASE("saving and reloading a config reproduces the run") {
  const auto cfg = config_from_text(R"({
    "source": {"mu_a": 0.3, "mu_b": 0.42, "cos_phi": 0.97},
    "beam_splitter": {"transmittance": 0.45},
    "detectors": {"eta_c": 0.12, "eta_d": 0.09, "dark_c": 2e-5, "dark_d": 1e-5},
    "gating": {"dead_time_us": 1.5, "gate_period_us": 0.5, "gate_width_ns": 7.0},
    "afterpulse_c": {"p0": 0.018, "tau_us": 0.85},
    "afterpulse_d": {"p0": 0.033, "tau_us": 1.41},
    "simulation": {"n_gates": 50000, "seed": 321},
    "mode": "montecarlo"
  })");
  const auto reloaded = load_config(save_config(cfg));
  const auto a = run_visibility(cfg);
  const auto b = run_visibility(reloaded);
  CHECK(a.report.p_coin == b.report.p_coin);
  CHECK(a.report.v_hom == b.report.v_hom);
  CHECK(a.se_v == b.se_v);
}

TEST_CASE("photon-number sweep golden table") {
  const auto cfg = config_from_text(R"({
    "sweep": {"axis": "photon_number", "start": 0.1, "stop": 0.5, "steps": 3}
  })");
  const auto rows = run_sweep(cfg);
  REQUIRE(rows.size() == 3);
  const double v[3] = {0.493765351589, 0.491262672496, 0.486796549848};
  const double pc[3] = {0.00997986895248, 0.0293894904382, 0.048228314531};
  for (int i = 0; i < 3; ++i) {
    CHECK_THAT(rows[i].v_hom, Catch::Matchers::WithinRel(v[i], 1e-9));
    CHECK_THAT(rows[i].p_c, Catch::Matchers::WithinRel(pc[i], 1e-9));
    REQUIRE(rows[i].eta_mu.has_value());
    CHECK_THAT(*rows[i].eta_mu,
               Catch::Matchers::WithinRel(0.1 * rows[i].axis_value, 1e-12));
    CHECK_FALSE(rows[i].se_v.has_value());
  }
  CHECK(rows[0].axis_value == 0.1);
  CHECK_THAT(rows[1].axis_value, Catch::Matchers::WithinRel(0.3, 1e-12));
  CHECK(rows[2].axis_value == 0.5);
}

TEST_CASE("intensity-ratio sweep golden table") {
  const auto cfg = config_from_text(R"({
    "source": {"mu_a": 0.47, "mu_b": 0.47},
    "sweep": {"axis": "intensity_ratio", "start": 0.5, "stop": 1.5, "steps": 3}
  })");
  const auto rows = run_sweep(cfg);
  REQUIRE(rows.size() == 3);
  const double v[3] = {0.434828001485, 0.487492279031, 0.464802300461};
  for (int i = 0; i < 3; ++i)
    CHECK_THAT(rows[i].v_hom, Catch::Matchers::WithinRel(v[i], 1e-9));
  CHECK(rows[1].v_hom > rows[0].v_hom);
  CHECK(rows[1].v_hom > rows[2].v_hom);
}

TEST_CASE("polarization-voltage sweep golden table") {
  const auto cfg = config_from_text(R"({
    "polarization": {"vg_volts": 0.0, "vpi_volts": 5.25},
    "sweep": {"axis": "polarization_voltage", "start": 0, "stop": 5.25, "steps": 3}
  })");
  const auto rows = run_sweep(cfg);
  REQUIRE(rows.size() == 3);
  CHECK_THAT(rows[0].v_hom, Catch::Matchers::WithinRel(0.487952803244, 1e-9));
  CHECK_THAT(rows[1].v_hom, Catch::Matchers::WithinRel(0.241241566892, 1e-9));
  CHECK_THAT(rows[2].v_hom, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("dead-time sweep golden table with after-pulsing") {
  const auto cfg = config_from_text(R"({
    "detectors": {"eta_c": 0.1, "eta_d": 0.1, "dark_c": 1e-4, "dark_d": 4e-5},
    "gating": {"dead_time_us": 0.1, "gate_period_us": 0.5, "gate_width_ns": 7.0},
    "afterpulse_c": {"p0": 0.018, "tau_us": 0.85},
    "afterpulse_d": {"p0": 0.033, "tau_us": 1.41},
    "mode": "analytic+afterpulse",
    "sweep": {"axis": "dead_time", "start": 0.1, "stop": 10.0, "steps": 3}
  })");
  const auto rows = run_sweep(cfg);
  REQUIRE(rows.size() == 3);
  const double v[3] = {0.429174791381, 0.48567961072, 0.487180557548};
  for (int i = 0; i < 3; ++i)
    CHECK_THAT(rows[i].v_hom, Catch::Matchers::WithinRel(v[i], 1e-9));
}

TEST_CASE("csv schema") {
  const auto cfg = config_from_text(R"({
    "source": {"mu_a": 0.47, "mu_b": 0.47},
    "sweep": {"axis": "intensity_ratio", "start": 0.5, "stop": 1.5, "steps": 3}
  })");
  std::stringstream out;
  write_sweep_csv(out, run_sweep(cfg));
  std::string line;
  REQUIRE(std::getline(out, line));
  CHECK(line == "axis_value,p_coin,p_c,p_d,v_hom");
  REQUIRE(std::getline(out, line));
  // five comma-separated numerics, 10 significant digits
  CHECK(std::regex_match(
      line, std::regex(R"(^[-0-9.e+]+(,[-0-9.e+]+){4}$)")));
  CHECK(line.substr(0, 4) == "0.5,");
  CHECK(line.find("0.4348280015") != std::string::npos);

  // photon axis appends eta_mu; montecarlo mode appends se_v before it
  const auto cfg2 = config_from_text(R"({
    "sweep": {"axis": "photon_number", "start": 0.1, "stop": 0.5, "steps": 2},
    "simulation": {"n_gates": 2000, "seed": 5},
    "mode": "montecarlo"
  })");
  std::stringstream out2;
  write_sweep_csv(out2, run_sweep(cfg2));
  REQUIRE(std::getline(out2, line));
  CHECK(line == "axis_value,p_coin,p_c,p_d,v_hom,se_v,eta_mu");
}

TEST_CASE("monte carlo sweeps are reproducible") {
  const auto cfg = config_from_text(R"({
    "sweep": {"axis": "photon_number", "start": 0.2, "stop": 0.6, "steps": 3},
    "simulation": {"n_gates": 20000, "seed": 9},
    "mode": "montecarlo"
  })");
  const auto a = run_sweep(cfg);
  const auto b = run_sweep(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].v_hom == b[i].v_hom);
    REQUIRE(a[i].se_v.has_value());
    CHECK(*a[i].se_v == *b[i].se_v);
  }
  // distinct points use distinct derived streams
  CHECK(a[0].v_hom != a[1].v_hom);
}

TEST_CASE("run_visibility honors the mode") {
  const auto analytic = config_from_text(R"({"detectors":
      {"eta_c": 0.1, "eta_d": 0.1, "dark_c": 0, "dark_d": 0}})");
  const auto res = run_visibility(analytic);
  CHECK_THAT(res.report.v_hom, Catch::Matchers::WithinRel(0.488794065706, 1e-9));
  CHECK_FALSE(res.se_v.has_value());

  const auto with_ap = config_from_text(R"({
    "detectors": {"eta_c": 0.1, "eta_d": 0.1, "dark_c": 1e-4, "dark_d": 4e-5},
    "gating": {"dead_time_us": 0.1, "gate_period_us": 0.5, "gate_width_ns": 7.0},
    "afterpulse_c": {"p0": 0.018, "tau_us": 0.85},
    "afterpulse_d": {"p0": 0.033, "tau_us": 1.41},
    "mode": "analytic+afterpulse"
  })");
  CHECK_THAT(run_visibility(with_ap).report.v_hom,
             Catch::Matchers::WithinRel(0.429174791381, 1e-9));

  const auto mc = config_from_text(R"({
    "simulation": {"n_gates": 50000, "seed": 3}, "mode": "montecarlo"})");
  const auto mc_res = run_visibility(mc);
  REQUIRE(mc_res.se_v.has_value());
  REQUIRE(mc_res.n_open_pairs.has_value());
  CHECK(std::abs(mc_res.report.v_hom - 0.48795) <= 3.0 * *mc_res.se_v);
}

TEST_CASE("sweep requires a sweep block") {
  const auto cfg = config_from_text("{}");
  CHECK_THROWS_AS(run_sweep(cfg), ConfigError);
}
