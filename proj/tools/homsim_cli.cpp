// Command-line front end: visibility evaluation, parameter sweeps, Monte
// Carlo runs, after-pulse fitting, and time-tag analysis.
//
// Exit codes: 0 success, 2 configuration/usage failure, 3 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "homsim/homsim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOptions {
  std::string config_path;
  std::string out_path;
  std::string format = "text";
  std::optional<std::uint64_t> seed;
};

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw homsim::Error("IoError", "cannot open '" + path + "'");
  return file;
}

void fail(const homsim::Error& e) {
  std::cerr << "error: " << e.name() << ": " << e.what() << '\n';
}

const char* mode_name(homsim::RunMode mode) {
  switch (mode) {
    case homsim::RunMode::Analytic: return "analytic";
    case homsim::RunMode::AnalyticAfterpulse: return "analytic+afterpulse";
    case homsim::RunMode::MonteCarlo: return "montecarlo";
  }
  return "?";
}

void print_visibility_text(std::ostream& os, const homsim::RunResult& res,
                           homsim::RunMode mode) {
  char buf[256];
  os << "mode    = " << mode_name(mode) << '\n';
  std::snprintf(buf, sizeof(buf),
                "p_coin  = %.10g\np_c     = %.10g\np_d     = %.10g\n"
                "v_hom   = %.10g\n",
                res.report.p_coin, res.report.p_c, res.report.p_d,
                res.report.v_hom);
  os << buf;
  if (res.se_v) {
    std::snprintf(buf, sizeof(buf), "se_v    = %.10g\n", *res.se_v);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "summary : V_HOM = %.3f\n",
                res.report.v_hom);
  os << buf;
}

void print_visibility_json(std::ostream& os, const homsim::RunResult& res,
                           homsim::RunMode mode) {
  nlohmann::json j = {{"mode", mode_name(mode)},
                      {"p_coin", res.report.p_coin},
                      {"p_c", res.report.p_c},
                      {"p_d", res.report.p_d},
                      {"v_hom", res.report.v_hom}};
  if (res.se_v) j["se_v"] = *res.se_v;
  if (res.n_open_pairs) j["n_open_pairs"] = *res.n_open_pairs;
  os << j.dump(2) << '\n';
}

void print_estimate_text(std::ostream& os, const homsim::SimEstimate& est) {
  char buf[512];
  const auto& t = est.tallies;
  os << "n_gates        = " << t.n_gates << '\n'
     << "n_open_pairs   = " << t.n_open_pairs << '\n'
     << "coincidences   = " << t.n_coincidences << '\n'
     << "singles_c      = " << t.n_singles_c << '\n'
     << "singles_d      = " << t.n_singles_d << '\n'
     << "total_clicks_c = " << t.total_clicks_c << '\n'
     << "total_clicks_d = " << t.total_clicks_d << '\n';
  std::snprintf(buf, sizeof(buf),
                "p_coin_hat = %.10g\nse_coin    = %.10g\n"
                "p_c_hat    = %.10g\nse_c       = %.10g\n"
                "p_d_hat    = %.10g\nse_d       = %.10g\n"
                "v_hom_hat  = %.10g\nse_v       = %.10g\n",
                est.p_coin_hat, est.se_coin, est.p_c_hat, est.se_c,
                est.p_d_hat, est.se_d, est.v_hom_hat, est.se_v);
  os << buf;
}

nlohmann::json estimate_to_json(const homsim::SimEstimate& est) {
  const auto& t = est.tallies;
  return {{"n_gates", t.n_gates},
          {"n_open_pairs", t.n_open_pairs},
          {"coincidences", t.n_coincidences},
          {"singles_c", t.n_singles_c},
          {"singles_d", t.n_singles_d},
          {"total_clicks_c", t.total_clicks_c},
          {"total_clicks_d", t.total_clicks_d},
          {"p_coin_hat", est.p_coin_hat},
          {"se_coin", est.se_coin},
          {"p_c_hat", est.p_c_hat},
          {"se_c", est.se_c},
          {"p_d_hat", est.p_d_hat},
          {"se_d", est.se_d},
          {"v_hom_hat", est.v_hom_hat},
          {"se_v", est.se_v}};
}

void print_report_json(std::ostream& os, const homsim::CoincidenceReport& r) {
  nlohmann::json j = {{"coinciding_gates", r.coinciding_gates},
                      {"coincidences", r.coincidences},
                      {"singles_c", r.singles_c},
                      {"singles_d", r.singles_d},
                      {"outside_gate_c", r.outside_gate_c},
                      {"outside_gate_d", r.outside_gate_d},
                      {"p_coin_emp", r.p_coin_emp},
                      {"p_c_emp", r.p_c_emp},
                      {"p_d_emp", r.p_d_emp},
                      {"v_hom_emp", r.v_hom_emp}};
  os << j.dump(2) << '\n';
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hong-Ou-Mandel visibility model, Monte Carlo simulator, and "
               "time-tag analysis"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string timetags_path, histogram_path, input_path;
  std::string histogram_channel = "c";
  double bin_width_us = 0.0;
  std::optional<unsigned> replicas;
  std::optional<double> gate_width_ns, pair_window_ns, coincidence_window_ns;

  auto add_common = [&](CLI::App* cmd, bool config_required) {
    cmd->add_option("--config", opt.config_path, "experiment config (JSON)")
        ->required(config_required);
    cmd->add_option("--out", opt.out_path, "output path (default stdout)");
    cmd->add_option("--format", opt.format, "output format")
        ->check(CLI::IsMember({"text", "csv", "json"}));
    cmd->add_option("--seed", opt.seed, "override the config seed");
  };

  auto* cmd_visibility =
      app.add_subcommand("visibility", "evaluate the HOM visibility once");
  add_common(cmd_visibility, true);

  auto* cmd_sweep =
      app.add_subcommand("sweep", "run the configured parameter sweep");
  add_common(cmd_sweep, true);

  auto* cmd_simulate =
      app.add_subcommand("simulate", "run the Monte Carlo detector timeline");
  add_common(cmd_simulate, true);
  cmd_simulate->add_option("--replicas", replicas,
                           "independent replicas to pool (default: config)");
  cmd_simulate->add_option("--timetags", timetags_path,
                           "also write the time-tag stream here");
  cmd_simulate->add_option("--histogram", histogram_path,
                           "also write the inter-detection histogram here");
  cmd_simulate
      ->add_option("--histogram-channel", histogram_channel,
                   "detector channel for the histogram")
      ->check(CLI::IsMember({"c", "d"}));
  cmd_simulate->add_option(
      "--bin-width-us", bin_width_us,
      "histogram bin width in microseconds (default: gate period)");

  auto* cmd_fit =
      app.add_subcommand("fit-afterpulse", "fit (P0, tau) to a histogram");
  cmd_fit->add_option("--in", input_path, "interval histogram CSV")->required();
  cmd_fit->add_option("--out", opt.out_path, "output path (default stdout)");
  cmd_fit->add_option("--format", opt.format, "output format")
      ->check(CLI::IsMember({"text", "json"}));

  auto* cmd_analyze = app.add_subcommand(
      "analyze-timetags", "extract coincidences from a time-tag stream");
  cmd_analyze->add_option("--in", input_path, "time-tag stream")->required();
  cmd_analyze->add_option("--config", opt.config_path,
                          "config supplying window defaults");
  cmd_analyze->add_option("--out", opt.out_path, "output path (default stdout)");
  cmd_analyze->add_option("--format", opt.format, "output format")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  cmd_analyze->add_option("--gate-width-ns", gate_width_ns, "gate width");
  cmd_analyze->add_option("--pair-window-ns", pair_window_ns,
                          "gate pairing window");
  cmd_analyze->add_option("--coincidence-window-ns", coincidence_window_ns,
                          "coincidence window");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  // Configuration stage: anything thrown here is a config failure.
  homsim::ExperimentConfig cfg;
  try {
    if (!opt.config_path.empty()) cfg = homsim::load_config_file(opt.config_path);
    if (opt.seed) cfg.sim.seed = *opt.seed;
    if (replicas) {
      if (*replicas == 0)
        throw homsim::ConfigError("--replicas must be >= 1");
      cfg.replicas = *replicas;
    }
  } catch (const homsim::Error& e) {
    fail(e);
    return kExitConfig;
  }

  // Execution stage.
  try {
    std::ofstream file;
    std::ostream& os = open_output(opt.out_path, file);

    if (app.got_subcommand(cmd_visibility)) {
      const auto res = homsim::run_visibility(cfg);
      if (opt.format == "json")
        print_visibility_json(os, res, cfg.mode);
      else
        print_visibility_text(os, res, cfg.mode);
      return kExitOk;
    }

    if (app.got_subcommand(cmd_sweep)) {
      const auto rows = homsim::run_sweep(cfg);
      if (opt.format == "json")
        os << homsim::sweep_to_json(rows).dump(2) << '\n';
      else
        homsim::write_sweep_csv(os, rows);
      return kExitOk;
    }

    if (app.got_subcommand(cmd_simulate)) {
      const auto est = homsim::simulate_replicated(cfg.sim, cfg.replicas);
      if (!timetags_path.empty()) {
        std::ofstream tags(timetags_path);
        if (!tags)
          throw homsim::Error("IoError", "cannot open '" + timetags_path + "'");
        const auto records = homsim::generate_timetags(cfg.sim);
        homsim::write_timetags(tags, records);
      }
      if (!histogram_path.empty()) {
        std::ofstream hist(histogram_path);
        if (!hist)
          throw homsim::Error("IoError", "cannot open '" + histogram_path + "'");
        const double width = bin_width_us > 0.0
                                 ? bin_width_us * 1e-6
                                 : cfg.sim.gating_c.gate_period;
        const auto channel = histogram_channel == "d" ? homsim::Channel::DetD
                                                      : homsim::Channel::DetC;
        const auto h =
            homsim::generate_interval_histogram(cfg.sim, width, channel);
        homsim::write_histogram_csv(hist, h);
      }
      if (opt.format == "json")
        os << estimate_to_json(est).dump(2) << '\n';
      else
        print_estimate_text(os, est);
      return kExitOk;
    }

    if (app.got_subcommand(cmd_fit)) {
      std::ifstream in(input_path);
      if (!in)
        throw homsim::Error("IoError", "cannot open '" + input_path + "'");
      const auto hist = homsim::read_histogram_csv(in);
      const auto fit = homsim::fit_afterpulse(hist);
      if (opt.format == "json") {
        nlohmann::json j = {{"p0", fit.params.p0},
                            {"tau_us", fit.params.tau * 1e6},
                            {"background", fit.background},
                            {"residual", fit.residual}};
        os << j.dump(2) << '\n';
      } else {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "p0         = %.10g\ntau_us     = %.10g\n"
                      "background = %.10g\nresidual   = %.10g\n",
                      fit.params.p0, fit.params.tau * 1e6, fit.background,
                      fit.residual);
        os << buf;
      }
      return kExitOk;
    }

    if (app.got_subcommand(cmd_analyze)) {
      std::ifstream in(input_path);
      if (!in)
        throw homsim::Error("IoError", "cannot open '" + input_path + "'");
      const auto parsed = homsim::parse_timetags(in);
      const double gate_width = gate_width_ns ? *gate_width_ns * 1e-9
                                              : cfg.sim.gating_c.gate_width;
      const double pair_window =
          pair_window_ns ? *pair_window_ns * 1e-9 : cfg.pair_window;
      const double coincidence_window = coincidence_window_ns
                                            ? *coincidence_window_ns * 1e-9
                                            : cfg.coincidence_window;
      const auto report = homsim::extract_coincidences(
          parsed.records, gate_width, pair_window, coincidence_window,
          parsed.tick_seconds());
      if (opt.format == "json")
        print_report_json(os, report);
      else if (opt.format == "csv")
        homsim::write_report_csv(os, report);
      else
        homsim::write_report_kv(os, report);
      return kExitOk;
    }
  } catch (const homsim::Error& e) {
    fail(e);
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
