#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "homsim/afterpulse.hpp"
#include "homsim/model.hpp"
#include "homsim/montecarlo.hpp"
#include "homsim/timetags.hpp"

using namespace homsim;

namespace {

SimConfig base_config() {
  SimConfig cfg;
  cfg.source = SourcePair(0.45, 0.45, 1.0);
  cfg.bs = BeamSplitter();
  cfg.det = DetectorPair(0.1, 0.1, 0.0, 0.0);
  cfg.gating_c = GatingConfig(0.0, 1e-6, 7e-9);
  cfg.gating_d = GatingConfig(0.0, 1e-6, 7e-9);
  cfg.ap_c = AfterpulseParams(0.0, 1e-6);
  cfg.ap_d = AfterpulseParams(0.0, 1e-6);
  cfg.n_gates = 1'000'000;
  cfg.seed = 20240901;
  return cfg;
}

bool tallies_equal(const SimTallies& a, const SimTallies& b) {
  return a.n_gates == b.n_gates && a.n_open_pairs == b.n_open_pairs &&
         a.n_coincidences == b.n_coincidences &&
         a.n_singles_c == b.n_singles_c && a.n_singles_d == b.n_singles_d &&
         a.total_clicks_c == b.total_clicks_c &&
         a.total_clicks_d == b.total_clicks_d;
}

} // namespace

TEST_CASE("simulate is deterministic in the seed") {
  auto cfg = base_config();
  cfg.n_gates = 100'000;
  const auto a = simulate(cfg);
  const auto b = simulate(cfg);
  CHECK(tallies_equal(a.tallies, b.tallies));
  CHECK(a.v_hom_hat == b.v_hom_hat);
  CHECK(a.se_v == b.se_v);

  cfg.seed += 1;
  const auto c = simulate(cfg);
  CHECK_FALSE(tallies_equal(a.tallies, c.tallies));
}

TEST_CASE("dark-free vacuum input never clicks") {
  auto cfg = base_config();
  cfg.source = SourcePair(0.0, 0.0, 1.0);
  cfg.n_gates = 50'000;
  const auto est = simulate(cfg);
  CHECK(est.tallies.n_open_pairs == cfg.n_gates);
  CHECK(est.tallies.total_clicks_c == 0);
  CHECK(est.tallies.total_clicks_d == 0);
  CHECK(est.p_coin_hat == 0.0);
  CHECK(est.p_c_hat == 0.0);
  CHECK(est.v_hom_hat == 0.0);
}

TEST_CASE("estimates agree with the analytic model") {
  auto cfg = base_config();
  cfg.gating_c = GatingConfig(7e-6, 1e-6, 7e-9); // long dead time is harmless:
  cfg.gating_d = cfg.gating_c;                   // tallies are per armed pair
  const auto est = simulate(cfg);
  const auto ref = visibility(cfg.source, cfg.bs, cfg.det);
  CHECK(std::abs(est.p_c_hat - ref.p_c) <= 3.0 * est.se_c);
  CHECK(std::abs(est.p_d_hat - ref.p_d) <= 3.0 * est.se_d);
  CHECK(std::abs(est.p_coin_hat - ref.p_coin) <= 3.0 * est.se_coin);
  CHECK(std::abs(est.v_hom_hat - ref.v_hom) <= 3.0 * est.se_v);
}

TEST_CASE("three-sigma coverage over a battery of seeded runs") {
  auto cfg = base_config();
  cfg.n_gates = 100'000;
  const auto ref = visibility(cfg.source, cfg.bs, cfg.det);
  int ok_coin = 0, ok_c = 0, ok_d = 0;
  for (int run = 0; run < 100; ++run) {
    cfg.seed = 5000 + run;
    const auto est = simulate(cfg);
    ok_coin += std::abs(est.p_coin_hat - ref.p_coin) <= 3.0 * est.se_coin;
    ok_c += std::abs(est.p_c_hat - ref.p_c) <= 3.0 * est.se_c;
    ok_d += std::abs(est.p_d_hat - ref.p_d) <= 3.0 * est.se_d;
  }
  CHECK(ok_coin >= 99);
  CHECK(ok_c >= 99);
  CHECK(ok_d >= 99);
}

TEST_CASE("visibility agreement across random configurations") {
  std::mt19937_64 gen(2718);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    SimConfig cfg = base_config();
    cfg.source = SourcePair(0.1 + 0.5 * uni(gen), 0.1 + 0.5 * uni(gen),
                            0.7 + 0.3 * uni(gen));
    cfg.det = DetectorPair(0.05 + 0.25 * uni(gen), 0.05 + 0.25 * uni(gen),
                           1e-3 * uni(gen), 1e-3 * uni(gen));
    cfg.n_gates = 200'000;
    cfg.seed = 31000 + i;
    const auto est = simulate(cfg);
    const auto ref = visibility(cfg.source, cfg.bs, cfg.det);
    CHECK(std::abs(est.v_hom_hat - ref.v_hom) <= 3.0 * est.se_v);
  }
}

TEST_CASE("replica pooling") {
  auto cfg = base_config();
  cfg.n_gates = 800'000;

  const auto single = simulate(cfg);
  const auto one_replica = simulate_replicated(cfg, 1);
  CHECK(tallies_equal(single.tallies, one_replica.tallies));

  const auto pooled = simulate_replicated(cfg, 8);
  const auto parts = replica_tallies(cfg, 8);
  SimTallies sum;
  for (const auto& part : parts) sum += part;
  CHECK(tallies_equal(pooled.tallies, sum));
  CHECK(pooled.tallies.n_gates == cfg.n_gates);

  // homogeneity of the replica coincidence counts: chi-square against the
  // pooled rate, 7 dof, 1% critical value
  const double p_hat = pooled.p_coin_hat;
  double chi2 = 0.0;
  for (const auto& part : parts) {
    const double expected = static_cast<double>(part.n_open_pairs) * p_hat;
    const double var = expected * (1.0 - p_hat);
    const double diff = static_cast<double>(part.n_coincidences) - expected;
    chi2 += diff * diff / var;
  }
  CHECK(chi2 < 18.4753);

  // pooled estimate consistent with the single-run estimate
  const double gap = std::abs(pooled.p_coin_hat - single.p_coin_hat);
  const double se =
      std::sqrt(pooled.se_coin * pooled.se_coin + single.se_coin * single.se_coin);
  CHECK(gap <= 3.0 * se);

  // replicas run in parallel produce the identical pool
  const auto threaded = simulate_replicated(cfg, 8, true);
  const auto serial = simulate_replicated(cfg, 8, false);
  CHECK(tallies_equal(threaded.tallies, serial.tallies));
}

TEST_CASE("after-pulsing tracks the corrected closed form") {
  auto cfg = base_config();
  cfg.det = DetectorPair(0.1, 0.1, 1e-4, 4e-5);
  cfg.gating_c = GatingConfig(0.5e-6, 0.5e-6, 7e-9); // dead time = one period
  cfg.gating_d = cfg.gating_c;
  cfg.ap_c = AfterpulseParams(0.018, 0.85e-6);
  cfg.ap_d = AfterpulseParams(0.033, 1.41e-6);
  cfg.n_gates = 600'000;
  const auto est = simulate(cfg);
  const auto ref = visibility_with_afterpulse(cfg.source, cfg.bs, cfg.det,
                                              cfg.ap_c, cfg.ap_d, cfg.gating_c);
  CHECK(std::abs(est.v_hom_hat - ref.v_hom) <= 3.0 * est.se_v);
  // and with after-pulsing off the estimate sits strictly higher
  auto off = cfg;
  off.ap_c = AfterpulseParams(0.0, 1e-6);
  off.ap_d = AfterpulseParams(0.0, 1e-6);
  CHECK(simulate(off).v_hom_hat > est.v_hom_hat);
}

TEST_CASE("superposed mode accumulates more after-pulses than most-recent") {
  SimConfig cfg = base_config();
  cfg.source = SourcePair(0.0, 0.0, 1.0);
  cfg.det = DetectorPair(0.1, 0.1, 0.05, 0.05); // dark-driven avalanches
  cfg.gating_c = GatingConfig(0.0, 0.5e-6, 7e-9);
  cfg.gating_d = cfg.gating_c;
  cfg.ap_c = AfterpulseParams(0.4, 10e-6);
  cfg.ap_d = AfterpulseParams(0.4, 10e-6);
  cfg.n_gates = 200'000;
  cfg.ap_mode = ApMode::MostRecent;
  const auto recent = simulate(cfg);
  cfg.ap_mode = ApMode::Superposed;
  const auto super = simulate(cfg);
  CHECK(super.p_c_hat > recent.p_c_hat);
  CHECK(super.p_d_hat > recent.p_d_hat);
}

TEST_CASE("time-tag stream of an empty timeline") {
  auto cfg = base_config();
  cfg.source = SourcePair(0.0, 0.0, 1.0);
  cfg.n_gates = 3;
  const auto records = generate_timetags(cfg);
  REQUIRE(records.size() == 6);
  int gate_c = 0, gate_d = 0;
  for (const auto& rec : records) {
    CHECK((rec.channel == Channel::GateC || rec.channel == Channel::GateD));
    gate_c += rec.channel == Channel::GateC;
    gate_d += rec.channel == Channel::GateD;
  }
  CHECK(gate_c == 3);
  CHECK(gate_d == 3);
}

TEST_CASE("time-tag stream structure") {
  auto cfg = base_config();
  cfg.det = DetectorPair(0.1, 0.1, 1e-4, 4e-5);
  cfg.gating_c = GatingConfig(7e-6, 1e-6, 7e-9);
  cfg.gating_d = cfg.gating_c;
  cfg.n_gates = 50'000;
  const auto records = generate_timetags(cfg);

  std::uint64_t prev = 0;
  std::uint64_t last_gate[2] = {0, 0};
  bool seen_gate[2] = {false, false};
  const auto width_ticks = static_cast<std::uint64_t>(7e-9 / kTickSeconds) + 1;
  for (const auto& rec : records) {
    CHECK(rec.ticks >= prev);
    prev = rec.ticks;
    switch (rec.channel) {
      case Channel::GateC: last_gate[0] = rec.ticks; seen_gate[0] = true; break;
      case Channel::GateD: last_gate[1] = rec.ticks; seen_gate[1] = true; break;
      case Channel::DetC:
        REQUIRE(seen_gate[0]);
        CHECK(rec.ticks - last_gate[0] <= width_ticks);
        break;
      case Channel::DetD:
        REQUIRE(seen_gate[1]);
        CHECK(rec.ticks - last_gate[1] <= width_ticks);
        break;
    }
  }

  // serialization round-trips losslessly
  std::stringstream s;
  write_timetags(s, records);
  const auto parsed = parse_timetags(s);
  CHECK(parsed.tick_ps == 81.0);
  CHECK(parsed.records == records);
}

TEST_CASE("interval histogram generation") {
  auto cfg = base_config();
  cfg.det = DetectorPair(0.1, 0.1, 1e-4, 4e-5);
  cfg.gating_c = GatingConfig(0.1e-6, 0.5e-6, 7e-9);
  cfg.gating_d = cfg.gating_c;
  cfg.ap_c = AfterpulseParams(0.018, 0.85e-6);
  cfg.n_gates = 400'000;
  const auto h = generate_interval_histogram(cfg, 0.5e-6);
  CHECK(h.total() > 10'000);
  // edges start at half a bin width; centers sit on whole gate periods
  CHECK_THAT(h.bin_edges.front(), Catch::Matchers::WithinRel(0.25e-6, 1e-12));
  CHECK_THAT(h.center(0), Catch::Matchers::WithinRel(0.5e-6, 1e-12));

  // deterministic
  const auto again = generate_interval_histogram(cfg, 0.5e-6);
  CHECK(again.counts == h.counts);

  // no detections -> empty histogram
  auto dark = base_config();
  dark.source = SourcePair(0.0, 0.0, 1.0);
  dark.n_gates = 1000;
  CHECK(generate_interval_histogram(dark, 0.5e-6).total() == 0);

  CHECK_THROWS_AS(generate_interval_histogram(cfg, 0.0), InvalidArgument);
  CHECK_THROWS_AS(generate_interval_histogram(cfg, 0.5e-6, Channel::GateC),
                  InvalidArgument);
}

TEST_CASE("config validation") {
  auto cfg = base_config();
  cfg.n_gates = 0;
  CHECK_THROWS_AS(simulate(cfg), InvalidSimConfig);
  cfg = base_config();
  cfg.gating_d = GatingConfig(0.0, 2e-6, 7e-9);
  CHECK_THROWS_AS(simulate(cfg), InvalidSimConfig);
  cfg = base_config();
  CHECK_THROWS_AS(simulate_replicated(cfg, 0), InvalidArgument);
}
