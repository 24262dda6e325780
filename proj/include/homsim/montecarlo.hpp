#pragma once

// Stochastic oracle for the analytic model: an explicit per-gate timeline of
// photon statistics, threshold detection, dead time, and after-pulsing for
// both detectors. One SplitMix64 stream drives a whole timeline, so a config
// (including its seed) pins the run bit-for-bit; replicas and sweep points
// get independent derived streams.

#include <cmath>
#include <cstdint>
#include <future>
#include <vector>

#include "homsim/afterpulse.hpp"
#include "homsim/errors.hpp"
#include "homsim/math.hpp"
#include "homsim/model.hpp"
#include "homsim/random.hpp"
#include "homsim/timetags.hpp"

namespace homsim {

/// How after-pulse hazards from earlier avalanches combine. MostRecent keeps
/// only the latest avalanche (the geometric-series picture behind the closed
/// form); Superposed multiplies survival over every remembered avalanche.
enum class ApMode { MostRecent, Superposed };

struct SimConfig {
  SourcePair source{};
  BeamSplitter bs{};
  DetectorPair det{};
  GatingConfig gating_c{};
  GatingConfig gating_d{};
  AfterpulseParams ap_c{};
  AfterpulseParams ap_d{};
  std::uint64_t n_gates = 1'000'000;
  std::uint64_t seed = 1;
  ApMode ap_mode = ApMode::MostRecent;

  void validate() const {
    if (n_gates < 1) throw InvalidSimConfig("n_gates must be >= 1");
    if (gating_c.gate_period != gating_d.gate_period)
      throw InvalidSimConfig(
          "gate periods must match for the gates to pair up");
  }
};

/// Raw tallies of one (or a pool of) timeline(s). Everything needed to form
/// estimates and their errors, and to compare against time-tag analysis.
struct SimTallies {
  std::uint64_t n_gates = 0;
  std::uint64_t n_open_pairs = 0;    // gates with both detectors armed
  std::uint64_t n_coincidences = 0;  // both clicked in an open pair
  std::uint64_t n_singles_c = 0;     // detector clicks within open pairs
  std::uint64_t n_singles_d = 0;
  std::uint64_t total_clicks_c = 0;  // clicks over the whole timeline
  std::uint64_t total_clicks_d = 0;

  SimTallies& operator+=(const SimTallies& o) {
    n_gates += o.n_gates;
    n_open_pairs += o.n_open_pairs;
    n_coincidences += o.n_coincidences;
    n_singles_c += o.n_singles_c;
    n_singles_d += o.n_singles_d;
    total_clicks_c += o.total_clicks_c;
    total_clicks_d += o.total_clicks_d;
    return *this;
  }
};

/// Estimated per-gate probabilities and visibility with standard errors.
/// All ratios use gates where both detectors were armed as the denominator.
struct SimEstimate {
  SimTallies tallies;
  double p_coin_hat = 0.0;
  double p_c_hat = 0.0;
  double p_d_hat = 0.0;
  double se_coin = 0.0;
  double se_c = 0.0;
  double se_d = 0.0;
  double v_hom_hat = 0.0;
  double se_v = 0.0;

  std::uint64_t n_open_pairs() const { return tallies.n_open_pairs; }

  static SimEstimate from_tallies(const SimTallies& t) {
    SimEstimate e;
    e.tallies = t;
    if (t.n_open_pairs == 0) return e;
    const double n = static_cast<double>(t.n_open_pairs);
    const double z = static_cast<double>(t.n_coincidences) / n;
    const double x = static_cast<double>(t.n_singles_c) / n;
    const double y = static_cast<double>(t.n_singles_d) / n;
    e.p_coin_hat = z;
    e.p_c_hat = x;
    e.p_d_hat = y;
    e.se_coin = std::sqrt(z * (1.0 - z) / n);
    e.se_c = std::sqrt(x * (1.0 - x) / n);
    e.se_d = std::sqrt(y * (1.0 - y) / n);
    if (x > 0.0 && y > 0.0) {
      const double ratio = z / (x * y);
      e.v_hom_hat = 1.0 - ratio;
      if (z > 0.0) {
        // Delta method for z/(x y) with the per-gate covariances of the
        // indicator variables (coincidence implies both singles).
        const double rel = (1.0 - z) / z - (1.0 - x) / x - (1.0 - y) / y +
                           2.0 * (z - x * y) / (x * y);
        e.se_v = ratio * std::sqrt(std::max(0.0, rel) / n);
      } else {
        e.se_v = 1.0 / (n * x * y); // scale of a single missed count
      }
    }
    return e;
  }
};

namespace detail {

struct DetectorRuntime {
  // fixed per run
  double eta = 1.0;
  double dark = 0.0;
  double p0 = 0.0;
  double tau = 1.0;
  double gate_period = 1.0;
  ApMode mode = ApMode::MostRecent;
  std::int64_t dead_gates = 0;   // armed again once k - last_click >= this
  std::int64_t prune_gates = 0;  // Superposed: forget older avalanches
  // state
  std::int64_t last_click = 0;
  bool has_clicked = false;
  std::vector<std::int64_t> history;
  std::size_t history_head = 0;

  static DetectorRuntime make(double eta, double dark,
                              const AfterpulseParams& ap,
                              const GatingConfig& g, ApMode mode) {
    DetectorRuntime d;
    d.eta = eta;
    d.dark = dark;
    d.p0 = ap.p0;
    d.tau = ap.tau;
    d.gate_period = g.gate_period;
    d.mode = mode;
    d.dead_gates = static_cast<std::int64_t>(
        std::ceil(g.dead_time / g.gate_period - 1e-9));
    if (d.dead_gates < 0) d.dead_gates = 0;
    // hazards below ~1e-18 of p0 cannot flip any uniform draw
    d.prune_gates = static_cast<std::int64_t>(
        std::ceil(ap.tau * 42.0 / g.gate_period)) + 1;
    return d;
  }

  bool armed(std::int64_t k) const {
    return !has_clicked || (k - last_click) >= dead_gates;
  }

  double afterpulse_hazard(std::int64_t k) const {
    if (p0 == 0.0 || !has_clicked) return 0.0;
    if (mode == ApMode::MostRecent)
      return p0 * std::exp(-static_cast<double>(k - last_click) * gate_period /
                           tau);
    double survive = 1.0;
    for (std::size_t i = history_head; i < history.size(); ++i)
      survive *= 1.0 - p0 * std::exp(-static_cast<double>(k - history[i]) *
                                     gate_period / tau);
    return 1.0 - survive;
  }

  void record_click(std::int64_t k) {
    last_click = k;
    has_clicked = true;
    if (mode == ApMode::Superposed) {
      history.push_back(k);
      while (history_head < history.size() &&
             k - history[history_head] > prune_gates)
        ++history_head;
      if (history_head > 1024 && history_head * 2 > history.size()) {
        history.erase(history.begin(),
                      history.begin() + static_cast<std::ptrdiff_t>(history_head));
        history_head = 0;
      }
    }
  }
};

inline bool detect(SplitMix64& rng, const DetectorRuntime& det, double mu,
                   std::int64_t k) {
  const unsigned m = rng.poisson(mu);
  double no_click = 1.0 - det.dark;
  for (unsigned i = 0; i < m; ++i) no_click *= 1.0 - det.eta;
  bool click = rng.bernoulli(1.0 - no_click);
  const double hazard = det.afterpulse_hazard(k);
  if (hazard > 0.0) {
    const bool ap_click = rng.bernoulli(hazard);
    click = click || ap_click;
  }
  return click;
}

/// Runs the gate loop, invoking sink(k, armed_c, armed_d, click_c, click_d)
/// once per gate in time order. The draw order per gate is fixed: the two
/// phases, then detector c (Poisson, click, after-pulse if hazardous), then
/// detector d, so a given seed replays the identical timeline for any sink.
template <typename Sink>
inline void run_timeline(const SimConfig& cfg, std::uint64_t n_gates,
                         SplitMix64& rng, Sink&& sink) {
  const double tt = cfg.bs.t() * cfg.bs.t();
  const double rr = cfg.bs.r() * cfg.bs.r();
  const double base_c = cfg.source.mu_a * tt + cfg.source.mu_b * rr;
  const double base_d = cfg.source.mu_a * rr + cfg.source.mu_b * tt;
  const double amplitude = 2.0 *
                           std::sqrt(cfg.source.mu_a * cfg.source.mu_b) *
                           cfg.bs.t() * cfg.bs.r() * cfg.source.cos_phi;
  auto c = DetectorRuntime::make(cfg.det.eta_c, cfg.det.dark_c, cfg.ap_c,
                                 cfg.gating_c, cfg.ap_mode);
  auto d = DetectorRuntime::make(cfg.det.eta_d, cfg.det.dark_d, cfg.ap_d,
                                 cfg.gating_d, cfg.ap_mode);
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(n_gates); ++k) {
    const double theta_a = kTwoPi * rng.uniform();
    const double theta_b = kTwoPi * rng.uniform();
    const double cosine = std::cos(theta_a - theta_b);
    const double mu_c = std::max(0.0, base_c + amplitude * cosine);
    const double mu_d = std::max(0.0, base_d - amplitude * cosine);
    const bool armed_c = c.armed(k);
    const bool armed_d = d.armed(k);
    const bool click_c = armed_c && detect(rng, c, mu_c, k);
    const bool click_d = armed_d && detect(rng, d, mu_d, k);
    sink(k, armed_c, armed_d, click_c, click_d);
    if (click_c) c.record_click(k);
    if (click_d) d.record_click(k);
  }
}

inline SimTallies run_tally(const SimConfig& cfg, std::uint64_t n_gates,
                            std::uint64_t stream) {
  SplitMix64 rng(derive_seed(cfg.seed, stream));
  SimTallies t;
  t.n_gates = n_gates;
  run_timeline(cfg, n_gates, rng,
               [&](std::int64_t, bool armed_c, bool armed_d, bool click_c,
                   bool click_d) {
                 if (click_c) ++t.total_clicks_c;
                 if (click_d) ++t.total_clicks_d;
                 if (armed_c && armed_d) {
                   ++t.n_open_pairs;
                   if (click_c) ++t.n_singles_c;
                   if (click_d) ++t.n_singles_d;
                   if (click_c && click_d) ++t.n_coincidences;
                 }
               });
  return t;
}

} // namespace detail

/// Runs one full timeline and estimates the per-gate probabilities and the
/// visibility. Deterministic in cfg (seed included).
inline SimEstimate simulate(const SimConfig& cfg) {
  cfg.validate();
  return SimEstimate::from_tallies(detail::run_tally(cfg, cfg.n_gates, 0));
}

/// Splits n_gates across independent replicas (seed streams derived from the
/// config seed and the replica index), runs them in parallel, and pools the
/// tallies. simulate(cfg) is the single-replica special case.
inline SimEstimate simulate_replicated(const SimConfig& cfg,
                                       unsigned n_replicas,
                                       bool parallel = true) {
  cfg.validate();
  if (n_replicas == 0) throw InvalidArgument("need at least one replica");
  const std::uint64_t base = cfg.n_gates / n_replicas;
  const std::uint64_t rem = cfg.n_gates % n_replicas;
  auto gates_of = [&](unsigned r) { return base + (r < rem ? 1 : 0); };
  SimTallies pooled;
  if (parallel && n_replicas > 1) {
    std::vector<std::future<SimTallies>> futures;
    futures.reserve(n_replicas);
    for (unsigned r = 0; r < n_replicas; ++r)
      futures.push_back(std::async(std::launch::async, [&cfg, r, &gates_of] {
        return detail::run_tally(cfg, gates_of(r), r);
      }));
    for (auto& f : futures) pooled += f.get();
  } else {
    for (unsigned r = 0; r < n_replicas; ++r)
      pooled += detail::run_tally(cfg, gates_of(r), r);
  }
  return SimEstimate::from_tallies(pooled);
}

/// Per-replica tallies for pooling diagnostics (homogeneity tests).
inline std::vector<SimTallies> replica_tallies(const SimConfig& cfg,
                                               unsigned n_replicas) {
  cfg.validate();
  if (n_replicas == 0) throw InvalidArgument("need at least one replica");
  const std::uint64_t base = cfg.n_gates / n_replicas;
  const std::uint64_t rem = cfg.n_gates % n_replicas;
  std::vector<SimTallies> out;
  out.reserve(n_replicas);
  for (unsigned r = 0; r < n_replicas; ++r)
    out.push_back(detail::run_tally(cfg, base + (r < rem ? 1 : 0), r));
  return out;
}

/// Synthesizes the time-tag stream of the same timeline simulate() walks:
/// a gate record per armed detector gate and a detection record per click,
/// quantized to 81-ps ticks. Detections sit mid-gate (the pulse position),
/// so clicks of the same gate land inside any realistic coincidence window.
inline std::vector<TimeTagRecord> generate_timetags(const SimConfig& cfg) {
  cfg.validate();
  SplitMix64 rng(derive_seed(cfg.seed, 0));
  std::vector<TimeTagRecord> records;
  records.reserve(static_cast<std::size_t>(
      std::min<std::uint64_t>(cfg.n_gates, 1u << 24) * 2 + 1024));
  const double period = cfg.gating_c.gate_period;
  const double offset_c = 0.5 * cfg.gating_c.gate_width;
  const double offset_d = 0.5 * cfg.gating_d.gate_width;
  auto ticks_at = [](double seconds) {
    return static_cast<std::uint64_t>(std::llround(seconds / kTickSeconds));
  };
  detail::run_timeline(
      cfg, cfg.n_gates, rng,
      [&](std::int64_t k, bool armed_c, bool armed_d, bool click_c,
          bool click_d) {
        const double t = static_cast<double>(k) * period;
        if (armed_c) records.push_back({Channel::GateC, ticks_at(t)});
        if (armed_d) records.push_back({Channel::GateD, ticks_at(t)});
        if (click_c) records.push_back({Channel::DetC, ticks_at(t + offset_c)});
        if (click_d) records.push_back({Channel::DetD, ticks_at(t + offset_d)});
      });
  return records;
}

/// Histogram of intervals between successive detections of one detector
/// channel, sized by the largest interval seen. Bin edges start at half a
/// bin width so that intervals equal to whole gate periods sit at bin
/// centers when bin_width matches the gate period (the layout fit_afterpulse
/// expects).
inline IntervalHistogram generate_interval_histogram(
    const SimConfig& cfg, double bin_width, Channel channel = Channel::DetC) {
  cfg.validate();
  if (!(bin_width > 0.0)) throw InvalidArgument("bin_width must be positive");
  if (channel != Channel::DetC && channel != Channel::DetD)
    throw InvalidArgument("histogram channel must be a detector channel");
  constexpr std::size_t kMaxBins = 1 << 16;
  SplitMix64 rng(derive_seed(cfg.seed, 0));
  const double period = cfg.gating_c.gate_period;
  std::vector<std::uint64_t> counts;
  std::int64_t last = -1;
  const bool want_c = channel == Channel::DetC;
  detail::run_timeline(
      cfg, cfg.n_gates, rng,
      [&](std::int64_t k, bool, bool, bool click_c, bool click_d) {
        const bool click = want_c ? click_c : click_d;
        if (!click) return;
        if (last >= 0) {
          const double interval = static_cast<double>(k - last) * period;
          const double pos = interval / bin_width - 0.5;
          if (pos >= 0.0 && pos < static_cast<double>(kMaxBins)) {
            const auto idx = static_cast<std::size_t>(pos);
            if (idx >= counts.size()) counts.resize(idx + 1, 0);
            ++counts[idx];
          }
        }
        last = k;
      });
  if (counts.empty()) counts.resize(1, 0);
  std::vector<double> edges(counts.size() + 1);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = (static_cast<double>(i) + 0.5) * bin_width;
  return IntervalHistogram(std::move(edges), std::move(counts));
}

} // namespace homsim
