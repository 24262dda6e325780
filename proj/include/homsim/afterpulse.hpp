#pragma once

// After-pulse corrections for gated single-photon avalanche detectors:
// the closed-form total after-pulse probability per avalanche, the corrected
// click probabilities, the detection-rate -> photon-number calibration, and
// extraction of (P0, tau) from inter-detection interval histograms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "homsim/errors.hpp"
#include "homsim/model.hpp"

namespace homsim {

/// Single-exponential after-pulse law P(t) = p0 * exp(-t / tau).
struct AfterpulseParams {
  double p0 = 0.0;
  double tau = 1e-6;

  AfterpulseParams() = default;
  AfterpulseParams(double p0_, double tau_) : p0(p0_), tau(tau_) {
    if (!(p0 >= 0.0 && p0 < 1.0))
      throw InvalidAfterpulseParams("p0 must lie in [0, 1)");
    if (!(tau > 0.0) || !std::isfinite(tau))
      throw InvalidAfterpulseParams("tau must be positive and finite");
  }
};

/// Detector gating: dead time applied after each avalanche, period of the
/// external trigger, and the width each gate stays open. Seconds throughout.
struct GatingConfig {
  double dead_time = 0.0;
  double gate_period = 1e-6;
  double gate_width = 7e-9;

  GatingConfig() = default;
  GatingConfig(double dead_time_, double gate_period_, double gate_width_)
      : dead_time(dead_time_), gate_period(gate_period_),
        gate_width(gate_width_) {
    if (!(dead_time >= 0.0) || !std::isfinite(dead_time))
      throw InvalidGatingConfig("dead_time must be >= 0");
    if (!(gate_period > 0.0) || !std::isfinite(gate_period))
      throw InvalidGatingConfig("gate_period must be positive");
    if (!(gate_width > 0.0 && gate_width < gate_period))
      throw InvalidGatingConfig("require 0 < gate_width < gate_period");
  }
};

/// Histogram of time intervals between successive detections of one detector.
struct IntervalHistogram {
  std::vector<double> bin_edges;       // strictly increasing, size n+1
  std::vector<std::uint64_t> counts;   // size n

  IntervalHistogram() = default;
  IntervalHistogram(std::vector<double> edges, std::vector<std::uint64_t> cnts)
      : bin_edges(std::move(edges)), counts(std::move(cnts)) {
    if (bin_edges.size() < 2 || counts.size() + 1 != bin_edges.size())
      throw InvalidHistogram("need n+1 edges for n bins");
    for (std::size_t i = 1; i < bin_edges.size(); ++i)
      if (!(bin_edges[i] > bin_edges[i - 1]))
        throw InvalidHistogram("bin edges must be strictly increasing");
  }

  std::size_t size() const { return counts.size(); }
  double center(std::size_t i) const {
    return 0.5 * (bin_edges[i] + bin_edges[i + 1]);
  }
  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
};

/// Total after-pulse probability per avalanche in gated mode. The decaying
/// hazard is sampled at the reopened gates T_dt, T_dt + T_gat, ... which sums
/// to the closed form
///   p0 * exp(-T_dt / tau) / (1 - exp(-T_gat / tau)).
inline double total_afterpulse_probability(const AfterpulseParams& ap,
                                           const GatingConfig& g) {
  if (ap.p0 == 0.0) return 0.0;
  return ap.p0 * std::exp(-g.dead_time / ap.tau) /
         (1.0 - std::exp(-g.gate_period / ap.tau));
}

/// Coincidence probability including after-pulses:
///   p_coin + [p_c - p_coin] p_d ap_d + [p_d - p_coin] p_c ap_c.
inline double corrected_coincidence(double p_coin, double p_c, double p_d,
                                    double ap_total_c, double ap_total_d) {
  for (double v : {p_coin, p_c, p_d, ap_total_c, ap_total_d})
    if (!(v >= 0.0 && v <= 1.0))
      throw InvalidArgument("probabilities must lie in [0, 1]");
  if (p_coin > p_c + 1e-12 || p_coin > p_d + 1e-12)
    throw InconsistentProbabilities(
        "coincidence probability exceeds a singles probability");
  return p_coin + (p_c - p_coin) * p_d * ap_total_d +
         (p_d - p_coin) * p_c * ap_total_c;
}

/// Singles probability including after-pulses: p * (1 + (1 - p) * ap_total).
inline double corrected_singles(double p, double ap_total) {
  if (!(p >= 0.0 && p <= 1.0) || !(ap_total >= 0.0 && ap_total <= 1.0))
    throw InvalidArgument("probabilities must lie in [0, 1]");
  return p * (1.0 + (1.0 - p) * ap_total);
}

/// Visibility with per-detector after-pulse corrections folded into both the
/// coincidence and the singles probabilities. Equal to the uncorrected
/// visibility when both p0 vanish, strictly below it otherwise.
inline VisibilityReport visibility_with_afterpulse(
    const SourcePair& src, const BeamSplitter& bs, const DetectorPair& det,
    const AfterpulseParams& ap_c, const AfterpulseParams& ap_d,
    const GatingConfig& g_c, const GatingConfig& g_d) {
  const VisibilityReport base = visibility(src, bs, det);
  const double total_c = total_afterpulse_probability(ap_c, g_c);
  const double total_d = total_afterpulse_probability(ap_d, g_d);
  VisibilityReport rep;
  rep.p_coin = corrected_coincidence(base.p_coin, base.p_c, base.p_d, total_c,
                                     total_d);
  rep.p_c = corrected_singles(base.p_c, total_c);
  rep.p_d = corrected_singles(base.p_d, total_d);
  rep.v_hom = 1.0 - rep.p_coin / (rep.p_c * rep.p_d);
  return rep;
}

inline VisibilityReport visibility_with_afterpulse(
    const SourcePair& src, const BeamSplitter& bs, const DetectorPair& det,
    const AfterpulseParams& ap_c, const AfterpulseParams& ap_d,
    const GatingConfig& g) {
  return visibility_with_afterpulse(src, bs, det, ap_c, ap_d, g, g);
}

/// Mean photon number at the beam-splitter input inferred from the observed
/// single-arm detection rate r_det (counts/second):
///   mu = (2/eta) ln((1 - R T_dt + R T_gat) / (1 - R T_dt)).
/// The factor 2 undoes the 50:50 intensity split. Exact for dead times that
/// are whole multiples of the gating period.
inline double mu_from_rate(double r_det, double eta, const GatingConfig& g) {
  if (!(eta > 0.0 && eta <= 1.0))
    throw InvalidArgument("efficiency must lie in (0, 1]");
  if (!(r_det >= 0.0) || !std::isfinite(r_det))
    throw InvalidArgument("detection rate must be finite and >= 0");
  const double occupancy = r_det * g.dead_time;
  if (occupancy >= 1.0)
    throw RateTooHigh("r_det * dead_time must stay below 1");
  return (2.0 / eta) *
         std::log((1.0 - occupancy + r_det * g.gate_period) / (1.0 - occupancy));
}

// ---------------------------------------------------------------------------
// Histogram CSV (two columns, one-line header)
// ---------------------------------------------------------------------------

inline void write_histogram_csv(std::ostream& os, const IntervalHistogram& h) {
  os << "bin_start_seconds,count\n";
  char buf[64];
  for (std::size_t i = 0; i < h.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%llu\n", h.bin_edges[i],
                  static_cast<unsigned long long>(h.counts[i]));
    os << buf;
  }
}

/// Reads the two-column layout back. The final bin edge is reconstructed from
/// the spacing of the last two starts, so uniform histograms round-trip.
inline IntervalHistogram read_histogram_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) ||
      line.rfind("bin_start_seconds,count", 0) != 0)
    throw InvalidHistogram("missing 'bin_start_seconds,count' header");
  std::vector<double> starts;
  std::vector<std::uint64_t> counts;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw InvalidHistogram("malformed row: " + line);
    try {
      starts.push_back(std::stod(line.substr(0, comma)));
      counts.push_back(std::stoull(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw InvalidHistogram("malformed row: " + line);
    }
  }
  if (starts.size() < 2) throw InvalidHistogram("need at least two bins");
  std::vector<double> edges = starts;
  edges.push_back(starts.back() + (starts.back() - starts[starts.size() - 2]));
  return IntervalHistogram(std::move(edges), std::move(counts));
}

// ---------------------------------------------------------------------------
// After-pulse parameter extraction
// ---------------------------------------------------------------------------

/// Result of fit_afterpulse: the after-pulse law, the flat background click
/// probability per trial, and the summed squared log residual at the optimum.
struct AfterpulseFit {
  AfterpulseParams params;
  double background = 0.0;
  double residual = 0.0;
};

namespace detail {

/// Count-weighted sum of squared residuals of log counts against the
/// survival-weighted hazard model with a free amplitude:
///   m_j = q(t_j) * prod_{i<j} (1 - q(t_i)),  q(t) = pb + p0 exp(-t/tau).
/// Weights are the counts (the inverse variance of a log count), normalized
/// so the result is comparable to an unweighted sum over n bins. The
/// amplitude is profiled out in closed form (weighted mean log offset).
inline double fit_objective(const std::vector<double>& t,
                            const std::vector<double>& log_c,
                            const std::vector<double>& weight, double p0,
                            double tau, double tau_min, double tau_max,
                            double pb) {
  constexpr double kBad = 1e300;
  if (!(p0 >= 0.0) || !(tau >= tau_min && tau <= tau_max) || !(pb > 0.0) ||
      p0 + pb >= 1.0)
    return kBad;
  const std::size_t n = t.size();
  std::vector<double> resid(n);
  double log_survival = 0.0;
  double mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double q =
        std::clamp(pb + p0 * std::exp(-t[j] / tau), 1e-300, 1.0 - 1e-12);
    resid[j] = log_c[j] - (std::log(q) + log_survival);
    mean += weight[j] * resid[j];
    log_survival += std::log1p(-q);
  }
  double ss = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    ss += weight[j] * (resid[j] - mean) * (resid[j] - mean);
  ss *= static_cast<double>(n);
  return std::isfinite(ss) ? ss : kBad;
}

/// Deterministic Nelder-Mead on R^3 (standard reflection/expansion/
/// contraction/shrink coefficients).
inline std::array<double, 3> nelder_mead3(
    const std::function<double(const std::array<double, 3>&)>& f,
    std::array<double, 3> start, double step, int max_iter) {
  constexpr int kDim = 3;
  std::array<std::array<double, 3>, kDim + 1> pts;
  std::array<double, kDim + 1> val;
  for (int i = 0; i <= kDim; ++i) {
    pts[i] = start;
    if (i > 0) pts[i][i - 1] += step;
    val[i] = f(pts[i]);
  }
  std::array<int, kDim + 1> order{0, 1, 2, 3};
  for (int iter = 0; iter < max_iter; ++iter) {
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return val[a] < val[b]; });
    const int best = order[0], worst = order[kDim], second = order[kDim - 1];
    if (val[worst] - val[best] < 1e-14 * (1.0 + std::abs(val[best]))) break;
    std::array<double, 3> centroid{0, 0, 0};
    for (int i = 0; i <= kDim; ++i)
      if (i != worst)
        for (int d = 0; d < kDim; ++d) centroid[d] += pts[i][d] / kDim;
    auto blend = [&](double coef) {
      std::array<double, 3> p;
      for (int d = 0; d < kDim; ++d)
        p[d] = centroid[d] + coef * (centroid[d] - pts[worst][d]);
      return p;
    };
    const auto reflected = blend(1.0);
    const double fr = f(reflected);
    if (fr < val[best]) {
      const auto expanded = blend(2.0);
      const double fe = f(expanded);
      if (fe < fr) { pts[worst] = expanded; val[worst] = fe; }
      else         { pts[worst] = reflected; val[worst] = fr; }
    } else if (fr < val[second]) {
      pts[worst] = reflected;
      val[worst] = fr;
    } else {
      const auto contracted = blend(-0.5);
      const double fc = f(contracted);
      if (fc < val[worst]) { pts[worst] = contracted; val[worst] = fc; }
      else {
        for (int i = 0; i <= kDim; ++i) {
          if (i == best) continue;
          for (int d = 0; d < kDim; ++d)
            pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
          val[i] = f(pts[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= kDim; ++i)
    if (val[i] < val[best]) best = i;
  return pts[best];
}

} // namespace detail

/// Extracts (P0, tau) plus a flat background from an inter-detection interval
/// histogram by count-weighted least squares on the log frequencies. A coarse
/// grid over (tau, p0, background) seeds a deterministic simplex refinement;
/// the initial tau scale is the mean recorded interval and the background is
/// seeded from the tail slope. Bins with fewer than 5 counts are left out of
/// the fit: conditioning on a bin being occupied biases the log of such
/// counts upward, which masquerades as a slow decay component.
///
/// When the exponential component fails to explain at least half of the
/// pure-background residual, the data carries no resolvable after-pulse
/// signature and the background solution is returned with p0 = 0.
///
/// Throws InsufficientData when fewer than 10 bins are occupied or the
/// occupied span is shorter than three mean intervals, and FitDiverged when
/// the refinement fails outright.
inline AfterpulseFit fit_afterpulse(const IntervalHistogram& h) {
  constexpr std::uint64_t kMinCount = 5;
  std::size_t occupied = 0;
  std::vector<double> t, log_c, weights;
  double total_used = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h.counts[i] == 0) continue;
    ++occupied;
    if (h.counts[i] < kMinCount) continue;
    t.push_back(h.center(i));
    log_c.push_back(std::log(static_cast<double>(h.counts[i])));
    weights.push_back(static_cast<double>(h.counts[i]));
    total_used += static_cast<double>(h.counts[i]);
  }
  if (occupied < 10 || t.size() < 10)
    throw InsufficientData("need at least 10 usable histogram bins");
  for (auto& w : weights) w /= total_used;

  double weighted_sum = 0.0, weight = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    weighted_sum += h.center(i) * static_cast<double>(h.counts[i]);
    weight += static_cast<double>(h.counts[i]);
  }
  const double mean_interval = weighted_sum / weight;
  if (t.back() - t.front() < 3.0 * mean_interval)
    throw InsufficientData("histogram span is shorter than 3 mean intervals");

  const double spacing = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  const double tau_min = 0.05 * spacing;
  const double tau_max = 10.0 * mean_interval;

  // Tail slope -> background seed. The tail decays geometrically with the
  // per-trial background probability once the exponential has died off.
  const std::size_t tail_start = t.size() - std::max<std::size_t>(t.size() / 3, 5);
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0, nt = 0.0;
  for (std::size_t j = tail_start; j < t.size(); ++j) {
    st += t[j]; sl += log_c[j]; stt += t[j] * t[j]; stl += t[j] * log_c[j];
    nt += 1.0;
  }
  const double denom = nt * stt - st * st;
  const double slope = denom > 0.0 ? (nt * stl - st * sl) / denom : 0.0;
  double pb_seed = 1.0 - std::exp(std::min(0.0, slope) * spacing);
  pb_seed = std::clamp(pb_seed, 1e-6, 0.5);

  auto objective = [&](double p0, double tau, double pb) {
    return detail::fit_objective(t, log_c, weights, p0, tau, tau_min, tau_max,
                                 pb);
  };

  // Pure-background reference: golden-section over log(pb).
  double lo = std::log(1e-8), hi = std::log(0.99);
  constexpr double kGolden = 0.6180339887498949;
  double x1 = hi - kGolden * (hi - lo), x2 = lo + kGolden * (hi - lo);
  double f1 = objective(0.0, mean_interval, std::exp(x1));
  double f2 = objective(0.0, mean_interval, std::exp(x2));
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = objective(0.0, mean_interval, std::exp(x1));
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = objective(0.0, mean_interval, std::exp(x2));
    }
  }
  const double pb_background = std::exp(f1 < f2 ? x1 : x2);
  const double background_residual = std::min(f1, f2);

  // Coarse grid over (tau, p0, pb).
  const double tau_lo = std::max(0.5 * spacing, 0.01 * mean_interval);
  const double tau_hi = 3.0 * mean_interval;
  double best_p0 = 0.01, best_tau = mean_interval, best_pb = pb_seed;
  double best = 1e301;
  const std::array<double, 10> p0_grid{0.0005, 0.001, 0.002, 0.005, 0.01,
                                       0.02,   0.05,  0.1,   0.2,   0.4};
  const std::array<double, 5> pb_scale{0.5, 0.75, 1.0, 1.33, 2.0};
  for (int i = 0; i < 40; ++i) {
    const double tau =
        tau_lo * std::pow(tau_hi / tau_lo, static_cast<double>(i) / 39.0);
    for (double p0 : p0_grid) {
      for (double scale : pb_scale) {
        const double pb = std::clamp(pb_seed * scale, 1e-8, 0.9);
        const double s = objective(p0, tau, pb);
        if (s < best) { best = s; best_p0 = p0; best_tau = tau; best_pb = pb; }
      }
    }
  }

  // Simplex refinement in log space, from the grid optimum and from a
  // background-dominated start; keep the better.
  auto log_objective = [&](const std::array<double, 3>& x) {
    return objective(std::exp(x[0]), std::exp(x[1]), std::exp(x[2]));
  };
  auto refine = [&](std::array<double, 3> start) {
    return detail::nelder_mead3(log_objective, start, 0.4, 600);
  };
  const auto cand1 = refine({std::log(best_p0), std::log(best_tau),
                             std::log(best_pb)});
  const auto cand2 = refine({std::log(1e-6), std::log(mean_interval),
                             std::log(pb_background)});
  const double s1 = log_objective(cand1);
  const double s2 = log_objective(cand2);
  const auto& won = s1 <= s2 ? cand1 : cand2;
  const double fitted_residual = std::min(s1, s2);

  if (!std::isfinite(fitted_residual) || fitted_residual >= 1e300 ||
      fitted_residual > background_residual * 1.01)
    throw FitDiverged("refinement did not reach the pure-background residual");

  AfterpulseFit fit;
  if (fitted_residual < 0.5 * background_residual) {
    // The additive decomposition q = pb + amp * exp(-t/tau) of the combined
    // hazard 1 - (1-pb)(1-a) carries amp = (1-pb) * p0; undo that factor so
    // the reported p0 is the per-avalanche after-pulse probability itself.
    const double pb_fit = std::exp(won[2]);
    fit.params =
        AfterpulseParams(std::exp(won[0]) / (1.0 - pb_fit), std::exp(won[1]));
    fit.background = pb_fit;
    fit.residual = fitted_residual;
  } else {
    // No resolvable exponential component.
    fit.params = AfterpulseParams(0.0, mean_interval);
    fit.background = pb_background;
    fit.residual = background_residual;
  }
  return fit;
}

} // namespace homsim
