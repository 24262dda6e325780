#pragma once

// Time-tag streams: gate openings and detection events of the two detectors,
// timestamped in 81-ps ticks. Covers the text serialization, parsing with
// positioned errors, and coincidence extraction over paired gates.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "homsim/errors.hpp"

namespace homsim {

/// Time-interval-analyzer resolution.
inline constexpr double kTickSeconds = 81e-12;

enum class Channel : std::uint8_t { GateC = 0, GateD = 1, DetC = 2, DetD = 3 };

inline constexpr std::string_view channel_code(Channel ch) {
  switch (ch) {
    case Channel::GateC: return "GC";
    case Channel::GateD: return "GD";
    case Channel::DetC: return "DC";
    case Channel::DetD: return "DD";
  }
  return "??";
}

struct TimeTagRecord {
  Channel channel = Channel::GateC;
  std::uint64_t ticks = 0;

  bool operator==(const TimeTagRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Serialization: one record per line, `<channel>,<ticks>`, `#` comments,
// with a header comment recording the tick duration.
// ---------------------------------------------------------------------------

inline void write_timetags(std::ostream& os,
                           std::span<const TimeTagRecord> records) {
  os << "# tick_ps=81\n";
  char buf[32];
  for (const auto& rec : records) {
    const auto code = channel_code(rec.channel);
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), rec.ticks);
    os.write(code.data(), static_cast<std::streamsize>(code.size()));
    os.put(',');
    os.write(buf, end - buf);
    os.put('\n');
  }
}

struct ParsedTimeTags {
  std::vector<TimeTagRecord> records;
  double tick_ps = 81.0;

  double tick_seconds() const { return tick_ps * 1e-12; }
};

/// Parses a time-tag stream. Malformed lines raise ParseError carrying the
/// byte offset of the line; so does a timestamp running backwards within a
/// channel. Comment lines are skipped, except that a `# tick_ps=` header
/// updates the reported tick duration.
inline ParsedTimeTags parse_timetags(std::istream& is) {
  ParsedTimeTags out;
  std::uint64_t last_ticks[4] = {0, 0, 0, 0};
  bool seen[4] = {false, false, false, false};
  std::string line;
  std::size_t offset = 0;
  while (std::getline(is, line)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string_view key = "# tick_ps=";
      if (line.rfind(key, 0) == 0) {
        try {
          out.tick_ps = std::stod(line.substr(key.size()));
        } catch (const std::exception&) {
          throw ParseError(line_offset, "malformed tick_ps header");
        }
        if (!(out.tick_ps > 0.0))
          throw ParseError(line_offset, "tick_ps must be positive");
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError(line_offset, "expected '<channel>,<ticks>'");
    const std::string_view code(line.data(), comma);
    Channel ch;
    if (code == "GC") ch = Channel::GateC;
    else if (code == "GD") ch = Channel::GateD;
    else if (code == "DC") ch = Channel::DetC;
    else if (code == "DD") ch = Channel::DetD;
    else
      throw ParseError(line_offset,
                       "unknown channel code '" + std::string(code) + "'");
    std::uint64_t ticks = 0;
    const char* first = line.data() + comma + 1;
    const char* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, ticks, 10);
    if (ec != std::errc() || ptr != last)
      throw ParseError(line_offset, "malformed tick count '" +
                                        line.substr(comma + 1) + "'");
    const auto idx = static_cast<std::size_t>(ch);
    if (seen[idx] && ticks < last_ticks[idx])
      throw ParseError(line_offset,
                       "timestamp regression on channel " + std::string(code));
    last_ticks[idx] = ticks;
    seen[idx] = true;
    out.records.push_back({ch, ticks});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coincidence extraction
// ---------------------------------------------------------------------------

/// Tallies over paired (coinciding) gates. Probabilities are counts divided
/// by the number of coinciding gates; detections that fall outside every gate
/// of their channel are reported as diagnostics, not errors.
struct CoincidenceReport {
  std::uint64_t coinciding_gates = 0;
  std::uint64_t coincidences = 0;
  std::uint64_t singles_c = 0;
  std::uint64_t singles_d = 0;
  std::uint64_t outside_gate_c = 0;
  std::uint64_t outside_gate_d = 0;
  double p_coin_emp = 0.0;
  double p_c_emp = 0.0;
  double p_d_emp = 0.0;
  double v_hom_emp = 0.0;
};

namespace detail {

/// First detection time inside each gate of one channel, following the rule
/// that a detection belongs to the most recent gate opening at or before it.
/// Returns one optional-like slot per gate (ticks, or kNone when empty).
inline constexpr std::uint64_t kNoDetection = ~std::uint64_t{0};

inline void attach_detections(const std::vector<std::uint64_t>& gates,
                              const std::vector<std::uint64_t>& dets,
                              std::uint64_t width_ticks,
                              std::vector<std::uint64_t>& first_det,
                              std::uint64_t& outside) {
  first_det.assign(gates.size(), kNoDetection);
  outside = 0;
  std::size_t g = 0;
  for (const auto t : dets) {
    while (g + 1 < gates.size() && gates[g + 1] <= t) ++g;
    if (gates.empty() || t < gates[g] || t - gates[g] > width_ticks) {
      ++outside;
      continue;
    }
    if (first_det[g] == kNoDetection) first_det[g] = t;
  }
}

} // namespace detail

/// Pairs the gate openings of the two detectors (opens within pair_window of
/// each other coincide), attributes detections to gates, and counts singles
/// and coincidences over the paired gates only. A coincidence requires
/// detections on both channels no further apart than coincidence_window.
/// All windows are in seconds; `tick_seconds` converts the record clock.
inline CoincidenceReport extract_coincidences(
    std::span<const TimeTagRecord> records, double gate_width,
    double pair_window, double coincidence_window,
    double tick_seconds = kTickSeconds) {
  if (!(gate_width > 0.0) || !(pair_window > 0.0) ||
      !(coincidence_window > 0.0))
    throw InvalidArgument("windows must be positive");

  std::vector<std::uint64_t> gates_c, gates_d, dets_c, dets_d;
  for (const auto& rec : records) {
    switch (rec.channel) {
      case Channel::GateC: gates_c.push_back(rec.ticks); break;
      case Channel::GateD: gates_d.push_back(rec.ticks); break;
      case Channel::DetC: dets_c.push_back(rec.ticks); break;
      case Channel::DetD: dets_d.push_back(rec.ticks); break;
    }
  }
  for (const auto* v : {&gates_c, &gates_d, &dets_c, &dets_d})
    for (std::size_t i = 1; i < v->size(); ++i)
      if ((*v)[i] < (*v)[i - 1])
        throw InvalidArgument("records must be time-ordered per channel");

  const auto to_ticks = [&](double seconds) {
    return static_cast<std::uint64_t>(seconds / tick_seconds * (1.0 + 1e-12));
  };
  const std::uint64_t width_ticks = to_ticks(gate_width);
  const std::uint64_t pair_ticks = to_ticks(pair_window);
  const std::uint64_t coin_ticks = to_ticks(coincidence_window);

  std::vector<std::uint64_t> first_c, first_d;
  CoincidenceReport rep;
  detail::attach_detections(gates_c, dets_c, width_ticks, first_c,
                            rep.outside_gate_c);
  detail::attach_detections(gates_d, dets_d, width_ticks, first_d,
                            rep.outside_gate_d);

  // Greedy pairing of gate openings in time order.
  std::size_t i = 0, j = 0;
  while (i < gates_c.size() && j < gates_d.size()) {
    const std::uint64_t tc = gates_c[i], td = gates_d[j];
    const std::uint64_t gap = tc > td ? tc - td : td - tc;
    if (gap <= pair_ticks) {
      ++rep.coinciding_gates;
      const bool has_c = first_c[i] != detail::kNoDetection;
      const bool has_d = first_d[j] != detail::kNoDetection;
      if (has_c) ++rep.singles_c;
      if (has_d) ++rep.singles_d;
      if (has_c && has_d) {
        const std::uint64_t dc = first_c[i], dd = first_d[j];
        const std::uint64_t dt = dc > dd ? dc - dd : dd - dc;
        if (dt <= coin_ticks) ++rep.coincidences;
      }
      ++i;
      ++j;
    } else if (tc < td) {
      ++i;
    } else {
      ++j;
    }
  }

  if (rep.coinciding_gates == 0)
    throw NoGates("no coinciding gate pairs; empirical rates undefined");

  const double n = static_cast<double>(rep.coinciding_gates);
  rep.p_coin_emp = static_cast<double>(rep.coincidences) / n;
  rep.p_c_emp = static_cast<double>(rep.singles_c) / n;
  rep.p_d_emp = static_cast<double>(rep.singles_d) / n;
  const double denom = rep.p_c_emp * rep.p_d_emp;
  rep.v_hom_emp = denom > 0.0 ? 1.0 - rep.p_coin_emp / denom : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline void write_report_kv(std::ostream& os, const CoincidenceReport& r) {
  char buf[256];
  os << "coinciding_gates = " << r.coinciding_gates << '\n'
     << "coincidences     = " << r.coincidences << '\n'
     << "singles_c        = " << r.singles_c << '\n'
     << "singles_d        = " << r.singles_d << '\n'
     << "outside_gate_c   = " << r.outside_gate_c << '\n'
     << "outside_gate_d   = " << r.outside_gate_d << '\n';
  std::snprintf(buf, sizeof(buf),
                "p_coin_emp       = %.10g\np_c_emp          = %.10g\n"
                "p_d_emp          = %.10g\nv_hom_emp        = %.10g\n",
                r.p_coin_emp, r.p_c_emp, r.p_d_emp, r.v_hom_emp);
  os << buf;
}

inline void write_report_csv(std::ostream& os, const CoincidenceReport& r) {
  char buf[512];
  os << "coinciding_gates,coincidences,singles_c,singles_d,outside_gate_c,"
        "outside_gate_d,p_coin_emp,p_c_emp,p_d_emp,v_hom_emp\n";
  std::snprintf(buf, sizeof(buf),
                "%llu,%llu,%llu,%llu,%llu,%llu,%.10g,%.10g,%.10g,%.10g\n",
                static_cast<unsigned long long>(r.coinciding_gates),
                static_cast<unsigned long long>(r.coincidences),
                static_cast<unsigned long long>(r.singles_c),
                static_cast<unsigned long long>(r.singles_d),
                static_cast<unsigned long long>(r.outside_gate_c),
                static_cast<unsigned long long>(r.outside_gate_d),
                r.p_coin_emp, r.p_c_emp, r.p_d_emp, r.v_hom_emp);
  os << buf;
}

} // namespace homsim
