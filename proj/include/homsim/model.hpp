#pragma once

// Phase-averaged Hong-Ou-Mandel interference of two independent
// phase-randomized weak coherent states at a beam splitter, read out by a
// pair of threshold detectors with efficiency and dark counts. Everything in
// this header is a pure function of its value-type inputs.

#include <cmath>
#include <complex>

#include "homsim/errors.hpp"
#include "homsim/math.hpp"

namespace homsim {

// ---------------------------------------------------------------------------
// Domain types. Constructors validate; instances are immutable by convention.
// ---------------------------------------------------------------------------

/// The two input beams: mean photon numbers per pulse and the polarization
/// overlap cos(Phi) = |eps_a . eps_b*| between them.
struct SourcePair {
  double mu_a = 0.0;
  double mu_b = 0.0;
  double cos_phi = 1.0;

  SourcePair() = default;
  SourcePair(double mu_a_, double mu_b_, double cos_phi_ = 1.0)
      : mu_a(mu_a_), mu_b(mu_b_), cos_phi(cos_phi_) {
    if (!(mu_a >= 0.0) || !std::isfinite(mu_a) ||
        !(mu_b >= 0.0) || !std::isfinite(mu_b))
      throw InvalidSourcePair("mean photon numbers must be finite and >= 0");
    if (!(cos_phi >= 0.0 && cos_phi <= 1.0))
      throw InvalidSourcePair("cos_phi must lie in [0, 1]");
  }
};

/// One draw of the two randomized optical phases, radians in [0, 2*pi).
struct PhaseSample {
  double theta_a = 0.0;
  double theta_b = 0.0;

  PhaseSample() = default;
  PhaseSample(double theta_a_, double theta_b_)
      : theta_a(theta_a_), theta_b(theta_b_) {
    if (!(theta_a >= 0.0 && theta_a < kTwoPi) ||
        !(theta_b >= 0.0 && theta_b < kTwoPi))
      throw InvalidPhaseSample("phases must lie in [0, 2*pi)");
  }
};

/// Amplitude transmissivity/reflectivity with t^2 + r^2 = 1 (lossless).
class BeamSplitter {
public:
  /// 50:50 by default.
  BeamSplitter() : t_(std::sqrt(0.5)), r_(std::sqrt(0.5)) {}

  BeamSplitter(double t, double r) : t_(t), r_(r) {
    if (!(t >= 0.0) || !(r >= 0.0) || std::abs(t * t + r * r - 1.0) > 1e-12)
      throw InvalidBeamSplitter("require t, r >= 0 with t^2 + r^2 = 1");
  }

  /// Construct from the intensity transmittance T = t^2, T in (0, 1).
  static BeamSplitter from_transmittance(double transmittance) {
    if (!(transmittance > 0.0 && transmittance < 1.0))
      throw InvalidBeamSplitter("transmittance must lie in (0, 1)");
    return BeamSplitter(std::sqrt(transmittance),
                        std::sqrt(1.0 - transmittance));
  }

  double t() const { return t_; }
  double r() const { return r_; }
  double transmittance() const { return t_ * t_; }
  double reflectance() const { return r_ * r_; }

private:
  double t_, r_;
};

/// Detection efficiencies and per-gate dark-count probabilities of the two
/// threshold detectors at the output ports c and d.
struct DetectorPair {
  double eta_c = 1.0;
  double eta_d = 1.0;
  double dark_c = 0.0;
  double dark_d = 0.0;

  DetectorPair() = default;
  DetectorPair(double eta_c_, double eta_d_, double dark_c_, double dark_d_)
      : eta_c(eta_c_), eta_d(eta_d_), dark_c(dark_c_), dark_d(dark_d_) {
    if (!(eta_c >= 0.0 && eta_c <= 1.0) || !(eta_d >= 0.0 && eta_d <= 1.0))
      throw InvalidDetectorPair("efficiencies must lie in [0, 1]");
    if (!(dark_c >= 0.0 && dark_c < 1.0) || !(dark_d >= 0.0 && dark_d < 1.0))
      throw InvalidDetectorPair("dark-count probabilities must lie in [0, 1)");
  }
};

/// Polarization of one input expressed in the modulator waveguide basis:
/// cos(phi)|TE> + sin(phi) e^{i phase_m}|TM>.
struct PolarizationState {
  double phi = 0.0;
  double phase_m = 0.0;

  PolarizationState() = default;
  PolarizationState(double phi_, double phase_m_)
      : phi(phi_), phase_m(phase_m_) {
    if (!std::isfinite(phi) || !std::isfinite(phase_m))
      throw InvalidPolarizationState("angles must be finite");
  }
};

/// Per-gate click probabilities and the visibility they imply.
struct VisibilityReport {
  double p_coin = 0.0;
  double p_c = 0.0;
  double p_d = 0.0;
  double v_hom = 0.0;
};

struct OutputMeans {
  double mu_c = 0.0;
  double mu_d = 0.0;
};

struct SinglesProbabilities {
  double p_c = 0.0;
  double p_d = 0.0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Mean photon numbers at the output ports for one phase draw:
///
///   mu_c = mu_a t^2 + mu_b r^2 + 2 sqrt(mu_a mu_b) t r cosPhi cos(dtheta)
///   mu_d = mu_a r^2 + mu_b t^2 - (same interference term)
///
/// The sum mu_c + mu_d equals mu_a + mu_b (beam-splitter unitarity); tiny
/// negative rounding of either mean is clamped to zero.
inline OutputMeans output_means(const SourcePair& src, const PhaseSample& ph,
                                const BeamSplitter& bs) {
  const double tt = bs.t() * bs.t();
  const double rr = bs.r() * bs.r();
  const double interference = 2.0 * std::sqrt(src.mu_a * src.mu_b) * bs.t() *
                              bs.r() * src.cos_phi *
                              std::cos(ph.theta_a - ph.theta_b);
  OutputMeans out;
  out.mu_c = std::max(0.0, src.mu_a * tt + src.mu_b * rr + interference);
  out.mu_d = std::max(0.0, src.mu_a * rr + src.mu_b * tt - interference);
  return out;
}

/// P(m photons at c, n photons at d) for fixed output means: the product of
/// two Poisson weights, evaluated in log space so large m, n cannot overflow.
inline double photon_pair_probability(unsigned m, unsigned n, double mu_c,
                                      double mu_d) {
  if (!(mu_c >= 0.0) || !(mu_d >= 0.0))
    throw InvalidArgument("output means must be >= 0");
  if (mu_c == 0.0 && m > 0) return 0.0;
  if (mu_d == 0.0 && n > 0) return 0.0;
  double log_p = -mu_c - mu_d;
  if (m > 0) log_p += m * std::log(mu_c) - log_factorial(m);
  if (n > 0) log_p += n * std::log(mu_d) - log_factorial(n);
  return std::exp(log_p);
}

namespace detail {

/// Phase-independent click factors shared by the averaged probabilities.
/// C and D are the no-click weights of the two detectors; the Bessel
/// arguments carry the interference amplitude.
struct ClickFactors {
  double c_factor, d_factor;
  double arg_c, arg_d, arg_cd;
};

inline ClickFactors click_factors(const SourcePair& src, const BeamSplitter& bs,
                                  const DetectorPair& det) {
  const double tt = bs.t() * bs.t();
  const double rr = bs.r() * bs.r();
  const double amplitude =
      2.0 * std::sqrt(src.mu_a * src.mu_b) * bs.t() * bs.r() * src.cos_phi;
  ClickFactors f{};
  f.c_factor = std::exp(-det.eta_c * (src.mu_a * tt + src.mu_b * rr)) *
               (1.0 - det.dark_c);
  f.d_factor = std::exp(-det.eta_d * (src.mu_a * rr + src.mu_b * tt)) *
               (1.0 - det.dark_d);
  f.arg_c = det.eta_c * amplitude;
  f.arg_d = det.eta_d * amplitude;
  f.arg_cd = (det.eta_c - det.eta_d) * amplitude;
  return f;
}

} // namespace detail

/// Phase-averaged coincidence probability per gate.
///
/// Grouped as p_c * p_d + C D (I0(arg_cd) - I0(arg_c) I0(arg_d)), which is
/// algebraically the familiar 1 - C I0 - D I0 + C D I0 form but avoids the
/// cancellation of order-one terms and makes p_coin factor into p_c * p_d
/// exactly when the interference amplitude vanishes.
inline double coincidence_probability(const SourcePair& src,
                                      const BeamSplitter& bs,
                                      const DetectorPair& det) {
  const auto f = detail::click_factors(src, bs, det);
  const double i0_c = bessel_i0(f.arg_c);
  const double i0_d = bessel_i0(f.arg_d);
  const double i0_cd = bessel_i0(f.arg_cd);
  const double p = (1.0 - f.c_factor * i0_c) * (1.0 - f.d_factor * i0_d) +
                   f.c_factor * f.d_factor * (i0_cd - i0_c * i0_d);
  return std::min(1.0, std::max(0.0, p));
}

/// Phase-averaged per-detector click probabilities.
inline SinglesProbabilities singles_probabilities(const SourcePair& src,
                                                  const BeamSplitter& bs,
                                                  const DetectorPair& det) {
  const auto f = detail::click_factors(src, bs, det);
  SinglesProbabilities s;
  s.p_c = std::min(1.0, std::max(0.0, 1.0 - f.c_factor * bessel_i0(f.arg_c)));
  s.p_d = std::min(1.0, std::max(0.0, 1.0 - f.d_factor * bessel_i0(f.arg_d)));
  return s;
}

/// V = 1 - p_coin / (p_c p_d). Bounded by 1/2 for phase-randomized coherent
/// inputs. Throws DegenerateDenominator when either detector can never click
/// (no light and no dark counts), where the visibility is undefined.
inline VisibilityReport visibility(const SourcePair& src,
                                   const BeamSplitter& bs,
                                   const DetectorPair& det) {
  const auto s = singles_probabilities(src, bs, det);
  if (s.p_c <= 0.0 || s.p_d <= 0.0)
    throw DegenerateDenominator(
        "singles probabilities vanish; visibility undefined");
  VisibilityReport rep;
  rep.p_coin = coincidence_probability(src, bs, det);
  rep.p_c = s.p_c;
  rep.p_d = s.p_d;
  rep.v_hom = 1.0 - rep.p_coin / (rep.p_c * rep.p_d);
  return rep;
}

/// Small-photon-number visibility limit (no dark counts):
///   2 t r mu_a mu_b cos^2(Phi) / ((t mu_a + r mu_b)(r mu_a + t mu_b)).
/// For a 50:50 splitter this reduces to 2 mu_a mu_b cos^2Phi/(mu_a+mu_b)^2,
/// maximal at 1/2 for mu_a = mu_b. Meaningful for mu << 1 and near-balanced
/// splitting; see docs for its scope away from 50:50.
inline double visibility_small_mu(const SourcePair& src,
                                  const BeamSplitter& bs) {
  const double denom = (bs.t() * src.mu_a + bs.r() * src.mu_b) *
                       (bs.r() * src.mu_a + bs.t() * src.mu_b);
  if (denom <= 0.0)
    throw DegenerateDenominator("both mean photon numbers are zero");
  return 2.0 * bs.t() * bs.r() * src.mu_a * src.mu_b * src.cos_phi *
         src.cos_phi / denom;
}

/// Independent oracle for coincidence_probability: numerically averages the
/// fixed-phase coincidence probability
///   (1 - e^{-eta_c mu_c}(1-d_c)) (1 - e^{-eta_d mu_d}(1-d_d))
/// over the two uniform phases. The integrand depends on the phases only
/// through theta_a - theta_b, so the double average collapses to one period
/// of the difference angle; the periodic trapezoid rule then converges
/// spectrally. No Bessel evaluation is involved.
inline double coincidence_probability_quadrature(const SourcePair& src,
                                                 const BeamSplitter& bs,
                                                 const DetectorPair& det,
                                                 unsigned n_nodes = 512) {
  if (n_nodes < 64) throw InvalidArgument("quadrature needs >= 64 nodes");
  double acc = 0.0;
  for (unsigned j = 0; j < n_nodes; ++j) {
    const double delta = kTwoPi * static_cast<double>(j) / n_nodes;
    const auto mu = output_means(src, PhaseSample(delta, 0.0), bs);
    const double no_click_c = std::exp(-det.eta_c * mu.mu_c) * (1.0 - det.dark_c);
    const double no_click_d = std::exp(-det.eta_d * mu.mu_d) * (1.0 - det.dark_d);
    acc += (1.0 - no_click_c) * (1.0 - no_click_d);
  }
  return acc / n_nodes;
}

/// Overlap of two polarization states in the TE/TM waveguide basis:
/// |cos(phi_a) cos(phi_b) + sin(phi_a) sin(phi_b) e^{i dphase}|, clamped into
/// [0, 1] against rounding.
inline double polarization_overlap(const PolarizationState& a,
                                   const PolarizationState& b) {
  const std::complex<double> phase(std::cos(a.phase_m - b.phase_m),
                                   std::sin(a.phase_m - b.phase_m));
  const std::complex<double> dot =
      std::cos(a.phi) * std::cos(b.phi) +
      std::sin(a.phi) * std::sin(b.phi) * phase;
  return std::min(1.0, std::abs(dot));
}

/// Polarization overlap produced by driving the phase modulator at voltage
/// v_g when both inputs sit at 45 degrees to the waveguide axis:
/// cos(Phi) = |cos(pi v_g / (2 v_pi))|. The absolute value keeps the result
/// a valid overlap for drive voltages beyond v_pi.
inline double cos_phi_from_voltage(double v_g, double v_pi) {
  if (!(v_pi > 0.0)) throw InvalidVpi("v_pi must be positive");
  return std::abs(std::cos(kPi * v_g / (2.0 * v_pi)));
}

} // namespace homsim
