#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "stretch_ranger/error.hpp"
#include "stretch_ranger/stretch.hpp"
#include "stretch_ranger/sysmodel.hpp"
#include "stretch_ranger/units.hpp"
#include "stretch_ranger/waveform.hpp"

namespace stretch_ranger {

// Depth at or below which the two-line (first-order) model is used.
inline constexpr double kSmallSignalLimit = 0.2;

struct ModulationParams {
  double drive_amplitude = 0.0;    // V_m
  double half_wave_voltage = 1.0;  // V_pi
  double extinction_ratio_db = std::numeric_limits<double>::infinity();

  // beta = pi V_m / V_pi
  double depth() const { return std::numbers::pi * drive_amplitude / half_wave_voltage; }
  bool small_signal(double envelope_peak = 1.0) const {
    return depth() * envelope_peak <= kSmallSignalLimit;
  }

  static ModulationParams from(const ProcessorConfig& p, double drive_scale = 1.0) {
    return {p.drive_amplitude * drive_scale, p.half_wave_voltage, p.extinction_ratio_db};
  }
};

struct SidebandLine {
  double offset = 0.0;     // Hz from the optical carrier
  double amplitude = 0.0;  // sqrt(W), signed
  int order = 0;

  double power() const { return amplitude * amplitude; }
};

struct SidebandSpectrum {
  std::vector<SidebandLine> lines;
  double carrier_power_leak = 0.0;  // W

  double line_power() const {
    double sum = 0.0;
    for (const auto& l : lines) sum += l.power();
    return sum;
  }
  const SidebandLine* find(int order) const {
    for (const auto& l : lines)
      if (l.order == order) return &l;
    return nullptr;
  }
};

enum class ProfileScale { linear_power, linear_db };

struct FilterPoint {
  double offset = 0.0;        // Hz
  double transmission = 0.0;  // power transmission in [0, 1]
};

// Piecewise-linear designed filter D(f), constant beyond the outer
// breakpoints. Symmetric profiles store the non-negative half only.
struct FilterProfile {
  std::vector<FilterPoint> breakpoints;
  bool symmetric = true;
  ProfileScale scale = ProfileScale::linear_power;

  void validate() const {
    require(!breakpoints.empty(), ErrorKind::invalid_parameter, "filter profile has no breakpoints");
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
      const auto& p = breakpoints[i];
      require(std::isfinite(p.offset), ErrorKind::invalid_parameter, "filter offset is not finite");
      require(p.transmission >= 0.0 && p.transmission <= 1.0, ErrorKind::invalid_parameter,
              "filter transmission outside [0, 1]");
      if (scale == ProfileScale::linear_db)
        require(p.transmission > 0.0, ErrorKind::invalid_parameter,
                "dB-linear profile needs strictly positive transmission");
      if (i > 0)
        require(p.offset > breakpoints[i - 1].offset, ErrorKind::invalid_parameter,
                "filter offsets must be strictly increasing");
    }
    if (symmetric)
      require(breakpoints.front().offset >= 0.0, ErrorKind::invalid_parameter,
              "symmetric profile stores non-negative offsets only");
  }

  // Breakpoints over the whole axis, mirrored when symmetric.
  std::vector<FilterPoint> full_breakpoints() const {
    if (!symmetric) return breakpoints;
    std::vector<FilterPoint> out;
    out.reserve(2 * breakpoints.size());
    for (auto it = breakpoints.rbegin(); it != breakpoints.rend(); ++it)
      if (it->offset > 0.0) out.push_back({-it->offset, it->transmission});
    for (const auto& p : breakpoints) out.push_back(p);
    return out;
  }

  double operator()(double offset) const {
    const double f = symmetric ? std::abs(offset) : offset;
    const auto& bp = breakpoints;
    if (f <= bp.front().offset) return bp.front().transmission;
    if (f >= bp.back().offset) return bp.back().transmission;
    const auto hi = std::upper_bound(bp.begin(), bp.end(), f,
                                     [](double v, const FilterPoint& p) { return v < p.offset; });
    const auto lo = hi - 1;
    const double w = (f - lo->offset) / (hi->offset - lo->offset);
    if (scale == ProfileScale::linear_power)
      return lo->transmission + w * (hi->transmission - lo->transmission);
    const double db_lo = 10.0 * std::log10(lo->transmission);
    const double db_hi = 10.0 * std::log10(hi->transmission);
    return std::pow(10.0, (db_lo + w * (db_hi - db_lo)) / 10.0);
  }
};

// |A_m(f)|^2 normalized to unit area. Gaussian envelopes keep the closed
// form; other shapes are tabulated from a numerical cosine transform.
struct EnvelopePowerSpectrum {
  bool gaussian = true;
  double sigma_f = 0.0;  // Hz, Gaussian case
  std::vector<double> frequency;
  std::vector<double> density;

  double operator()(double f) const {
    if (gaussian) {
      const double z = f / sigma_f;
      return std::exp(-0.5 * z * z) / (sigma_f * std::sqrt(2.0 * std::numbers::pi));
    }
    if (f <= frequency.front() || f >= frequency.back()) return 0.0;
    const double step = frequency[1] - frequency[0];
    const double pos = (f - frequency.front()) / step;
    const auto i = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(i);
    return density[i] + w * (density[i + 1] - density[i]);
  }
};

namespace mwp {

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}
// E[max(u - nu, 0)] for nu ~ N(0, sigma^2): a unit ramp smoothed by the spectrum.
inline double smoothed_ramp(double u, double sigma) {
  const double z = u / sigma;
  return u * normal_cdf(z) + sigma * normal_pdf(z);
}

inline std::vector<double> tabulated_axis(double half_width, std::size_t n) {
  std::vector<double> axis(n);
  for (std::size_t i = 0; i < n; ++i)
    axis[i] = -half_width + 2.0 * half_width * static_cast<double>(i) / static_cast<double>(n - 1);
  return axis;
}

}  // namespace detail

inline EnvelopePowerSpectrum power_spectrum(const Envelope& envelope) {
  envelope.validate();
  EnvelopePowerSpectrum s;
  if (envelope.effective_order() == 1) {
    s.gaussian = true;
    // a(t) = exp(-t^2 / (2 s_t^2))  ->  |A(f)|^2 ~ exp(-f^2 / (2 sigma_f^2))
    s.sigma_f = 1.0 / (2.0 * std::numbers::sqrt2 * std::numbers::pi * envelope.gaussian_sigma());
    return s;
  }

  s.gaussian = false;
  const double fwhm = envelope.duration_fwhm;
  const double m = static_cast<double>(envelope.effective_order());
  // a(t) < e^-50 beyond t_max
  const double t_max = 0.5 * fwhm * std::pow(50.0 / std::numbers::ln2, 1.0 / (2.0 * m));
  constexpr std::size_t n_t = 2001;
  constexpr std::size_t n_f = 1025;
  const auto t_axis = detail::tabulated_axis(t_max, n_t);
  const double dt = t_axis[1] - t_axis[0];
  Envelope centered = envelope;
  centered.center = 0.0;
  centered.peak = 1.0;
  std::vector<double> a(n_t);
  for (std::size_t i = 0; i < n_t; ++i) a[i] = centered(t_axis[i]);

  s.frequency = detail::tabulated_axis(16.0 / fwhm, n_f);
  s.density.resize(n_f);
  for (std::size_t j = 0; j < n_f; ++j) {
    const double w = units::two_pi * s.frequency[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < n_t; ++i) {
      const double weight = (i == 0 || i == n_t - 1) ? 0.5 : 1.0;
      acc += weight * a[i] * std::cos(w * t_axis[i]);
    }
    acc *= dt;
    s.density[j] = acc * acc;
  }
  const double df = s.frequency[1] - s.frequency[0];
  double area = 0.0;
  for (std::size_t j = 0; j < n_f; ++j)
    area += ((j == 0 || j == n_f - 1) ? 0.5 : 1.0) * s.density[j];
  area *= df;
  for (auto& d : s.density) d /= area;
  return s;
}

// T(f) = D(f) convolved with the unit-area |A_m(f)|^2.
inline double effective_transmission(const FilterProfile& profile,
                                     const EnvelopePowerSpectrum& spectrum, double offset) {
  if (spectrum.gaussian && profile.scale == ProfileScale::linear_power) {
    const auto pts = profile.full_breakpoints();
    double t = pts.front().transmission;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double slope = (pts[i + 1].transmission - pts[i].transmission) /
                           (pts[i + 1].offset - pts[i].offset);
      if (slope == 0.0) continue;
      t += slope * (detail::smoothed_ramp(offset - pts[i].offset, spectrum.sigma_f) -
                    detail::smoothed_ramp(offset - pts[i + 1].offset, spectrum.sigma_f));
    }
    return t;
  }

  // Trapezoid over the spectrum support.
  std::vector<double> axis;
  std::vector<double> dens;
  if (spectrum.gaussian) {
    axis = detail::tabulated_axis(9.0 * spectrum.sigma_f, 2049);
    dens.reserve(axis.size());
    for (double f : axis) dens.push_back(spectrum(f));
  } else {
    axis = spectrum.frequency;
    dens = spectrum.density;
  }
  double acc = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    const double w = ((i == 0 || i + 1 == axis.size()) ? 0.5 : 1.0) * dens[i];
    acc += w * profile(offset - axis[i]);
    norm += w;
  }
  return acc / norm;
}

inline double effective_transmission(const FilterProfile& profile, const Envelope& envelope,
                                     double offset) {
  return effective_transmission(profile, power_spectrum(envelope), offset);
}

// Jacobi-Anger expansion of sin(beta cos(2 pi f_m t)): odd orders only,
// amplitude (-1)^k J_{2k+1}(beta) at +/-(2k+1) f_m.
inline SidebandSpectrum modulate_exact(double f_m, const ModulationParams& params,
                                       double carrier_power) {
  require(carrier_power >= 0.0, ErrorKind::invalid_parameter, "carrier power must be non-negative");
  const double beta = params.depth();
  require(beta >= 0.0 && std::isfinite(beta), ErrorKind::invalid_parameter,
          "modulation depth must be non-negative");
  SidebandSpectrum spectrum;
  if (std::isfinite(params.extinction_ratio_db))
    spectrum.carrier_power_leak = carrier_power * std::pow(10.0, -params.extinction_ratio_db / 10.0);
  if (beta == 0.0) return spectrum;

  const double root_p = std::sqrt(carrier_power);
  const double j1 = std::cyl_bessel_j(1.0, beta);
  for (int k = 0; k < 200; ++k) {
    const int n = 2 * k + 1;
    const double jn = std::cyl_bessel_j(static_cast<double>(n), beta);
    if (k > 0 && std::abs(jn) < 1e-12 * std::abs(j1)) break;
    const double amp = (k % 2 == 0 ? 1.0 : -1.0) * root_p * jn;
    spectrum.lines.push_back({-n * f_m, amp, -n});
    spectrum.lines.push_back({n * f_m, amp, n});
  }
  return spectrum;
}

// |J1(beta) - beta/2| / J1(beta), the first-order error of the two-line model.
inline double small_signal_discrepancy(double beta) {
  if (beta == 0.0) return 0.0;
  const double j1 = std::cyl_bessel_j(1.0, beta);
  return std::abs(j1 - beta / 2.0) / std::abs(j1);
}

inline SidebandSpectrum modulate_small_signal(double f_m, const ModulationParams& params,
                                              double carrier_power,
                                              double regime_limit = kSmallSignalLimit) {
  const double beta = params.depth();
  if (!(beta <= regime_limit))
    throw Error(ErrorKind::regime_violation,
                "modulation depth " + std::to_string(beta) +
                    " rad is outside the small-signal regime")
        .with_hint(small_signal_discrepancy(beta));
  SidebandSpectrum spectrum;
  if (std::isfinite(params.extinction_ratio_db))
    spectrum.carrier_power_leak = carrier_power * std::pow(10.0, -params.extinction_ratio_db / 10.0);
  if (beta == 0.0) return spectrum;
  const double amp = std::sqrt(carrier_power) * beta / 2.0;
  spectrum.lines.push_back({-f_m, amp, -1});
  spectrum.lines.push_back({f_m, amp, 1});
  return spectrum;
}

// Extinction ratio that puts the leaked carrier `suppression_db` below one
// first-order sideband at depth beta.
inline double extinction_ratio_for_suppression(double beta, double suppression_db) {
  const double j1 = std::cyl_bessel_j(1.0, beta);
  return suppression_db - 10.0 * std::log10(j1 * j1);
}

// Power transmission rising linearly from t_min at the zero-point beat
// frequency to 1 at the beat frequency of `range` (metres).
inline FilterProfile design_symmetric_ramp(double range, const SystemConfig& config,
                                           double t_min = 0.05) {
  require(range > 0.0, ErrorKind::invalid_parameter, "ramp range must be positive");
  require(t_min >= 0.0 && t_min < 1.0, ErrorKind::invalid_parameter, "t_min must be in [0, 1)");
  const double limit = sysmodel::dynamic_range(config);
  if (range > limit * (1.0 + 1e-9))
    throw Error(ErrorKind::out_of_range, "ramp range exceeds the system dynamic range")
        .with_hint(limit);
  const double f_zero = stretch::displacement_to_frequency(0.0, config);
  const double f_top = stretch::displacement_to_frequency(range, config);
  FilterProfile profile;
  profile.symmetric = true;
  profile.breakpoints = {{f_zero, t_min}, {f_top, 1.0}};
  return profile;
}

struct ChannelPair {
  Waveform det;
  Waveform ref;
  double k = 1.0;
  double pulse_period = 0.0;  // s
};

struct ChannelSampling {
  double sample_rate = 1.25e9;  // Hz, channel ADC
  double period = 20e-9;        // s, one pulse record
  int oversample = 16;          // fine grid for the PD low-pass

  static ChannelSampling for_config(const SystemConfig& config) {
    return {config.adc_channels.sample_rate, config.source.period(), 16};
  }
  std::size_t count() const {
    return static_cast<std::size_t>(std::llround(period * sample_rate));
  }
  double t0() const { return -static_cast<double>(count() / 2) / sample_rate; }
};

// Optical powers reaching each PD, split into the part that follows
// a_m^2(t) and the CW carrier leak.
struct ChannelPowers {
  double det_pulsed = 0.0;
  double ref_pulsed = 0.0;
  double det_cw = 0.0;
  double ref_cw = 0.0;
};

inline ChannelPowers channel_powers(const SidebandSpectrum& spectrum, const FilterProfile& profile,
                                    const EnvelopePowerSpectrum& envelope_spectrum) {
  ChannelPowers p;
  for (const auto& line : spectrum.lines) {
    p.ref_pulsed += line.power();
    p.det_pulsed += line.power() * effective_transmission(profile, envelope_spectrum, line.offset);
  }
  p.ref_cw = spectrum.carrier_power_leak;
  if (p.ref_cw > 0.0) p.det_cw = p.ref_cw * effective_transmission(profile, envelope_spectrum, 0.0);
  return p;
}

// a_m^2(t) through the PD2/PD3 single-pole low-pass, sampled at the channel
// rate over one pulse record.
inline Waveform detected_pulse_shape(const Envelope& envelope, double lowpass_bandwidth,
                                     const ChannelSampling& sampling) {
  envelope.validate();
  require(lowpass_bandwidth > 0.0, ErrorKind::invalid_parameter, "PD bandwidth must be positive");
  require(sampling.oversample >= 1, ErrorKind::invalid_parameter, "oversample must be >= 1");
  Waveform out;
  out.sample_rate = sampling.sample_rate;
  out.t0 = sampling.t0();
  const std::size_t n = sampling.count();
  require(n >= 2, ErrorKind::invalid_parameter, "channel record needs at least two samples");
  out.samples.resize(n);

  const double h = 1.0 / (sampling.sample_rate * sampling.oversample);
  const double alpha = 1.0 - std::exp(-units::two_pi * lowpass_bandwidth * h);
  Envelope env = envelope;
  env.center = 0.0;
  auto power = [&](double t) {
    const double a = env(t);
    return a * a;
  };
  double y = power(out.t0);  // settled state at the record start
  for (std::size_t i = 0; i < n; ++i) {
    for (int s = sampling.oversample - 1; s >= 0; --s) {
      const double t = out.time(i) - static_cast<double>(s) * h;
      y += alpha * (power(t) - y);
    }
    out.samples[i] = y;
  }
  return out;
}

inline ChannelPair detect_channels(const SidebandSpectrum& spectrum, const Envelope& envelope,
                                   const FilterProfile& profile, const ProcessorConfig& processor,
                                   const ChannelSampling& sampling) {
  profile.validate();
  const auto powers = channel_powers(spectrum, profile, power_spectrum(envelope));
  const auto shape = detected_pulse_shape(envelope, processor.pd23_bandwidth, sampling);
  const double g_det = processor.transimpedance * processor.coupling_det * processor.responsivity_det;
  const double g_ref = processor.transimpedance * processor.coupling_ref * processor.responsivity_ref;

  ChannelPair pair;
  pair.k = processor.k();
  pair.pulse_period = sampling.period;
  pair.det = shape;
  pair.ref = shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    pair.det.samples[i] = g_det * (powers.det_pulsed * shape.samples[i] + powers.det_cw);
    pair.ref.samples[i] = g_ref * (powers.ref_pulsed * shape.samples[i] + powers.ref_cw);
  }
  return pair;
}

inline ChannelPair detect_channels(const SidebandSpectrum& spectrum, const Envelope& envelope,
                                   const FilterProfile& profile, const SystemConfig& config) {
  return detect_channels(spectrum, envelope, profile, config.processor,
                         ChannelSampling::for_config(config));
}

// Ratio of integrated pulse energies over `window` seconds from the record start.
inline double measure_ratio(const ChannelPair& pair, double window, double energy_floor = 0.0) {
  require(pair.det.size() == pair.ref.size() && pair.det.sample_rate == pair.ref.sample_rate,
          ErrorKind::invalid_parameter, "channels must share sample rate and length");
  require(window >= pair.pulse_period * (1.0 - 1e-9), ErrorKind::invalid_parameter,
          "ratio window must cover at least one pulse");
  const std::size_t n = std::min(
      pair.det.size(), static_cast<std::size_t>(std::llround(window * pair.det.sample_rate)));
  double e_det = 0.0;
  double e_ref = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e_det += pair.det.samples[i];
    e_ref += pair.ref.samples[i];
  }
  e_det *= pair.det.dt();
  e_ref *= pair.ref.dt();
  if (!(e_ref > energy_floor))
    throw Error(ErrorKind::low_signal, "reference channel energy below floor");
  return e_det / e_ref;
}

struct Band {
  double low = 0.0;   // Hz
  double high = 0.0;  // Hz

  static Band for_config(const SystemConfig& config) {
    return {config.processor.bpf_low,
            config.processor.bpf_low + sysmodel::effective_oe_bandwidth(config)};
  }
};

// Amplitude comparison function r(f_m) = k T(f_c + f_m).
inline double acf(double f_m, const FilterProfile& profile,
                  const EnvelopePowerSpectrum& envelope_spectrum, double k, const Band& band) {
  if (f_m < band.low * (1.0 - 1e-9))
    throw Error(ErrorKind::out_of_range, "microwave frequency below band").with_hint(band.low);
  if (f_m > band.high * (1.0 + 1e-9))
    throw Error(ErrorKind::out_of_range, "microwave frequency above band").with_hint(band.high);
  return k * effective_transmission(profile, envelope_spectrum, f_m);
}

inline double acf(double f_m, const FilterProfile& profile, const Envelope& envelope, double k,
                  const Band& band) {
  return acf(f_m, profile, power_spectrum(envelope), k, band);
}

}  // namespace mwp
}  // namespace stretch_ranger
