#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stretch_ranger/error.hpp"
#include "stretch_ranger/fft.hpp"
#include "stretch_ranger/sysmodel.hpp"
#include "stretch_ranger/units.hpp"
#include "stretch_ranger/waveform.hpp"

namespace stretch_ranger {

enum class EstimateMethod { fft_peak, chirp_fit };

inline const char* to_string(EstimateMethod m) {
  return m == EstimateMethod::fft_peak ? "fft-peak" : "chirp-fit";
}

struct FrequencyEstimate {
  double frequency = 0.0;             // Hz
  double confidence_halfwidth = 0.0;  // Hz
  EstimateMethod method = EstimateMethod::fft_peak;
};

struct DataRateReport {
  double baseline_bytes_per_second = 0.0;
  double channel_bytes_per_second = 0.0;  // one channel
  double channels_bytes_per_second = 0.0; // all channels
  int n_channels = 0;
  double reduction_factor = std::numeric_limits<double>::infinity();
  // Nominal rate often stated for an 80 GS/s, 8-bit scope. Reported beside the
  // computed product as is.
  double quoted_baseline_bytes_per_second = 150e9;
};

namespace dsp {

inline void validate(const AdcSpec& adc) {
  require(adc.sample_rate > 0.0, ErrorKind::invalid_parameter, "ADC sample rate must be positive");
  require(adc.bits >= 4 && adc.bits <= 16, ErrorKind::invalid_parameter, "ADC bits must be in [4, 16]");
  require(adc.full_scale > 0.0, ErrorKind::invalid_parameter, "ADC full scale must be positive");
}

inline double lsb(const AdcSpec& adc) {
  return 2.0 * adc.full_scale / std::ldexp(1.0, adc.bits);
}

// Mid-tread uniform quantizer with two's-complement code range.
inline void quantize(std::span<double> samples, const AdcSpec& adc) {
  const double step = lsb(adc);
  const double lo = -std::ldexp(1.0, adc.bits - 1);
  const double hi = std::ldexp(1.0, adc.bits - 1) - 1.0;
  for (double& v : samples) v = std::clamp(std::nearbyint(v / step), lo, hi) * step;
}

inline void add_gaussian_noise(std::span<double> samples, double rms, std::mt19937_64& rng) {
  if (rms <= 0.0) return;
  std::normal_distribution<double> dist(0.0, rms);
  for (double& v : samples) v += dist(rng);
}

// Linear-interpolation resampling onto a slower grid starting at the same t0.
inline Waveform resample(const Waveform& w, double sample_rate) {
  require(sample_rate > 0.0 && sample_rate <= w.sample_rate, ErrorKind::invalid_parameter,
          "resampling only to an equal or lower rate");
  if (sample_rate == w.sample_rate) return w;
  Waveform out;
  out.sample_rate = sample_rate;
  out.t0 = w.t0;
  const double last = static_cast<double>(w.size() - 1);
  for (std::size_t j = 0;; ++j) {
    const double pos = static_cast<double>(j) * w.sample_rate / sample_rate;
    if (pos > last) break;
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    const double v = i + 1 < w.size()
                         ? w.samples[i] + frac * (w.samples[i + 1] - w.samples[i])
                         : w.samples[i];
    out.samples.push_back(v);
  }
  return out;
}

inline Waveform digitize(const Waveform& w, const AdcSpec& adc, double noise_rms,
                         std::uint64_t seed) {
  validate(adc);
  require(noise_rms >= 0.0, ErrorKind::invalid_parameter, "noise rms must be non-negative");
  require(adc.sample_rate <= w.sample_rate * (1.0 + 1e-12), ErrorKind::invalid_parameter,
          "ADC rate exceeds the waveform rate");
  Waveform out = resample(w, std::min(adc.sample_rate, w.sample_rate));
  std::mt19937_64 rng(seed);
  add_gaussian_noise(out.samples, noise_rms, rng);
  quantize(out.samples, adc);
  return out;
}

namespace detail {

struct Support {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
};

inline Support signal_support(std::span<const double> x, double fraction) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) throw Error(ErrorKind::no_signal, "waveform is identically zero");
  Support s{x.size(), 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) > fraction * peak) {
      s.first = std::min(s.first, i);
      s.last = i;
    }
  }
  return s;
}

}  // namespace detail

// Hann-windowed, zero-padded FFT magnitude peak with three-point parabolic
// refinement on log magnitude.
inline FrequencyEstimate estimate_frequency_fft(const Waveform& w, std::size_t pad_factor = 8) {
  require(w.size() >= 64, ErrorKind::invalid_parameter, "FFT estimator needs at least 64 samples");
  const auto support = detail::signal_support(w.view(), 1e-3);
  const std::size_t len = support.last - support.first + 1;
  require(len >= 4, ErrorKind::no_signal, "signal support too short");

  const std::size_t n_fft = fft::next_pow2(pad_factor * w.size());
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t i = 0; i < len; ++i) {
    const double hann =
        0.5 * (1.0 - std::cos(units::two_pi * static_cast<double>(i) / static_cast<double>(len - 1)));
    buf[i] = hann * w.samples[support.first + i];
  }
  fft::transform<double>(buf);

  const std::size_t half = n_fft / 2;
  std::vector<double> mag(half);
  for (std::size_t k = 0; k < half; ++k) mag[k] = std::abs(buf[k]);
  std::size_t peak = 1;
  for (std::size_t k = 1; k < half - 1; ++k)
    if (mag[k] > mag[peak]) peak = k;

  std::vector<double> sorted(mag.begin() + 1, mag.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                   sorted.end());
  const double median = sorted[sorted.size() / 2];
  if (!(mag[peak] > 3.0 * median) || !(mag[peak] > 0.0))
    throw Error(ErrorKind::no_signal, "no spectral peak above 3x the median magnitude");

  double delta = 0.0;
  const double a = mag[peak - 1];
  const double b = mag[peak];
  const double c = mag[peak + 1];
  if (a > 0.0 && c > 0.0) {
    const double la = std::log(a);
    const double lb = std::log(b);
    const double lc = std::log(c);
    const double denom = la - 2.0 * lb + lc;
    if (denom < 0.0) delta = std::clamp(0.5 * (la - lc) / denom, -0.5, 0.5);
  }
  const double bin = w.sample_rate / static_cast<double>(n_fft);
  return {(static_cast<double>(peak) + delta) * bin, bin, EstimateMethod::fft_peak};
}

// Single-sideband construction on the zero-padded full record.
inline std::vector<std::complex<double>> analytic_signal(std::span<const double> x) {
  const std::size_t n = fft::next_pow2(2 * x.size());
  auto spec = fft::real_forward<double>(x, n);
  for (std::size_t k = 1; k < n / 2; ++k) spec[k] *= 2.0;
  for (std::size_t k = n / 2 + 1; k < n; ++k) spec[k] = 0.0;
  fft::transform<double>(spec, true);
  spec.resize(x.size());
  return spec;
}

// Least-squares fit of the unwrapped analytic phase to
// phi0 + 2 pi f (t - tc) + pi alpha (t - tc)^2 over the half-maximum support.
// The quadratic term is only fitted when the fiber carries third-order dispersion.
inline FrequencyEstimate estimate_frequency_chirp(const Waveform& w, const FiberDispersion& fiber,
                                                  double max_residual_rad = 0.5) {
  require(w.size() >= 64, ErrorKind::invalid_parameter, "chirp estimator needs at least 64 samples");
  const auto z = analytic_signal(w.view());
  std::vector<double> mag(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) mag[i] = std::abs(z[i]);
  const auto peak_it = std::max_element(mag.begin(), mag.end());
  if (!(*peak_it > 0.0)) throw Error(ErrorKind::no_signal, "waveform is identically zero");
  const auto peak = static_cast<std::size_t>(peak_it - mag.begin());
  const double half = 0.5 * *peak_it;
  std::size_t first = peak;
  std::size_t last = peak;
  while (first > 0 && mag[first - 1] >= half) --first;
  while (last + 1 < mag.size() && mag[last + 1] >= half) ++last;
  const std::size_t len = last - first + 1;
  if (len < 16)
    throw Error(ErrorKind::estimation_failure, "half-maximum support too short for a phase fit");

  double wsum = 0.0;
  double tsum = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    const double p = mag[i] * mag[i];
    wsum += p;
    tsum += p * w.time(i);
  }
  const double tc = tsum / wsum;

  std::vector<double> phase(len);
  phase[0] = std::arg(z[first]);
  for (std::size_t i = 1; i < len; ++i) {
    double d = std::arg(z[first + i]) - std::arg(z[first + i - 1]);
    d -= units::two_pi * std::round(d / units::two_pi);
    phase[i] = phase[i - 1] + d;
  }

  const bool quadratic = fiber.beta3_l != 0.0;
  const int cols = quadratic ? 3 : 2;
  // Time scaled to the support half-width keeps the system well conditioned.
  const double scale = 0.5 * static_cast<double>(len) / w.sample_rate;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(len), cols);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(len));
  for (std::size_t i = 0; i < len; ++i) {
    const double u = (w.time(first + i) - tc) / scale;
    const auto r = static_cast<Eigen::Index>(i);
    design(r, 0) = 1.0;
    design(r, 1) = u;
    if (quadratic) design(r, 2) = u * u;
    rhs(r) = phase[i];
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::VectorXd coef = qr.solve(rhs);
  const Eigen::VectorXd resid = rhs - design * coef;
  const double rms = std::sqrt(resid.squaredNorm() / static_cast<double>(len));
  if (!(rms <= max_residual_rad))
    throw Error(ErrorKind::estimation_failure,
                "phase unwrap failed: fit residual " + std::to_string(rms) + " rad");

  const double f = coef(1) / (units::two_pi * scale);
  // Slope standard error from the residual and the design.
  const Eigen::MatrixXd gram = design.transpose() * design;
  const double var_slope = rms * rms * gram.inverse()(1, 1);
  const double halfwidth = std::sqrt(std::max(var_slope, 0.0)) / (units::two_pi * scale);
  return {f, halfwidth, EstimateMethod::chirp_fit};
}

inline double bytes_per_second(const AdcSpec& adc) {
  return adc.sample_rate * static_cast<double>(adc.bits) / 8.0;
}

inline DataRateReport data_rate_report(const AdcSpec& baseline, const AdcSpec& channels,
                                       int n_channels) {
  require(n_channels >= 0, ErrorKind::invalid_parameter, "channel count must be non-negative");
  DataRateReport r;
  r.baseline_bytes_per_second = bytes_per_second(baseline);
  r.channel_bytes_per_second = n_channels > 0 ? bytes_per_second(channels) : 0.0;
  r.n_channels = n_channels;
  r.channels_bytes_per_second = r.channel_bytes_per_second * n_channels;
  r.reduction_factor = r.channels_bytes_per_second > 0.0
                           ? r.baseline_bytes_per_second / r.channels_bytes_per_second
                           : std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace dsp
}  // namespace stretch_ranger
