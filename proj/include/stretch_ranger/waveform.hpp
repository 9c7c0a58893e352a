#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "stretch_ranger/error.hpp"

namespace stretch_ranger {

// Uniformly sampled real time series.
struct Waveform {
  std::vector<double> samples;
  double sample_rate = 0.0;  // Hz
  double t0 = 0.0;           // s, time of samples[0]

  std::size_t size() const { return samples.size(); }
  double dt() const { return 1.0 / sample_rate; }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) / sample_rate; }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  std::span<const double> view() const { return samples; }

  void validate() const {
    require(sample_rate > 0.0 && std::isfinite(sample_rate), ErrorKind::invalid_parameter,
            "waveform sample rate must be positive");
    require(samples.size() >= 2, ErrorKind::invalid_parameter,
            "waveform needs at least two samples");
    for (double v : samples)
      require(std::isfinite(v), ErrorKind::invalid_parameter, "waveform sample is not finite");
  }
};

enum class EnvelopeShape { gaussian, super_gaussian };

// Normalized pulse envelope a_m(t). `order` is the super-Gaussian power m in
// exp(-ln2 * (2|t - center| / fwhm)^(2m)); m = 1 is the Gaussian.
struct Envelope {
  EnvelopeShape shape = EnvelopeShape::gaussian;
  int order = 1;
  double duration_fwhm = 0.0;  // s
  double center = 0.0;         // s
  double peak = 1.0;

  int effective_order() const { return shape == EnvelopeShape::gaussian ? 1 : order; }

  double operator()(double t) const {
    const double u = 2.0 * (t - center) / duration_fwhm;
    const double m = static_cast<double>(effective_order());
    return peak * std::exp(-std::numbers::ln2 * std::pow(u * u, m));
  }

  void validate() const {
    require(duration_fwhm > 0.0 && std::isfinite(duration_fwhm), ErrorKind::invalid_parameter,
            "envelope FWHM must be positive");
    require(effective_order() >= 1, ErrorKind::invalid_parameter,
            "super-Gaussian order must be >= 1");
    require(peak >= 0.0 && std::isfinite(peak), ErrorKind::invalid_parameter,
            "envelope peak must be non-negative");
  }

  // Gaussian standard deviation of a(t), FWHM / sqrt(8 ln 2).
  double gaussian_sigma() const {
    return duration_fwhm / std::sqrt(8.0 * std::numbers::ln2);
  }
};

}  // namespace stretch_ranger
