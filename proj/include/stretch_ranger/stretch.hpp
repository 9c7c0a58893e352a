#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "stretch_ranger/error.hpp"
#include "stretch_ranger/sysmodel.hpp"
#include "stretch_ranger/units.hpp"
#include "stretch_ranger/waveform.hpp"

// Dispersive Fourier transformation: time-stretched pulse frequency, the
// two-arm interferogram it produces, and the delay <-> beat-frequency map.
namespace stretch_ranger::stretch {

using sysmodel::dynamic_range;
using sysmodel::max_delay;

inline double instantaneous_frequency(double t, const FiberDispersion& fiber, double f0) {
  require(fiber.beta2_l != 0.0, ErrorKind::invalid_parameter, "beta2*L must be nonzero");
  const double b2 = fiber.beta2_l;
  return f0 + t / (units::two_pi * b2) -
         fiber.beta3_l * t * t / (2.0 * units::two_pi * b2 * b2 * b2);
}

// Linear and quadratic phase coefficients of the interferogram:
// Phi(t) = angular_rate * t - chirp * t^2.
struct PhaseCoefficients {
  double angular_rate = 0.0;  // rad/s at the envelope center
  double chirp = 0.0;         // rad/s^2
};

inline PhaseCoefficients phase_coefficients(double tau, const FiberDispersion& fiber) {
  const double b2 = fiber.beta2_l;
  const double b2_cubed = b2 * b2 * b2;
  return {tau / b2 - fiber.beta3_l * tau * tau / (2.0 * b2_cubed),
          fiber.beta3_l * tau / b2_cubed};
}

// Argument of the interferogram cosine, read as radians.
inline double interferogram_phase(double t, double tau, const FiberDispersion& fiber) {
  const auto c = phase_coefficients(tau, fiber);
  return (c.angular_rate - c.chirp * t) * t;
}

inline Envelope default_envelope(const SystemConfig& config) {
  Envelope env;
  env.duration_fwhm = sysmodel::stretch_duration(config);
  return env;
}

inline Envelope super_gaussian_envelope(const SystemConfig& config, int order = 4) {
  Envelope env = default_envelope(config);
  env.shape = EnvelopeShape::super_gaussian;
  env.order = order;
  return env;
}

struct TimeGrid {
  double sample_rate = 80e9;  // Hz
  std::size_t count = 1600;

  // One repetition period at the capture instrument's rate.
  static TimeGrid for_config(const SystemConfig& config, double sample_rate = 80e9) {
    return {sample_rate,
            static_cast<std::size_t>(std::llround(config.source.period() * sample_rate))};
  }
  // Symmetric about t = 0, which lands on sample count/2.
  double t0() const { return -static_cast<double>(count / 2) / sample_rate; }
  double t_end() const { return t0() + static_cast<double>(count - 1) / sample_rate; }
};

// Largest beat frequency reached anywhere on the grid; the chirp term makes it
// extreme at one of the two ends.
inline double max_instantaneous_beat(double tau, const FiberDispersion& fiber,
                                     const TimeGrid& grid) {
  const auto c = phase_coefficients(tau, fiber);
  auto at = [&](double t) { return std::abs(c.angular_rate - 2.0 * c.chirp * t) / units::two_pi; };
  return std::max({at(grid.t0()), at(grid.t_end()), at(0.0)});
}

inline Waveform synthesize_interferogram(const StageScenario& scenario, const SystemConfig& config,
                                         Envelope envelope, const TimeGrid& grid) {
  const auto report = sysmodel::validate_config(config);
  if (!report.ok())
    throw Error(ErrorKind::invalid_configuration,
                "configuration fails validation: " + report.violations.front().constraint);
  envelope.validate();
  require(grid.count >= 2 && grid.sample_rate > 0.0, ErrorKind::invalid_parameter,
          "time grid needs a positive rate and at least two samples");

  const double tau = scenario.total_delay();
  const double f_max = max_instantaneous_beat(tau, config.fiber, grid);
  if (grid.sample_rate < 4.0 * f_max * (1.0 - 1e-9))
    throw Error(ErrorKind::aliasing_risk,
                "grid rate " + std::to_string(grid.sample_rate * 1e-9) +
                    " GS/s is below 4x the highest beat frequency " +
                    std::to_string(f_max * 1e-9) + " GHz")
        .with_hint(4.0 * f_max);

  envelope.center = 0.0;
  Waveform w;
  w.sample_rate = grid.sample_rate;
  w.t0 = grid.t0();
  w.samples.resize(grid.count);
  const auto c = phase_coefficients(tau, config.fiber);
  for (std::size_t i = 0; i < grid.count; ++i) {
    const double t = w.time(i);
    w.samples[i] = envelope(t) * std::cos((c.angular_rate - c.chirp * t) * t);
  }
  return w;
}

inline Waveform synthesize_interferogram(const StageScenario& scenario,
                                         const SystemConfig& config) {
  return synthesize_interferogram(scenario, config, default_envelope(config),
                                  TimeGrid::for_config(config));
}

// Center beat frequency for a stage displacement x (metres).
inline double displacement_to_frequency(double x, const StageScenario& scenario,
                                        const SystemConfig& config) {
  StageScenario s = scenario;
  s.displacement = x;
  const double f = sysmodel::beat_frequency(s.total_delay(), config.fiber);
  const double lo = config.processor.bpf_low;
  const double hi = lo + sysmodel::effective_oe_bandwidth(config);
  constexpr double slack = 1e-9;
  if (f < lo * (1.0 - slack))
    throw Error(ErrorKind::out_of_range, "beat frequency below the usable band").with_hint(lo);
  if (f > hi * (1.0 + slack))
    throw Error(ErrorKind::out_of_range, "beat frequency above the usable band").with_hint(hi);
  return f;
}

inline double displacement_to_frequency(double x, const SystemConfig& config) {
  return displacement_to_frequency(x, config.stage, config);
}

// Inverse map, used by the direct-digitization baseline.
inline double frequency_to_displacement(double f, const SystemConfig& config) {
  const double tau = sysmodel::delay_for_beat_frequency(f, config.fiber);
  return (tau - config.stage.reference_delay) * units::speed_of_light / 2.0;
}

// df/dx at displacement x, Hz per metre.
inline double sensitivity(const SystemConfig& config, double x = 0.0) {
  const auto& fib = config.fiber;
  const double tau = config.at(x).total_delay();
  const double b2 = fib.beta2_l;
  const double dfdtau = (1.0 / b2 - fib.beta3_l * tau / (b2 * b2 * b2)) / units::two_pi;
  return dfdtau * 2.0 / units::speed_of_light;
}

}  // namespace stretch_ranger::stretch
