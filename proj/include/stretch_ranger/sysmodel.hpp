#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "stretch_ranger/error.hpp"
#include "stretch_ranger/units.hpp"

namespace stretch_ranger {

// All fields SI. Human units are converted once, in io.hpp.

struct LaserSource {
  double repetition_rate = 0.0;          // Hz
  double pulse_width = 0.0;              // s
  double center_wavelength = 0.0;        // m, center of the filtered slice
  double filtered_spectral_width = 0.0;  // m
  double average_power = 0.0;            // W

  double period() const { return 1.0 / repetition_rate; }
};

// Only the products with fiber length are kept; L itself never enters.
struct FiberDispersion {
  double total_dispersion = 0.0;  // D*L, s/m
  double beta2_l = 0.0;           // s^2
  double beta3_l = 0.0;           // s^3
};

struct ProcessorConfig {
  double carrier_wavelength = 0.0;  // m
  double carrier_power = 0.0;       // W, P0
  double half_wave_voltage = 0.0;   // V
  double drive_amplitude = 0.0;     // V, microwave amplitude at the modulator
  double extinction_ratio_db = std::numeric_limits<double>::infinity();
  double bpf_low = 0.0;             // Hz
  double bpf_high = 0.0;            // Hz
  double modulator_bandwidth = 0.0; // Hz
  double pd1_bandwidth = 0.0;       // Hz
  double pd23_bandwidth = 0.0;      // Hz
  double coupling_det = 0.0;
  double coupling_ref = 0.0;
  double responsivity_det = 0.0;    // A/W
  double responsivity_ref = 0.0;    // A/W
  double transimpedance = 0.0;      // V/A, PD2/PD3 conversion gain

  // k = c1*R1 / (c2*R2)
  double k() const {
    return (coupling_det * responsivity_det) / (coupling_ref * responsivity_ref);
  }
};

struct AdcSpec {
  double sample_rate = 0.0;  // Hz
  int bits = 8;
  double full_scale = 1.0;  // V, clipping at +/- full_scale
};

struct StageScenario {
  double reference_delay = 0.0;           // s, MZI imbalance at the zero point
  double displacement = 0.0;              // m
  double coupling_decay_per_meter = 0.0;  // relative drive loss per metre

  // Round trip adds twice the displacement.
  double total_delay() const {
    return reference_delay + 2.0 * displacement / units::speed_of_light;
  }
};

struct SystemConfig {
  LaserSource source;
  FiberDispersion fiber;
  ProcessorConfig processor;
  StageScenario stage;
  AdcSpec adc_baseline;
  AdcSpec adc_channels;

  StageScenario at(double displacement) const {
    StageScenario s = stage;
    s.displacement = displacement;
    return s;
  }
};

namespace sysmodel {

// beta2*L = -D*L * lambda^2 / (2 pi c)
inline double derive_beta2_l(double total_dispersion, double wavelength) {
  require(wavelength > 0.0 && std::isfinite(wavelength), ErrorKind::invalid_parameter,
          "wavelength must be positive");
  return -total_dispersion * wavelength * wavelength /
         (units::two_pi * units::speed_of_light);
}

inline FiberDispersion make_fiber(double total_dispersion, double wavelength,
                                  double beta3_l = 0.0) {
  return {total_dispersion, derive_beta2_l(total_dispersion, wavelength), beta3_l};
}

// Usable microwave span: from the BPF low cut to the slowest device.
inline double effective_oe_bandwidth(const SystemConfig& config) {
  const auto& p = config.processor;
  const double top = std::min({p.pd1_bandwidth, p.modulator_bandwidth, p.bpf_high});
  const double span = top - p.bpf_low;
  require(span > 0.0, ErrorKind::invalid_configuration,
          "effective OE bandwidth is empty: slowest device bandwidth does not exceed the BPF low cut");
  return span;
}

inline double stretch_duration(const SystemConfig& config) {
  return std::abs(config.fiber.total_dispersion) * config.source.filtered_spectral_width;
}

// Beat frequency at the envelope center for a total delay tau. Chirp-free it
// reduces to tau / (2 pi beta2 L).
inline double beat_frequency(double tau, const FiberDispersion& fiber) {
  const double b2 = fiber.beta2_l;
  const double b3 = fiber.beta3_l;
  return (tau / b2 - b3 * tau * tau / (2.0 * b2 * b2 * b2)) / units::two_pi;
}

// Inverse of beat_frequency on the branch that contains the chirp-free root.
inline double delay_for_beat_frequency(double frequency, const FiberDispersion& fiber) {
  const double b2 = fiber.beta2_l;
  const double b3 = fiber.beta3_l;
  require(b2 != 0.0, ErrorKind::invalid_parameter, "beta2*L must be nonzero");
  const double linear = units::two_pi * frequency * b2;
  if (b3 == 0.0) return linear;
  // -(b3/(2 b2^3)) tau^2 + tau/b2 - 2 pi f = 0
  const double qa = -b3 / (2.0 * b2 * b2 * b2);
  const double qb = 1.0 / b2;
  const double qc = -units::two_pi * frequency;
  const double disc = qb * qb - 4.0 * qa * qc;
  require(disc >= 0.0, ErrorKind::out_of_range,
          "frequency not reachable with the configured third-order dispersion");
  const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
  return qc / q;
}

inline double zero_point_frequency(const SystemConfig& config) {
  return beat_frequency(config.stage.reference_delay, config.fiber);
}

// tau_max = D*L * lambda^2 * df / c, magnitude.
inline double max_delay(const SystemConfig& config) {
  const double lambda = config.source.center_wavelength;
  return std::abs(config.fiber.total_dispersion) * lambda * lambda *
         effective_oe_bandwidth(config) / units::speed_of_light;
}

inline double dynamic_range(const SystemConfig& config) {
  return units::speed_of_light * max_delay(config) / 2.0;
}

struct Violation {
  std::string constraint;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  // Derived quantities, NaN when they could not be computed.
  double beta2_l = std::numeric_limits<double>::quiet_NaN();
  double oe_bandwidth = std::numeric_limits<double>::quiet_NaN();
  double stretch_duration = std::numeric_limits<double>::quiet_NaN();
  double pulse_period = std::numeric_limits<double>::quiet_NaN();
  double zero_point_frequency = std::numeric_limits<double>::quiet_NaN();
  double max_delay = std::numeric_limits<double>::quiet_NaN();
  double dynamic_range = std::numeric_limits<double>::quiet_NaN();

  bool ok() const { return violations.empty(); }
  bool violates(const std::string& constraint) const {
    for (const auto& v : violations)
      if (v.constraint == constraint) return true;
    return false;
  }
};

namespace detail {
inline bool positive(double v) { return std::isfinite(v) && v > 0.0; }
// Relative slack for quantities that are back-computed to sit exactly on a bound.
inline constexpr double kBoundSlack = 1e-9;
}  // namespace detail

// Never clamps; every violated constraint is listed.
inline ValidationReport validate_config(const SystemConfig& config) {
  using detail::positive;
  ValidationReport report;
  auto fail = [&](std::string constraint, std::string message) {
    report.violations.push_back({std::move(constraint), std::move(message)});
  };

  const auto& src = config.source;
  if (!positive(src.repetition_rate)) fail("source.repetition_rate", "must be positive");
  if (!positive(src.pulse_width)) fail("source.pulse_width", "must be positive");
  if (!positive(src.center_wavelength)) fail("source.center_wavelength", "must be positive");
  if (!positive(src.filtered_spectral_width))
    fail("source.filtered_spectral_width", "must be positive");
  if (!positive(src.average_power)) fail("source.average_power", "must be positive");

  const auto& fib = config.fiber;
  if (!std::isfinite(fib.beta2_l) || fib.beta2_l == 0.0) {
    fail("fiber.beta2_l", "must be finite and nonzero");
  } else if (positive(src.center_wavelength)) {
    const double expected = derive_beta2_l(fib.total_dispersion, src.center_wavelength);
    if (std::abs(expected - fib.beta2_l) > 1e-9 * std::abs(expected))
      fail("fiber.beta2_l", "inconsistent with total dispersion at the source wavelength");
    report.beta2_l = fib.beta2_l;
  }
  if (!std::isfinite(fib.beta3_l)) fail("fiber.beta3_l", "must be finite");

  const auto& p = config.processor;
  if (!positive(p.carrier_wavelength)) fail("processor.carrier_wavelength", "must be positive");
  if (!positive(p.carrier_power)) fail("processor.carrier_power", "must be positive");
  if (!positive(p.half_wave_voltage)) fail("processor.half_wave_voltage", "must be positive");
  if (!(p.drive_amplitude >= 0.0) || !std::isfinite(p.drive_amplitude))
    fail("processor.drive_amplitude", "must be non-negative");
  if (!(p.extinction_ratio_db > 0.0)) fail("processor.extinction_ratio_db", "must be positive or infinite");
  if (!(p.bpf_low >= 0.0) || !(p.bpf_low < p.bpf_high))
    fail("processor.bpf", "requires 0 <= bpf_low < bpf_high");
  if (!positive(p.modulator_bandwidth)) fail("processor.modulator_bandwidth", "must be positive");
  if (!positive(p.pd1_bandwidth)) fail("processor.pd1_bandwidth", "must be positive");
  if (!positive(p.pd23_bandwidth)) fail("processor.pd23_bandwidth", "must be positive");
  if (!positive(p.transimpedance)) fail("processor.transimpedance", "must be positive");
  if (!positive(p.k())) fail("processor.k", "c1*R1/(c2*R2) must be finite and positive");

  for (const auto* adc : {&config.adc_baseline, &config.adc_channels}) {
    const std::string name = adc == &config.adc_baseline ? "adc_baseline" : "adc_channels";
    if (!positive(adc->sample_rate)) fail(name + ".sample_rate", "must be positive");
    if (adc->bits < 4 || adc->bits > 16) fail(name + ".bits", "must be in [4, 16]");
    if (!positive(adc->full_scale)) fail(name + ".full_scale", "must be positive");
  }

  double band = std::numeric_limits<double>::quiet_NaN();
  try {
    band = effective_oe_bandwidth(config);
    report.oe_bandwidth = band;
  } catch (const Error& e) {
    fail("oe_bandwidth", e.what());
  }

  report.stretch_duration = stretch_duration(config);
  if (positive(src.repetition_rate)) {
    report.pulse_period = src.period();
    if (!(report.stretch_duration < report.pulse_period))
      fail("pulse_overlap", "stretched pulse (" + std::to_string(report.stretch_duration * 1e9) +
                                " ns) does not fit in the repetition period (" +
                                std::to_string(report.pulse_period * 1e9) + " ns)");
  }

  if (std::isfinite(report.beta2_l) && std::isfinite(band)) {
    const double f0 = zero_point_frequency(config);
    report.zero_point_frequency = f0;
    const double lo = p.bpf_low * (1.0 - detail::kBoundSlack);
    const double hi = (p.bpf_low + band) * (1.0 + detail::kBoundSlack);
    if (!(f0 >= lo && f0 <= hi))
      fail("zero_point_frequency", "zero-point frequency " + std::to_string(f0 * 1e-9) +
                                       " GHz lies outside the usable band");
    if (positive(src.center_wavelength)) {
      report.max_delay = max_delay(config);
      report.dynamic_range = dynamic_range(config);
    }
  }

  const auto& st = config.stage;
  if (!std::isfinite(st.reference_delay)) fail("stage.reference_delay", "must be finite");
  if (!(st.displacement >= 0.0)) fail("stage.displacement", "must be non-negative");
  if (!(st.coupling_decay_per_meter >= 0.0))
    fail("stage.coupling_decay_per_meter", "must be non-negative");
  if (std::isfinite(report.max_delay) &&
      2.0 * st.displacement / units::speed_of_light >
          report.max_delay * (1.0 + detail::kBoundSlack))
    fail("stage.displacement", "round-trip delay exceeds the maximum delay");

  return report;
}

// Reference system. Carrier power, V_pi, drive level, coupling, responsivity
// and conversion gain are filled-in values; data/reference_system.json
// carries the same numbers.
inline SystemConfig reference_configuration() {
  using namespace units;
  SystemConfig cfg;
  cfg.source.repetition_rate = from_mhz(50.0);
  cfg.source.pulse_width = from_fs(93.0);
  cfg.source.center_wavelength = from_nm(1553.0);
  cfg.source.filtered_spectral_width = from_nm(8.2);
  cfg.source.average_power = from_mw(30.0);

  cfg.fiber = make_fiber(from_ps_per_nm(-2298.0), cfg.source.center_wavelength, 0.0);

  auto& p = cfg.processor;
  p.carrier_wavelength = from_nm(1548.495);
  p.carrier_power = from_mw(10.0);
  p.half_wave_voltage = 5.0;
  p.drive_amplitude = 0.25;
  p.bpf_low = from_ghz(2.3);
  p.bpf_high = from_ghz(26.5);
  p.modulator_bandwidth = from_ghz(20.0);
  p.pd1_bandwidth = from_ghz(25.0);
  p.pd23_bandwidth = from_mhz(350.0);
  p.coupling_det = 0.5;
  p.coupling_ref = 0.5;
  p.responsivity_det = 0.95;
  p.responsivity_ref = 0.9;
  p.transimpedance = 1.0e4;

  cfg.stage.reference_delay = delay_for_beat_frequency(p.bpf_low, cfg.fiber);
  cfg.stage.coupling_decay_per_meter = 0.5;  // 0.5 % per cm

  cfg.adc_baseline = {80e9, 8, 1.25};
  cfg.adc_channels = {1.25e9, 12, 1.0};
  return cfg;
}

}  // namespace sysmodel
}  // namespace stretch_ranger
