#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "stretch_ranger/calib.hpp"
#include "stretch_ranger/dsp.hpp"
#include "stretch_ranger/error.hpp"
#include "stretch_ranger/mwphotonics.hpp"
#include "stretch_ranger/stretch.hpp"
#include "stretch_ranger/sysmodel.hpp"
#include "stretch_ranger/units.hpp"

namespace stretch_ranger {

struct NoiseModel {
  double det_noise_rms = 0.0;  // relative to the zero-point reference pulse peak
  double ref_noise_rms = 0.0;  // relative to the zero-point reference pulse peak
  double power_jitter_rms = 0.0;   // relative, per pulse, common to both channels
  double drive_jitter_rms = 0.0;   // relative microwave amplitude, per pulse
  double drift_rms_per_point = 0.0;  // additive transmission offset per displacement point
  double interferogram_noise_rms = 0.0;  // direct-digitization path, relative to peak
  bool adc_quantization = true;
  std::uint64_t seed = 1;

  static NoiseModel none() {
    NoiseModel n;
    n.adc_quantization = false;
    return n;
  }

  NoiseModel scaled(double factor) const {
    NoiseModel n = *this;
    n.det_noise_rms *= factor;
    n.ref_noise_rms *= factor;
    n.power_jitter_rms *= factor;
    n.drive_jitter_rms *= factor;
    n.drift_rms_per_point *= factor;
    n.interferogram_noise_rms *= factor;
    return n;
  }

  void validate() const {
    for (double v : {det_noise_rms, ref_noise_rms, power_jitter_rms, drive_jitter_rms,
                     drift_rms_per_point, interferogram_noise_rms})
      require(v >= 0.0 && std::isfinite(v), ErrorKind::invalid_parameter,
              "noise rms values must be non-negative");
  }
};

struct PointRecord {
  double true_mm = 0.0;
  double mean_retrieved_mm = 0.0;
  double std_mm = 0.0;
  double mean_error_mm = 0.0;  // signed, mean retrieved - true
  double mean_transmission = 0.0;
  double std_transmission = 0.0;
  double predicted_std_mm = 0.0;  // std_transmission / |dy/dx| from the curve
  int n_ok = 0;
  int n_failed = 0;
  std::vector<std::string> failures;  // distinct failure descriptions
};

struct MeasurementReport {
  std::string filter_name;
  double filter_range_mm = 0.0;
  std::vector<PointRecord> points;
  double overall_std_mm = 0.0;         // RMS of per-point standard deviations
  double overall_mean_error_mm = 0.0;  // RMS of per-point mean errors
  double update_rate = 0.0;            // Hz
  double window = 0.0;                 // s, averaging window per measurement
  int pulses_averaged = 0;
  int repeats = 0;
  int n_failed = 0;
  std::string aggregation =
      "overall values are root-mean-square over per-displacement standard deviations and mean errors";
};

struct MeasurementOutcome {
  double transmission = 0.0;
  std::optional<double> retrieved_mm;
  int n_pulses = 0;
  double window = 0.0;  // s
};

namespace runner {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Independent stream for a cell, identical whatever the worker layout.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = detail::splitmix64(seed);
  s = detail::splitmix64(s ^ a);
  s = detail::splitmix64(s ^ b);
  return detail::splitmix64(s ^ c);
}

// Stream tags.
inline constexpr std::uint64_t kCalibrationStream = 0xCA11;
inline constexpr std::uint64_t kCampaignStream = 0xCA4E;
inline constexpr std::uint64_t kDriftStream = 0xD21F;
inline constexpr std::uint64_t kBaselineStream = 0xBA5E;

inline unsigned resolve_jobs(int jobs) {
  if (jobs > 0) return static_cast<unsigned>(jobs);
  return std::max(1u, std::thread::hardware_concurrency());
}

// Run task(i) for i in [0, n) on up to `jobs` workers. Results must be written
// to per-index slots by the task.
template <typename Task>
void parallel_for(std::size_t n, int jobs, Task&& task) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_jobs(jobs), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) task(i);
    });
}

// Everything about a (configuration, filter, envelope) triple that does not
// depend on the displacement.
struct MeasurementSetup {
  SystemConfig config;
  FilterProfile filter;
  Envelope envelope;
  EnvelopePowerSpectrum envelope_spectrum;
  mwp::ChannelSampling sampling;
  Waveform pulse_shape;  // low-passed a_m^2 over one pulse record
  double noise_reference_peak = 0.0;  // V, noiseless reference peak at the zero point
  std::string filter_name;
  double filter_range_mm = 0.0;

  static MeasurementSetup make(const SystemConfig& config, FilterProfile filter,
                               std::optional<Envelope> envelope = std::nullopt) {
    const auto report = sysmodel::validate_config(config);
    if (!report.ok())
      throw Error(ErrorKind::invalid_configuration,
                  "configuration fails validation: " + report.violations.front().constraint +
                      " (" + report.violations.front().message + ")")
          .with_stage("setup");
    filter.validate();
    MeasurementSetup s;
    s.config = config;
    s.filter = std::move(filter);
    s.envelope = envelope.value_or(stretch::default_envelope(config));
    s.envelope.center = 0.0;
    s.envelope_spectrum = mwp::power_spectrum(s.envelope);
    s.sampling = mwp::ChannelSampling::for_config(config);
    s.pulse_shape =
        mwp::detected_pulse_shape(s.envelope, config.processor.pd23_bandwidth, s.sampling);

    const auto spectrum = mwp::modulate_exact(config.processor.bpf_low,
                                              ModulationParams::from(config.processor),
                                              config.processor.carrier_power);
    const auto& p = config.processor;
    const double g_ref = p.transimpedance * p.coupling_ref * p.responsivity_ref;
    const double peak_shape = *std::max_element(s.pulse_shape.samples.begin(),
                                                s.pulse_shape.samples.end());
    s.noise_reference_peak =
        g_ref * (spectrum.line_power() * peak_shape + spectrum.carrier_power_leak);
    return s;
  }
};

namespace detail {

inline double drive_scale(const SystemConfig& config, double x) {
  return std::max(0.0, 1.0 - config.stage.coupling_decay_per_meter * x);
}

// Rethrow with the pipeline stage attached.
template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (Error& e) {
    if (e.stage().empty()) e.with_stage(stage);
    throw;
  }
}

}  // namespace detail

// One averaged measurement at displacement x (metres): n_pulses pulses go
// through modulation, filtering, two-channel detection and channel-ADC
// digitization; their energy ratio is inverted through `curve` when given.
inline MeasurementOutcome simulate_measurement(const MeasurementSetup& setup, double x,
                                               const CalibrationCurve* curve,
                                               const NoiseModel& noise, int n_pulses,
                                               std::uint64_t seed, double drift = 0.0) {
  require(n_pulses >= 1, ErrorKind::invalid_parameter, "need at least one pulse");
  const auto& cfg = setup.config;
  const auto& proc = cfg.processor;

  const double f_m = detail::staged("stretch", [&] {
    if (x < 0.0 || x > sysmodel::dynamic_range(cfg) * (1.0 + 1e-9))
      throw Error(ErrorKind::out_of_range, "displacement outside the dynamic range")
          .with_hint(x < 0.0 ? 0.0 : units::to_mm(sysmodel::dynamic_range(cfg)));
    return stretch::displacement_to_frequency(x, cfg);
  });

  const double scale = detail::drive_scale(cfg, x);
  const auto nominal = detail::staged("modulation", [&] {
    return mwp::modulate_exact(f_m, ModulationParams::from(proc, scale), proc.carrier_power);
  });

  // Per-line transmissions do not depend on the drive level.
  std::vector<double> line_t(nominal.lines.size());
  for (std::size_t i = 0; i < line_t.size(); ++i)
    line_t[i] = mwp::effective_transmission(setup.filter, setup.envelope_spectrum,
                                            nominal.lines[i].offset);
  const double leak_t = nominal.carrier_power_leak > 0.0
                            ? mwp::effective_transmission(setup.filter, setup.envelope_spectrum, 0.0)
                            : 0.0;

  const double g_det = proc.transimpedance * proc.coupling_det * proc.responsivity_det;
  const double g_ref = proc.transimpedance * proc.coupling_ref * proc.responsivity_ref;
  const double beta0 = ModulationParams::from(proc, scale).depth();
  const double sigma_det = noise.det_noise_rms * setup.noise_reference_peak;
  const double sigma_ref = noise.ref_noise_rms * setup.noise_reference_peak;

  std::mt19937_64 rng_det(derive_seed(seed, 1));
  std::mt19937_64 rng_ref(derive_seed(seed, 2));
  std::mt19937_64 rng_jit(derive_seed(seed, 3));
  std::normal_distribution<double> unit(0.0, 1.0);

  const auto& shape = setup.pulse_shape.samples;
  const std::size_t per_pulse = shape.size();
  mwp::ChannelPair pair;
  pair.k = proc.k();
  pair.pulse_period = setup.sampling.period;
  pair.det.sample_rate = pair.ref.sample_rate = setup.sampling.sample_rate;
  pair.det.t0 = pair.ref.t0 = setup.pulse_shape.t0;
  pair.det.samples.resize(per_pulse * static_cast<std::size_t>(n_pulses));
  pair.ref.samples.resize(pair.det.samples.size());

  const double leak = nominal.carrier_power_leak;
  double det_pulsed = 0.0;
  double ref_pulsed = 0.0;
  for (std::size_t i = 0; i < nominal.lines.size(); ++i) {
    ref_pulsed += nominal.lines[i].power();
    det_pulsed += nominal.lines[i].power() * line_t[i];
  }

  for (int p = 0; p < n_pulses; ++p) {
    const double power_gain =
        noise.power_jitter_rms > 0.0 ? 1.0 + noise.power_jitter_rms * unit(rng_jit) : 1.0;
    double det_p = det_pulsed;
    double ref_p = ref_pulsed;
    if (noise.drive_jitter_rms > 0.0) {
      const double beta = beta0 * (1.0 + noise.drive_jitter_rms * unit(rng_jit));
      det_p = 0.0;
      ref_p = 0.0;
      for (std::size_t i = 0; i < nominal.lines.size(); ++i) {
        const double j = std::cyl_bessel_j(static_cast<double>(std::abs(nominal.lines[i].order)),
                                           std::abs(beta));
        const double pw = proc.carrier_power * j * j;
        ref_p += pw;
        det_p += pw * line_t[i];
      }
    }
    const std::size_t off = static_cast<std::size_t>(p) * per_pulse;
    for (std::size_t i = 0; i < per_pulse; ++i) {
      pair.det.samples[off + i] = g_det * power_gain * (det_p * shape[i] + leak * leak_t);
      pair.ref.samples[off + i] = g_ref * power_gain * (ref_p * shape[i] + leak);
    }
  }

  std::span<double> det_all(pair.det.samples);
  std::span<double> ref_all(pair.ref.samples);
  dsp::add_gaussian_noise(det_all, sigma_det, rng_det);
  dsp::add_gaussian_noise(ref_all, sigma_ref, rng_ref);
  if (noise.adc_quantization) {
    dsp::quantize(det_all, cfg.adc_channels);
    dsp::quantize(ref_all, cfg.adc_channels);
  }

  MeasurementOutcome out;
  out.n_pulses = n_pulses;
  out.window = static_cast<double>(n_pulses) * setup.sampling.period;
  const double ratio =
      detail::staged("detection", [&] { return mwp::measure_ratio(pair, out.window); });
  out.transmission = ratio + drift;
  if (curve != nullptr)
    out.retrieved_mm = detail::staged("calibration", [&] { return calib::invert(*curve, out.transmission); });
  return out;
}

inline MeasurementOutcome simulate_measurement(double x, const FilterProfile& filter,
                                               const CalibrationCurve* curve,
                                               const SystemConfig& config, const NoiseModel& noise,
                                               int n_pulses, std::uint64_t seed) {
  return simulate_measurement(MeasurementSetup::make(config, filter), x, curve, noise, n_pulses,
                              seed);
}

inline int pulses_for_window(const SystemConfig& config, double window) {
  return static_cast<int>(std::llround(window * config.source.repetition_rate));
}

// 200 us of pulses per calibration point.
inline int calibration_pulses(const SystemConfig& config) {
  return pulses_for_window(config, 200e-6);
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return out;
}

struct CalibrationRun {
  CalibrationCurve curve;
  std::vector<CalibrationPoint> points;
};

inline CalibrationRun run_calibration_points(const MeasurementSetup& setup, const NoiseModel& noise,
                                             const std::vector<double>& grid, int n_pulses = 0,
                                             int jobs = 1) {
  noise.validate();
  if (grid.size() < 4)
    throw Error(ErrorKind::fit_failure, "calibration grid needs at least 4 points")
        .with_stage("calibration");
  if (n_pulses <= 0) n_pulses = calibration_pulses(setup.config);
  CalibrationRun run;
  run.points.resize(grid.size());
  std::vector<std::optional<Error>> errors(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    std::mt19937_64 drift_rng(derive_seed(noise.seed, kDriftStream, kCalibrationStream, i));
    const double drift =
        noise.drift_rms_per_point > 0.0
            ? std::normal_distribution<double>(0.0, noise.drift_rms_per_point)(drift_rng)
            : 0.0;
    try {
      const auto m = simulate_measurement(setup, grid[i], nullptr, noise, n_pulses,
                                          derive_seed(noise.seed, kCalibrationStream, i), drift);
      run.points[i] = {grid[i], m.transmission, 1.0};
    } catch (const Error& e) {
      errors[i] = e;
    }
  });
  for (auto& e : errors)
    if (e) throw *e;
  run.curve = detail::staged("calibration", [&] { return calib::fit_cubic(run.points); });
  return run;
}

inline CalibrationCurve run_calibration(const MeasurementSetup& setup, const NoiseModel& noise,
                                        const std::vector<double>& grid, int n_pulses = 0,
                                        int jobs = 1) {
  return run_calibration_points(setup, noise, grid, n_pulses, jobs).curve;
}

namespace detail {

struct CellResult {
  bool ok = false;
  double transmission = 0.0;
  double retrieved_mm = 0.0;
  std::string failure;
};

inline PointRecord summarize(double true_mm, const std::vector<CellResult>& cells,
                             const CalibrationCurve* curve) {
  PointRecord rec;
  rec.true_mm = true_mm;
  double sum_x = 0.0;
  double sum_y = 0.0;
  for (const auto& c : cells) {
    if (!c.ok) {
      ++rec.n_failed;
      if (std::find(rec.failures.begin(), rec.failures.end(), c.failure) == rec.failures.end())
        rec.failures.push_back(c.failure);
      continue;
    }
    ++rec.n_ok;
    sum_x += c.retrieved_mm;
    sum_y += c.transmission;
  }
  if (rec.n_ok == 0) return rec;
  rec.mean_retrieved_mm = sum_x / rec.n_ok;
  rec.mean_transmission = sum_y / rec.n_ok;
  double ss_x = 0.0;
  double ss_y = 0.0;
  for (const auto& c : cells) {
    if (!c.ok) continue;
    ss_x += (c.retrieved_mm - rec.mean_retrieved_mm) * (c.retrieved_mm - rec.mean_retrieved_mm);
    ss_y += (c.transmission - rec.mean_transmission) * (c.transmission - rec.mean_transmission);
  }
  if (rec.n_ok > 1) {
    rec.std_mm = std::sqrt(ss_x / (rec.n_ok - 1));
    rec.std_transmission = std::sqrt(ss_y / (rec.n_ok - 1));
  }
  rec.mean_error_mm = rec.mean_retrieved_mm - true_mm;
  if (curve != nullptr) {
    const double s = std::abs(calib::slope(*curve, std::clamp(true_mm, curve->x_lo, curve->x_hi)));
    if (s > 0.0) rec.predicted_std_mm = rec.std_transmission / s;
  }
  return rec;
}

inline void aggregate(MeasurementReport& report) {
  double ss_std = 0.0;
  double ss_err = 0.0;
  int n = 0;
  report.n_failed = 0;
  for (const auto& p : report.points) {
    report.n_failed += p.n_failed;
    if (p.n_ok == 0) continue;
    ss_std += p.std_mm * p.std_mm;
    ss_err += p.mean_error_mm * p.mean_error_mm;
    ++n;
  }
  if (n > 0) {
    report.overall_std_mm = std::sqrt(ss_std / n);
    report.overall_mean_error_mm = std::sqrt(ss_err / n);
  }
}

}  // namespace detail

// `repeats` measurements of `n_pulses` at each displacement (metres). Failed
// cells are counted and excluded, never fatal.
inline MeasurementReport run_campaign(const MeasurementSetup& setup, const CalibrationCurve& curve,
                                      const NoiseModel& noise,
                                      const std::vector<double>& displacements, int repeats,
                                      int n_pulses, int jobs = 1) {
  noise.validate();
  require(repeats >= 1, ErrorKind::invalid_parameter, "repeats must be >= 1");
  require(n_pulses >= 1, ErrorKind::invalid_parameter, "n_pulses must be >= 1");
  for (double x : displacements) {
    const double mm = units::to_mm(x);
    if (mm < curve.x_lo - 1e-9 || mm > curve.x_hi + 1e-9)
      throw Error(ErrorKind::out_of_range,
                  "displacement " + std::to_string(mm) + " mm outside the calibrated range")
          .with_hint(mm < curve.x_lo ? curve.x_lo : curve.x_hi)
          .with_stage("campaign");
  }

  const std::size_t n_points = displacements.size();
  const auto reps = static_cast<std::size_t>(repeats);
  std::vector<double> drift(n_points, 0.0);
  for (std::size_t i = 0; i < n_points; ++i) {
    std::mt19937_64 rng(derive_seed(noise.seed, kDriftStream, kCampaignStream, i));
    if (noise.drift_rms_per_point > 0.0)
      drift[i] = std::normal_distribution<double>(0.0, noise.drift_rms_per_point)(rng);
  }

  std::vector<detail::CellResult> cells(n_points * reps);
  parallel_for(cells.size(), jobs, [&](std::size_t cell) {
    const std::size_t point = cell / reps;
    const std::size_t rep = cell % reps;
    auto& out = cells[cell];
    try {
      const auto m = simulate_measurement(setup, displacements[point], &curve, noise, n_pulses,
                                          derive_seed(noise.seed, kCampaignStream, point, rep),
                                          drift[point]);
      out.ok = true;
      out.transmission = m.transmission;
      out.retrieved_mm = *m.retrieved_mm;
    } catch (const Error& e) {
      out.failure = e.describe();
    }
  });

  MeasurementReport report;
  report.filter_name = setup.filter_name;
  report.filter_range_mm = setup.filter_range_mm;
  report.pulses_averaged = n_pulses;
  report.repeats = repeats;
  report.window = static_cast<double>(n_pulses) / setup.config.source.repetition_rate;
  report.update_rate = setup.config.source.repetition_rate / n_pulses;
  for (std::size_t i = 0; i < n_points; ++i) {
    std::vector<detail::CellResult> slice(cells.begin() + static_cast<std::ptrdiff_t>(i * reps),
                                          cells.begin() + static_cast<std::ptrdiff_t>((i + 1) * reps));
    report.points.push_back(detail::summarize(units::to_mm(displacements[i]), slice, &curve));
  }
  detail::aggregate(report);
  return report;
}

// Direct-digitization baseline: each pulse's interferogram is captured by the
// fast ADC and its beat frequency estimated, then mapped back to displacement.
inline MeasurementReport run_baseline_campaign(const SystemConfig& config, const NoiseModel& noise,
                                               const std::vector<double>& displacements,
                                               int repeats, int jobs = 1,
                                               EstimateMethod method = EstimateMethod::fft_peak) {
  noise.validate();
  require(repeats >= 1, ErrorKind::invalid_parameter, "repeats must be >= 1");
  const std::size_t n_points = displacements.size();
  const auto reps = static_cast<std::size_t>(repeats);
  std::vector<std::optional<Waveform>> pulses(n_points);
  std::vector<std::string> synth_errors(n_points);
  parallel_for(n_points, jobs, [&](std::size_t i) {
    try {
      pulses[i] = stretch::synthesize_interferogram(config.at(displacements[i]), config);
    } catch (const Error& e) {
      synth_errors[i] = Error(e).with_stage("stretch").describe();
    }
  });

  std::vector<detail::CellResult> cells(n_points * reps);
  parallel_for(cells.size(), jobs, [&](std::size_t cell) {
    const std::size_t point = cell / reps;
    const std::size_t rep = cell % reps;
    auto& out = cells[cell];
    if (!pulses[point]) {
      out.failure = synth_errors[point];
      return;
    }
    try {
      const auto captured =
          dsp::digitize(*pulses[point], config.adc_baseline, noise.interferogram_noise_rms,
                        derive_seed(noise.seed, kBaselineStream, point, rep));
      const auto est = method == EstimateMethod::fft_peak
                           ? dsp::estimate_frequency_fft(captured)
                           : dsp::estimate_frequency_chirp(captured, config.fiber);
      out.ok = true;
      out.transmission = est.frequency;
      out.retrieved_mm = units::to_mm(stretch::frequency_to_displacement(est.frequency, config));
    } catch (const Error& e) {
      out.failure = Error(e).with_stage("estimation").describe();
    }
  });

  MeasurementReport report;
  report.filter_name = std::string("direct-digitization/") + to_string(method);
  report.filter_range_mm = units::to_mm(sysmodel::dynamic_range(config));
  report.pulses_averaged = 1;
  report.repeats = repeats;
  report.window = config.source.period();
  report.update_rate = config.source.repetition_rate;
  for (std::size_t i = 0; i < n_points; ++i) {
    std::vector<detail::CellResult> slice(cells.begin() + static_cast<std::ptrdiff_t>(i * reps),
                                          cells.begin() + static_cast<std::ptrdiff_t>((i + 1) * reps));
    auto rec = detail::summarize(units::to_mm(displacements[i]), slice, nullptr);
    report.points.push_back(rec);
  }
  detail::aggregate(report);
  return report;
}

struct Protocol {
  std::vector<double> filter_ranges_mm = {15.0, 45.0};
  double t_min = 0.05;
  int calibration_points = 16;
  int calibration_pulses = 0;  // 0: 200 us worth of pulses
  int campaign_points = 9;
  int repeats = 100;
  int pulses = 500;
  EnvelopeShape envelope_shape = EnvelopeShape::gaussian;
  int envelope_order = 4;
  bool include_baseline = true;
  int baseline_repeats = 100;

  void validate() const {
    require(!filter_ranges_mm.empty(), ErrorKind::invalid_parameter, "protocol needs filter ranges");
    for (double r : filter_ranges_mm)
      require(r > 0.0, ErrorKind::invalid_parameter, "filter ranges must be positive");
    require(calibration_points >= 1 && campaign_points >= 1 && repeats >= 1 && pulses >= 1 &&
                baseline_repeats >= 1,
            ErrorKind::invalid_parameter, "protocol counts must be positive");
  }
};

inline Envelope protocol_envelope(const Protocol& protocol, const SystemConfig& config) {
  return protocol.envelope_shape == EnvelopeShape::gaussian
             ? stretch::default_envelope(config)
             : stretch::super_gaussian_envelope(config, protocol.envelope_order);
}

// Interior campaign points, clear of the ramp corners.
inline std::vector<double> campaign_displacements(double range, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(range * (i + 1) / (n + 1));
  return out;
}

struct FilterStudy {
  double range_mm = 0.0;
  FilterProfile profile;
  CalibrationRun calibration;
  double designed_slope_per_mm = 0.0;  // k (1 - t_min) / range
  MeasurementReport report;
};

struct TradeoffReport {
  std::vector<FilterStudy> filters;
  std::optional<MeasurementReport> baseline;
  DataRateReport data_rates;
  double baseline_dynamic_range_mm = 0.0;
  double oe_bandwidth = 0.0;
  double update_rate = 0.0;
  double repetition_rate = 0.0;
  double channel_bandwidth = 0.0;
  double channel_sample_rate = 0.0;
  double baseline_sample_rate = 0.0;
};

inline MeasurementSetup make_filter_setup(const SystemConfig& config, double range_mm,
                                          double t_min, const Envelope& envelope) {
  auto profile = detail::staged("design", [&] {
    return mwp::design_symmetric_ramp(units::from_mm(range_mm), config, t_min);
  });
  auto setup = MeasurementSetup::make(config, std::move(profile), envelope);
  setup.filter_range_mm = range_mm;
  char name[64];
  std::snprintf(name, sizeof name, "ramp-%gmm", range_mm);
  setup.filter_name = name;
  return setup;
}

inline TradeoffReport tradeoff_study(const SystemConfig& config, const NoiseModel& noise,
                                     const Protocol& protocol, int jobs = 1) {
  protocol.validate();
  noise.validate();
  TradeoffReport out;
  const Envelope envelope = protocol_envelope(protocol, config);
  for (double range_mm : protocol.filter_ranges_mm) {
    FilterStudy study;
    study.range_mm = range_mm;
    const auto setup = make_filter_setup(config, range_mm, protocol.t_min, envelope);
    study.profile = setup.filter;
    const auto grid = linspace(0.0, units::from_mm(range_mm), protocol.calibration_points);
    study.calibration =
        run_calibration_points(setup, noise, grid, protocol.calibration_pulses, jobs);
    study.designed_slope_per_mm = config.processor.k() * (1.0 - protocol.t_min) / range_mm;
    study.report = run_campaign(setup, study.calibration.curve, noise,
                                campaign_displacements(units::from_mm(range_mm),
                                                       protocol.campaign_points),
                                protocol.repeats, protocol.pulses, jobs);
    out.filters.push_back(std::move(study));
  }
  if (protocol.include_baseline) {
    const double range = sysmodel::dynamic_range(config);
    out.baseline = run_baseline_campaign(
        config, noise, campaign_displacements(range * 0.999, protocol.campaign_points),
        protocol.baseline_repeats, jobs);
  }
  out.data_rates = dsp::data_rate_report(config.adc_baseline, config.adc_channels, 2);
  out.baseline_dynamic_range_mm = units::to_mm(sysmodel::dynamic_range(config));
  out.oe_bandwidth = sysmodel::effective_oe_bandwidth(config);
  out.repetition_rate = config.source.repetition_rate;
  out.update_rate = config.source.repetition_rate / protocol.pulses;
  out.channel_bandwidth = config.processor.pd23_bandwidth;
  out.channel_sample_rate = config.adc_channels.sample_rate;
  out.baseline_sample_rate = config.adc_baseline.sample_rate;
  return out;
}

}  // namespace runner
}  // namespace stretch_ranger
