// Design a 15 mm filter, calibrate it, and range a few targets.

#include <cstdio>

#include "stretch_ranger/stretch_ranger.hpp"

using namespace stretch_ranger;

int main() {
  const auto config = sysmodel::reference_configuration();
  const auto check = sysmodel::validate_config(config);
  if (!check.ok()) {
    std::printf("configuration rejected: %s\n", check.violations.front().message.c_str());
    return 1;
  }
  std::printf("dynamic range %.3f cm, zero point %.2f GHz, %.1f MHz/mm\n",
              sysmodel::dynamic_range(config) * 100.0, sysmodel::zero_point_frequency(config) / 1e9,
              stretch::sensitivity(config) / 1e9);

  const auto setup = runner::make_filter_setup(config, 15.0, 0.05, stretch::default_envelope(config));
  const auto curve = runner::run_calibration(setup, NoiseModel::none(),
                                             runner::linspace(0.0, units::from_mm(15.0), 16), 0);
  std::printf("calibration: y = %.5f x + %.5f x^2 + %.3e x^3 + %.5f (%s)\n", curve.a, curve.b, curve.c3,
              curve.d, to_string(curve.certificate.direction));

  NoiseModel noise;
  noise.det_noise_rms = 0.04;
  noise.ref_noise_rms = 0.04;
  noise.power_jitter_rms = 0.02;
  noise.seed = 7;
  for (double x_mm : {2.5, 7.5, 12.5}) {
    const auto m = runner::simulate_measurement(setup, units::from_mm(x_mm), &curve, noise,
                                                runner::pulses_for_window(config, 10e-6), 1);
    std::printf("target %5.2f mm -> ratio %.5f -> %.4f mm (error %+.1f um)\n", x_mm, m.transmission,
                *m.retrieved_mm, (*m.retrieved_mm - x_mm) * 1e3);
  }

  // Same targets through the direct-digitization path.
  for (double x_mm : {2.5, 7.5, 12.5}) {
    const auto w = stretch::synthesize_interferogram(config.at(units::from_mm(x_mm)), config);
    const auto est = dsp::estimate_frequency_fft(dsp::digitize(w, config.adc_baseline, 0.02, 3));
    std::printf("interferogram %5.2f mm -> %.4f GHz -> %.4f mm\n", x_mm, est.frequency / 1e9,
                units::to_mm(stretch::frequency_to_displacement(est.frequency, config)));
  }
  return 0;
}
