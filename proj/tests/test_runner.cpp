#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stretch_ranger/runner.hpp"

using namespace stretch_ranger;
using Catch::Approx;

namespace {

const SystemConfig& cfg() {
  static const SystemConfig c = sysmodel::reference_configuration();
  return c;
}

const runner::MeasurementSetup& setup15() {
  static const auto s = runner::make_filter_setup(cfg(), 15.0, 0.05, stretch::default_envelope(cfg()));
  return s;
}

const runner::MeasurementSetup& setup45() {
  static const auto s = runner::make_filter_setup(cfg(), 45.0, 0.05, stretch::default_envelope(cfg()));
  return s;
}

std::vector<double> interior_grid(double lo_mm, double hi_mm) {
  return runner::linspace(units::from_mm(lo_mm), units::from_mm(hi_mm), 16);
}

NoiseModel white(double rms, std::uint64_t seed = 5) {
  NoiseModel n = NoiseModel::none();
  n.det_noise_rms = rms;
  n.ref_noise_rms = rms;
  n.seed = seed;
  return n;
}

}  // namespace

TEST_CASE("noiseless zero-point transmission", "[runner]") {
  const auto& s = setup15();
  const auto m = runner::simulate_measurement(s, 0.0, nullptr, NoiseModel::none(), 500, 1);
  CHECK_FALSE(m.retrieved_mm.has_value());

  const auto spectrum = mwp::modulate_exact(2.3e9, ModulationParams::from(cfg().processor), cfg().processor.carrier_power);
  const auto p = mwp::channel_powers(spectrum, s.filter, s.envelope_spectrum);
  CHECK(m.transmission == Approx(cfg().processor.k() * p.det_pulsed / p.ref_pulsed).epsilon(1e-9));
  const double k_teff = cfg().processor.k() * mwp::effective_transmission(s.filter, s.envelope_spectrum, 2.3e9);
  CHECK(m.transmission == Approx(k_teff).margin(2e-6));
  CHECK(m.transmission == Approx(cfg().processor.k() * 0.05).margin(2e-3));
}

TEST_CASE("averaging window and update rate", "[runner]") {
  const auto m = runner::simulate_measurement(setup15(), units::from_mm(3.0), nullptr, NoiseModel::none(), 500, 1);
  CHECK(m.window == Approx(10e-6));
  CHECK(1.0 / m.window == Approx(0.1e6));
  CHECK(runner::pulses_for_window(cfg(), 10e-6) == 500);
  CHECK(runner::calibration_pulses(cfg()) == 10000);
}

TEST_CASE("noiseless round trip through a fitted curve", "[runner]") {
  const auto c15 = runner::run_calibration(setup15(), NoiseModel::none(), interior_grid(1.0, 14.0), 1);
  const auto c45 = runner::run_calibration(setup45(), NoiseModel::none(), interior_grid(1.0, 44.0), 1);
  for (int i = 1; i < 20; ++i) {
    const double x15 = 1.0 + 13.0 * i / 20.0;
    const auto m15 = runner::simulate_measurement(setup15(), units::from_mm(x15), &c15, NoiseModel::none(), 1, 1);
    CHECK(std::abs(*m15.retrieved_mm - x15) <= 1e-6);
    const double x45 = 1.0 + 43.0 * i / 20.0;
    const auto m45 = runner::simulate_measurement(setup45(), units::from_mm(x45), &c45, NoiseModel::none(), 1, 1);
    CHECK(std::abs(*m45.retrieved_mm - x45) <= 1e-5);
  }
}

TEST_CASE("noiseless calibration tracks the analytic ACF", "[runner][oracle]") {
  const auto& s = setup15();
  const auto grid = runner::linspace(0.0, units::from_mm(15.0), 16);
  const auto run = runner::run_calibration_points(s, NoiseModel::none(), grid, 1);
  // Best cubic through the drive-independent ACF samples themselves.
  std::vector<CalibrationPoint> acf_pts;
  for (double x : grid) {
    const double f = stretch::displacement_to_frequency(x, cfg());
    acf_pts.push_back({x, mwp::acf(f, s.filter, s.envelope_spectrum, cfg().processor.k(), mwp::Band::for_config(cfg())), 1.0});
  }
  const auto acf_fit = calib::fit_cubic(acf_pts);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(run.points[i].transmission == Approx(acf_pts[i].transmission).margin(5e-6));
  CHECK(run.curve.max_residual == Approx(acf_fit.max_residual).margin(5e-6));
  CHECK(run.curve.monotone());
}

TEST_CASE("calibration needs four points", "[runner]") {
  try {
    runner::run_calibration(setup15(), NoiseModel::none(), runner::linspace(0.0, 0.015, 3), 1);
    FAIL("expected fit-failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::fit_failure);
    CHECK(e.stage() == "calibration");
  }
}

TEST_CASE("calibration is reproducible from the seed", "[runner]") {
  const auto noise = white(0.05, 77);
  const auto grid = runner::linspace(0.0, units::from_mm(15.0), 16);
  const auto a = runner::run_calibration(setup15(), noise, grid, 200);
  const auto b = runner::run_calibration(setup15(), noise, grid, 200, 3);
  CHECK(a.a == b.a);
  CHECK(a.b == b.b);
  CHECK(a.c3 == b.c3);
  CHECK(a.d == b.d);
}

TEST_CASE("zero-noise campaign has no spread", "[runner]") {
  const auto curve = runner::run_calibration(setup15(), NoiseModel::none(), runner::linspace(0.0, 0.015, 16), 1);
  const auto r = runner::run_campaign(setup15(), curve, NoiseModel::none(), runner::campaign_displacements(0.015, 5), 10, 50);
  REQUIRE(r.points.size() == 5);
  for (const auto& p : r.points) {
    CHECK(p.std_mm <= 1e-6);
    CHECK(p.n_ok == 10);
  }
  CHECK(r.overall_std_mm <= 1e-6);
  CHECK(r.n_failed == 0);
}

TEST_CASE("stage-tagged failures", "[runner]") {
  const auto curve = calib::make_curve(0.06, 0.0, 0.0, 0.05, 0.0, 15.0);
  try {
    runner::simulate_measurement(setup15(), units::from_mm(60.0), &curve, NoiseModel::none(), 10, 1);
    FAIL("expected out-of-range");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::out_of_range);
    CHECK(e.stage() == "stretch");
  }
  const auto narrow = calib::make_curve(0.06, 0.0, 0.0, 0.5, 0.0, 15.0);
  try {
    runner::simulate_measurement(setup15(), units::from_mm(2.0), &narrow, NoiseModel::none(), 10, 1);
    FAIL("expected out-of-range");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::out_of_range);
    CHECK(e.stage() == "calibration");
    CHECK(e.hint().value() == 0.0);
  }
}

TEST_CASE("campaign rejects displacements outside the curve", "[runner]") {
  const auto curve = calib::reference_curve_15mm();
  try {
    runner::run_campaign(setup15(), curve, NoiseModel::none(), {units::from_mm(16.0)}, 2, 10);
    FAIL("expected out-of-range");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::out_of_range);
    CHECK(e.hint().value() == 15.0);
  }
}

TEST_CASE("failed measurements are counted, not fatal", "[runner]") {
  const auto curve = runner::run_calibration(setup15(), NoiseModel::none(), runner::linspace(0.0, 0.015, 16), 1);
  const auto noise = white(0.5, 3);
  const auto r = runner::run_campaign(setup15(), curve, noise, {0.0, units::from_mm(7.5), units::from_mm(15.0)}, 5, 20);
  CHECK(r.n_failed > 0);
  CHECK(r.points.size() == 3);
  for (const auto& p : r.points) {
    CHECK(p.n_ok + p.n_failed == 5);
    if (p.n_failed > 0) CHECK_FALSE(p.failures.empty());
  }
}

TEST_CASE("results do not depend on the worker count", "[runner]") {
  const auto curve = runner::run_calibration(setup15(), NoiseModel::none(), runner::linspace(0.0, 0.015, 16), 1);
  auto noise = white(0.05, 9);
  noise.power_jitter_rms = 0.02;
  noise.drive_jitter_rms = 0.01;
  noise.drift_rms_per_point = 1e-4;
  const auto xs = runner::campaign_displacements(0.015, 4);
  const auto a = runner::run_campaign(setup15(), curve, noise, xs, 6, 100, 1);
  const auto b = runner::run_campaign(setup15(), curve, noise, xs, 6, 100, 4);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].mean_retrieved_mm == b.points[i].mean_retrieved_mm);
    CHECK(a.points[i].std_mm == b.points[i].std_mm);
  }
}

TEST_CASE("doubling the noise raises every per-point spread", "[runner][property]") {
  const auto curve = runner::run_calibration(setup15(), NoiseModel::none(), runner::linspace(0.0, 0.015, 16), 1);
  const auto xs = runner::campaign_displacements(0.015, 3);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto noise = white(0.03, seed);
    noise.drive_jitter_rms = 0.005;
    const auto a = runner::run_campaign(setup15(), curve, noise, xs, 12, 50);
    const auto b = runner::run_campaign(setup15(), curve, noise.scaled(2.0), xs, 12, 50);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(b.points[i].std_mm > a.points[i].std_mm);
  }
}

TEST_CASE("common-mode power jitter cancels in the ratio", "[runner]") {
  const auto curve = runner::run_calibration(setup45(), NoiseModel::none(), interior_grid(1.0, 44.0), 1);
  auto jitter = NoiseModel::none();
  jitter.power_jitter_rms = 0.05;
  for (double x : {5.0, 20.0, 40.0}) {
    const auto quiet = runner::simulate_measurement(setup45(), units::from_mm(x), &curve, NoiseModel::none(), 500, 8);
    const auto noisy = runner::simulate_measurement(setup45(), units::from_mm(x), &curve, jitter, 500, 8);
    CHECK(std::abs(*noisy.retrieved_mm - *quiet.retrieved_mm) < 1e-3);
  }
}

TEST_CASE("spread follows n^-1/2 and the local slope", "[runner][property]") {
  const auto curve = runner::run_calibration(setup15(), NoiseModel::none(), runner::linspace(0.0, 0.015, 16), 1);
  const auto xs = runner::campaign_displacements(0.015, 3);
  const auto noise = white(0.1, 41);
  const auto r125 = runner::run_campaign(setup15(), curve, noise, xs, 50, 125);
  const auto r500 = runner::run_campaign(setup15(), curve, noise, xs, 50, 500);
  CHECK(r125.overall_std_mm / r500.overall_std_mm == Approx(2.0).epsilon(0.2));
  for (const auto& p : r500.points) CHECK(p.std_mm == Approx(p.predicted_std_mm).epsilon(0.15));
}

TEST_CASE("drive jitter is a small second-order effect", "[runner]") {
  const auto curve = runner::run_calibration(setup15(), NoiseModel::none(), interior_grid(1.0, 14.0), 1);
  auto n = NoiseModel::none();
  n.drive_jitter_rms = 0.05;
  const auto quiet = runner::simulate_measurement(setup15(), units::from_mm(6.0), &curve, NoiseModel::none(), 200, 2);
  const auto noisy = runner::simulate_measurement(setup15(), units::from_mm(6.0), &curve, n, 200, 2);
  CHECK(noisy.transmission != quiet.transmission);
  CHECK(std::abs(*noisy.retrieved_mm - *quiet.retrieved_mm) < 1e-3);
}

TEST_CASE("trade-off study on a reduced protocol", "[runner]") {
  runner::Protocol p;
  p.campaign_points = 5;
  p.repeats = 40;
  p.calibration_pulses = 2000;
  p.baseline_repeats = 3;
  auto noise = white(0.05, 12);
  noise.interferogram_noise_rms = 0.02;
  const auto t = runner::tradeoff_study(cfg(), noise, p, 2);
  REQUIRE(t.filters.size() == 2);
  const double slope_ratio = t.filters[0].designed_slope_per_mm / t.filters[1].designed_slope_per_mm;
  CHECK(slope_ratio == Approx(3.0).epsilon(1e-12));
  const double std_ratio = t.filters[1].report.overall_std_mm / t.filters[0].report.overall_std_mm;
  CHECK(std_ratio == Approx(slope_ratio).epsilon(0.3));
  CHECK(t.update_rate == Approx(0.1e6));
  CHECK(t.data_rates.baseline_bytes_per_second == Approx(80e9));
  CHECK(t.data_rates.channels_bytes_per_second == Approx(3.75e9));
  REQUIRE(t.baseline.has_value());
  CHECK(t.baseline->points.size() == 5);
  CHECK(t.baseline->update_rate == Approx(50e6));
}

TEST_CASE("noiseless direct-digitization baseline closes on the model", "[runner][oracle]") {
  const auto xs = runner::campaign_displacements(sysmodel::dynamic_range(cfg()) * 0.999, 7);
  for (auto method : {EstimateMethod::fft_peak, EstimateMethod::chirp_fit}) {
    const auto r = runner::run_baseline_campaign(cfg(), NoiseModel::none(), xs, 1, 1, method);
    CHECK(r.n_failed == 0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      CHECK(std::abs(r.points[i].mean_error_mm) <= 0.03);
      CHECK(r.points[i].mean_transmission ==
            Approx(stretch::displacement_to_frequency(xs[i], cfg())).margin(10e6));
    }
  }
}

TEST_CASE("super-Gaussian envelope runs end to end", "[runner]") {
  const auto s = runner::make_filter_setup(cfg(), 15.0, 0.05, stretch::super_gaussian_envelope(cfg(), 4));
  const auto curve = runner::run_calibration(s, NoiseModel::none(), interior_grid(1.0, 14.0), 1);
  CHECK(curve.monotone());
  const auto m = runner::simulate_measurement(s, units::from_mm(7.0), &curve, NoiseModel::none(), 10, 1);
  CHECK(*m.retrieved_mm == Approx(7.0).margin(1e-4));
}

TEST_CASE("setup refuses invalid configurations", "[runner]") {
  auto bad = cfg();
  bad.source.repetition_rate = 100e6;
  try {
    runner::make_filter_setup(bad, 15.0, 0.05, stretch::default_envelope(bad));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_configuration);
  }
}
