#include <catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "stretch_ranger/mwphotonics.hpp"

using namespace stretch_ranger;
using Catch::Approx;

namespace {

ModulationParams with_depth(double beta, double er_db = std::numeric_limits<double>::infinity()) {
  return {beta * 5.0 / std::numbers::pi, 5.0, er_db};
}

double line_ratio_db(const SidebandSpectrum& s, int a, int b) {
  return 10.0 * std::log10(s.find(a)->power() / s.find(b)->power());
}

const SystemConfig& ref_cfg() {
  static const SystemConfig cfg = sysmodel::reference_configuration();
  return cfg;
}

}  // namespace

TEST_CASE("exact modulation against the Bessel series", "[mwphotonics][oracle]") {
  const double p0 = 1e-2;
  const auto s = mwp::modulate_exact(5e9, with_depth(0.2), p0);
  REQUIRE(s.find(1) != nullptr);
  CHECK(oracle::bessel_j(1, 0.2) == Approx(0.09950).epsilon(1e-4));
  CHECK(s.find(1)->amplitude == Approx(std::sqrt(p0) * oracle::bessel_j(1, 0.2)).epsilon(1e-12));
  CHECK(s.find(-3)->amplitude == Approx(-std::sqrt(p0) * oracle::bessel_j(3, 0.2)).epsilon(1e-10));
  const double expected_db = 20.0 * std::log10(oracle::bessel_j(3, 0.2) / oracle::bessel_j(1, 0.2));
  CHECK(line_ratio_db(s, 3, 1) == Approx(expected_db).margin(1e-6));
  CHECK(line_ratio_db(s, 3, 1) == Approx(-55.5).margin(0.5));
  CHECK(s.carrier_power_leak == 0.0);
  for (const auto& l : s.lines) {
    CHECK(l.order % 2 != 0);
    CHECK(l.offset == Approx(l.order * 5e9));
  }
}

TEST_CASE("truncation stops below 1e-12 of the first order", "[mwphotonics]") {
  const auto s = mwp::modulate_exact(1e9, with_depth(0.9), 1.0);
  const double j1 = std::abs(s.find(1)->amplitude);
  int top = 0;
  for (const auto& l : s.lines) top = std::max(top, l.order);
  CHECK(std::abs(s.find(top)->amplitude) >= 1e-12 * j1);
  CHECK(std::abs(oracle::bessel_j(top + 2, 0.9)) < 1e-12 * j1);
}

TEST_CASE("zero depth and finite extinction ratio", "[mwphotonics]") {
  const auto empty = mwp::modulate_exact(5e9, with_depth(0.0), 1e-2);
  CHECK(empty.lines.empty());
  CHECK(empty.carrier_power_leak == 0.0);

  const auto leak_only = mwp::modulate_exact(5e9, with_depth(0.0, 20.0), 1e-2);
  CHECK(leak_only.lines.empty());
  CHECK(leak_only.carrier_power_leak == Approx(1e-4));

  const double beta = 0.157;
  const double er = mwp::extinction_ratio_for_suppression(beta, 30.0);
  const auto s = mwp::modulate_exact(5e9, with_depth(beta, er), 1e-2);
  CHECK(10.0 * std::log10(s.find(1)->power() / s.carrier_power_leak) == Approx(30.0).margin(1e-9));
}

TEST_CASE("sidebands are symmetric under offset negation", "[mwphotonics][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> beta(0.0, 2.5);
  std::uniform_real_distribution<double> fm(1e9, 20e9);
  for (int trial = 0; trial < 50; ++trial) {
    const double f = fm(rng);
    const auto s = mwp::modulate_exact(f, with_depth(beta(rng)), 3e-3);
    for (const auto& l : s.lines) {
      const auto* mirror = s.find(-l.order);
      REQUIRE(mirror != nullptr);
      CHECK(mirror->offset == -l.offset);
      CHECK(std::abs(mirror->amplitude - l.amplitude) <= 1e-12 * std::abs(l.amplitude));
    }
  }
}

TEST_CASE("sideband power matches the modulated power", "[mwphotonics][property]") {
  // Odd-order lines carry P0 (1 - J0(2 beta)) / 2 and never more than P0.
  for (double beta : {0.01, 0.1, 0.3, 0.6, 1.0}) {
    const double p0 = 2e-2;
    auto s = mwp::modulate_exact(3e9, with_depth(beta, 25.0), p0);
    const double expected = p0 * (1.0 - oracle::bessel_j(0, 2.0 * beta)) / 2.0;
    CHECK(s.line_power() == Approx(expected).epsilon(1e-6));
    CHECK(s.line_power() + s.carrier_power_leak <= p0);
  }
}

TEST_CASE("small-signal two-line model", "[mwphotonics]") {
  const double p0 = 1e-2;
  const auto s = mwp::modulate_small_signal(5e9, with_depth(0.2), p0);
  REQUIRE(s.lines.size() == 2);
  CHECK(s.find(1)->amplitude == Approx(0.1 * std::sqrt(p0)));
  CHECK(s.find(-1)->amplitude == s.find(1)->amplitude);
  const double exact = std::sqrt(p0) * oracle::bessel_j(1, 0.2);
  CHECK(std::abs(s.find(1)->amplitude - exact) / exact == Approx(0.005).margin(5e-4));

  CHECK(mwp::modulate_small_signal(5e9, with_depth(0.0), p0).lines.empty());
}

TEST_CASE("small-signal regime violation carries the discrepancy", "[mwphotonics]") {
  try {
    mwp::modulate_small_signal(5e9, with_depth(1.0), 1e-2);
    FAIL("expected regime-violation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::regime_violation);
    REQUIRE(e.hint().has_value());
    const double j1 = oracle::bessel_j(1, 1.0);
    CHECK(*e.hint() == Approx(std::abs(j1 - 0.5) / j1).epsilon(1e-9));
  }
  CHECK(with_depth(0.2).small_signal());
  CHECK_FALSE(with_depth(0.21).small_signal());
  CHECK(with_depth(0.4).small_signal(0.5));
}

TEST_CASE("small-signal error is bounded and shrinks with depth", "[mwphotonics][property]") {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 280; i >= 1; --i) {
    const double beta = i * 1e-3;
    const double j1 = oracle::bessel_j(1, beta);
    const double amp = mwp::modulate_small_signal(1e9, with_depth(beta), 1.0, 0.3).find(1)->amplitude;
    const double rel = std::abs(amp - j1) / j1;
    CHECK(rel <= 0.01);
    CHECK(rel < prev);
    CHECK(std::abs(j1 - beta / 2.0) <= beta * beta * beta / 16.0);
    prev = rel;
  }
}

TEST_CASE("Gaussian-smoothed ramp against brute-force convolution", "[mwphotonics][oracle]") {
  FilterProfile p;
  p.breakpoints = {{2.3e9, 0.05}, {7.7e9, 1.0}};
  Envelope env;
  env.duration_fwhm = 18.84e-9;
  const auto spec = mwp::power_spectrum(env);
  const double sigma_f = 1.0 / (2.0 * std::sqrt(2.0) * static_cast<double>(oracle::kPi) *
                                (env.duration_fwhm / std::sqrt(8.0 * std::log(2.0))));
  CHECK(spec.sigma_f == Approx(sigma_f).epsilon(1e-12));
  for (double off : {0.0, 2.28e9, 2.3e9, 2.32e9, 5e9, 7.69e9, 7.7e9, 7.75e9, -2.3e9, -6e9}) {
    const double brute = oracle::gaussian_smoothed([&](double f) { return p(f); }, sigma_f, off);
    CHECK(mwp::effective_transmission(p, spec, off) == Approx(brute).margin(1e-9));
  }
}

TEST_CASE("step profile gives an error-function edge", "[mwphotonics][oracle]") {
  FilterProfile p;
  p.symmetric = false;
  p.breakpoints = {{4e9, 0.0}, {4e9 + 1.0, 1.0}};
  Envelope env;
  env.duration_fwhm = 10e-9;
  const auto spec = mwp::power_spectrum(env);
  for (double z : {-3.0, -1.0, 0.0, 0.5, 2.0}) {
    const double off = 4e9 + z * spec.sigma_f;
    const double erf_edge = 0.5 * std::erfc(-z / std::sqrt(2.0));
    CHECK(mwp::effective_transmission(p, spec, off) == Approx(erf_edge).margin(1e-7));
  }
}

TEST_CASE("long envelope leaves the profile unchanged", "[mwphotonics]") {
  FilterProfile p;
  p.breakpoints = {{2.3e9, 0.05}, {7.7e9, 1.0}};
  Envelope env;
  env.duration_fwhm = 1.0;
  for (double off : {0.0, 2.3e9, 3.1e9, 6.0e9, 7.7e9, 9e9})
    CHECK(mwp::effective_transmission(p, env, off) == Approx(p(off)).margin(1e-6));
}

TEST_CASE("symmetric profile is smallest at the carrier", "[mwphotonics]") {
  FilterProfile p;
  p.breakpoints = {{0.0, 0.05}, {5e9, 1.0}};
  Envelope env;
  env.duration_fwhm = 0.5e-9;  // broad spectrum, visible smoothing
  const double at0 = mwp::effective_transmission(p, env, 0.0);
  for (double off : {-3e9, -1e8, 1e8, 1e9, 4e9}) CHECK(mwp::effective_transmission(p, env, off) > at0);
  CHECK(at0 > p(0.0));
}

TEST_CASE("super-Gaussian envelope against a direct transform", "[mwphotonics][oracle]") {
  FilterProfile p;
  p.breakpoints = {{2.3e9, 0.05}, {2.6e9, 1.0}};
  Envelope env;
  env.shape = EnvelopeShape::super_gaussian;
  env.order = 4;
  env.duration_fwhm = 18.84e-9;
  const auto spec = mwp::power_spectrum(env);

  // |A(f)|^2 by midpoint integration of a(t) cos(2 pi f t).
  auto density = [&](double f) {
    const int n = 3000;
    const double half = env.duration_fwhm;
    const double h = 2.0 * half / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t = -half + (i + 0.5) * h;
      acc += env(t) * std::cos(2.0 * static_cast<double>(oracle::kPi) * f * t);
    }
    return acc * acc;
  };
  const double lim = 16.0 / env.duration_fwhm;
  for (double off : {2.3e9, 2.45e9, 2.6e9, 2.2e9}) {
    const double ref = oracle::density_smoothed([&](double f) { return p(f); }, density, -lim, lim, off, 3000);
    CHECK(mwp::effective_transmission(p, spec, off) == Approx(ref).margin(2e-4));
  }
}

TEST_CASE("dB-linear profile", "[mwphotonics][oracle]") {
  FilterProfile p;
  p.scale = ProfileScale::linear_db;
  p.breakpoints = {{2.3e9, 0.05}, {7.7e9, 1.0}};
  CHECK(p(5e9) == Approx(std::pow(10.0, (-13.0103 * (1.0 - 2.7 / 5.4)) / 10.0)).epsilon(1e-4));
  Envelope env;
  env.duration_fwhm = 18.84e-9;
  const auto spec = mwp::power_spectrum(env);
  for (double off : {2.3e9, 4e9, 7.7e9}) {
    const double brute = oracle::gaussian_smoothed([&](double f) { return p(f); }, spec.sigma_f, off);
    CHECK(mwp::effective_transmission(p, spec, off) == Approx(brute).margin(1e-6));
  }
}

TEST_CASE("ramp design edges", "[mwphotonics]") {
  const auto& cfg = ref_cfg();
  const auto r15 = mwp::design_symmetric_ramp(units::from_mm(15.0), cfg);
  REQUIRE(r15.breakpoints.size() == 2);
  CHECK(r15.symmetric);
  CHECK(r15.breakpoints[0].offset == Approx(2.3e9));
  CHECK(r15.breakpoints[0].transmission == 0.05);
  CHECK(r15.breakpoints[1].offset == Approx(7.71e9).epsilon(1e-3));
  CHECK(r15.breakpoints[1].transmission == 1.0);
  const auto r45 = mwp::design_symmetric_ramp(units::from_mm(45.0), cfg);
  CHECK(r45.breakpoints[1].offset == Approx(2.3e9 + 45.0 * 360.9e6).epsilon(1e-3));
  CHECK(r45(0.0) == 0.05);
  CHECK(r45(-10e9) == r45(10e9));

  try {
    mwp::design_symmetric_ramp(0.0, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_parameter);
  }
  try {
    mwp::design_symmetric_ramp(units::from_mm(60.0), cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::out_of_range);
  }
}

TEST_CASE("detection through transparent and opaque filters", "[mwphotonics]") {
  const auto& cfg = ref_cfg();
  const auto env = stretch::default_envelope(cfg);
  const auto s = mwp::modulate_exact(5e9, ModulationParams::from(cfg.processor), cfg.processor.carrier_power);

  FilterProfile open;
  open.breakpoints = {{0.0, 1.0}};
  const auto pair = mwp::detect_channels(s, env, open, cfg);
  for (std::size_t i = 0; i < pair.det.size(); ++i)
    if (pair.ref.samples[i] > 0.0)
      CHECK(pair.det.samples[i] / pair.ref.samples[i] == Approx(cfg.processor.k()).epsilon(1e-12));

  FilterProfile closed;
  closed.breakpoints = {{0.0, 0.0}};
  const auto dark = mwp::detect_channels(s, env, closed, cfg);
  for (double v : dark.det.samples) CHECK(v == 0.0);
  CHECK(dark.det.sample_rate == cfg.adc_channels.sample_rate);
  CHECK(dark.det.size() == 25);
}

TEST_CASE("ratio at the ramp top", "[mwphotonics]") {
  const auto& cfg = ref_cfg();
  const auto env = stretch::default_envelope(cfg);
  const auto ramp = mwp::design_symmetric_ramp(units::from_mm(15.0), cfg);
  const double f_top = ramp.breakpoints[1].offset;
  const auto s = mwp::modulate_exact(f_top, ModulationParams::from(cfg.processor), cfg.processor.carrier_power);
  const auto pair = mwp::detect_channels(s, env, ramp, cfg);
  const double r = mwp::measure_ratio(pair, cfg.source.period());

  const auto powers = mwp::channel_powers(s, ramp, mwp::power_spectrum(env));
  CHECK(r == Approx(cfg.processor.k() * powers.det_pulsed / powers.ref_pulsed).epsilon(1e-9));
  CHECK(r == Approx(cfg.processor.k() * mwp::effective_transmission(ramp, env, f_top)).epsilon(1e-5));
  CHECK(r == Approx(cfg.processor.k()).epsilon(2e-3));
}

TEST_CASE("ratio invariances", "[mwphotonics][property]") {
  const auto& cfg = ref_cfg();
  const auto env = stretch::default_envelope(cfg);
  const auto ramp = mwp::design_symmetric_ramp(units::from_mm(45.0), cfg);
  auto ratio = [&](double p0, double drive_scale) {
    const auto s = mwp::modulate_exact(9e9, ModulationParams::from(cfg.processor, drive_scale), p0);
    return mwp::measure_ratio(mwp::detect_channels(s, env, ramp, cfg), cfg.source.period());
  };
  const double base = ratio(cfg.processor.carrier_power, 1.0);
  CHECK(ratio(3.7 * cfg.processor.carrier_power, 1.0) == Approx(base).epsilon(1e-9));
  CHECK(ratio(cfg.processor.carrier_power, 0.7) == Approx(base).epsilon(1e-2));

  const auto s = mwp::modulate_exact(9e9, ModulationParams::from(cfg.processor), cfg.processor.carrier_power);
  auto pair = mwp::detect_channels(s, env, ramp, cfg);
  for (auto* w : {&pair.det, &pair.ref})
    for (double& v : w->samples) v *= 0.37;
  CHECK(mwp::measure_ratio(pair, cfg.source.period()) == Approx(base).epsilon(1e-12));
}

TEST_CASE("ratio guards", "[mwphotonics]") {
  const auto& cfg = ref_cfg();
  const auto env = stretch::default_envelope(cfg);
  FilterProfile open;
  open.breakpoints = {{0.0, 1.0}};
  const auto none = mwp::modulate_exact(5e9, with_depth(0.0), 1e-2);
  const auto pair = mwp::detect_channels(none, env, open, cfg);
  try {
    mwp::measure_ratio(pair, cfg.source.period());
    FAIL("expected low-signal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::low_signal);
  }
  const auto s = mwp::modulate_exact(5e9, with_depth(0.1), 1e-2);
  const auto live = mwp::detect_channels(s, env, open, cfg);
  CHECK_THROWS_AS(mwp::measure_ratio(live, 0.5 * cfg.source.period()), Error);
  CHECK_THROWS_AS(mwp::measure_ratio(live, cfg.source.period(), 1.0), Error);
}

TEST_CASE("acf values and monotonicity over the designed band", "[mwphotonics][property]") {
  const auto& cfg = ref_cfg();
  const auto env_spec = mwp::power_spectrum(stretch::default_envelope(cfg));
  const double k = cfg.processor.k();
  const auto band = mwp::Band::for_config(cfg);
  for (double range_mm : {15.0, 45.0}) {
    const auto ramp = mwp::design_symmetric_ramp(units::from_mm(range_mm), cfg);
    const double lo = ramp.breakpoints[0].offset;
    const double hi = ramp.breakpoints[1].offset;
    CHECK(mwp::acf(lo, ramp, env_spec, k, band) == Approx(k * 0.05).margin(2e-3));
    CHECK(mwp::acf(hi, ramp, env_spec, k, band) == Approx(k).margin(2e-3));
    CHECK(mwp::acf(0.5 * (lo + hi), ramp, env_spec, k, band) == Approx(k * 0.525).epsilon(1e-9));
    double prev = -1.0;
    for (int i = 0; i < 1000; ++i) {
      const double f = lo + (hi - lo) * i / 999.0;
      const double r = mwp::acf(f, ramp, env_spec, k, band);
      CHECK(r > prev);
      prev = r;
    }
  }
  const auto ramp = mwp::design_symmetric_ramp(units::from_mm(15.0), cfg);
  CHECK_THROWS_AS(mwp::acf(1e9, ramp, env_spec, k, band), Error);
  CHECK_THROWS_AS(mwp::acf(21e9, ramp, env_spec, k, band), Error);
}

TEST_CASE("profile validation", "[mwphotonics]") {
  FilterProfile p;
  CHECK_THROWS_AS(p.validate(), Error);
  p.breakpoints = {{1e9, 0.2}, {1e9, 0.4}};
  CHECK_THROWS_AS(p.validate(), Error);
  p.breakpoints = {{1e9, 0.2}, {2e9, 1.4}};
  CHECK_THROWS_AS(p.validate(), Error);
  p.breakpoints = {{-1e9, 0.2}, {2e9, 0.4}};
  CHECK_THROWS_AS(p.validate(), Error);
  p.symmetric = false;
  CHECK_NOTHROW(p.validate());
}
