#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stretch_ranger/io.hpp"
#include "stretch_ranger/sysmodel.hpp"

using namespace stretch_ranger;
using Catch::Approx;

namespace {

SystemConfig shipped() {
  return io::load_config(std::string(STRETCH_RANGER_DATA_DIR) + "/reference_system.json");
}

}  // namespace

TEST_CASE("beta2*L against longhand arithmetic", "[sysmodel]") {
  const double dl = units::from_ps_per_nm(-2298.0);
  CHECK(sysmodel::derive_beta2_l(dl, units::from_nm(1553.0)) ==
        Approx(oracle::beta2_l(-2298.0, 1553.0)).epsilon(1e-12));
  CHECK(sysmodel::derive_beta2_l(dl, units::from_nm(1553.0)) == Approx(2.942e-21).epsilon(5e-4));
  CHECK(sysmodel::derive_beta2_l(dl, units::from_nm(1548.5)) == Approx(2.925e-21).epsilon(5e-4));
  CHECK(sysmodel::derive_beta2_l(0.0, units::from_nm(1553.0)) == 0.0);
  CHECK(sysmodel::derive_beta2_l(dl, units::from_nm(1553.0)) > 0.0);
}

TEST_CASE("beta2*L is linear in dispersion and quadratic in wavelength", "[sysmodel][property]") {
  const double dl = units::from_ps_per_nm(-1234.5);
  const double lam = units::from_nm(1550.0);
  const double base = sysmodel::derive_beta2_l(dl, lam);
  CHECK(sysmodel::derive_beta2_l(2.0 * dl, lam) == Approx(2.0 * base).epsilon(1e-15));
  CHECK(sysmodel::derive_beta2_l(dl, 2.0 * lam) == Approx(4.0 * base).epsilon(1e-15));
}

TEST_CASE("beta2*L rejects zero wavelength", "[sysmodel]") {
  try {
    sysmodel::derive_beta2_l(-2.298, 0.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_parameter);
  }
}

TEST_CASE("OE bandwidth follows the minimum-device rule", "[sysmodel]") {
  auto cfg = sysmodel::reference_configuration();
  CHECK(sysmodel::effective_oe_bandwidth(cfg) == Approx(17.7e9).epsilon(1e-12));

  auto narrow = cfg;
  narrow.processor.pd1_bandwidth = 10e9;
  CHECK(sysmodel::effective_oe_bandwidth(narrow) == Approx(7.7e9).epsilon(1e-12));

  auto empty = cfg;
  empty.processor.pd1_bandwidth = empty.processor.modulator_bandwidth = empty.processor.bpf_high =
      empty.processor.bpf_low;
  try {
    sysmodel::effective_oe_bandwidth(empty);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_configuration);
  }
}

TEST_CASE("stretched pulse duration", "[sysmodel]") {
  auto cfg = sysmodel::reference_configuration();
  CHECK(sysmodel::stretch_duration(cfg) == Approx(18.8436e-9).epsilon(1e-9));
  CHECK(sysmodel::stretch_duration(cfg) < cfg.source.period());

  cfg.fiber.total_dispersion = units::from_ps_per_nm(1000.0);
  cfg.source.filtered_spectral_width = units::from_nm(10.0);
  CHECK(sysmodel::stretch_duration(cfg) == Approx(10e-9).epsilon(1e-12));
  cfg.source.filtered_spectral_width = 0.0;
  CHECK(sysmodel::stretch_duration(cfg) == 0.0);
}

TEST_CASE("reference configuration validates and matches the shipped file", "[sysmodel]") {
  const auto ref = sysmodel::reference_configuration();
  const auto report = sysmodel::validate_config(ref);
  CHECK(report.ok());
  CHECK(report.oe_bandwidth == Approx(17.7e9));
  CHECK(report.zero_point_frequency == Approx(2.3e9).epsilon(1e-12));

  const auto file = shipped();
  CHECK(sysmodel::validate_config(file).ok());
  CHECK(io::config_hash(file) == io::config_hash(ref));
}

TEST_CASE("doubled repetition rate is an overlap violation", "[sysmodel]") {
  auto cfg = sysmodel::reference_configuration();
  cfg.source.repetition_rate = 100e6;
  const auto report = sysmodel::validate_config(cfg);
  CHECK_FALSE(report.ok());
  CHECK(report.violates("pulse_overlap"));
}

TEST_CASE("zero reference delay puts the zero point below the band", "[sysmodel]") {
  auto cfg = sysmodel::reference_configuration();
  cfg.stage.reference_delay = 0.0;
  const auto report = sysmodel::validate_config(cfg);
  CHECK(report.violates("zero_point_frequency"));
  CHECK(report.zero_point_frequency == 0.0);
}

TEST_CASE("validation lists every violation and never clamps", "[sysmodel]") {
  auto cfg = sysmodel::reference_configuration();
  cfg.source.repetition_rate = 100e6;
  cfg.stage.reference_delay = 0.0;
  cfg.adc_channels.bits = 20;
  const auto before = io::config_hash(cfg);
  const auto a = sysmodel::validate_config(cfg);
  const auto b = sysmodel::validate_config(cfg);
  CHECK(a.violations.size() >= 3);
  CHECK(a.violates("adc_channels.bits"));
  CHECK(io::config_hash(cfg) == before);
  REQUIRE(a.violations.size() == b.violations.size());
  for (std::size_t i = 0; i < a.violations.size(); ++i) {
    CHECK(a.violations[i].constraint == b.violations[i].constraint);
    CHECK(a.violations[i].message == b.violations[i].message);
  }
}

TEST_CASE("inconsistent beta2*L is flagged", "[sysmodel]") {
  auto cfg = sysmodel::reference_configuration();
  cfg.fiber.beta2_l *= 1.01;
  CHECK(sysmodel::validate_config(cfg).violates("fiber.beta2_l"));
}
