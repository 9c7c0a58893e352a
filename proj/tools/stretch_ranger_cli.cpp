#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "stretch_ranger/stretch_ranger.hpp"

namespace fs = std::filesystem;
using namespace stretch_ranger;
using io::json;

namespace {

// Exit codes: 0 ok, 1 domain error, 2 input/parse error.
constexpr int kDomainError = 1;
constexpr int kInputError = 2;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
};

// Timestamps and throughput live here, never in the payload files.
class Manifest {
 public:
  Manifest(std::string command, const Globals& g) : command_(std::move(command)), jobs_(g.jobs) {}

  void input(const std::string& path) {
    if (!path.empty()) inputs_.push_back(path);
  }
  void config(const SystemConfig& c) { config_hash_ = io::config_hash(c); }
  void seed(std::uint64_t s) { seed_ = s; }
  void extra(const std::string& key, json value) { extra_[key] = std::move(value); }

  std::string write(const fs::path& dir, const std::string& name, const std::string& text) {
    const auto path = (dir / name).string();
    io::write_text(path, text);
    outputs_.push_back(path);
    return path;
  }

  void finish(const fs::path& dir) const {
    json j;
    j["command"] = command_;
    j["version"] = kVersion;
    j["config_hash"] = config_hash_.empty() ? json(nullptr) : json(config_hash_);
    j["seed"] = seed_ ? json(*seed_) : json(nullptr);
    j["jobs"] = runner::resolve_jobs(jobs_);
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    j["started_utc"] = started_utc();
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    io::write_text((dir / (command_ + ".manifest.json")).string(), io::dump(j));
  }

 private:
  std::string started_utc() const {
    const auto t = std::chrono::system_clock::to_time_t(wall_start_);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
  }

  std::string command_;
  int jobs_;
  std::string config_hash_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  json extra_ = json::object();
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  std::chrono::system_clock::time_point wall_start_ = std::chrono::system_clock::now();
};

SystemConfig load_config(const Globals& g, Manifest& m) {
  SystemConfig c = g.config_path.empty() ? sysmodel::reference_configuration() : io::load_config(g.config_path);
  m.input(g.config_path);
  m.config(c);
  return c;
}

NoiseModel load_noise(const std::string& path, const Globals& g, Manifest& m) {
  NoiseModel n = NoiseModel::none();
  if (!path.empty()) {
    n = io::noise_from_json(io::load_json(path));
    m.input(path);
  }
  if (g.seed) n.seed = *g.seed;
  m.seed(n.seed);
  return n;
}

Envelope envelope_for(const std::string& shape, int order, const SystemConfig& c) {
  return shape == "super_gaussian" ? stretch::super_gaussian_envelope(c, order) : stretch::default_envelope(c);
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io_error, "cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// Filter range from the profile itself: the displacement whose beat frequency
// sits on the last breakpoint.
double filter_range_mm(const FilterProfile& f, const SystemConfig& c, std::optional<double> given) {
  if (given) return *given;
  require(!f.breakpoints.empty(), ErrorKind::invalid_parameter, "filter has no breakpoints");
  const double x = stretch::frequency_to_displacement(f.breakpoints.back().offset, c);
  const double limit = sysmodel::dynamic_range(c);
  require(x > 0.0, ErrorKind::invalid_parameter, "cannot infer the filter range; pass --range-mm");
  return units::to_mm(std::min(x, limit));
}

runner::MeasurementSetup setup_from_files(const SystemConfig& c, const std::string& filter_path,
                                          std::optional<double> range_mm, const Envelope& env, Manifest& m) {
  auto filter = io::filter_from_csv(io::read_text(filter_path), filter_path);
  m.input(filter_path);
  const double range = filter_range_mm(filter, c, range_mm);
  auto setup = runner::MeasurementSetup::make(c, std::move(filter), env);
  setup.filter_name = stem_of(filter_path);
  setup.filter_range_mm = range;
  return setup;
}

void print_rows(const MeasurementReport& r) {
  std::printf("%s  window %.3g us  update %.3g MHz  %d repeats x %d pulses\n", r.filter_name.c_str(),
              r.window * 1e6, r.update_rate / 1e6, r.repeats, r.pulses_averaged);
  for (const auto& p : r.points)
    std::printf("  x = %8.4f mm  (%.2f um, %.2f um)%s\n", p.true_mm, p.std_mm * 1e3, p.mean_error_mm * 1e3,
                p.n_failed ? ("  failed " + std::to_string(p.n_failed)).c_str() : "");
  std::printf("  overall  (%.2f um, %.2f um)\n", r.overall_std_mm * 1e3, r.overall_mean_error_mm * 1e3);
}

int cmd_validate(const std::string& path, const std::string& out, const Globals& g) {
  Manifest m("validate", g);
  Globals local = g;
  local.config_path = path;
  const auto c = load_config(local, m);
  const auto report = sysmodel::validate_config(c);
  const auto text = io::dump(io::validation_to_json(report));
  std::cout << text;
  if (!out.empty()) {
    const auto dir = prepare_dir(out);
    m.write(dir, "validation.json", text);
    m.finish(dir);
  }
  return report.ok() ? 0 : kDomainError;
}

int cmd_design_filter(double range_mm, double t_min, const std::string& out, const Globals& g) {
  Manifest m("design-filter", g);
  const auto c = load_config(g, m);
  const auto profile = mwp::design_symmetric_ramp(units::from_mm(range_mm), c, t_min);
  const auto dir = prepare_dir(out);
  const auto path = m.write(dir, "filter_" + io::fmt(range_mm) + "mm.csv", io::filter_to_csv(profile));
  m.finish(dir);
  const auto& lo = profile.breakpoints.front();
  const auto& hi = profile.breakpoints.back();
  std::printf("ramp edges: %.4f GHz (T = %g) -> %.4f GHz (T = %g), symmetric\n", lo.offset / 1e9,
              lo.transmission, hi.offset / 1e9, hi.transmission);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

struct SetupArgs {
  std::string filter;
  std::optional<double> range_mm;
  std::string noise;
  std::string envelope = "gaussian";
  int order = 4;
};

int cmd_calibrate(const SetupArgs& a, int grid, int pulses, const std::string& out, const Globals& g) {
  Manifest m("calibrate", g);
  const auto c = load_config(g, m);
  const auto noise = load_noise(a.noise, g, m);
  const auto setup = setup_from_files(c, a.filter, a.range_mm, envelope_for(a.envelope, a.order, c), m);
  const auto points = runner::linspace(0.0, units::from_mm(setup.filter_range_mm), grid);
  const auto run = runner::run_calibration_points(setup, noise, points, pulses, g.jobs);
  const auto dir = prepare_dir(out);
  m.write(dir, "curve.json", io::dump(io::curve_to_json(run.curve)));
  m.write(dir, "calibration_points.csv", io::curve_points_csv(run.curve, run.points));
  m.finish(dir);
  const auto& k = run.curve;
  std::printf("y = %.6g x + %.6g x^2 + %.6g x^3 + %.6g  on [%g, %g] mm, rms residual %.3g, %s\n", k.a, k.b, k.c3,
              k.d, k.x_lo, k.x_hi, k.rms_residual, to_string(k.certificate.direction));
  return 0;
}

int run_and_write(const std::string& name, const runner::MeasurementSetup& setup, const CalibrationCurve& curve,
                  const NoiseModel& noise, const std::vector<double>& xs, int repeats, int pulses,
                  const std::string& out, Manifest& m, const Globals& g) {
  const auto report = runner::run_campaign(setup, curve, noise, xs, repeats, pulses, g.jobs);
  const auto dir = prepare_dir(out);
  m.write(dir, name + ".json", io::dump(io::report_to_json(report)));
  m.write(dir, name + ".csv", io::report_to_csv(report));
  m.finish(dir);
  print_rows(report);
  return report.n_failed == 0 ? 0 : kDomainError;
}

int cmd_measure(const SetupArgs& a, const std::string& curve_path, const std::vector<double>& x_mm, int repeats,
                int pulses, const std::string& out, const Globals& g) {
  Manifest m("measure", g);
  const auto c = load_config(g, m);
  const auto noise = load_noise(a.noise, g, m);
  const auto curve = io::curve_from_json(io::load_json(curve_path));
  m.input(curve_path);
  auto args = a;
  if (!args.range_mm) args.range_mm = curve.x_hi;
  const auto setup = setup_from_files(c, a.filter, args.range_mm, envelope_for(a.envelope, a.order, c), m);
  std::vector<double> xs;
  for (double x : x_mm) xs.push_back(units::from_mm(x));
  return run_and_write("report", setup, curve, noise, xs, repeats, pulses, out, m, g);
}

int cmd_sweep(const SetupArgs& a, const std::string& curve_path, int points, int repeats, int pulses,
              const std::string& out, const Globals& g) {
  Manifest m("sweep", g);
  const auto c = load_config(g, m);
  const auto noise = load_noise(a.noise, g, m);
  const auto curve = io::curve_from_json(io::load_json(curve_path));
  m.input(curve_path);
  auto args = a;
  if (!args.range_mm) args.range_mm = curve.x_hi;
  const auto setup = setup_from_files(c, a.filter, args.range_mm, envelope_for(a.envelope, a.order, c), m);
  std::vector<double> xs;
  for (double x : runner::campaign_displacements(curve.x_hi - curve.x_lo, points))
    xs.push_back(units::from_mm(curve.x_lo + x));
  return run_and_write("sweep", setup, curve, noise, xs, repeats, pulses, out, m, g);
}

int cmd_tradeoff(const std::string& protocol_path, const std::string& noise_path, const std::string& out,
                 const Globals& g) {
  Manifest m("tradeoff", g);
  const auto c = load_config(g, m);
  const auto noise = load_noise(noise_path, g, m);
  runner::Protocol protocol;
  if (!protocol_path.empty()) {
    protocol = io::protocol_from_json(io::load_json(protocol_path));
    m.input(protocol_path);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto t = runner::tradeoff_study(c, noise, protocol, g.jobs);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto dir = prepare_dir(out);
  m.write(dir, "tradeoff.json", io::dump(io::tradeoff_to_json(t)));
  m.write(dir, "tradeoff.csv", io::tradeoff_to_csv(t));
  std::size_t measurements = 0;
  for (const auto& f : t.filters) {
    const auto& name = f.report.filter_name;
    m.write(dir, name + ".json", io::dump(io::report_to_json(f.report)));
    m.write(dir, name + ".csv", io::report_to_csv(f.report));
    m.write(dir, name + "_filter.csv", io::filter_to_csv(f.profile));
    m.write(dir, name + "_curve.json", io::dump(io::curve_to_json(f.calibration.curve)));
    m.write(dir, name + "_calibration.csv", io::curve_points_csv(f.calibration.curve, f.calibration.points));
    measurements += f.report.points.size() * static_cast<std::size_t>(f.report.repeats);
  }
  if (t.baseline) {
    m.write(dir, "baseline.json", io::dump(io::report_to_json(*t.baseline)));
    m.write(dir, "baseline.csv", io::report_to_csv(*t.baseline));
    measurements += t.baseline->points.size() * static_cast<std::size_t>(t.baseline->repeats);
  }
  m.extra("batch_seconds", secs);
  m.extra("measurements_per_second", secs > 0.0 ? measurements / secs : 0.0);
  m.finish(dir);

  for (const auto& f : t.filters) print_rows(f.report);
  if (t.baseline) print_rows(*t.baseline);
  std::printf("data rates: %g GB/s direct digitization vs %g GB/s two channels\n",
              t.data_rates.baseline_bytes_per_second / 1e9, t.data_rates.channels_bytes_per_second / 1e9);
  std::printf("batch: %zu measurements in %.2f s\n", measurements, secs);
  return 0;
}

int cmd_baseline(const std::string& noise_path, int points, int repeats, const std::string& method,
                 const std::string& out, const Globals& g) {
  Manifest m("baseline", g);
  const auto c = load_config(g, m);
  const auto noise = load_noise(noise_path, g, m);
  const auto xs = runner::campaign_displacements(sysmodel::dynamic_range(c) * 0.999, points);
  const auto est = method == "chirp" ? EstimateMethod::chirp_fit : EstimateMethod::fft_peak;
  const auto r = runner::run_baseline_campaign(c, noise, xs, repeats, g.jobs, est);
  const auto dir = prepare_dir(out);
  m.write(dir, "baseline.json", io::dump(io::report_to_json(r)));
  m.write(dir, "baseline.csv", io::report_to_csv(r));
  m.finish(dir);
  print_rows(r);
  return r.n_failed == 0 ? 0 : kDomainError;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out, const Globals& g) {
  Manifest m("report", g);
  std::string csv;
  for (const auto& path : inputs) {
    const auto r = io::report_from_json(io::load_json(path));
    m.input(path);
    print_rows(r);
    auto part = io::report_to_csv(r);
    if (!csv.empty()) part.erase(0, part.find('\n') + 1);
    csv += part;
  }
  if (!out.empty()) {
    const auto dir = prepare_dir(out);
    m.write(dir, "combined.csv", csv);
    m.finish(dir);
  }
  return 0;
}

int domain_exit(const Error& e) {
  std::fprintf(stderr, "error: %s\n", e.describe().c_str());
  if (e.kind() == ErrorKind::out_of_range && e.hint())
    std::fprintf(stderr, "nearest valid endpoint: %g\n", *e.hint());
  return (e.kind() == ErrorKind::parse_error || e.kind() == ErrorKind::io_error) ? kInputError : kDomainError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-stretch ranging simulator and retrieval engine"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "System configuration JSON (default: built-in reference)")
      ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override the noise seed");
  app.add_option("--jobs", g.jobs, "Worker threads; 0 uses all cores")
      ->envname("STRETCH_RANGER_JOBS")
      ->check(CLI::NonNegativeNumber);

  std::string out;
  SetupArgs setup;
  double range_opt = 0.0;
  auto add_setup = [&](CLI::App* sub, bool with_range) {
    sub->add_option("--filter", setup.filter, "Filter profile CSV")->required()->check(CLI::ExistingFile);
    if (with_range) sub->add_option("--range-mm", range_opt, "Calibrated range (default: from the filter)");
    sub->add_option("--noise", setup.noise, "Noise profile JSON (default: noiseless)")->check(CLI::ExistingFile);
    sub->add_option("--envelope", setup.envelope, "Pulse envelope")
        ->check(CLI::IsMember({"gaussian", "super_gaussian"}));
    sub->add_option("--order", setup.order, "Super-Gaussian order")->check(CLI::Range(1, 20));
  };

  auto* validate = app.add_subcommand("validate", "Check a configuration against the physical constraints");
  std::string validate_path;
  validate->add_option("config", validate_path, "Configuration JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--out", out, "Also write the report and manifest here");

  auto* design = app.add_subcommand("design-filter", "Design a symmetric linear ramp filter");
  double range_mm = 0.0;
  double t_min = 0.05;
  design->add_option("--range-mm", range_mm, "Displacement range covered by the ramp")->required();
  design->add_option("--t-min", t_min, "Transmission at the zero point");
  design->add_option("--out", out, "Output directory")->required();

  auto* calibrate = app.add_subcommand("calibrate", "Fit a calibration cubic");
  int grid = 16;
  int cal_pulses = 0;
  add_setup(calibrate, true);
  calibrate->add_option("--grid", grid, "Calibration points over [0, range]");
  calibrate->add_option("--pulses", cal_pulses, "Pulses averaged per point (0: 200 us)")->check(CLI::NonNegativeNumber);
  calibrate->add_option("--out", out, "Output directory")->required();

  auto* measure = app.add_subcommand("measure", "Repeat measurements at given displacements");
  std::string curve_path;
  std::vector<double> x_mm;
  int repeats = 100;
  int pulses = 500;
  add_setup(measure, false);
  measure->add_option("--curve", curve_path, "Calibration curve JSON")->required()->check(CLI::ExistingFile);
  measure->add_option("--x-mm", x_mm, "Displacements")->required();
  measure->add_option("--repeats", repeats, "Repeats per displacement")->check(CLI::PositiveNumber);
  measure->add_option("--pulses", pulses, "Pulses averaged per measurement")->check(CLI::PositiveNumber);
  measure->add_option("--out", out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Evenly spaced campaign across the calibrated range");
  int points = 9;
  add_setup(sweep, false);
  sweep->add_option("--curve", curve_path, "Calibration curve JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--points", points, "Displacements")->check(CLI::PositiveNumber);
  sweep->add_option("--repeats", repeats, "Repeats per displacement")->check(CLI::PositiveNumber);
  sweep->add_option("--pulses", pulses, "Pulses averaged per measurement")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out, "Output directory")->required();

  auto* tradeoff = app.add_subcommand("tradeoff", "Full two-filter study with the direct-digitization baseline");
  std::string protocol_path;
  std::string noise_path;
  tradeoff->add_option("--protocol", protocol_path, "Protocol JSON")->check(CLI::ExistingFile);
  tradeoff->add_option("--noise", noise_path, "Noise profile JSON")->check(CLI::ExistingFile);
  tradeoff->add_option("--out", out, "Output directory")->required();

  auto* baseline = app.add_subcommand("baseline", "Direct-digitization campaign");
  std::string method = "fft";
  baseline->add_option("--noise", noise_path, "Noise profile JSON")->check(CLI::ExistingFile);
  baseline->add_option("--points", points, "Displacements")->check(CLI::PositiveNumber);
  baseline->add_option("--repeats", repeats, "Repeats per displacement")->check(CLI::PositiveNumber);
  baseline->add_option("--method", method, "Frequency estimator")->check(CLI::IsMember({"fft", "chirp"}));
  baseline->add_option("--out", out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Print and merge measurement reports");
  std::vector<std::string> inputs;
  report->add_option("reports", inputs, "Report JSON files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out, "Write the merged CSV and manifest here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kInputError;
  }
  if (seed_opt->count() > 0) g.seed = seed;
  if (calibrate->parsed() && calibrate->count("--range-mm") > 0) setup.range_mm = range_opt;

  try {
    if (validate->parsed()) return cmd_validate(validate_path, out, g);
    if (design->parsed()) return cmd_design_filter(range_mm, t_min, out, g);
    if (calibrate->parsed()) return cmd_calibrate(setup, grid, cal_pulses, out, g);
    if (measure->parsed()) return cmd_measure(setup, curve_path, x_mm, repeats, pulses, out, g);
    if (sweep->parsed()) return cmd_sweep(setup, curve_path, points, repeats, pulses, out, g);
    if (tradeoff->parsed()) return cmd_tradeoff(protocol_path, noise_path, out, g);
    if (baseline->parsed()) return cmd_baseline(noise_path, points, repeats, method, out, g);
    if (report->parsed()) return cmd_report(inputs, out, g);
  } catch (const Error& e) {
    return domain_exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDomainError;
  }
  return 0;
}
