#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stretch_ranger/calib.hpp"
#include "stretch_ranger/dsp.hpp"
#include "stretch_ranger/error.hpp"
#include "stretch_ranger/mwphotonics.hpp"
#include "stretch_ranger/runner.hpp"
#include "stretch_ranger/sysmodel.hpp"
#include "stretch_ranger/units.hpp"
#include "stretch_ranger/waveform.hpp"

namespace stretch_ranger::io {

using json = nlohmann::ordered_json;

// ---- text helpers -------------------------------------------------------

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path);
}

// Shortest round-trip decimal.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorKind::parse_error, source + ":" + std::to_string(line) + ":" +
                                            std::to_string(col) + ": malformed JSON");
  }
}

inline json load_json(const std::string& path) { return parse_json(read_text(path), path); }

// ---- strict field access ------------------------------------------------

// Reads an object's fields by name and rejects anything left unread, so a
// misspelled key is an error instead of a silent default.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  double number(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) {
    if (!j_.contains(key)) return fallback;
    used_.insert(key);
    if (j_.at(key).is_null()) return fallback;
    return number(key);
  }
  int integer(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }
  int integer(const std::string& key, int fallback) { return j_.contains(key) ? integer(key) : fallback; }
  bool boolean(const std::string& key, bool fallback) {
    if (!j_.contains(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    if (!j_.contains(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }
  Fields object(const std::string& key) { return Fields(at(key), qualified(key)); }
  const json& raw(const std::string& key) { return at(key); }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) fail(item.key(), "unknown field");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw Error(ErrorKind::parse_error, "field '" + qualified(key) + "': " + message);
  }

 private:
  const json& at(const std::string& key) {
    if (!j_.contains(key)) fail(key, "missing");
    used_.insert(key);
    return j_.at(key);
  }
  std::string qualified(const std::string& key) const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// ---- configuration ------------------------------------------------------

inline json adc_to_json(const AdcSpec& a) {
  return {{"sample_rate_gsps", a.sample_rate / 1e9}, {"bits", a.bits}, {"full_scale_v", a.full_scale}};
}

inline AdcSpec adc_from(Fields f) {
  AdcSpec a;
  a.sample_rate = f.number("sample_rate_gsps") * 1e9;
  a.bits = f.integer("bits");
  a.full_scale = f.number("full_scale_v");
  f.finish();
  return a;
}

inline json config_to_json(const SystemConfig& c) {
  using namespace units;
  const auto& s = c.source;
  const auto& p = c.processor;
  json j;
  j["source"] = {{"repetition_rate_mhz", to_mhz(s.repetition_rate)},
                 {"pulse_width_fs", to_fs(s.pulse_width)},
                 {"center_wavelength_nm", to_nm(s.center_wavelength)},
                 {"filtered_spectral_width_nm", to_nm(s.filtered_spectral_width)},
                 {"average_power_mw", to_mw(s.average_power)}};
  j["fiber"] = {{"total_dispersion_ps_per_nm", to_ps_per_nm(c.fiber.total_dispersion)},
                {"beta2_l_ps2", c.fiber.beta2_l * 1e24},
                {"beta3_l_ps3", c.fiber.beta3_l * 1e36}};
  json proc = {{"carrier_wavelength_nm", to_nm(p.carrier_wavelength)},
               {"carrier_power_mw", to_mw(p.carrier_power)},
               {"half_wave_voltage_v", p.half_wave_voltage},
               {"drive_amplitude_v", p.drive_amplitude}};
  if (std::isfinite(p.extinction_ratio_db))
    proc["extinction_ratio_db"] = p.extinction_ratio_db;
  else
    proc["extinction_ratio_db"] = nullptr;
  proc["bpf_low_ghz"] = to_ghz(p.bpf_low);
  proc["bpf_high_ghz"] = to_ghz(p.bpf_high);
  proc["modulator_bandwidth_ghz"] = to_ghz(p.modulator_bandwidth);
  proc["pd1_bandwidth_ghz"] = to_ghz(p.pd1_bandwidth);
  proc["pd23_bandwidth_mhz"] = to_mhz(p.pd23_bandwidth);
  proc["coupling_det"] = p.coupling_det;
  proc["coupling_ref"] = p.coupling_ref;
  proc["responsivity_det_a_per_w"] = p.responsivity_det;
  proc["responsivity_ref_a_per_w"] = p.responsivity_ref;
  proc["transimpedance_v_per_a"] = p.transimpedance;
  j["processor"] = proc;
  j["stage"] = {{"reference_delay_ps", to_ps(c.stage.reference_delay)},
                {"displacement_mm", to_mm(c.stage.displacement)},
                {"coupling_decay_percent_per_cm", c.stage.coupling_decay_per_meter}};
  j["adc_baseline"] = adc_to_json(c.adc_baseline);
  j["adc_channels"] = adc_to_json(c.adc_channels);
  return j;
}

// beta2_l_ps2 is optional and derived from the dispersion when absent; when
// present it must agree (validate_config checks). The stage zero point is
// given either as a delay or as the beat frequency it should produce.
inline SystemConfig config_from_json(const json& j) {
  using namespace units;
  SystemConfig c;
  Fields root(j, "");

  Fields s = root.object("source");
  c.source.repetition_rate = from_mhz(s.number("repetition_rate_mhz"));
  c.source.pulse_width = from_fs(s.number("pulse_width_fs"));
  c.source.center_wavelength = from_nm(s.number("center_wavelength_nm"));
  c.source.filtered_spectral_width = from_nm(s.number("filtered_spectral_width_nm"));
  c.source.average_power = from_mw(s.number("average_power_mw"));
  s.finish();

  Fields f = root.object("fiber");
  c.fiber.total_dispersion = from_ps_per_nm(f.number("total_dispersion_ps_per_nm"));
  c.fiber.beta3_l = f.number("beta3_l_ps3", 0.0) / 1e36;
  if (f.has("beta2_l_ps2"))
    c.fiber.beta2_l = f.number("beta2_l_ps2") / 1e24;
  else
    c.fiber.beta2_l = sysmodel::derive_beta2_l(c.fiber.total_dispersion, c.source.center_wavelength);
  f.finish();

  Fields p = root.object("processor");
  auto& pr = c.processor;
  pr.carrier_wavelength = from_nm(p.number("carrier_wavelength_nm"));
  pr.carrier_power = from_mw(p.number("carrier_power_mw"));
  pr.half_wave_voltage = p.number("half_wave_voltage_v");
  pr.drive_amplitude = p.number("drive_amplitude_v");
  pr.extinction_ratio_db = p.number("extinction_ratio_db", std::numeric_limits<double>::infinity());
  pr.bpf_low = from_ghz(p.number("bpf_low_ghz"));
  pr.bpf_high = from_ghz(p.number("bpf_high_ghz"));
  pr.modulator_bandwidth = from_ghz(p.number("modulator_bandwidth_ghz"));
  pr.pd1_bandwidth = from_ghz(p.number("pd1_bandwidth_ghz"));
  pr.pd23_bandwidth = from_mhz(p.number("pd23_bandwidth_mhz"));
  pr.coupling_det = p.number("coupling_det");
  pr.coupling_ref = p.number("coupling_ref");
  pr.responsivity_det = p.number("responsivity_det_a_per_w");
  pr.responsivity_ref = p.number("responsivity_ref_a_per_w");
  pr.transimpedance = p.number("transimpedance_v_per_a");
  p.finish();

  Fields st = root.object("stage");
  const bool by_delay = st.has("reference_delay_ps");
  const bool by_freq = st.has("zero_point_frequency_ghz");
  if (by_delay == by_freq)
    st.fail("", "give exactly one of reference_delay_ps or zero_point_frequency_ghz");
  if (by_delay) {
    c.stage.reference_delay = from_ps(st.number("reference_delay_ps"));
  } else {
    const double f0 = from_ghz(st.number("zero_point_frequency_ghz"));
    if (!(c.fiber.beta2_l != 0.0 && std::isfinite(c.fiber.beta2_l)))
      st.fail("zero_point_frequency_ghz", "needs a nonzero beta2*L to back-compute the delay");
    c.stage.reference_delay = sysmodel::delay_for_beat_frequency(f0, c.fiber);
  }
  c.stage.displacement = from_mm(st.number("displacement_mm", 0.0));
  // percent per cm is numerically the same as relative loss per metre
  c.stage.coupling_decay_per_meter = st.number("coupling_decay_percent_per_cm", 0.0);
  st.finish();

  c.adc_baseline = adc_from(root.object("adc_baseline"));
  c.adc_channels = adc_from(root.object("adc_channels"));
  root.finish();
  return c;
}

inline SystemConfig load_config(const std::string& path) {
  const auto j = load_json(path);
  try {
    return config_from_json(j);
  } catch (Error& e) {
    if (e.kind() == ErrorKind::parse_error)
      throw Error(ErrorKind::parse_error, path + ": " + e.what());
    throw;
  }
}

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Hash over the resolved, canonical form, so equivalent inputs hash alike.
inline std::string config_hash(const SystemConfig& c) { return fnv1a_hex(config_to_json(c).dump()); }

inline json validation_to_json(const sysmodel::ValidationReport& r) {
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["ok"] = r.ok();
  json v = json::array();
  for (const auto& x : r.violations) v.push_back({{"constraint", x.constraint}, {"message", x.message}});
  j["violations"] = v;
  j["derived"] = {{"beta2_l_ps2", num(r.beta2_l * 1e24)},
                  {"oe_bandwidth_ghz", num(r.oe_bandwidth / 1e9)},
                  {"stretch_duration_ns", num(r.stretch_duration * 1e9)},
                  {"pulse_period_ns", num(r.pulse_period * 1e9)},
                  {"zero_point_frequency_ghz", num(r.zero_point_frequency / 1e9)},
                  {"max_delay_ps", num(r.max_delay * 1e12)},
                  {"dynamic_range_cm", num(r.dynamic_range * 1e2)}};
  return j;
}

// ---- noise and protocol -------------------------------------------------

inline json noise_to_json(const NoiseModel& n) {
  return {{"det_noise_rms", n.det_noise_rms},
          {"ref_noise_rms", n.ref_noise_rms},
          {"power_jitter_rms", n.power_jitter_rms},
          {"drive_jitter_rms", n.drive_jitter_rms},
          {"drift_rms_per_point", n.drift_rms_per_point},
          {"interferogram_noise_rms", n.interferogram_noise_rms},
          {"adc_quantization", n.adc_quantization},
          {"seed", n.seed}};
}

inline NoiseModel noise_from_json(const json& j) {
  Fields f(j, "noise");
  NoiseModel n;
  n.det_noise_rms = f.number("det_noise_rms", 0.0);
  n.ref_noise_rms = f.number("ref_noise_rms", 0.0);
  n.power_jitter_rms = f.number("power_jitter_rms", 0.0);
  n.drive_jitter_rms = f.number("drive_jitter_rms", 0.0);
  n.drift_rms_per_point = f.number("drift_rms_per_point", 0.0);
  n.interferogram_noise_rms = f.number("interferogram_noise_rms", 0.0);
  n.adc_quantization = f.boolean("adc_quantization", true);
  if (j.contains("seed")) {
    const auto& s = f.raw("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      f.fail("seed", "expected a non-negative integer");
    n.seed = s.get<std::uint64_t>();
  }
  f.finish();
  try {
    n.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::parse_error, std::string("noise: ") + e.what());
  }
  return n;
}

inline json protocol_to_json(const runner::Protocol& p) {
  return {{"filter_ranges_mm", p.filter_ranges_mm},
          {"t_min", p.t_min},
          {"calibration_points", p.calibration_points},
          {"calibration_pulses", p.calibration_pulses},
          {"campaign_points", p.campaign_points},
          {"repeats", p.repeats},
          {"pulses", p.pulses},
          {"envelope", p.envelope_shape == EnvelopeShape::gaussian ? "gaussian" : "super_gaussian"},
          {"envelope_order", p.envelope_order},
          {"include_baseline", p.include_baseline},
          {"baseline_repeats", p.baseline_repeats}};
}

inline runner::Protocol protocol_from_json(const json& j) {
  Fields f(j, "protocol");
  runner::Protocol p;
  if (j.contains("filter_ranges_mm")) {
    const auto& r = f.raw("filter_ranges_mm");
    if (!r.is_array()) f.fail("filter_ranges_mm", "expected an array of numbers");
    p.filter_ranges_mm.clear();
    for (const auto& v : r) {
      if (!v.is_number()) f.fail("filter_ranges_mm", "expected an array of numbers");
      p.filter_ranges_mm.push_back(v.get<double>());
    }
  }
  p.t_min = f.number("t_min", p.t_min);
  p.calibration_points = f.integer("calibration_points", p.calibration_points);
  p.calibration_pulses = f.integer("calibration_pulses", p.calibration_pulses);
  p.campaign_points = f.integer("campaign_points", p.campaign_points);
  p.repeats = f.integer("repeats", p.repeats);
  p.pulses = f.integer("pulses", p.pulses);
  const auto env = f.text("envelope", "gaussian");
  if (env == "gaussian")
    p.envelope_shape = EnvelopeShape::gaussian;
  else if (env == "super_gaussian")
    p.envelope_shape = EnvelopeShape::super_gaussian;
  else
    f.fail("envelope", "expected \"gaussian\" or \"super_gaussian\"");
  p.envelope_order = f.integer("envelope_order", p.envelope_order);
  p.include_baseline = f.boolean("include_baseline", p.include_baseline);
  p.baseline_repeats = f.integer("baseline_repeats", p.baseline_repeats);
  f.finish();
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::parse_error, std::string("protocol: ") + e.what());
  }
  return p;
}

// ---- CSV ----------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

inline CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      throw Error(ErrorKind::parse_error, source + ":" + std::to_string(line_no) + ": expected " +
                                              std::to_string(t.header.size()) + " columns, got " +
                                              std::to_string(cells.size()));
    std::vector<double> row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      char* end = nullptr;
      const double v = std::strtod(cells[i].c_str(), &end);
      if (cells[i].empty() || end != cells[i].c_str() + cells[i].size())
        throw Error(ErrorKind::parse_error, source + ":" + std::to_string(line_no) + ": column '" +
                                                t.header[i] + "' is not a number: '" + cells[i] + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw Error(ErrorKind::parse_error, source + ": empty CSV");
  return t;
}

inline std::string csv_row(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out + "\n";
}

// ---- waveforms ----------------------------------------------------------

inline std::string waveform_to_csv(const Waveform& w) {
  std::string out = "time_s,value\n";
  for (std::size_t i = 0; i < w.size(); ++i) out += csv_row({w.time(i), w.samples[i]});
  return out;
}

inline Waveform waveform_from_csv(const std::string& text, const std::string& source) {
  const auto t = parse_csv(text, source);
  const int ct = t.column("time_s");
  const int cv = t.column("value");
  if (ct < 0 || cv < 0) throw Error(ErrorKind::parse_error, source + ": need columns time_s,value");
  if (t.rows.size() < 2) throw Error(ErrorKind::parse_error, source + ": need at least two samples");
  Waveform w;
  w.t0 = t.rows.front()[static_cast<std::size_t>(ct)];
  const double span = t.rows.back()[static_cast<std::size_t>(ct)] - w.t0;
  if (!(span > 0.0)) throw Error(ErrorKind::parse_error, source + ": time must increase");
  w.sample_rate = static_cast<double>(t.rows.size() - 1) / span;
  for (const auto& r : t.rows) w.samples.push_back(r[static_cast<std::size_t>(cv)]);
  return w;
}

// Binary container: "SRWF", u32 version, u64 count, f64 sample_rate, f64 t0,
// then count little-endian f64 samples.
inline constexpr char kWaveformMagic[4] = {'S', 'R', 'W', 'F'};
inline constexpr std::uint32_t kWaveformVersion = 1;
inline constexpr std::size_t kWaveformHeaderBytes = 32;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t pos) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline std::string waveform_to_binary(const Waveform& w) {
  std::string out(kWaveformMagic, 4);
  detail::put_le<std::uint32_t>(out, kWaveformVersion);
  detail::put_le<std::uint64_t>(out, w.size());
  detail::put_le<double>(out, w.sample_rate);
  detail::put_le<double>(out, w.t0);
  for (double v : w.samples) detail::put_le<double>(out, v);
  return out;
}

inline Waveform waveform_from_binary(const std::string& bytes, const std::string& source) {
  if (bytes.size() < kWaveformHeaderBytes || std::memcmp(bytes.data(), kWaveformMagic, 4) != 0)
    throw Error(ErrorKind::parse_error, source + ": not a waveform container");
  if (detail::get_le<std::uint32_t>(bytes, 4) != kWaveformVersion)
    throw Error(ErrorKind::parse_error, source + ": unsupported waveform container version");
  const auto count = detail::get_le<std::uint64_t>(bytes, 8);
  if (bytes.size() != kWaveformHeaderBytes + count * 8)
    throw Error(ErrorKind::parse_error, source + ": truncated or oversized sample block");
  Waveform w;
  w.sample_rate = detail::get_le<double>(bytes, 16);
  w.t0 = detail::get_le<double>(bytes, 24);
  w.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    w.samples[i] = detail::get_le<double>(bytes, kWaveformHeaderBytes + 8 * i);
  return w;
}

// ---- filter profiles ----------------------------------------------------

inline std::string filter_to_csv(const FilterProfile& f) {
  const bool db = f.scale == ProfileScale::linear_db;
  std::string out = db ? "offset_ghz,attenuation_db\n" : "offset_ghz,transmission\n";
  for (const auto& p : f.breakpoints)
    out += csv_row({p.offset / 1e9, db ? -10.0 * std::log10(p.transmission) : p.transmission});
  return out;
}

// Non-negative offsets only means a symmetric profile. An attenuation_db
// column is converted and interpolated in dB, as programmable filters do.
inline FilterProfile filter_from_csv(const std::string& text, const std::string& source) {
  const auto t = parse_csv(text, source);
  const int co = t.column("offset_ghz");
  const int ct = t.column("transmission");
  const int ca = t.column("attenuation_db");
  if (co < 0 || (ct < 0) == (ca < 0))
    throw Error(ErrorKind::parse_error,
                source + ": need offset_ghz and exactly one of transmission, attenuation_db");
  if (t.rows.empty()) throw Error(ErrorKind::parse_error, source + ": no breakpoints");
  FilterProfile f;
  f.scale = ca >= 0 ? ProfileScale::linear_db : ProfileScale::linear_power;
  for (const auto& r : t.rows) {
    const double off = r[static_cast<std::size_t>(co)] * 1e9;
    const double v = ca >= 0 ? std::pow(10.0, -r[static_cast<std::size_t>(ca)] / 10.0)
                             : r[static_cast<std::size_t>(ct)];
    f.breakpoints.push_back({off, v});
  }
  f.symmetric = f.breakpoints.front().offset >= 0.0;
  try {
    f.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::parse_error, source + ": " + e.what());
  }
  return f;
}

// ---- calibration --------------------------------------------------------

inline json curve_to_json(const CalibrationCurve& c) {
  json roots = json::array();
  for (double r : c.certificate.derivative_roots_mm) roots.push_back(r);
  return {{"model", "y = a*x + b*x^2 + c*x^3 + d"},
          {"units", {{"x", "mm"}, {"y", "transmission ratio"}}},
          {"a", c.a},
          {"b", c.b},
          {"c", c.c3},
          {"d", c.d},
          {"valid_range_mm", {c.x_lo, c.x_hi}},
          {"fit", {{"n_points", c.n_points}, {"rms_residual", c.rms_residual}, {"max_residual", c.max_residual}}},
          {"certificate",
           {{"monotone", c.monotone()},
            {"direction", to_string(c.certificate.direction)},
            {"min_abs_slope_per_mm", c.certificate.margin},
            {"min_abs_slope_at_mm", c.certificate.margin_at_mm},
            {"derivative_roots_mm", roots}}}};
}

// Only the coefficients and range are trusted; the certificate is recomputed.
inline CalibrationCurve curve_from_json(const json& j) {
  Fields f(j, "curve");
  const double a = f.number("a");
  const double b = f.number("b");
  const double c = f.number("c");
  const double d = f.number("d");
  const auto& range = f.raw("valid_range_mm");
  if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number())
    f.fail("valid_range_mm", "expected [lo, hi]");
  CalibrationCurve curve;
  try {
    curve = calib::make_curve(a, b, c, d, range[0].get<double>(), range[1].get<double>());
  } catch (const Error& e) {
    f.fail("valid_range_mm", e.what());
  }
  if (j.contains("fit")) {
    Fields fit = f.object("fit");
    curve.n_points = static_cast<std::size_t>(fit.integer("n_points", 0));
    curve.rms_residual = fit.number("rms_residual", 0.0);
    curve.max_residual = fit.number("max_residual", 0.0);
    fit.finish();
  }
  f.text("model", "");
  if (j.contains("units")) f.raw("units");
  if (j.contains("certificate")) f.raw("certificate");
  f.finish();
  return curve;
}

inline std::string points_to_csv(const std::vector<CalibrationPoint>& pts) {
  std::string out = "displacement_mm,transmission,weight\n";
  for (const auto& p : pts) out += csv_row({units::to_mm(p.displacement), p.transmission, p.weight});
  return out;
}

inline std::vector<CalibrationPoint> points_from_csv(const std::string& text, const std::string& source) {
  const auto t = parse_csv(text, source);
  const int cx = t.column("displacement_mm");
  const int cy = t.column("transmission");
  const int cw = t.column("weight");
  if (cx < 0 || cy < 0)
    throw Error(ErrorKind::parse_error, source + ": need columns displacement_mm,transmission");
  std::vector<CalibrationPoint> pts;
  for (const auto& r : t.rows)
    pts.push_back({units::from_mm(r[static_cast<std::size_t>(cx)]), r[static_cast<std::size_t>(cy)],
                   cw >= 0 ? r[static_cast<std::size_t>(cw)] : 1.0});
  return pts;
}

// Fitted curve against the points, for plotting.
inline std::string curve_points_csv(const CalibrationCurve& c, const std::vector<CalibrationPoint>& pts) {
  std::string out = "displacement_mm,transmission,fit,residual\n";
  for (const auto& p : pts) {
    const double x = units::to_mm(p.displacement);
    const double y = calib::evaluate_unchecked(c, x);
    out += csv_row({x, p.transmission, y, p.transmission - y});
  }
  return out;
}

// ---- reports ------------------------------------------------------------

inline json report_to_json(const MeasurementReport& r) {
  json pts = json::array();
  for (const auto& p : r.points) {
    json fails = json::array();
    for (const auto& s : p.failures) fails.push_back(s);
    pts.push_back({{"true_mm", p.true_mm},
                   {"mean_retrieved_mm", p.mean_retrieved_mm},
                   {"std_um", p.std_mm * 1e3},
                   {"mean_error_um", p.mean_error_mm * 1e3},
                   {"mean_transmission", p.mean_transmission},
                   {"std_transmission", p.std_transmission},
                   {"predicted_std_um", p.predicted_std_mm * 1e3},
                   {"n_ok", p.n_ok},
                   {"n_failed", p.n_failed},
                   {"failures", fails}});
  }
  return {{"filter", r.filter_name},
          {"filter_range_mm", r.filter_range_mm},
          {"aggregation", r.aggregation},
          {"pulses_averaged", r.pulses_averaged},
          {"averaging_window_us", r.window * 1e6},
          {"update_rate_mhz", r.update_rate / 1e6},
          {"repeats", r.repeats},
          {"overall_std_um", r.overall_std_mm * 1e3},
          {"overall_mean_error_um", r.overall_mean_error_mm * 1e3},
          {"failed_measurements", r.n_failed},
          {"points", pts}};
}

inline MeasurementReport report_from_json(const json& j) {
  Fields f(j, "report");
  MeasurementReport r;
  r.filter_name = f.text("filter", "");
  r.filter_range_mm = f.number("filter_range_mm", 0.0);
  r.aggregation = f.text("aggregation", r.aggregation);
  r.pulses_averaged = f.integer("pulses_averaged", 0);
  r.window = f.number("averaging_window_us", 0.0) / 1e6;
  r.update_rate = f.number("update_rate_mhz", 0.0) * 1e6;
  r.repeats = f.integer("repeats", 0);
  r.overall_std_mm = f.number("overall_std_um", 0.0) / 1e3;
  r.overall_mean_error_mm = f.number("overall_mean_error_um", 0.0) / 1e3;
  r.n_failed = f.integer("failed_measurements", 0);
  const auto& pts = f.raw("points");
  if (!pts.is_array()) f.fail("points", "expected an array");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Fields p(pts[i], "report.points[" + std::to_string(i) + "]");
    PointRecord rec;
    rec.true_mm = p.number("true_mm");
    rec.mean_retrieved_mm = p.number("mean_retrieved_mm", 0.0);
    rec.std_mm = p.number("std_um", 0.0) / 1e3;
    rec.mean_error_mm = p.number("mean_error_um", 0.0) / 1e3;
    rec.mean_transmission = p.number("mean_transmission", 0.0);
    rec.std_transmission = p.number("std_transmission", 0.0);
    rec.predicted_std_mm = p.number("predicted_std_um", 0.0) / 1e3;
    rec.n_ok = p.integer("n_ok", 0);
    rec.n_failed = p.integer("n_failed", 0);
    if (pts[i].contains("failures"))
      for (const auto& s : p.raw("failures"))
        if (s.is_string()) rec.failures.push_back(s.get<std::string>());
    p.finish();
    r.points.push_back(std::move(rec));
  }
  f.finish();
  return r;
}

// One row per displacement. The last column is the "(std, mean error)" pair
// label used in the measured-displacement plot.
inline std::string report_to_csv(const MeasurementReport& r) {
  std::string out =
      "filter,true_mm,mean_retrieved_mm,std_um,mean_error_um,mean_transmission,std_transmission,"
      "predicted_std_um,n_ok,n_failed,label\n";
  for (const auto& p : r.points) {
    char label[96];
    std::snprintf(label, sizeof label, "\"(%.2f um, %.2f um)\"", p.std_mm * 1e3, p.mean_error_mm * 1e3);
    out += r.filter_name + ",";
    std::string nums = csv_row({p.true_mm, p.mean_retrieved_mm, p.std_mm * 1e3, p.mean_error_mm * 1e3,
                                p.mean_transmission, p.std_transmission, p.predicted_std_mm * 1e3,
                                static_cast<double>(p.n_ok), static_cast<double>(p.n_failed)});
    nums.pop_back();
    out += nums + "," + label + "\n";
  }
  return out;
}

inline json data_rates_to_json(const DataRateReport& d) {
  return {{"baseline_gb_per_s", d.baseline_bytes_per_second / 1e9},
          {"baseline_quoted_gb_per_s", d.quoted_baseline_bytes_per_second / 1e9},
          {"channel_gb_per_s", d.channel_bytes_per_second / 1e9},
          {"channels", d.n_channels},
          {"channels_gb_per_s", d.channels_bytes_per_second / 1e9},
          {"reduction_factor", std::isfinite(d.reduction_factor) ? json(d.reduction_factor) : json(nullptr)}};
}

inline json tradeoff_to_json(const runner::TradeoffReport& t) {
  json filters = json::array();
  for (const auto& f : t.filters) {
    filters.push_back({{"range_mm", f.range_mm},
                       {"designed_acf_slope_per_mm", f.designed_slope_per_mm},
                       {"curve", curve_to_json(f.calibration.curve)},
                       {"report", report_to_json(f.report)}});
  }
  json j;
  j["filters"] = filters;
  if (t.baseline) j["baseline"] = report_to_json(*t.baseline);
  j["data_rates"] = data_rates_to_json(t.data_rates);
  if (t.filters.size() >= 2) {
    const auto& a = t.filters.front();
    const auto& b = t.filters.back();
    j["ratios"] = {{"acf_slope_ratio", a.designed_slope_per_mm / b.designed_slope_per_mm},
                   {"std_ratio", a.report.overall_std_mm > 0.0
                                     ? json(b.report.overall_std_mm / a.report.overall_std_mm)
                                     : json(nullptr)}};
  }
  j["system"] = {{"dynamic_range_mm", t.baseline_dynamic_range_mm},
                 {"oe_bandwidth_ghz", t.oe_bandwidth / 1e9},
                 {"repetition_rate_mhz", t.repetition_rate / 1e6},
                 {"update_rate_mhz", t.update_rate / 1e6},
                 {"channel_bandwidth_mhz", t.channel_bandwidth / 1e6},
                 {"channel_sample_rate_gsps", t.channel_sample_rate / 1e9},
                 {"baseline_sample_rate_gsps", t.baseline_sample_rate / 1e9}};
  return j;
}

// Side-by-side comparison table: one metric per row, one system per column.
inline std::string tradeoff_to_csv(const runner::TradeoffReport& t) {
  std::vector<std::string> cols = {"metric", "direct_digitization"};
  for (const auto& f : t.filters) cols.push_back("filter_" + fmt(f.range_mm) + "mm");
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  auto row = [&](const std::string& metric, const std::string& base, auto&& per_filter) {
    out += metric + "," + base;
    for (const auto& f : t.filters) out += "," + per_filter(f);
    out += "\n";
  };
  const std::string base_std = t.baseline ? fmt(t.baseline->overall_std_mm * 1e3) : "";
  const std::string base_err = t.baseline ? fmt(t.baseline->overall_mean_error_mm * 1e3) : "";
  row("dynamic_range_mm", fmt(t.baseline_dynamic_range_mm),
      [](const runner::FilterStudy& f) { return fmt(f.range_mm); });
  row("std_um", base_std, [](const runner::FilterStudy& f) { return fmt(f.report.overall_std_mm * 1e3); });
  row("mean_error_um", base_err,
      [](const runner::FilterStudy& f) { return fmt(f.report.overall_mean_error_mm * 1e3); });
  row("detection_speed_mhz", fmt(t.repetition_rate / 1e6),
      [](const runner::FilterStudy& f) { return fmt(f.report.update_rate / 1e6); });
  row("detector_bandwidth_ghz", fmt(t.oe_bandwidth / 1e9),
      [&](const runner::FilterStudy&) { return fmt(t.channel_bandwidth / 1e9); });
  row("sampling_rate_gsps", fmt(t.baseline_sample_rate / 1e9),
      [&](const runner::FilterStudy&) { return fmt(t.channel_sample_rate / 1e9); });
  row("data_rate_gb_per_s", fmt(t.data_rates.baseline_bytes_per_second / 1e9),
      [&](const runner::FilterStudy&) { return fmt(t.data_rates.channels_bytes_per_second / 1e9); });
  row("acf_slope_per_mm", "", [](const runner::FilterStudy& f) { return fmt(f.designed_slope_per_mm); });
  return out;
}

}  // namespace stretch_ranger::io
