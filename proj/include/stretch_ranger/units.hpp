#pragma once

#include <numbers>

// Internal computation is SI throughout. These helpers are the only place the
// human-facing units (ps/nm, nm, GHz, mm, ...) are converted.
namespace stretch_ranger::units {

inline constexpr double speed_of_light = 299'792'458.0;  // m/s
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double from_ps_per_nm(double v) { return v / 1e3; }  // -> s/m
constexpr double to_ps_per_nm(double v) { return v * 1e3; }
constexpr double from_nm(double v) { return v / 1e9; }
constexpr double to_nm(double v) { return v * 1e9; }
constexpr double from_mm(double v) { return v / 1e3; }
constexpr double to_mm(double v) { return v * 1e3; }
constexpr double to_um(double v) { return v * 1e6; }
constexpr double from_ghz(double v) { return v * 1e9; }
constexpr double to_ghz(double v) { return v / 1e9; }
constexpr double from_mhz(double v) { return v * 1e6; }
constexpr double to_mhz(double v) { return v / 1e6; }
constexpr double from_ps(double v) { return v / 1e12; }
constexpr double to_ps(double v) { return v * 1e12; }
constexpr double from_ns(double v) { return v / 1e9; }
constexpr double to_ns(double v) { return v * 1e9; }
constexpr double from_fs(double v) { return v / 1e15; }
constexpr double to_fs(double v) { return v * 1e15; }
constexpr double from_mw(double v) { return v / 1e3; }
constexpr double to_mw(double v) { return v * 1e3; }

}  // namespace stretch_ranger::units
