#pragma once

#include <numbers>

// Internal quantities are SI: seconds and angular frequencies in rad/s.
// Config files and CSV output use MHz / ns / us; convert only at the edges.
namespace bpm::units {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Cyclic frequency in MHz -> angular frequency in rad/s (2*pi*f).
constexpr double mhz_to_rad_per_s(double mhz) { return kTwoPi * mhz * 1e6; }
constexpr double khz_to_rad_per_s(double khz) { return kTwoPi * khz * 1e3; }
constexpr double rad_per_s_to_mhz(double w) { return w / (kTwoPi * 1e6); }

/// Angular frequency in rad/ns (the unit of pulse parameters in files)
/// -> rad/s.
constexpr double rad_per_ns_to_rad_per_s(double w) { return w * 1e9; }
constexpr double rad_per_s_to_rad_per_ns(double w) { return w * 1e-9; }

constexpr double ns_to_s(double ns) { return ns * 1e-9; }
constexpr double us_to_s(double us) { return us * 1e-6; }
constexpr double s_to_ns(double s) { return s * 1e9; }
constexpr double s_to_us(double s) { return s * 1e6; }

}  // namespace bpm::units
