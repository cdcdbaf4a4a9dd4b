#pragma once
// Fundamental-mode phase-velocity dispersion for a layered seabed model
// (fluid water column over solid layers over a solid half-space).
//
// The secular function is built from the exact P-SV depth propagator of
// each layer, carried in the space of 2x2 subdeterminants so that the
// classic transfer-matrix growth cancellation does not destroy the sign
// of the determinant. At each frequency the root is bracketed by a fine
// upward scan from below the slowest surface-wave speed and polished by
// bisection; the first sign change is the fundamental mode.

#include <stdexcept>
#include <vector>

#include "geomdn/geo_model.hpp"

namespace geomdn {

struct FrequencyGrid {
  std::vector<double> freqs;  // Hz, strictly increasing

  bool valid() const;
  bool operator==(const FrequencyGrid&) const = default;
};

// 21 log-spaced frequencies, 0.2 .. 2.5 Hz inclusive.
FrequencyGrid default_grid(std::size_t n = 21, double f_lo = 0.2, double f_hi = 2.5);

struct DispersionCurve {
  FrequencyGrid grid;
  std::vector<double> phase_vel;  // km/s, one per frequency

  void save_csv(const std::string& path) const;
  static DispersionCurve load_csv(const std::string& path);
};

struct RootNotFound : std::runtime_error {
  double freq_hz;
  explicit RootNotFound(double f);
};

// Smallest-velocity root of the secular function at each frequency.
// Throws RootNotFound when no guided mode is bracketed (unphysical model).
DispersionCurve dispersion(const LayeredEarthModel& model, const FrequencyGrid& grid);

namespace detail {
// Secular function whose sign changes at guided-mode phase velocities.
// Exposed for tests.
double secular(const LayeredEarthModel& model, double freq_hz, double c);
}  // namespace detail

}  // namespace geomdn
