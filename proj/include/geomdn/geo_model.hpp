#pragma once
// Layered seabed parametrization: the 9-layer shear-velocity model, the
// constrained uniform prior over it, and the empirical vP/density relations.

#include <array>
#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace geomdn {

inline constexpr std::size_t kNumLayers = 9;  // inversion target dimension M

using Rng = std::mt19937_64;

// The inversion target m: shear-wave velocity of each seabed layer, km/s.
struct VelocityVector {
  std::array<double, kNumLayers> vs{};
};

struct SeabedLayer {
  double thickness;  // km, +inf for the bottom half-space
  double vs;         // km/s
  double vp;         // km/s
  double rho;        // g/cm^3
};

// Water column (vs = 0) over exactly kNumLayers seabed layers, the last
// one semi-infinite. water_depth == 0 means no water column.
struct LayeredEarthModel {
  double water_depth = 0.0;  // km
  double water_vp = 0.0;     // km/s
  double water_rho = 0.0;    // g/cm^3
  std::vector<SeabedLayer> layers;

  bool has_water() const { return water_depth > 0.0; }
  double max_vs() const;
};

struct PriorConfig {
  double vs1_lo = 0.3;     // km/s, first-layer uniform bounds
  double vs1_hi = 1.0;
  double growth_lo = 0.8;  // per-layer multiplicative bounds
  double growth_hi = 1.4;
  double hard_cap = 2.5;   // km/s
  std::array<double, kNumLayers> thickness{
      0.03, 0.06, 0.10, 0.15, 0.30, 0.50, 0.50, 0.50,
      std::numeric_limits<double>::infinity()};  // km
  double water_depth = 0.325;  // km
  double water_vp = 1.49;      // km/s
  double water_rho = 1.0;      // g/cm^3

  bool valid() const;

  // key = value text format, units noted in comments.
  void save(const std::string& path) const;
  static PriorConfig load(const std::string& path);
};

// Empirical relations between shear velocity, compressional velocity and
// density. Both are strictly increasing.
double vp_from_vs(double vs);
double rho_from_vp(double vp);

// Layer i is uniform on [max(growth_lo*vs[i-1], vs[0]), min(growth_hi*vs[i-1], cap)].
VelocityVector sample_prior(Rng& rng, const PriorConfig& cfg);

bool satisfies_prior(const VelocityVector& m, const PriorConfig& cfg);

LayeredEarthModel build_layered_model(const VelocityVector& m, const PriorConfig& cfg);

}  // namespace geomdn
