#pragma once
// Supervised dataset of (dispersion curve, velocity model) pairs:
// generation from the prior through the forward solver, noise injection,
// shuffled splitting and binary persistence with a JSON manifest.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "geomdn/dispersion.hpp"
#include "geomdn/geo_model.hpp"

namespace geomdn {

// Flat storage: row i of `d` is the n_freq phase velocities, row i of `m`
// the kNumLayers shear velocities.
struct Dataset {
  std::size_t count = 0;
  std::size_t n_freq = 0;
  std::vector<double> d;  // count * n_freq
  std::vector<double> m;  // count * kNumLayers

  std::span<const double> curve(std::size_t i) const { return {d.data() + i * n_freq, n_freq}; }
  std::span<const double> target(std::size_t i) const { return {m.data() + i * kNumLayers, kNumLayers}; }
};

struct NoiseModel {
  double epsilon = 0.05;  // relative std dev per point
};

struct DatasetManifest {
  std::uint32_t format_version = 1;
  std::size_t sample_count = 0;
  FrequencyGrid grid;
  PriorConfig prior;
  double epsilon = 0.0;  // noise baked into the file; 0 = noiseless storage
  std::uint64_t seed = 0;
  std::uint64_t checksum = 0;
};

struct ForwardFailureRateExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GridMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GenerateOptions {
  // Fraction of forward-solver failures tolerated before aborting. The
  // prior admits slow-half-space models whose fundamental mode is leaky
  // over part of the band; those draws are discarded and redrawn.
  double max_failure_rate = 0.10;
  unsigned threads = 0;  // 0 = hardware_concurrency
};

// Deterministic for a given seed regardless of thread count (chunked
// counter-based substreams).
Dataset generate(std::size_t n, const PriorConfig& cfg, const FrequencyGrid& grid,
                 std::uint64_t seed, const GenerateOptions& opts = {});

// In place: d[i] += eps * d[i] * N(0,1), independent per entry.
void add_noise(std::span<double> d, const NoiseModel& nm, Rng& rng);

// Noisy copy of a whole dataset's observations with a dedicated stream.
Dataset with_noise(const Dataset& ds, const NoiseModel& nm, std::uint64_t seed);

// Shuffle with the given seed, then split into parts of the given sizes
// (must sum to ds.count). Disjoint and exhaustive.
std::vector<Dataset> split(const Dataset& ds, const std::vector<std::size_t>& sizes,
                           std::uint64_t seed);

// Binary record file (little endian, per record n_freq + 9 float64) with
// `<path>.manifest.json` beside it.
void save(const Dataset& ds, const DatasetManifest& manifest, const std::string& path);
std::pair<Dataset, DatasetManifest> load(const std::string& path);
// Load and insist on a particular grid.
std::pair<Dataset, DatasetManifest> load(const std::string& path, const FrequencyGrid& expected);

void export_csv(const Dataset& ds, const std::string& path);

std::uint64_t dataset_checksum(const Dataset& ds);

}  // namespace geomdn
