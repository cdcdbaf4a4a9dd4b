#include "geomdn/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

namespace geomdn {

namespace {

constexpr std::size_t kChunk = 256;
constexpr int kMaxRetriesPerSample = 1000;

Rng chunk_rng(std::uint64_t seed, std::uint64_t chunk) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32),
                    std::uint32_t(chunk), std::uint32_t(chunk >> 32), 0x9e3779b9u};
  return Rng(seq);
}

}  // namespace

Dataset generate(std::size_t n, const PriorConfig& cfg, const FrequencyGrid& grid,
                 std::uint64_t seed, const GenerateOptions& opts) {
  if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
  if (!cfg.valid()) throw std::invalid_argument("generate: invalid prior config");
  if (!grid.valid()) throw std::invalid_argument("generate: invalid frequency grid");

  Dataset ds;
  ds.count = n;
  ds.n_freq = grid.freqs.size();
  ds.d.resize(n * ds.n_freq);
  ds.m.resize(n * kNumLayers);

  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::atomic<std::size_t> next_chunk{0};
  std::atomic<std::uint64_t> attempts{0}, failures{0};
  std::atomic<bool> aborted{false};

  auto worker = [&] {
    for (;;) {
      const std::size_t chunk = next_chunk.fetch_add(1);
      if (chunk >= n_chunks || aborted.load()) return;
      Rng rng = chunk_rng(seed, chunk);
      const std::size_t begin = chunk * kChunk;
      const std::size_t end = std::min(begin + kChunk, n);
      for (std::size_t i = begin; i < end; ++i) {
        int tries = 0;
        for (;;) {
          if (++tries > kMaxRetriesPerSample) {
            aborted.store(true);
            return;
          }
          attempts.fetch_add(1);
          const VelocityVector m = sample_prior(rng, cfg);
          try {
            const DispersionCurve c = dispersion(build_layered_model(m, cfg), grid);
            std::copy(c.phase_vel.begin(), c.phase_vel.end(), ds.d.begin() + i * ds.n_freq);
            std::copy(m.vs.begin(), m.vs.end(), ds.m.begin() + i * kNumLayers);
            break;
          } catch (const RootNotFound&) {
            failures.fetch_add(1);
          }
        }
      }
    }
  };

  unsigned n_threads = opts.threads ? opts.threads : std::thread::hardware_concurrency();
  n_threads = std::max(1u, std::min<unsigned>(n_threads, n_chunks));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const double rate = double(failures.load()) / double(std::max<std::uint64_t>(1, attempts.load()));
  if (aborted.load() || rate > opts.max_failure_rate)
    throw ForwardFailureRateExceeded(
        "forward solver failure rate " + std::to_string(rate) + " exceeds " +
        std::to_string(opts.max_failure_rate));
  return ds;
}

void add_noise(std::span<double> d, const NoiseModel& nm, Rng& rng) {
  if (nm.epsilon < 0.0) throw std::invalid_argument("noise epsilon must be >= 0");
  if (nm.epsilon == 0.0) return;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& x : d) x += nm.epsilon * x * gauss(rng);
}

Dataset with_noise(const Dataset& ds, const NoiseModel& nm, std::uint64_t seed) {
  Dataset out = ds;
  Rng rng(seed);
  add_noise(out.d, nm, rng);
  return out;
}

std::vector<Dataset> split(const Dataset& ds, const std::vector<std::size_t>& sizes,
                           std::uint64_t seed) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total != ds.count)
    throw std::invalid_argument("split sizes sum to " + std::to_string(total) +
                                ", dataset has " + std::to_string(ds.count));
  for (std::size_t s : sizes)
    if (s == 0) throw std::invalid_argument("split sizes must be positive");

  std::vector<std::size_t> perm(ds.count);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<Dataset> parts;
  std::size_t offset = 0;
  for (std::size_t s : sizes) {
    Dataset p;
    p.count = s;
    p.n_freq = ds.n_freq;
    p.d.resize(s * ds.n_freq);
    p.m.resize(s * kNumLayers);
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t src = perm[offset + i];
      std::copy_n(ds.d.data() + src * ds.n_freq, ds.n_freq, p.d.data() + i * ds.n_freq);
      std::copy_n(ds.m.data() + src * kNumLayers, kNumLayers, p.m.data() + i * kNumLayers);
    }
    offset += s;
    parts.push_back(std::move(p));
  }
  return parts;
}

std::uint64_t dataset_checksum(const Dataset& ds) {
  // FNV-1a over the raw record bytes, in record order
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const double* p, std::size_t n) {
    const unsigned char* b = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n * sizeof(double); ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (std::size_t i = 0; i < ds.count; ++i) {
    mix(ds.d.data() + i * ds.n_freq, ds.n_freq);
    mix(ds.m.data() + i * kNumLayers, kNumLayers);
  }
  return h;
}

namespace {

nlohmann::json prior_to_json(const PriorConfig& p) {
  nlohmann::json j;
  j["vs1_lo"] = p.vs1_lo;
  j["vs1_hi"] = p.vs1_hi;
  j["growth_lo"] = p.growth_lo;
  j["growth_hi"] = p.growth_hi;
  j["hard_cap"] = p.hard_cap;
  std::vector<double> th(p.thickness.begin(), p.thickness.end());
  th.back() = -1.0;  // JSON has no infinity; -1 marks the half-space
  j["thickness"] = th;
  j["water_depth"] = p.water_depth;
  j["water_vp"] = p.water_vp;
  j["water_rho"] = p.water_rho;
  return j;
}

PriorConfig prior_from_json(const nlohmann::json& j) {
  PriorConfig p;
  p.vs1_lo = j.at("vs1_lo");
  p.vs1_hi = j.at("vs1_hi");
  p.growth_lo = j.at("growth_lo");
  p.growth_hi = j.at("growth_hi");
  p.hard_cap = j.at("hard_cap");
  auto th = j.at("thickness").get<std::vector<double>>();
  if (th.size() != kNumLayers) throw std::runtime_error("manifest: bad thickness length");
  for (std::size_t i = 0; i < kNumLayers; ++i)
    p.thickness[i] = th[i] < 0 ? std::numeric_limits<double>::infinity() : th[i];
  p.water_depth = j.at("water_depth");
  p.water_vp = j.at("water_vp");
  p.water_rho = j.at("water_rho");
  return p;
}

std::string manifest_path(const std::string& path) { return path + ".manifest.json"; }

}  // namespace

void save(const Dataset& ds, const DatasetManifest& manifest, const std::string& path) {
  DatasetManifest mf = manifest;
  mf.sample_count = ds.count;
  mf.checksum = dataset_checksum(ds);

  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < ds.count; ++i) {
    bin.write(reinterpret_cast<const char*>(ds.d.data() + i * ds.n_freq),
              ds.n_freq * sizeof(double));
    bin.write(reinterpret_cast<const char*>(ds.m.data() + i * kNumLayers),
              kNumLayers * sizeof(double));
  }
  if (!bin) throw std::runtime_error("write failed: " + path);

  nlohmann::json j;
  j["format_version"] = mf.format_version;
  j["sample_count"] = mf.sample_count;
  j["grid_hz"] = mf.grid.freqs;
  j["prior"] = prior_to_json(mf.prior);
  j["epsilon"] = mf.epsilon;
  j["seed"] = mf.seed;
  j["checksum"] = mf.checksum;
  std::ofstream mjs(manifest_path(path));
  if (!mjs) throw std::runtime_error("cannot write " + manifest_path(path));
  mjs << j.dump(2) << "\n";
}

std::pair<Dataset, DatasetManifest> load(const std::string& path) {
  std::ifstream mjs(manifest_path(path));
  if (!mjs) throw std::runtime_error("cannot read " + manifest_path(path));
  nlohmann::json j = nlohmann::json::parse(mjs);

  DatasetManifest mf;
  mf.format_version = j.at("format_version");
  if (mf.format_version != 1)
    throw std::runtime_error("unsupported dataset format version " +
                             std::to_string(mf.format_version));
  mf.sample_count = j.at("sample_count");
  mf.grid.freqs = j.at("grid_hz").get<std::vector<double>>();
  mf.prior = prior_from_json(j.at("prior"));
  mf.epsilon = j.at("epsilon");
  mf.seed = j.at("seed");
  mf.checksum = j.at("checksum");

  const std::size_t n_freq = mf.grid.freqs.size();
  const std::size_t record = (n_freq + kNumLayers) * sizeof(double);
  const auto fsize = std::filesystem::file_size(path);
  if (fsize != mf.sample_count * record)
    throw std::runtime_error(path + ": truncated or size mismatch (expected " +
                             std::to_string(mf.sample_count * record) + " bytes, got " +
                             std::to_string(fsize) + ")");

  Dataset ds;
  ds.count = mf.sample_count;
  ds.n_freq = n_freq;
  ds.d.resize(ds.count * n_freq);
  ds.m.resize(ds.count * kNumLayers);
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + path);
  for (std::size_t i = 0; i < ds.count; ++i) {
    bin.read(reinterpret_cast<char*>(ds.d.data() + i * n_freq), n_freq * sizeof(double));
    bin.read(reinterpret_cast<char*>(ds.m.data() + i * kNumLayers),
             kNumLayers * sizeof(double));
  }
  if (!bin) throw std::runtime_error(path + ": truncated read");
  if (dataset_checksum(ds) != mf.checksum)
    throw std::runtime_error(path + ": checksum failure");
  return {std::move(ds), std::move(mf)};
}

std::pair<Dataset, DatasetManifest> load(const std::string& path,
                                         const FrequencyGrid& expected) {
  auto [ds, mf] = load(path);
  if (!(mf.grid == expected))
    throw GridMismatch(path + ": dataset grid differs from the requested grid");
  return {std::move(ds), std::move(mf)};
}

void export_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.precision(17);
  for (std::size_t j = 0; j < ds.n_freq; ++j) f << "d" << j << ',';
  for (std::size_t j = 0; j < kNumLayers; ++j)
    f << "vs" << j + 1 << (j + 1 < kNumLayers ? ',' : '\n');
  for (std::size_t i = 0; i < ds.count; ++i) {
    for (std::size_t j = 0; j < ds.n_freq; ++j) f << ds.d[i * ds.n_freq + j] << ',';
    for (std::size_t j = 0; j < kNumLayers; ++j)
      f << ds.m[i * kNumLayers + j] << (j + 1 < kNumLayers ? ',' : '\n');
  }
}

}  // namespace geomdn
