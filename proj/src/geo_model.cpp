#include "geomdn/geo_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace geomdn {

double LayeredEarthModel::max_vs() const {
  double v = 0.0;
  for (const auto& l : layers) v = std::max(v, l.vs);
  return v;
}

bool PriorConfig::valid() const {
  if (!(vs1_lo > 0.0 && vs1_lo < vs1_hi)) return false;
  if (!(growth_lo > 0.0 && growth_lo < growth_hi)) return false;
  if (!(hard_cap > vs1_hi)) return false;
  if (growth_lo > 1.0) return false;  // lbound <= ubound must hold everywhere
  for (std::size_t i = 0; i + 1 < kNumLayers; ++i)
    if (!(thickness[i] > 0.0) || std::isinf(thickness[i])) return false;
  if (!std::isinf(thickness[kNumLayers - 1])) return false;
  if (water_depth < 0.0) return false;
  return true;
}

double vp_from_vs(double vs) { return 1.16 * vs + 1.36; }

double rho_from_vp(double vp) {
  if (!(vp > 0.0)) throw std::invalid_argument("rho_from_vp: vp must be positive");
  return 1.74 * std::pow(vp, 0.25);
}

VelocityVector sample_prior(Rng& rng, const PriorConfig& cfg) {
  VelocityVector m;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  m.vs[0] = cfg.vs1_lo + (cfg.vs1_hi - cfg.vs1_lo) * u01(rng);
  for (std::size_t i = 1; i < kNumLayers; ++i) {
    const double lo = std::max(cfg.growth_lo * m.vs[i - 1], m.vs[0]);
    const double hi = std::min(cfg.growth_hi * m.vs[i - 1], cfg.hard_cap);
    m.vs[i] = lo + (hi - lo) * u01(rng);
  }
  return m;
}

bool satisfies_prior(const VelocityVector& m, const PriorConfig& cfg) {
  const double tol = 1e-12;
  if (m.vs[0] < cfg.vs1_lo - tol || m.vs[0] > cfg.vs1_hi + tol) return false;
  for (std::size_t i = 1; i < kNumLayers; ++i) {
    const double lo = std::max(cfg.growth_lo * m.vs[i - 1], m.vs[0]);
    const double hi = std::min(cfg.growth_hi * m.vs[i - 1], cfg.hard_cap);
    if (m.vs[i] < lo - tol || m.vs[i] > hi + tol) return false;
  }
  for (double v : m.vs)
    if (!(v > 0.0) || v > cfg.hard_cap + tol) return false;
  return true;
}

LayeredEarthModel build_layered_model(const VelocityVector& m, const PriorConfig& cfg) {
  LayeredEarthModel model;
  model.water_depth = cfg.water_depth;
  model.water_vp = cfg.water_vp;
  model.water_rho = cfg.water_rho;
  model.layers.reserve(kNumLayers);
  for (std::size_t i = 0; i < kNumLayers; ++i) {
    const double vp = vp_from_vs(m.vs[i]);
    model.layers.push_back({cfg.thickness[i], m.vs[i], vp, rho_from_vp(vp)});
  }
  return model;
}

void PriorConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.precision(17);
  f << "# prior configuration (velocities km/s, thicknesses/depths km, density g/cm3)\n";
  f << "vs1_lo = " << vs1_lo << "\n";
  f << "vs1_hi = " << vs1_hi << "\n";
  f << "growth_lo = " << growth_lo << "\n";
  f << "growth_hi = " << growth_hi << "\n";
  f << "hard_cap = " << hard_cap << "\n";
  f << "thickness =";
  for (std::size_t i = 0; i + 1 < kNumLayers; ++i) f << ' ' << thickness[i];
  f << " inf\n";
  f << "water_depth = " << water_depth << "\n";
  f << "water_vp = " << water_vp << "\n";
  f << "water_rho = " << water_rho << "\n";
}

PriorConfig PriorConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  PriorConfig cfg;
  std::string line;
  while (std::getline(f, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    key.erase(0, key.find_first_not_of(" \t"));
    std::istringstream vals(line.substr(eq + 1));
    if (key == "vs1_lo") vals >> cfg.vs1_lo;
    else if (key == "vs1_hi") vals >> cfg.vs1_hi;
    else if (key == "growth_lo") vals >> cfg.growth_lo;
    else if (key == "growth_hi") vals >> cfg.growth_hi;
    else if (key == "hard_cap") vals >> cfg.hard_cap;
    else if (key == "water_depth") vals >> cfg.water_depth;
    else if (key == "water_vp") vals >> cfg.water_vp;
    else if (key == "water_rho") vals >> cfg.water_rho;
    else if (key == "thickness") {
      for (std::size_t i = 0; i < kNumLayers; ++i) {
        std::string tok;
        if (!(vals >> tok)) throw std::runtime_error("thickness needs 9 entries");
        cfg.thickness[i] = (tok == "inf") ? std::numeric_limits<double>::infinity()
                                          : std::stod(tok);
      }
    } else {
      throw std::runtime_error("unknown prior config key: " + key);
    }
  }
  if (!cfg.valid()) throw std::runtime_error("invalid prior config in " + path);
  return cfg;
}

}  // namespace geomdn
