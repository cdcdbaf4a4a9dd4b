#include "geomdn/posterior.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace geomdn {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kInv2Pi = 0.15915494309189535;

void check_mp(const MixtureParams& mp) {
  if (mp.kernels < 1 || mp.target_dim < 1 ||
      int(mp.alpha.size()) != mp.kernels || int(mp.sigma.size()) != mp.kernels ||
      int(mp.mu.size()) != mp.kernels * mp.target_dim)
    throw std::invalid_argument("invalid MixtureParams");
}
}  // namespace

std::vector<double> default_axis(int n, double lo, double hi) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = lo + (hi - lo) * i / double(n - 1);
  return x;
}

VelocityVector map_model(const MixtureParams& mp) {
  check_mp(mp);
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < mp.kernels; ++l) {
    if (mp.alpha[l] <= 0.0) continue;
    const double score = std::log(mp.alpha[l]) - mp.target_dim * std::log(mp.sigma[l]);
    if (score > best_score) {
      best_score = score;
      best = l;
    }
  }
  if (best < 0) throw std::invalid_argument("map_model: all kernel weights are zero");
  VelocityVector out{};
  auto c = mp.center(best);
  for (int i = 0; i < mp.target_dim && i < int(kNumLayers); ++i) out.vs[i] = c[i];
  return out;
}

VelocityVector mean_model(const MixtureParams& mp) {
  check_mp(mp);
  VelocityVector out{};
  for (int l = 0; l < mp.kernels; ++l) {
    auto c = mp.center(l);
    for (int i = 0; i < mp.target_dim && i < int(kNumLayers); ++i)
      out.vs[i] += mp.alpha[l] * c[i];
  }
  return out;
}

MarginalGrid marginal_1d(const MixtureParams& mp, int i, const std::vector<double>& grid) {
  check_mp(mp);
  if (i < 0 || i >= mp.target_dim) throw std::out_of_range("marginal_1d: layer index");
  MarginalGrid g;
  g.axis_x = grid;
  g.density.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double p = 0.0;
    for (int l = 0; l < mp.kernels; ++l) {
      const double s = mp.sigma[l];
      const double r = (grid[k] - mp.mu[std::size_t(l) * mp.target_dim + i]) / s;
      p += mp.alpha[l] / s * std::exp(-0.5 * r * r);
    }
    g.density[k] = kInvSqrt2Pi * p;
  }
  return g;
}

MarginalGrid marginal_2d(const MixtureParams& mp, int i, int j,
                         const std::vector<double>& grid_i, const std::vector<double>& grid_j) {
  check_mp(mp);
  if (i < 0 || i >= mp.target_dim || j < 0 || j >= mp.target_dim)
    throw std::out_of_range("marginal_2d: layer index");
  if (i == j) throw std::invalid_argument("marginal_2d: indices must differ");
  MarginalGrid g;
  g.axis_x = grid_i;
  g.axis_y = grid_j;
  g.density.resize(grid_i.size() * grid_j.size());
  for (std::size_t a = 0; a < grid_i.size(); ++a)
    for (std::size_t b = 0; b < grid_j.size(); ++b) {
      double p = 0.0;
      for (int l = 0; l < mp.kernels; ++l) {
        const double s = mp.sigma[l];
        const double rx = grid_i[a] - mp.mu[std::size_t(l) * mp.target_dim + i];
        const double ry = grid_j[b] - mp.mu[std::size_t(l) * mp.target_dim + j];
        p += mp.alpha[l] / (s * s) * std::exp(-(rx * rx + ry * ry) / (2.0 * s * s));
      }
      g.density[a * grid_j.size() + b] = kInv2Pi * p;
    }
  return g;
}

Matrix covariance(const MixtureParams& mp) {
  check_mp(mp);
  const int M = mp.target_dim;
  const VelocityVector mbar = mean_model(mp);
  Matrix c(M, M);
  for (int l = 0; l < mp.kernels; ++l) {
    auto mu = mp.center(l);
    const double a = mp.alpha[l], s2 = mp.sigma[l] * mp.sigma[l];
    for (int i = 0; i < M; ++i) {
      const double di = mu[i] - mbar.vs[i];
      c(i, i) += a * (di * di + s2);
      for (int j = i + 1; j < M; ++j) {
        const double add = a * di * (mu[j] - mbar.vs[j]);
        c(i, j) += add;
        c(j, i) += add;
      }
    }
  }
  return c;
}

Matrix correlation(const Matrix& c) {
  if (c.rows != c.cols || c.rows < 1) throw std::invalid_argument("correlation: square matrix required");
  for (int i = 0; i < c.rows; ++i)
    if (c(i, i) < kSigmaFloor * kSigmaFloor) throw ZeroVariance(i);
  Matrix r(c.rows, c.cols);
  for (int i = 0; i < c.rows; ++i)
    for (int j = 0; j < c.cols; ++j)
      r(i, j) = c(i, j) / std::sqrt(c(i, i) * c(j, j));
  return r;
}

std::vector<std::vector<double>> sample_mixture(const MixtureParams& mp, std::size_t n, Rng& rng) {
  check_mp(mp);
  if (n < 1) throw std::invalid_argument("sample_mixture: n must be >= 1");
  std::discrete_distribution<int> pick(mp.alpha.begin(), mp.alpha.end());
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> out(n);
  for (auto& x : out) {
    const int l = pick(rng);
    auto mu = mp.center(l);
    x.resize(mp.target_dim);
    for (int i = 0; i < mp.target_dim; ++i) x[i] = mu[i] + mp.sigma[l] * gauss(rng);
  }
  return out;
}

PosteriorSummary summarize(const MixtureParams& mp) {
  PosteriorSummary s;
  s.map_model = map_model(mp);
  s.mean_model = mean_model(mp);
  s.covariance = covariance(mp);
  s.correlation = correlation(s.covariance);
  return s;
}

namespace {
nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}
}  // namespace

std::string PosteriorSummary::to_json() const {
  nlohmann::json j;
  j["map_vs_km_s"] = map_model.vs;
  j["mean_vs_km_s"] = mean_model.vs;
  j["covariance_km2_s2"] = matrix_json(covariance);
  j["correlation"] = matrix_json(correlation);
  return j.dump(2);
}

void PosteriorSummary::save_json(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << to_json() << "\n";
}

void MarginalGrid::save_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.precision(17);
  if (axis_y.empty()) {
    f << "vs_km_s,density\n";
    for (std::size_t k = 0; k < axis_x.size(); ++k)
      f << axis_x[k] << ',' << density[k] << '\n';
  } else {
    f << "vs_i_km_s,vs_j_km_s,density\n";
    for (std::size_t a = 0; a < axis_x.size(); ++a)
      for (std::size_t b = 0; b < axis_y.size(); ++b)
        f << axis_x[a] << ',' << axis_y[b] << ',' << density[a * axis_y.size() + b] << '\n';
  }
}

}  // namespace geomdn
