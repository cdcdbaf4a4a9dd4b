#pragma once
// Closed-form statistics of the Gaussian-mixture posterior: MAP and mean
// models, 1D/2D marginal densities, covariance and correlation, plus a
// mixture sampler used as a test oracle.

#include <stdexcept>
#include <string>
#include <vector>

#include "geomdn/geo_model.hpp"
#include "geomdn/mdn.hpp"

namespace geomdn {

struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> v;  // row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), v(std::size_t(r) * c, 0.0) {}
  double& operator()(int i, int j) { return v[std::size_t(i) * cols + j]; }
  double operator()(int i, int j) const { return v[std::size_t(i) * cols + j]; }
};

struct PosteriorSummary {
  VelocityVector map_model;
  VelocityVector mean_model;
  Matrix covariance;   // km^2/s^2
  Matrix correlation;  // dimensionless

  void save_json(const std::string& path) const;
  std::string to_json() const;
};

// 1D: axis_x + density. 2D: axis_x (rows) x axis_y (cols) density surface.
struct MarginalGrid {
  std::vector<double> axis_x, axis_y;
  std::vector<double> density;  // 1D: size of axis_x; 2D: row-major x-major

  void save_csv(const std::string& path) const;
};

struct ZeroVariance : std::runtime_error {
  int index;
  explicit ZeroVariance(int i)
      : std::runtime_error("degenerate posterior variance in layer " + std::to_string(i + 1)),
        index(i) {}
};

// Default marginal axis: uniform points across the prior support.
std::vector<double> default_axis(int n = 512, double lo = 0.3, double hi = 2.5);

// Center of the kernel maximizing alpha_l / sigma_l^M (lowest index on ties).
VelocityVector map_model(const MixtureParams& mp);

// Sum of alpha_l * mu_l.
VelocityVector mean_model(const MixtureParams& mp);

MarginalGrid marginal_1d(const MixtureParams& mp, int i, const std::vector<double>& grid);
MarginalGrid marginal_2d(const MixtureParams& mp, int i, int j,
                         const std::vector<double>& grid_i, const std::vector<double>& grid_j);

Matrix covariance(const MixtureParams& mp);
// R_ij = C_ij / sqrt(C_ii C_jj); throws ZeroVariance when a diagonal entry
// is below the sigma-floor squared.
Matrix correlation(const Matrix& c);

std::vector<std::vector<double>> sample_mixture(const MixtureParams& mp, std::size_t n, Rng& rng);

PosteriorSummary summarize(const MixtureParams& mp);

}  // namespace geomdn
