#include "geomdn/dispersion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace geomdn {

bool FrequencyGrid::valid() const {
  if (freqs.empty()) return false;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (!(freqs[i] > 0.0)) return false;
    if (i > 0 && !(freqs[i] > freqs[i - 1])) return false;
  }
  return true;
}

FrequencyGrid default_grid(std::size_t n, double f_lo, double f_hi) {
  FrequencyGrid g;
  g.freqs.resize(n);
  const double r = std::log(f_hi / f_lo) / double(n - 1);
  for (std::size_t i = 0; i < n; ++i) g.freqs[i] = f_lo * std::exp(r * double(i));
  g.freqs.front() = f_lo;
  g.freqs.back() = f_hi;
  return g;
}

RootNotFound::RootNotFound(double f)
    : std::runtime_error("no guided-mode root bracketed at " + std::to_string(f) + " Hz"),
      freq_hz(f) {}

namespace detail {

namespace {

// cosh(sqrt(z)) continued to negative z as cos(sqrt(-z))
double coshlike(double z) {
  return z >= 0.0 ? std::cosh(std::sqrt(z)) : std::cos(std::sqrt(-z));
}

// sinh(sqrt(z))/sqrt(z), continued to cos-branch and to z = 0
double sinclike(double z) {
  if (std::abs(z) < 1e-8) return 1.0 + z / 6.0;
  if (z >= 0.0) {
    const double s = std::sqrt(z);
    return std::sinh(s) / s;
  }
  const double s = std::sqrt(-z);
  return std::sin(s) / s;
}

// Divided difference (f(zp) - f(zs)) / (zp - zs) for the two entire
// functions above. A direct quotient loses digits when zp and zs are both
// small, so a product-sum series is used there.
double dd_series(double zp, double zs, bool cosh_kind) {
  // f(z) = sum z^n / (2n)!  or  sum z^n / (2n+1)!
  double sum = 0.0;
  double hn = 1.0;   // homogeneous sum of degree n-1 in (zp, zs)
  double zsn = 1.0;  // zs^n
  double fact = cosh_kind ? 2.0 : 6.0;  // (2n)! or (2n+1)! at n = 1
  for (int n = 1; n < 30; ++n) {
    const double term = hn / fact;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    // h_{n+1} = zp * h_n + zs^n
    zsn *= zs;
    hn = zp * hn + zsn;
    const double k2 = cosh_kind ? double(2 * n + 1) * double(2 * n + 2)
                                : double(2 * n + 2) * double(2 * n + 3);
    fact *= k2;
  }
  return sum;
}

double divdiff(double zp, double zs, bool cosh_kind) {
  if (std::max(std::abs(zp), std::abs(zs)) < 0.25 || std::abs(zp - zs) < 1e-6)
    return dd_series(zp, zs, cosh_kind);
  const double fp = cosh_kind ? coshlike(zp) : sinclike(zp);
  const double fs = cosh_kind ? coshlike(zs) : sinclike(zs);
  return (fp - fs) / (zp - zs);
}

struct Mat4 {
  double v[4][4] = {};
};

// First-order P-SV depth system d f / dz = A f for the motion-stress
// vector f = (U, W, T, S) with the x-dependence exp(i(kx - wt)) factored
// so that all entries are real.
Mat4 psv_system(double k, double omega, const SeabedLayer& l) {
  const double rho = l.rho;
  const double mu = rho * l.vs * l.vs;
  const double la2mu = rho * l.vp * l.vp;  // lambda + 2 mu
  const double lam = la2mu - 2.0 * mu;
  const double rw2 = rho * omega * omega;
  Mat4 a;
  a.v[0][1] = k;
  a.v[0][2] = 1.0 / mu;
  a.v[1][0] = -k * lam / la2mu;
  a.v[1][3] = 1.0 / la2mu;
  a.v[2][0] = 4.0 * mu * (lam + mu) / la2mu * k * k - rw2;
  a.v[2][3] = k * lam / la2mu;
  a.v[3][1] = -rw2;
  a.v[3][2] = -k;
  return a;
}

Mat4 matmul(const Mat4& x, const Mat4& y) {
  Mat4 r;
  for (int i = 0; i < 4; ++i)
    for (int p = 0; p < 4; ++p) {
      const double xv = x.v[i][p];
      if (xv == 0.0) continue;
      for (int j = 0; j < 4; ++j) r.v[i][j] += xv * y.v[p][j];
    }
  return r;
}

// exp(A h) as a cubic in X = A h using the eigenvalue structure
// (+-nu_p, +-nu_s): exp(X) = a0 I + a1 X + a2 X^2 + a3 X^3 with the
// coefficients interpolated through cosh/sinh of the two branches.
Mat4 propagator(const Mat4& a, double h, double zp, double zs) {
  const double a2 = divdiff(zp, zs, true);
  const double a0 = coshlike(zp) - a2 * zp;
  const double a3 = divdiff(zp, zs, false);
  const double a1 = sinclike(zp) - a3 * zp;

  Mat4 x;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) x.v[i][j] = a.v[i][j] * h;
  const Mat4 x2 = matmul(x, x);
  const Mat4 x3 = matmul(x2, x);

  Mat4 p;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      p.v[i][j] = a1 * x.v[i][j] + a2 * x2.v[i][j] + a3 * x3.v[i][j];
  for (int i = 0; i < 4; ++i) p.v[i][i] += a0;
  return p;
}

constexpr int kPair[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

// Applies the second compound of P to the subdeterminant vector w.
void apply_compound(const Mat4& p, const double* w, double* out) {
  for (int r = 0; r < 6; ++r) {
    const int i = kPair[r][0], j = kPair[r][1];
    double s = 0.0;
    for (int col = 0; col < 6; ++col) {
      const int k = kPair[col][0], l = kPair[col][1];
      s += (p.v[i][k] * p.v[j][l] - p.v[i][l] * p.v[j][k]) * w[col];
    }
    out[r] = s;
  }
}

}  // namespace

double secular(const LayeredEarthModel& model, double freq_hz, double c) {
  const double omega = 2.0 * M_PI * freq_hz;
  const double k = omega / c;
  const auto& layers = model.layers;
  const auto& hs = layers.back();

  // Half-space: initialize with the wedge of the two solutions decaying
  // with depth (downgoing-evanescent P and S).
  const double nup2 = k * k - omega * omega / (hs.vp * hs.vp);
  const double nus2 = k * k - omega * omega / (hs.vs * hs.vs);
  if (!(nup2 > 0.0) || !(nus2 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double nup = std::sqrt(nup2);
  const double nus = std::sqrt(nus2);
  const double mu = hs.rho * hs.vs * hs.vs;
  const double rw2 = hs.rho * omega * omega;

  double v1[4] = {k, nup, -2.0 * mu * nup * k, rw2 - 2.0 * mu * k * k};
  double v2[4] = {nus, k, -mu * (nus2 + k * k), -2.0 * mu * k * nus};
  const double n1 = std::max({std::abs(v1[0]), std::abs(v1[1]), std::abs(v1[2]), std::abs(v1[3])});
  const double n2 = std::max({std::abs(v2[0]), std::abs(v2[1]), std::abs(v2[2]), std::abs(v2[3])});
  for (double& x : v1) x /= n1;
  for (double& x : v2) x /= n2;

  double w[6], wn[6];
  for (int r = 0; r < 6; ++r) {
    const int i = kPair[r][0], j = kPair[r][1];
    w[r] = v1[i] * v2[j] - v1[j] * v2[i];
  }

  // Carry the wedge up through the finite layers: f(top) = exp(-A d) f(bottom).
  for (std::size_t li = layers.size() - 1; li-- > 0;) {
    const auto& l = layers[li];
    const double h = -l.thickness;
    const double zp = (k * k - omega * omega / (l.vp * l.vp)) * h * h;
    const double zs = (k * k - omega * omega / (l.vs * l.vs)) * h * h;
    const Mat4 p = propagator(psv_system(k, omega, l), h, zp, zs);
    apply_compound(p, w, wn);
    double norm = 0.0;
    for (double x : wn) norm = std::max(norm, std::abs(x));
    if (!(norm > 0.0) || !std::isfinite(norm))
      return std::numeric_limits<double>::quiet_NaN();
    for (int r = 0; r < 6; ++r) w[r] = wn[r] / norm;
  }

  // Seabed-top condition. Without water: vanishing tractions, i.e. the
  // (T,S) subdeterminant. With water: T = 0 and (W,S) matched to the
  // water column solution with a pressure-free surface.
  if (!model.has_water()) return w[5];  // (T,S) component

  const double lam_w = model.water_rho * model.water_vp * model.water_vp;
  const double rw2_w = model.water_rho * omega * omega;
  const double d = model.water_depth;
  const double zw = (k * k - omega * omega / (model.water_vp * model.water_vp)) * d * d;
  const double wb = coshlike(zw);
  const double sb = -rw2_w * d * sinclike(zw);
  (void)lam_w;
  return sb * w[3] + wb * w[5];  // (W,T) and (T,S) components
}

}  // namespace detail

namespace {

double bisect_root(const LayeredEarthModel& model, double f, double lo, double hi,
                   double flo) {
  double fhi = detail::secular(model, f, hi);
  (void)fhi;
  for (int it = 0; it < 80 && hi - lo > 1e-6; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = detail::secular(model, f, mid);
    if (std::isnan(fm)) break;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

DispersionCurve dispersion(const LayeredEarthModel& model, const FrequencyGrid& grid) {
  if (!grid.valid()) throw std::invalid_argument("invalid frequency grid");
  if (model.layers.size() != kNumLayers && model.layers.empty())
    throw std::invalid_argument("model has no layers");

  double vs_min = model.layers.front().vs;
  for (const auto& l : model.layers) vs_min = std::min(vs_min, l.vs);
  // Floor safely below the slowest interface-wave speed of the model; the
  // fundamental cannot fall under ~0.87 of the slowest shear speed.
  const double c_lo0 = 0.70 * vs_min;
  const double c_hi = 0.9995 * model.layers.back().vs;
  const double dc = 0.004;

  DispersionCurve curve;
  curve.grid = grid;
  curve.phase_vel.assign(grid.freqs.size(), 0.0);

  // Each frequency is scanned upward from the global floor so the first
  // bracket is always the lowest-velocity (fundamental) root. Branches of
  // low-velocity-zone models osculate, so continuation from a neighbouring
  // frequency can silently ride a higher branch; the fresh scan cannot.
  for (std::size_t idx = grid.freqs.size(); idx-- > 0;) {
    const double f = grid.freqs[idx];
    double c = c_lo0;
    double fprev = detail::secular(model, f, c);
    bool found = false;
    while (c < c_hi) {
      const double cn = std::min(c + dc, c_hi);
      const double fn = detail::secular(model, f, cn);
      if (std::isnan(fprev)) {
        fprev = fn;
        c = cn;
        continue;
      }
      if (!std::isnan(fn) && (fn < 0.0) != (fprev < 0.0)) {
        curve.phase_vel[idx] = bisect_root(model, f, c, cn, fprev);
        found = true;
        break;
      }
      fprev = fn;
      c = cn;
      if (cn >= c_hi) break;
    }
    if (!found) throw RootNotFound(f);
  }
  return curve;
}

void DispersionCurve::save_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "freq_hz,phase_vel_km_s\n";
  f.precision(17);
  for (std::size_t i = 0; i < grid.freqs.size(); ++i)
    f << grid.freqs[i] << ',' << phase_vel[i] << '\n';
}

DispersionCurve DispersionCurve::load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("freq_hz,phase_vel_km_s", 0) != 0)
    throw std::runtime_error(path + ": expected header freq_hz,phase_vel_km_s");
  DispersionCurve c;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    double fr, pv;
    char comma;
    if (!(ss >> fr >> comma >> pv) || comma != ',')
      throw std::runtime_error(path + ": malformed row: " + line);
    c.grid.freqs.push_back(fr);
    c.phase_vel.push_back(pv);
  }
  if (!c.grid.valid()) throw std::runtime_error(path + ": invalid frequency column");
  return c;
}

}  // namespace geomdn
