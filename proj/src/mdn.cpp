#include "geomdn/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>

#include "geomdn/kernels.hpp"

namespace geomdn {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr char kMagic[4] = {'G', 'M', 'D', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

double modified_elu(double z) { return z >= 0.0 ? z + 1.0 : std::exp(z); }

double modified_elu_derivative(double z) { return z >= 0.0 ? 1.0 : std::exp(z); }

std::size_t param_count(const MdnConfig& cfg) {
  std::size_t total = 0;
  int in = cfg.input_dim;
  for (int h : cfg.hidden) {
    total += std::size_t(in + 1) * h;
    in = h;
  }
  total += std::size_t(in + 1) * cfg.mu_head_dim();
  total += 2 * std::size_t(in + 1) * cfg.kernels;
  return total;
}

std::size_t NetworkParams::param_count() const { return geomdn::param_count(cfg); }

NetworkParams NetworkParams::init(const MdnConfig& cfg, std::uint64_t seed,
                                  std::span<const double> mu_bias_init) {
  if (cfg.input_dim < 1 || cfg.kernels < 1 || cfg.target_dim < 1 || cfg.hidden.empty())
    throw std::invalid_argument("invalid MdnConfig");
  NetworkParams p;
  p.cfg = cfg;
  Rng rng(seed);
  auto make = [&](int in, int out, double var_scale) {
    DenseLayer l;
    l.in = in;
    l.out = out;
    l.w.resize(std::size_t(in) * out);
    l.b.assign(out, 0.0);
    std::normal_distribution<double> gauss(0.0, std::sqrt(var_scale / in));
    for (double& w : l.w) w = gauss(rng);
    return l;
  };
  int in = cfg.input_dim;
  for (int h : cfg.hidden) {
    p.hidden.push_back(make(in, h, 2.0));  // He fan-in for ReLU
    in = h;
  }
  p.mu_head = make(in, cfg.mu_head_dim(), 1.0);
  p.sigma_head = make(in, cfg.kernels, 1.0);
  p.alpha_head = make(in, cfg.kernels, 1.0);
  if (!mu_bias_init.empty()) {
    if (int(mu_bias_init.size()) != cfg.target_dim)
      throw std::invalid_argument("mu bias warm start must have target_dim entries");
    for (int l = 0; l < cfg.kernels; ++l)
      for (int m = 0; m < cfg.target_dim; ++m)
        p.mu_head.b[std::size_t(l) * cfg.target_dim + m] = mu_bias_init[m];
  }
  return p;
}

void NetworkParams::for_each_layer(const std::function<void(DenseLayer&)>& fn) {
  for (auto& l : hidden) fn(l);
  fn(mu_head);
  fn(sigma_head);
  fn(alpha_head);
}

void NetworkParams::for_each_layer(const std::function<void(const DenseLayer&)>& fn) const {
  for (const auto& l : hidden) fn(l);
  fn(mu_head);
  fn(sigma_head);
  fn(alpha_head);
}

Gradients Gradients::zeros_like(const NetworkParams& p) {
  Gradients g;
  auto zero = [](const DenseLayer& l) {
    DenseLayer z;
    z.in = l.in;
    z.out = l.out;
    z.w.assign(l.w.size(), 0.0);
    z.b.assign(l.b.size(), 0.0);
    return z;
  };
  for (const auto& l : p.hidden) g.hidden.push_back(zero(l));
  g.mu_head = zero(p.mu_head);
  g.sigma_head = zero(p.sigma_head);
  g.alpha_head = zero(p.alpha_head);
  return g;
}

void Gradients::scale(double s) {
  auto sc = [s](DenseLayer& l) {
    for (double& x : l.w) x *= s;
    for (double& x : l.b) x *= s;
  };
  for (auto& l : hidden) sc(l);
  sc(mu_head);
  sc(sigma_head);
  sc(alpha_head);
}

namespace {

// X [batch x in] -> Z [batch x out] = X W + b
void dense_forward(const DenseLayer& l, const double* x, std::size_t batch, double* z) {
  kern::gemm_nn(batch, l.out, l.in, x, l.w.data(), z, false);
  kern::add_bias_rows(batch, l.out, l.b.data(), z);
}

double logsumexp(const double* v, int n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

}  // namespace

MixtureParams forward(const NetworkParams& params, std::span<const double> d) {
  const auto& cfg = params.cfg;
  if (int(d.size()) != cfg.input_dim)
    throw std::invalid_argument("forward: observation length mismatch");
  std::vector<double> a(d.begin(), d.end()), next;
  for (const auto& l : params.hidden) {
    next.assign(std::size_t(l.out), 0.0);
    dense_forward(l, a.data(), 1, next.data());
    kern::relu(next.size(), next.data());
    a.swap(next);
  }
  MixtureParams mp;
  mp.kernels = cfg.kernels;
  mp.target_dim = cfg.target_dim;
  mp.mu.assign(std::size_t(cfg.mu_head_dim()), 0.0);
  dense_forward(params.mu_head, a.data(), 1, mp.mu.data());

  std::vector<double> z(cfg.kernels);
  std::fill(z.begin(), z.end(), 0.0);
  dense_forward(params.sigma_head, a.data(), 1, z.data());
  mp.sigma.resize(cfg.kernels);
  for (int l = 0; l < cfg.kernels; ++l)
    mp.sigma[l] = std::max(modified_elu(z[l]), kSigmaFloor);

  std::fill(z.begin(), z.end(), 0.0);
  dense_forward(params.alpha_head, a.data(), 1, z.data());
  const double lse = logsumexp(z.data(), cfg.kernels);
  mp.alpha.resize(cfg.kernels);
  for (int l = 0; l < cfg.kernels; ++l) mp.alpha[l] = std::exp(z[l] - lse);
  return mp;
}

double nll_loss(const MixtureParams& mp, std::span<const double> m) {
  if (int(m.size()) != mp.target_dim)
    throw std::invalid_argument("nll_loss: target length mismatch");
  const int L = mp.kernels, M = mp.target_dim;
  std::vector<double> g(L, -std::numeric_limits<double>::infinity());
  for (int l = 0; l < L; ++l) {
    if (mp.alpha[l] <= 0.0) continue;  // zero-weight kernel is inert
    const double s = mp.sigma[l];
    double q = 0.0;
    const double* mu = mp.mu.data() + std::size_t(l) * M;
    for (int i = 0; i < M; ++i) {
      const double r = m[i] - mu[i];
      q += r * r;
    }
    g[l] = std::log(mp.alpha[l]) - M * std::log(s) - q / (2.0 * s * s) - 0.5 * M * kLog2Pi;
  }
  return -logsumexp(g.data(), L);
}

namespace {

// Shared batched pass. When `grads` is null only the loss is computed.
double batch_pass(const NetworkParams& params, std::span<const double> d,
                  std::span<const double> m, std::size_t batch, Gradients* grads,
                  BatchWorkspace& ws) {
  const auto& cfg = params.cfg;
  const int L = cfg.kernels, M = cfg.target_dim;
  if (d.size() < batch * std::size_t(cfg.input_dim) || m.size() < batch * std::size_t(M))
    throw std::invalid_argument("batch_pass: input spans too small");

  const std::size_t n_hidden = params.hidden.size();
  ws.act.resize(n_hidden);
  // Forward through the ReLU stack
  const double* x = d.data();
  std::size_t x_dim = cfg.input_dim;
  for (std::size_t h = 0; h < n_hidden; ++h) {
    const auto& l = params.hidden[h];
    ws.act[h].assign(batch * std::size_t(l.out), 0.0);
    dense_forward(l, x, batch, ws.act[h].data());
    kern::relu(ws.act[h].size(), ws.act[h].data());
    x = ws.act[h].data();
    x_dim = l.out;
  }
  const double* a_last = x;
  const std::size_t last_dim = x_dim;

  ws.mu.assign(batch * std::size_t(L) * M, 0.0);
  ws.sigma_z.assign(batch * std::size_t(L), 0.0);
  ws.alpha_z.assign(batch * std::size_t(L), 0.0);
  dense_forward(params.mu_head, a_last, batch, ws.mu.data());
  dense_forward(params.sigma_head, a_last, batch, ws.sigma_z.data());
  dense_forward(params.alpha_head, a_last, batch, ws.alpha_z.data());

  // Per-sample mixture loss and head deltas. head_delta packs the three
  // head gradients contiguously: [mu | sigma | alpha] per sample.
  const std::size_t head_dim = std::size_t(L) * M + 2 * L;
  if (grads) ws.head_delta.assign(batch * head_dim, 0.0);

  double loss_sum = 0.0;
  std::vector<double> g(L), pi(L), alpha(L), sigma(L);
  const double inv_batch = 1.0 / double(batch);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* mu = ws.mu.data() + s * std::size_t(L) * M;
    const double* sz = ws.sigma_z.data() + s * L;
    const double* az = ws.alpha_z.data() + s * L;
    const double* tgt = m.data() + s * std::size_t(M);

    const double alse = logsumexp(az, L);
    for (int l = 0; l < L; ++l) alpha[l] = std::exp(az[l] - alse);
    for (int l = 0; l < L; ++l) sigma[l] = std::max(modified_elu(sz[l]), kSigmaFloor);

    for (int l = 0; l < L; ++l) {
      double q = 0.0;
      const double* mul = mu + std::size_t(l) * M;
      for (int i = 0; i < M; ++i) {
        const double r = tgt[i] - mul[i];
        q += r * r;
      }
      g[l] = (az[l] - alse) - M * std::log(sigma[l]) - q / (2.0 * sigma[l] * sigma[l]) -
             0.5 * M * kLog2Pi;
    }
    const double glse = logsumexp(g.data(), L);
    loss_sum += -glse;
    if (!grads) continue;

    for (int l = 0; l < L; ++l) pi[l] = std::exp(g[l] - glse);
    double* hd = ws.head_delta.data() + s * head_dim;
    double* d_mu = hd;
    double* d_sigma = hd + std::size_t(L) * M;
    double* d_alpha = d_sigma + L;
    for (int l = 0; l < L; ++l) {
      const double* mul = mu + std::size_t(l) * M;
      const double inv_s2 = 1.0 / (sigma[l] * sigma[l]);
      double q = 0.0;
      for (int i = 0; i < M; ++i) {
        const double r = mul[i] - tgt[i];
        d_mu[std::size_t(l) * M + i] = inv_batch * pi[l] * r * inv_s2;
        q += r * r;
      }
      const double de_dsigma = pi[l] * (M / sigma[l] - q * inv_s2 / sigma[l]);
      const bool floored = modified_elu(sz[l]) < kSigmaFloor;
      d_sigma[l] = floored ? 0.0
                           : inv_batch * de_dsigma * modified_elu_derivative(sz[l]);
      d_alpha[l] = inv_batch * (alpha[l] - pi[l]);
    }
  }

  if (!grads) return loss_sum * inv_batch;

  // Head weight/bias gradients and the delta flowing into the stack.
  ws.delta_a.assign(batch * last_dim, 0.0);
  auto head_back = [&](const DenseLayer& head, DenseLayer& ghead, std::size_t offset,
                       std::size_t dim) {
    // strided view: per-sample rows inside head_delta
    // pack into a contiguous buffer for the gemms
    ws.delta_b.resize(batch * dim);
    for (std::size_t s = 0; s < batch; ++s)
      std::memcpy(ws.delta_b.data() + s * dim, ws.head_delta.data() + s * head_dim + offset,
                  dim * sizeof(double));
    kern::gemm_tn_acc(head.in, head.out, batch, a_last, ws.delta_b.data(), ghead.w.data());
    kern::col_sum_acc(batch, dim, ws.delta_b.data(), ghead.b.data());
    // delta_a += delta_head * W^T
    std::vector<double> tmp(batch * last_dim);
    kern::gemm_nt(batch, head.in, head.out, ws.delta_b.data(), head.w.data(), tmp.data());
    for (std::size_t i = 0; i < tmp.size(); ++i) ws.delta_a[i] += tmp[i];
  };
  head_back(params.mu_head, grads->mu_head, 0, std::size_t(L) * M);
  head_back(params.sigma_head, grads->sigma_head, std::size_t(L) * M, L);
  head_back(params.alpha_head, grads->alpha_head, std::size_t(L) * M + L, L);

  // Backward through the hidden stack
  std::vector<double> delta = std::move(ws.delta_a);
  for (std::size_t h = n_hidden; h-- > 0;) {
    const auto& l = params.hidden[h];
    auto& gl = grads->hidden[h];
    kern::relu_backward(delta.size(), ws.act[h].data(), delta.data());
    const double* input = h == 0 ? d.data() : ws.act[h - 1].data();
    kern::gemm_tn_acc(l.in, l.out, batch, input, delta.data(), gl.w.data());
    kern::col_sum_acc(batch, l.out, delta.data(), gl.b.data());
    if (h > 0) {
      std::vector<double> prev(batch * std::size_t(l.in));
      kern::gemm_nt(batch, l.in, l.out, delta.data(), l.w.data(), prev.data());
      delta = std::move(prev);
    }
  }
  return loss_sum * inv_batch;
}

}  // namespace

double batch_forward_backward(const NetworkParams& params, std::span<const double> d,
                              std::span<const double> m, std::size_t batch, Gradients& g,
                              BatchWorkspace& ws) {
  return batch_pass(params, d, m, batch, &g, ws);
}

double batch_loss(const NetworkParams& params, std::span<const double> d,
                  std::span<const double> m, std::size_t batch, BatchWorkspace& ws) {
  return batch_pass(params, d, m, batch, nullptr, ws);
}

double loss_and_gradients(const NetworkParams& params, std::span<const double> d,
                          std::span<const double> m, Gradients& g) {
  BatchWorkspace ws;
  return batch_pass(params, d, m, 1, &g, ws);
}

void NetworkParams::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(kMagic, 4);
  auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  w32(kCheckpointVersion);
  w32(std::uint32_t(cfg.input_dim));
  w32(std::uint32_t(cfg.hidden.size()));
  for (int h : cfg.hidden) w32(std::uint32_t(h));
  w32(std::uint32_t(cfg.kernels));
  w32(std::uint32_t(cfg.target_dim));
  for_each_layer([&](const DenseLayer& l) {
    f.write(reinterpret_cast<const char*>(l.w.data()), l.w.size() * sizeof(double));
    f.write(reinterpret_cast<const char*>(l.b.data()), l.b.size() * sizeof(double));
  });
  if (!f) throw std::runtime_error("write failed: " + path);
}

NetworkParams NetworkParams::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path + ": not a checkpoint file");
  auto r32 = [&]() {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  const std::uint32_t version = r32();
  if (version != kCheckpointVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  MdnConfig cfg;
  cfg.input_dim = int(r32());
  cfg.hidden.resize(r32());
  for (int& h : cfg.hidden) h = int(r32());
  cfg.kernels = int(r32());
  cfg.target_dim = int(r32());
  NetworkParams p = NetworkParams::init(cfg, 0);
  p.for_each_layer([&](DenseLayer& l) {
    f.read(reinterpret_cast<char*>(l.w.data()), l.w.size() * sizeof(double));
    f.read(reinterpret_cast<char*>(l.b.data()), l.b.size() * sizeof(double));
  });
  if (!f) throw std::runtime_error(path + ": truncated checkpoint");
  return p;
}

}  // namespace geomdn
