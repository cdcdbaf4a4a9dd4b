#pragma once
// Mixture density network: ReLU dense stack with three heads producing a
// Gaussian-mixture posterior over the velocity model, the mixture
// negative-log-likelihood loss, and exact analytic gradients.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "geomdn/geo_model.hpp"

namespace geomdn {

struct MdnConfig {
  int input_dim = 21;
  std::vector<int> hidden{500, 500, 500, 500};
  int kernels = 36;   // L
  int target_dim = 9; // M

  int mu_head_dim() const { return kernels * target_dim; }
  int output_dim() const { return kernels * (target_dim + 2); }
  bool operator==(const MdnConfig&) const = default;
};

// Network output for one observation: the mixture posterior.
struct MixtureParams {
  int kernels = 0;
  int target_dim = 0;
  std::vector<double> alpha;  // L, nonnegative, sums to 1
  std::vector<double> sigma;  // L, > 0
  std::vector<double> mu;     // L x M row-major

  std::span<const double> center(int l) const {
    return {mu.data() + std::size_t(l) * target_dim, std::size_t(target_dim)};
  }
};

struct DenseLayer {
  int in = 0, out = 0;
  std::vector<double> w;  // in x out row-major
  std::vector<double> b;  // out
};

// All trainable parameters. Layer order: hidden stack, then mu, sigma,
// alpha heads off the last hidden activation.
struct NetworkParams {
  MdnConfig cfg;
  std::vector<DenseLayer> hidden;
  DenseLayer mu_head, sigma_head, alpha_head;

  static NetworkParams init(const MdnConfig& cfg, std::uint64_t seed,
                            std::span<const double> mu_bias_init = {});
  std::size_t param_count() const;

  // Flat views over every parameter, in a fixed order (for the optimizer
  // and for finite-difference checks).
  void for_each_layer(const std::function<void(DenseLayer&)>& fn);
  void for_each_layer(const std::function<void(const DenseLayer&)>& fn) const;

  void save(const std::string& path) const;
  static NetworkParams load(const std::string& path);
};

std::size_t param_count(const MdnConfig& cfg);

// f(z) = z + 1 for z >= 0, exp(z) for z < 0; positive everywhere.
double modified_elu(double z);
double modified_elu_derivative(double z);

// Width floor guarding sigma^M arithmetic in the posterior statistics.
inline constexpr double kSigmaFloor = 1e-6;

MixtureParams forward(const NetworkParams& params, std::span<const double> d);

double nll_loss(const MixtureParams& mp, std::span<const double> m);

// Gradient holder mirroring NetworkParams layout.
struct Gradients {
  std::vector<DenseLayer> hidden;
  DenseLayer mu_head, sigma_head, alpha_head;

  static Gradients zeros_like(const NetworkParams& p);
  void scale(double s);
};

// Scratch space for batched forward/backward (reused across batches).
struct BatchWorkspace {
  std::vector<std::vector<double>> act;     // per hidden layer, batch x width
  std::vector<double> mu, sigma_z, alpha_z; // head pre-activations
  std::vector<double> delta_a, delta_b;
  std::vector<double> head_delta;
};

// Mean loss over the batch; accumulates d(mean loss)/d(params) into g
// (caller zeroes g). Rows of `d` and `m` are samples.
double batch_forward_backward(const NetworkParams& params,
                              std::span<const double> d, std::span<const double> m,
                              std::size_t batch, Gradients& g, BatchWorkspace& ws);

// Mean loss only (no gradients).
double batch_loss(const NetworkParams& params, std::span<const double> d,
                  std::span<const double> m, std::size_t batch, BatchWorkspace& ws);

// Single-sample convenience used by tests: full gradient of nll_loss.
double loss_and_gradients(const NetworkParams& params, std::span<const double> d,
                          std::span<const double> m, Gradients& g);

}  // namespace geomdn
