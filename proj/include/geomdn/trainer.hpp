#pragma once
// Mini-batch training loop: Adam updates, per-epoch noise injection,
// validation at checkpoints, early stopping with best-checkpoint restore.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geomdn/dataset.hpp"
#include "geomdn/mdn.hpp"

namespace geomdn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 8192;
  int max_epochs = 1500;
  int checkpoint_every = 1;  // epochs between validation evaluations
  int patience = 100;        // checkpoints without improvement before stop
  std::optional<NoiseModel> noise;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::string snapshot_path;  // if set, best params are also written here
};

struct TrainHistory {
  std::vector<double> train_loss;  // one per epoch
  std::vector<double> val_loss;    // NaN on epochs without a checkpoint
  int best_epoch = -1;
  double best_val_loss = 0.0;
  std::string stop_reason;

  void save_csv(const std::string& path) const;
};

struct NonFiniteLoss : std::runtime_error {
  int epoch;
  explicit NonFiniteLoss(int e)
      : std::runtime_error("non-finite loss at epoch " + std::to_string(e)), epoch(e) {}
};

// Returns the parameters with the best validation loss seen, not the
// final-epoch parameters. Training noise is redrawn every epoch; the
// validation set uses one fixed noise realization for the whole run.
// `init` warm starts from existing parameters (their config wins) instead
// of a fresh random initialization.
std::pair<NetworkParams, TrainHistory> train(const Dataset& train_set,
                                             const Dataset& val_set,
                                             const MdnConfig& net_cfg,
                                             const TrainConfig& tc,
                                             const NetworkParams* init = nullptr);

// Mean nll_loss over the dataset, with an optional noisy view of the
// observations (deterministic for a fixed seed).
double evaluate_loss(const NetworkParams& params, const Dataset& ds,
                     const std::optional<NoiseModel>& noise, std::uint64_t seed);

}  // namespace geomdn
