#include "geomdn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace geomdn {

namespace {

struct AdamState {
  Gradients m, v;
  long step = 0;
};

void adam_update(NetworkParams& p, const Gradients& g, AdamState& st, const AdamConfig& ac) {
  ++st.step;
  const double bc1 = 1.0 - std::pow(ac.beta1, double(st.step));
  const double bc2 = 1.0 - std::pow(ac.beta2, double(st.step));
  auto upd = [&](std::vector<double>& w, const std::vector<double>& gw,
                 std::vector<double>& mw, std::vector<double>& vw) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      mw[i] = ac.beta1 * mw[i] + (1.0 - ac.beta1) * gw[i];
      vw[i] = ac.beta2 * vw[i] + (1.0 - ac.beta2) * gw[i] * gw[i];
      w[i] -= ac.lr * (mw[i] / bc1) / (std::sqrt(vw[i] / bc2) + ac.eps);
    }
  };
  auto layer = [&](DenseLayer& l, const DenseLayer& gl, DenseLayer& ml, DenseLayer& vl) {
    upd(l.w, gl.w, ml.w, vl.w);
    upd(l.b, gl.b, ml.b, vl.b);
  };
  for (std::size_t i = 0; i < p.hidden.size(); ++i)
    layer(p.hidden[i], g.hidden[i], st.m.hidden[i], st.v.hidden[i]);
  layer(p.mu_head, g.mu_head, st.m.mu_head, st.v.mu_head);
  layer(p.sigma_head, g.sigma_head, st.m.sigma_head, st.v.sigma_head);
  layer(p.alpha_head, g.alpha_head, st.m.alpha_head, st.v.alpha_head);
}

void zero(Gradients& g) {
  auto z = [](DenseLayer& l) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  };
  for (auto& l : g.hidden) z(l);
  z(g.mu_head);
  z(g.sigma_head);
  z(g.alpha_head);
}

double chunked_loss(const NetworkParams& p, const std::vector<double>& d,
                    const std::vector<double>& m, std::size_t count, std::size_t n_freq,
                    BatchWorkspace& ws, std::size_t chunk = 8192) {
  double sum = 0.0;
  for (std::size_t off = 0; off < count; off += chunk) {
    const std::size_t b = std::min(chunk, count - off);
    sum += b * batch_loss(p, {d.data() + off * n_freq, b * n_freq},
                          {m.data() + off * kNumLayers, b * kNumLayers}, b, ws);
  }
  return sum / double(count);
}

}  // namespace

void TrainHistory::save_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.precision(17);
  f << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    f << e + 1 << ',' << train_loss[e] << ',';
    if (std::isnan(val_loss[e]))
      f << '\n';
    else
      f << val_loss[e] << '\n';
  }
}

std::pair<NetworkParams, TrainHistory> train(const Dataset& train_set, const Dataset& val_set,
                                             const MdnConfig& net_cfg, const TrainConfig& tc,
                                             const NetworkParams* init) {
  if (train_set.count == 0 || val_set.count == 0)
    throw std::invalid_argument("train: empty dataset");
  if (train_set.n_freq != val_set.n_freq)
    throw GridMismatch("train: training and validation grids differ");
  const MdnConfig& cfg = init ? init->cfg : net_cfg;
  if (std::size_t(cfg.input_dim) != train_set.n_freq)
    throw GridMismatch("train: network input_dim does not match the dataset grid");
  if (tc.batch_size < 1 || tc.patience < 1 || tc.checkpoint_every < 1)
    throw std::invalid_argument("train: invalid TrainConfig");

  // Warm start the mu head at the mean training target.
  std::array<double, kNumLayers> mean_target{};
  for (std::size_t i = 0; i < train_set.count; ++i)
    for (std::size_t j = 0; j < kNumLayers; ++j)
      mean_target[j] += train_set.m[i * kNumLayers + j];
  for (double& x : mean_target) x /= double(train_set.count);

  NetworkParams params = init ? *init : NetworkParams::init(cfg, tc.seed, mean_target);
  AdamState adam{Gradients::zeros_like(params), Gradients::zeros_like(params)};
  Gradients grads = Gradients::zeros_like(params);
  BatchWorkspace ws;

  // One fixed validation noise realization for the whole run.
  const std::vector<double>* val_d = &val_set.d;
  std::vector<double> val_noisy;
  if (tc.noise) {
    val_noisy = val_set.d;
    Rng vrng(tc.seed ^ 0x76616c6964ull);
    add_noise(val_noisy, *tc.noise, vrng);
    val_d = &val_noisy;
  }

  Rng shuffle_rng(tc.seed ^ 0x73687566ull);
  Rng noise_rng(tc.seed ^ 0x6e6f697365ull);

  std::vector<std::size_t> order(train_set.count);
  std::iota(order.begin(), order.end(), 0);

  const std::size_t n_freq = train_set.n_freq;
  std::vector<double> epoch_d;
  std::vector<double> batch_d(tc.batch_size * n_freq), batch_m(tc.batch_size * kNumLayers);

  TrainHistory hist;
  hist.best_val_loss = std::numeric_limits<double>::infinity();
  NetworkParams best = params;
  int checkpoints_since_best = 0;
  hist.stop_reason = "max_epochs";

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const std::vector<double>* d = &train_set.d;
    if (tc.noise) {
      epoch_d = train_set.d;
      add_noise(epoch_d, *tc.noise, noise_rng);
      d = &epoch_d;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t off = 0; off < train_set.count; off += tc.batch_size) {
      const std::size_t b = std::min(tc.batch_size, train_set.count - off);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t src = order[off + i];
        std::copy_n(d->data() + src * n_freq, n_freq, batch_d.data() + i * n_freq);
        std::copy_n(train_set.m.data() + src * kNumLayers, kNumLayers,
                    batch_m.data() + i * kNumLayers);
      }
      zero(grads);
      const double loss = batch_forward_backward(
          params, {batch_d.data(), b * n_freq}, {batch_m.data(), b * kNumLayers}, b, grads, ws);
      if (!std::isfinite(loss)) throw NonFiniteLoss(epoch);
      adam_update(params, grads, adam, tc.adam);
      loss_sum += loss * b;
      seen += b;
    }
    hist.train_loss.push_back(loss_sum / double(seen));

    double vloss = std::numeric_limits<double>::quiet_NaN();
    if (epoch % tc.checkpoint_every == 0 || epoch == tc.max_epochs) {
      vloss = chunked_loss(params, *val_d, val_set.m, val_set.count, n_freq, ws);
      if (!std::isfinite(vloss)) throw NonFiniteLoss(epoch);
      if (vloss < hist.best_val_loss) {
        hist.best_val_loss = vloss;
        hist.best_epoch = epoch;
        best = params;
        checkpoints_since_best = 0;
      } else {
        ++checkpoints_since_best;
      }
    }
    hist.val_loss.push_back(vloss);

    if (checkpoints_since_best >= tc.patience) {
      hist.stop_reason = "early_stopping";
      break;
    }
  }

  if (!tc.snapshot_path.empty()) best.save(tc.snapshot_path);
  return {std::move(best), std::move(hist)};
}

double evaluate_loss(const NetworkParams& params, const Dataset& ds,
                     const std::optional<NoiseModel>& noise, std::uint64_t seed) {
  if (ds.count == 0) throw std::invalid_argument("evaluate_loss: empty dataset");
  if (std::size_t(params.cfg.input_dim) != ds.n_freq)
    throw GridMismatch("evaluate_loss: network input_dim does not match the dataset grid");
  const std::vector<double>* d = &ds.d;
  std::vector<double> noisy;
  if (noise) {
    noisy = ds.d;
    Rng rng(seed);
    add_noise(noisy, *noise, rng);
    d = &noisy;
  }
  BatchWorkspace ws;
  return chunked_loss(params, *d, ds.m, ds.count, ds.n_freq, ws);
}

}  // namespace geomdn
