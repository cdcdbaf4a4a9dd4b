// Command-line pipeline: generate datasets, train networks, evaluate
// checkpoints, and invert dispersion curves into posterior summaries.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geomdn/dataset.hpp"
#include "geomdn/dispersion.hpp"
#include "geomdn/geo_model.hpp"
#include "geomdn/mdn.hpp"
#include "geomdn/posterior.hpp"
#include "geomdn/trainer.hpp"

namespace fs = std::filesystem;
using namespace geomdn;

namespace {

PriorConfig load_prior(const std::string& path) {
  return path.empty() ? PriorConfig{} : PriorConfig::load(path);
}

std::optional<NoiseModel> noise_from(const std::string& mode, double eps) {
  if (mode == "off") return std::nullopt;
  if (mode == "on") return NoiseModel{eps};
  throw CLI::ValidationError("--noise", "must be 'on' or 'off'");
}

// Linear interpolation of a curve onto a new frequency axis.
DispersionCurve resample_linear(const DispersionCurve& in, const FrequencyGrid& target) {
  DispersionCurve out;
  out.grid = target;
  out.phase_vel.resize(target.freqs.size());
  const auto& f = in.grid.freqs;
  for (std::size_t k = 0; k < target.freqs.size(); ++k) {
    const double x = target.freqs[k];
    if (x <= f.front()) {
      out.phase_vel[k] = in.phase_vel.front();
      continue;
    }
    if (x >= f.back()) {
      out.phase_vel[k] = in.phase_vel.back();
      continue;
    }
    std::size_t hi = 1;
    while (f[hi] < x) ++hi;
    const double t = (x - f[hi - 1]) / (f[hi] - f[hi - 1]);
    out.phase_vel[k] = (1.0 - t) * in.phase_vel[hi - 1] + t * in.phase_vel[hi];
  }
  return out;
}

int cmd_generate(std::size_t n, std::uint64_t seed, const std::string& out,
                 const std::string& config_path, unsigned threads, double max_fail) {
  const PriorConfig prior = load_prior(config_path);
  const FrequencyGrid grid = default_grid();
  GenerateOptions opts;
  opts.max_failure_rate = max_fail;
  opts.threads = threads;
  Dataset ds = generate(n, prior, grid, seed, opts);

  DatasetManifest mf;
  mf.grid = grid;
  mf.prior = prior;
  mf.epsilon = 0.0;  // noiseless storage; noise is applied at train time
  mf.seed = seed;
  if (auto dir = fs::path(out).parent_path(); !dir.empty()) fs::create_directories(dir);
  save(ds, mf, out);
  std::printf("wrote %zu samples to %s (checksum %016llx)\n", ds.count, out.c_str(),
              static_cast<unsigned long long>(dataset_checksum(ds)));
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& out_ckpt,
              const std::string& history_path, const std::string& noise_mode, double eps,
              TrainConfig tc, MdnConfig net_cfg, std::size_t val_count,
              const std::string& init_from) {
  auto [ds, mf] = load(data_path);
  net_cfg.input_dim = int(ds.n_freq);
  tc.noise = noise_from(noise_mode, eps);

  if (val_count == 0) val_count = std::max<std::size_t>(1, ds.count / 10);
  if (val_count >= ds.count)
    throw std::runtime_error("validation size must be smaller than the dataset");
  auto parts = split(ds, {ds.count - val_count, val_count}, tc.seed ^ 0x73706c6974ull);

  std::optional<NetworkParams> warm;
  if (!init_from.empty()) warm = NetworkParams::load(init_from);

  auto [params, hist] = train(parts[0], parts[1], net_cfg, tc, warm ? &*warm : nullptr);
  if (auto dir = fs::path(out_ckpt).parent_path(); !dir.empty()) fs::create_directories(dir);
  params.save(out_ckpt);
  if (!history_path.empty()) hist.save_csv(history_path);
  std::printf("best epoch %d, validation loss %.6f (%s after %zu epochs)\n", hist.best_epoch,
              hist.best_val_loss, hist.stop_reason.c_str(), hist.train_loss.size());
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& data_path,
                 const std::string& noise_mode, double eps, std::uint64_t seed,
                 const std::string& out_csv) {
  NetworkParams params = NetworkParams::load(ckpt);
  auto [ds, mf] = load(data_path);
  if (std::size_t(params.cfg.input_dim) != ds.n_freq)
    throw GridMismatch("checkpoint expects " + std::to_string(params.cfg.input_dim) +
                       " frequencies, dataset has " + std::to_string(ds.n_freq));
  const auto noise = noise_from(noise_mode, eps);
  const double loss = evaluate_loss(params, ds, noise, seed);

  Dataset view = ds;
  if (noise) {
    Rng rng(seed);
    add_noise(view.d, *noise, rng);
  }
  std::vector<double> sq(kNumLayers, 0.0);
  std::ofstream csv;
  if (!out_csv.empty()) {
    csv.open(out_csv);
    if (!csv) throw std::runtime_error("cannot write " + out_csv);
    csv.precision(17);
    csv << "layer,true_vs_km_s,predicted_mean_vs_km_s\n";
  }
  for (std::size_t i = 0; i < view.count; ++i) {
    const MixtureParams mp = forward(params, view.curve(i));
    const VelocityVector mean = mean_model(mp);
    auto tgt = view.target(i);
    for (std::size_t j = 0; j < kNumLayers; ++j) {
      const double r = mean.vs[j] - tgt[j];
      sq[j] += r * r;
      if (csv.is_open()) csv << j + 1 << ',' << tgt[j] << ',' << mean.vs[j] << '\n';
    }
  }
  std::printf("mean loss %.6f over %zu samples\n", loss, ds.count);
  for (std::size_t j = 0; j < kNumLayers; ++j)
    std::printf("layer %zu rmse %.6f km/s\n", j + 1, std::sqrt(sq[j] / double(ds.count)));
  return 0;
}

MixtureParams posterior_for_curve(const NetworkParams& params, DispersionCurve& curve,
                                  const std::string& resample) {
  if (int(curve.phase_vel.size()) != params.cfg.input_dim) {
    if (resample != "linear")
      throw GridMismatch("curve has " + std::to_string(curve.phase_vel.size()) +
                         " frequencies but the checkpoint expects " +
                         std::to_string(params.cfg.input_dim) +
                         "; pass --resample linear to opt in to interpolation");
    curve = resample_linear(curve, default_grid(params.cfg.input_dim));
  }
  return forward(params, curve.phase_vel);
}

int cmd_invert(const std::string& ckpt, const std::string& curve_csv, const std::string& out_dir,
               const std::string& config_path, const std::string& resample) {
  const auto t0 = std::chrono::steady_clock::now();
  NetworkParams params = NetworkParams::load(ckpt);
  DispersionCurve curve = DispersionCurve::load_csv(curve_csv);
  const MixtureParams mp = posterior_for_curve(params, curve, resample);
  const PosteriorSummary summary = summarize(mp);
  const PriorConfig prior = load_prior(config_path);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  summary.save_json((dir / "summary.json").string());
  curve.save_csv((dir / "input_curve.csv").string());

  const auto axis = default_axis();
  for (std::size_t j = 0; j < kNumLayers; ++j)
    marginal_1d(mp, int(j), axis).save_csv(
        (dir / ("marginal_layer" + std::to_string(j + 1) + ".csv")).string());

  // Forward-recompute dispersion from the point predictions.
  auto forward_and_save = [&](const VelocityVector& m, const std::string& stem) {
    DispersionCurve fc = dispersion(build_layered_model(m, prior), curve.grid);
    fc.save_csv((dir / (stem + "_curve.csv")).string());
    std::ofstream res(dir / (stem + "_residuals.csv"));
    res.precision(17);
    res << "freq_hz,residual_km_s\n";
    for (std::size_t k = 0; k < fc.phase_vel.size(); ++k)
      res << fc.grid.freqs[k] << ',' << fc.phase_vel[k] - curve.phase_vel[k] << '\n';
  };
  forward_and_save(summary.map_model, "map");
  forward_and_save(summary.mean_model, "mean");

  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  std::printf("inversion report written to %s (%.0f ms)\n", out_dir.c_str(), ms);
  return 0;
}

int cmd_stats(const std::string& ckpt, const std::string& curve_csv, const std::string& resample) {
  NetworkParams params = NetworkParams::load(ckpt);
  DispersionCurve curve = DispersionCurve::load_csv(curve_csv);
  const MixtureParams mp = posterior_for_curve(params, curve, resample);
  std::cout << summarize(mp).to_json() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian seabed shear-velocity inversion from dispersion curves"};
  app.require_subcommand(1);

  // generate
  std::size_t g_n = 0;
  std::uint64_t g_seed = 0;
  std::string g_out, g_config;
  unsigned g_threads = 0;
  double g_max_fail = 0.10;
  auto* gen = app.add_subcommand("generate", "Sample the prior and run the forward solver");
  gen->add_option("-n,--samples", g_n, "number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", g_seed, "RNG seed");
  gen->add_option("-o,--out", g_out, "output dataset path")->required();
  gen->add_option("--config", g_config, "prior config file");
  gen->add_option("--threads", g_threads, "worker threads (0 = all cores)");
  gen->add_option("--max-failure-rate", g_max_fail, "tolerated solver failure fraction");

  // train
  std::string t_data, t_out, t_hist, t_noise = "on", t_init;
  double t_eps = 0.05;
  TrainConfig t_tc;
  MdnConfig t_net;
  std::size_t t_val = 0;
  std::vector<int> t_hidden;
  auto* tr = app.add_subcommand("train", "Train a mixture density network");
  tr->add_option("--data", t_data, "dataset path")->required();
  tr->add_option("-o,--out", t_out, "output checkpoint path")->required();
  tr->add_option("--history", t_hist, "history CSV path");
  tr->add_option("--noise", t_noise, "noise injection: on or off")->check(CLI::IsMember({"on", "off"}));
  tr->add_option("--epsilon", t_eps, "relative noise level");
  tr->add_option("--batch", t_tc.batch_size, "batch size")->check(CLI::PositiveNumber);
  tr->add_option("--epochs", t_tc.max_epochs, "max epochs")->check(CLI::PositiveNumber);
  tr->add_option("--patience", t_tc.patience, "early-stopping patience")->check(CLI::PositiveNumber);
  tr->add_option("--checkpoint-every", t_tc.checkpoint_every, "epochs between validation checks")
      ->check(CLI::PositiveNumber);
  tr->add_option("--lr", t_tc.adam.lr, "Adam step size");
  tr->add_option("--seed", t_tc.seed, "RNG seed");
  tr->add_option("--hidden", t_hidden, "hidden layer widths");
  tr->add_option("--kernels", t_net.kernels, "mixture kernels")->check(CLI::PositiveNumber);
  tr->add_option("--val-count", t_val, "validation samples (default 10%)");
  tr->add_option("--init-from", t_init, "checkpoint to warm start from");

  // evaluate
  std::string e_ckpt, e_data, e_noise = "off", e_out;
  double e_eps = 0.05;
  std::uint64_t e_seed = 0;
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  ev->add_option("--checkpoint", e_ckpt, "checkpoint path")->required();
  ev->add_option("--data", e_data, "dataset path")->required();
  ev->add_option("--noise", e_noise, "noisy view: on or off")->check(CLI::IsMember({"on", "off"}));
  ev->add_option("--epsilon", e_eps, "relative noise level");
  ev->add_option("--seed", e_seed, "noise seed");
  ev->add_option("-o,--out", e_out, "scatter CSV path");

  // invert
  std::string i_ckpt, i_curve, i_out, i_config, i_resample;
  auto* inv = app.add_subcommand("invert", "Invert a dispersion curve");
  inv->add_option("--checkpoint", i_ckpt, "checkpoint path")->required();
  inv->add_option("--curve", i_curve, "input dispersion CSV")->required();
  inv->add_option("-o,--out", i_out, "output directory")->required();
  inv->add_option("--config", i_config, "prior config for the forward recomputation");
  inv->add_option("--resample", i_resample, "opt-in grid interpolation (linear)")
      ->check(CLI::IsMember({"linear"}));

  // stats
  std::string s_ckpt, s_curve, s_resample;
  auto* st = app.add_subcommand("stats", "Print the posterior summary for a curve");
  st->add_option("--checkpoint", s_ckpt, "checkpoint path")->required();
  st->add_option("--curve", s_curve, "input dispersion CSV")->required();
  st->add_option("--resample", s_resample, "opt-in grid interpolation (linear)")
      ->check(CLI::IsMember({"linear"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed())
      return cmd_generate(g_n, g_seed, g_out, g_config, g_threads, g_max_fail);
    if (tr->parsed()) {
      if (!t_hidden.empty()) t_net.hidden = t_hidden;
      return cmd_train(t_data, t_out, t_hist, t_noise, t_eps, t_tc, t_net, t_val, t_init);
    }
    if (ev->parsed()) return cmd_evaluate(e_ckpt, e_data, e_noise, e_eps, e_seed, e_out);
    if (inv->parsed()) return cmd_invert(i_ckpt, i_curve, i_out, i_config, i_resample);
    if (st->parsed()) return cmd_stats(s_ckpt, s_curve, s_resample);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
