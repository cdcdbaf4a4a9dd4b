#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "geomdn/mdn.hpp"

using namespace geomdn;

namespace {

MdnConfig toy_config() {
  MdnConfig cfg;
  cfg.input_dim = 5;
  cfg.hidden = {16};
  cfg.kernels = 3;
  cfg.target_dim = 4;
  return cfg;
}

std::vector<double> randvec(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Flat read/write access to every parameter, mirroring for_each_layer order.
std::vector<double*> flat_params(NetworkParams& p) {
  std::vector<double*> out;
  p.for_each_layer([&](DenseLayer& l) {
    for (double& w : l.w) out.push_back(&w);
    for (double& b : l.b) out.push_back(&b);
  });
  return out;
}

std::vector<double> flat_grads(const Gradients& g) {
  std::vector<double> out;
  auto push = [&](const DenseLayer& l) {
    out.insert(out.end(), l.w.begin(), l.w.end());
    out.insert(out.end(), l.b.begin(), l.b.end());
  };
  for (const auto& l : g.hidden) push(l);
  push(g.mu_head);
  push(g.sigma_head);
  push(g.alpha_head);
  return out;
}

}  // namespace

TEST_CASE("modified ELU") {
  CHECK(modified_elu(0.0) == doctest::Approx(1.0));
  CHECK(modified_elu(1.0) == doctest::Approx(2.0));
  CHECK(modified_elu(-20.0) == doctest::Approx(std::exp(-20.0)));
  CHECK(modified_elu(-20.0) > 0.0);
  // C1 continuity at 0
  CHECK(modified_elu_derivative(0.0) == doctest::Approx(1.0));
  CHECK(modified_elu_derivative(-1e-9) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("parameter counting matches the layer arithmetic") {
  MdnConfig cfg;  // defaults: 21 inputs, 500x4, L=36, M=9
  CHECK(cfg.mu_head_dim() == 324);
  CHECK(cfg.kernels == 36);
  CHECK(cfg.output_dim() == 396);
  CHECK((21 + 1) * 500 == 11000);
  CHECK((500 + 1) * 36 == 18036);
  CHECK((500 + 1) * 324 == 162324);
  CHECK(param_count(cfg) == 960896);

  const NetworkParams p = NetworkParams::init(cfg, 1);
  CHECK(p.param_count() == 960896);
}

TEST_CASE("forward satisfies the mixture constraints") {
  const MdnConfig cfg = toy_config();
  Rng rng(3);

  SUBCASE("all-zero parameters give the symmetric mixture") {
    NetworkParams p = NetworkParams::init(cfg, 1);
    p.for_each_layer([](DenseLayer& l) {
      std::fill(l.w.begin(), l.w.end(), 0.0);
      std::fill(l.b.begin(), l.b.end(), 0.0);
    });
    const auto d = randvec(cfg.input_dim, rng);
    const MixtureParams mp = forward(p, d);
    for (double a : mp.alpha) CHECK(a == doctest::Approx(1.0 / cfg.kernels));
    for (double s : mp.sigma) CHECK(s == doctest::Approx(1.0));
    for (double m : mp.mu) CHECK(m == 0.0);
  }

  SUBCASE("random parameters") {
    for (int t = 0; t < 20; ++t) {
      const NetworkParams p = NetworkParams::init(cfg, 100 + t);
      const auto d = randvec(cfg.input_dim, rng);
      const MixtureParams mp = forward(p, d);
      double sum = 0.0;
      for (double a : mp.alpha) {
        CHECK(a >= 0.0);
        sum += a;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      for (double s : mp.sigma) CHECK(s > 0.0);
      for (double m : mp.mu) CHECK(std::isfinite(m));
    }
  }

  SUBCASE("dimension mismatch rejected") {
    const NetworkParams p = NetworkParams::init(cfg, 1);
    std::vector<double> wrong(cfg.input_dim + 1, 0.0);
    CHECK_THROWS_AS(forward(p, wrong), std::invalid_argument);
  }
}

TEST_CASE("nll loss closed-form cases") {
  SUBCASE("single kernel at its center") {
    MixtureParams mp;
    mp.kernels = 1;
    mp.target_dim = 9;
    mp.alpha = {1.0};
    mp.sigma = {1.0};
    mp.mu.assign(9, 0.7);
    std::vector<double> m(9, 0.7);
    CHECK(nll_loss(mp, m) == doctest::Approx(4.5 * std::log(2.0 * M_PI)));
  }

  SUBCASE("zero-weight kernels are inert") {
    MixtureParams one;
    one.kernels = 1;
    one.target_dim = 2;
    one.alpha = {1.0};
    one.sigma = {0.4};
    one.mu = {0.1, 0.2};
    MixtureParams two = one;
    two.kernels = 2;
    two.alpha = {1.0, 0.0};
    two.sigma = {0.4, 1e-9};
    two.mu = {0.1, 0.2, 50.0, 50.0};
    std::vector<double> m{0.15, 0.3};
    CHECK(nll_loss(two, m) == doctest::Approx(nll_loss(one, m)).epsilon(1e-12));
  }

  SUBCASE("matches the naive density formula when nothing underflows") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.3, 1.5);
    for (int t = 0; t < 50; ++t) {
      MixtureParams mp;
      mp.kernels = 4;
      mp.target_dim = 3;
      double asum = 0.0;
      for (int l = 0; l < 4; ++l) {
        mp.alpha.push_back(u(rng));
        asum += mp.alpha.back();
        mp.sigma.push_back(u(rng));
        for (int i = 0; i < 3; ++i) mp.mu.push_back(u(rng));
      }
      for (double& a : mp.alpha) a /= asum;
      std::vector<double> m{u(rng), u(rng), u(rng)};
      double dens = 0.0;
      for (int l = 0; l < 4; ++l) {
        double q = 0.0;
        for (int i = 0; i < 3; ++i) {
          const double r = m[i] - mp.mu[3 * l + i];
          q += r * r;
        }
        dens += mp.alpha[l] / std::pow(2.0 * M_PI * mp.sigma[l] * mp.sigma[l], 1.5) *
                std::exp(-q / (2.0 * mp.sigma[l] * mp.sigma[l]));
      }
      CHECK(nll_loss(mp, m) == doctest::Approx(-std::log(dens)).epsilon(1e-10));
    }
  }

  SUBCASE("kernel permutation invariance") {
    MixtureParams mp;
    mp.kernels = 3;
    mp.target_dim = 2;
    mp.alpha = {0.2, 0.5, 0.3};
    mp.sigma = {0.3, 0.7, 1.1};
    mp.mu = {0.1, 0.2, 0.5, 0.6, 0.9, 1.0};
    MixtureParams perm = mp;
    perm.alpha = {0.5, 0.3, 0.2};
    perm.sigma = {0.7, 1.1, 0.3};
    perm.mu = {0.5, 0.6, 0.9, 1.0, 0.1, 0.2};
    std::vector<double> m{0.4, 0.4};
    CHECK(nll_loss(mp, m) == doctest::Approx(nll_loss(perm, m)).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  const MdnConfig cfg = toy_config();
  Rng rng(11);
  for (int t = 0; t < 10; ++t) {
    NetworkParams p = NetworkParams::init(cfg, 500 + t);
    const auto d = randvec(cfg.input_dim, rng);
    std::vector<double> m(cfg.target_dim);
    std::uniform_real_distribution<double> u(0.3, 2.5);
    for (double& x : m) x = u(rng);

    Gradients g = Gradients::zeros_like(p);
    loss_and_gradients(p, d, m, g);
    const auto ga = flat_grads(g);
    auto ptrs = flat_params(p);
    REQUIRE(ga.size() == ptrs.size());

    // spot-check a spread of coordinates (full sweep lives in acceptance)
    const double h = 1e-4;
    double worst = 0.0;
    for (std::size_t i = 0; i < ptrs.size(); i += 37) {
      const double w0 = *ptrs[i];
      *ptrs[i] = w0 + h;
      const double lp = nll_loss(forward(p, d), m);
      *ptrs[i] = w0 - h;
      const double lm = nll_loss(forward(p, d), m);
      *ptrs[i] = w0;
      const double fd = (lp - lm) / (2.0 * h);
      // differences below the FD rounding floor (~1e-11 at this loss
      // scale) carry no information
      if (std::fabs(ga[i] - fd) < 5e-11) continue;
      worst = std::max(worst, std::fabs(ga[i] - fd) / (std::fabs(fd) + 1e-8));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("gradient vanishes at a constructed stationary point") {
  // One kernel, all weights zero: alpha = 1 regardless; mu-head bias set to
  // the target; sigma-head bias far negative so the width sits on the floor
  // and its (clipped) gradient is exactly zero.
  MdnConfig cfg = toy_config();
  cfg.kernels = 1;
  NetworkParams p = NetworkParams::init(cfg, 1);
  p.for_each_layer([](DenseLayer& l) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  });
  std::vector<double> m{0.4, 0.6, 0.8, 1.0};
  for (int i = 0; i < cfg.target_dim; ++i) p.mu_head.b[i] = m[i];
  p.sigma_head.b[0] = -40.0;

  std::vector<double> d(cfg.input_dim, 0.3);
  Gradients g = Gradients::zeros_like(p);
  loss_and_gradients(p, d, m, g);
  double norm = 0.0;
  for (double x : flat_grads(g)) norm += x * x;
  CHECK(std::sqrt(norm) < 1e-8);
}

TEST_CASE("batch gradient equals the mean of per-sample gradients") {
  const MdnConfig cfg = toy_config();
  Rng rng(21);
  const std::size_t batch = 6;
  NetworkParams p = NetworkParams::init(cfg, 77);
  const auto d = randvec(batch * cfg.input_dim, rng);
  std::vector<double> m(batch * cfg.target_dim);
  std::uniform_real_distribution<double> u(0.3, 2.5);
  for (double& x : m) x = u(rng);

  Gradients gb = Gradients::zeros_like(p);
  BatchWorkspace ws;
  const double lb = batch_forward_backward(p, d, m, batch, gb, ws);

  Gradients acc = Gradients::zeros_like(p);
  double lsum = 0.0;
  for (std::size_t s = 0; s < batch; ++s) {
    Gradients gi = Gradients::zeros_like(p);
    lsum += loss_and_gradients(
        p, {d.data() + s * cfg.input_dim, std::size_t(cfg.input_dim)},
        {m.data() + s * cfg.target_dim, std::size_t(cfg.target_dim)}, gi);
    for (std::size_t h = 0; h < acc.hidden.size(); ++h) {
      for (std::size_t i = 0; i < acc.hidden[h].w.size(); ++i) acc.hidden[h].w[i] += gi.hidden[h].w[i];
      for (std::size_t i = 0; i < acc.hidden[h].b.size(); ++i) acc.hidden[h].b[i] += gi.hidden[h].b[i];
    }
    for (std::size_t i = 0; i < acc.mu_head.w.size(); ++i) acc.mu_head.w[i] += gi.mu_head.w[i];
    for (std::size_t i = 0; i < acc.mu_head.b.size(); ++i) acc.mu_head.b[i] += gi.mu_head.b[i];
    for (std::size_t i = 0; i < acc.sigma_head.w.size(); ++i) acc.sigma_head.w[i] += gi.sigma_head.w[i];
    for (std::size_t i = 0; i < acc.sigma_head.b.size(); ++i) acc.sigma_head.b[i] += gi.sigma_head.b[i];
    for (std::size_t i = 0; i < acc.alpha_head.w.size(); ++i) acc.alpha_head.w[i] += gi.alpha_head.w[i];
    for (std::size_t i = 0; i < acc.alpha_head.b.size(); ++i) acc.alpha_head.b[i] += gi.alpha_head.b[i];
  }
  acc.scale(1.0 / double(batch));

  CHECK(lb == doctest::Approx(lsum / double(batch)).epsilon(1e-12));
  const auto fb = flat_grads(gb), fm = flat_grads(acc);
  for (std::size_t i = 0; i < fb.size(); ++i)
    CHECK(fb[i] == doctest::Approx(fm[i]).epsilon(1e-12));
}

TEST_CASE("checkpoint round-trip preserves every parameter") {
  const MdnConfig cfg = toy_config();
  const NetworkParams p = NetworkParams::init(cfg, 9);
  const std::string path = (std::filesystem::temp_directory_path() / "ckpt_rt.bin").string();
  p.save(path);
  const NetworkParams q = NetworkParams::load(path);
  CHECK(q.cfg == cfg);
  bool equal = true;
  REQUIRE(q.hidden.size() == p.hidden.size());
  for (std::size_t h = 0; h < p.hidden.size(); ++h) {
    equal = equal && q.hidden[h].w == p.hidden[h].w && q.hidden[h].b == p.hidden[h].b;
  }
  equal = equal && q.mu_head.w == p.mu_head.w && q.mu_head.b == p.mu_head.b;
  equal = equal && q.sigma_head.w == p.sigma_head.w && q.sigma_head.b == p.sigma_head.b;
  equal = equal && q.alpha_head.w == p.alpha_head.w && q.alpha_head.b == p.alpha_head.b;
  CHECK(equal);
  std::filesystem::remove(path);

  CHECK_THROWS(NetworkParams::load(path + ".missing"));
}
