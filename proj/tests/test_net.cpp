#include <cmath>
#include <vector>

#include "doctest.h"
#include "sfbd/adam.hpp"
#include "sfbd/distributions.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/losses.hpp"
#include "sfbd/net.hpp"
#include "sfbd/rng.hpp"
#include "sfbd/train.hpp"
#include "test_util.hpp"

using namespace sfbd;

namespace {

NetTopology small(std::size_t d = 1, std::vector<std::size_t> hidden = {16, 16}) {
  NetTopology t;
  t.input_dim = d;
  t.hidden = std::move(hidden);
  t.fourier_pairs = 4;
  return t;
}

DenoiserNet random_net(const NetTopology& t, std::uint64_t seed, double scale = 0.3) {
  DenoiserNet net = DenoiserNet::initialized(t, NoiseSchedule{}, seed);
  Stream rng(seed, "perturb", 0);
  for (double& p : net.params()) p += scale * rng.normal();
  return net;
}

// Loss with no denoiser queries and an arbitrary parameter term.
class ParamOnly : public LossEvaluator {
 public:
  explicit ParamOnly(bool quadratic) : quadratic_(quadratic) {}
  std::size_t groups() const override { return 0; }
  std::size_t queries(std::size_t) const override { return 0; }
  void fill(std::size_t, Eigen::Ref<Eigen::MatrixXd>, Eigen::Ref<Eigen::VectorXd>) const override {}
  double loss(std::size_t, const Eigen::Ref<const Eigen::MatrixXd>&,
              Eigen::Ref<Eigen::MatrixXd>) const override {
    return 0.0;
  }
  double parameter_term(std::span<const double> p, std::span<double> g) const override {
    if (!quadratic_) return 3.0;
    double v = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      v += 0.5 * p[i] * p[i];
      g[i] += p[i];
    }
    return v;
  }

 private:
  bool quadratic_;
};

}  // namespace

TEST_SUITE("net") {

TEST_CASE("parameter count matches topology") {
  const NetTopology t = small(2, {16, 64, 8});
  // input 2 + 8 embedding features
  const std::size_t expect = (10 + 1) * 16 + (16 + 1) * 64 + (64 + 1) * 8 + (8 + 1) * 2;
  CHECK(t.parameter_count() == expect);
  CHECK(DenoiserNet(t, NoiseSchedule{}).params().size() == expect);
  NetTopology bad = t;
  bad.hidden = {16, 0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("identity at t = 0 holds exactly for any parameters") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const DenoiserNet net = random_net(small(2), s, 2.0);
    Stream rng(s, "x", 0);
    const std::vector<double> x{3 * rng.normal(), 3 * rng.normal()};
    CHECK(net.denoise(x, 0.0) == x);
  }
}

TEST_CASE("zero final layer gives x + sigma_t * bias") {
  DenoiserNet net = DenoiserNet::initialized(small(2), NoiseSchedule{}, 3);
  const std::vector<double> x{0.5, -1.5};
  CHECK(net.denoise(x, 0.7) == x);
  auto p = net.params();
  p[p.size() - 2] = 0.25;
  p[p.size() - 1] = -2.0;
  const std::vector<double> y = net.denoise(x, 0.7);
  CHECK(y[0] == doctest::Approx(0.5 + 0.7 * 0.25).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(-1.5 - 0.7 * 2.0).epsilon(1e-14));
}

TEST_CASE("shape errors") {
  const DenoiserNet net = DenoiserNet::initialized(small(2), NoiseSchedule{}, 1);
  CHECK_THROWS_AS(net.denoise(std::vector<double>{1.0}, 0.5), ShapeError);
  Eigen::MatrixXd out;
  CHECK_THROWS_AS(net.denoise_batch(Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Zero(2), out),
                  ShapeError);
  DenoiserNet m = net;
  CHECK_THROWS_AS(m.set_params(std::vector<double>(3)), ShapeError);
}

TEST_CASE("denoise is continuous in t") {
  const DenoiserNet net = random_net(small(1), 9);
  Stream rng(9, "cont", 0);
  for (int i = 0; i < 100; ++i) {
    const double t = 0.01 + 10 * rng.uniform();
    const std::vector<double> x{4 * rng.normal()};
    CHECK(std::abs(net.denoise(x, t)[0] - net.denoise(x, t + 1e-7)[0]) <= 1e-4);
  }
}

TEST_CASE("gradient of constant and quadratic probes") {
  const DenoiserNet net = random_net(small(1), 4);
  const LossGrad c = grad_params(net, ParamOnly(false));
  CHECK(c.value == 3.0);
  for (double g : c.grad) CHECK(g == 0.0);
  const LossGrad q = grad_params(net, ParamOnly(true));
  REQUIRE(q.grad.size() == net.params().size());
  for (std::size_t i = 0; i < q.grad.size(); ++i) CHECK(q.grad[i] == net.params()[i]);
}

TEST_CASE("gradient matches central differences across topologies") {
  const NoiseSchedule sched;
  const Dataset batch = sample_distribution(DistributionSpec::standard_normal(2), 24, 5);
  for (std::size_t layers = 1; layers <= 3; ++layers) {
    for (std::size_t width : {16u, 64u}) {
      CAPTURE(layers);
      CAPTURE(width);
      DenoiserNet net = random_net(small(2, std::vector<std::size_t>(layers, width)), layers * 100 + width);
      const DenoisingEvaluator ev(batch, TimeSampler{}, sched, 77);
      const LossGrad lg = grad_params(net, ev);
      CHECK(lg.value == doctest::Approx(loss_value(net, ev)).epsilon(1e-12));
      Stream pick(layers, "coords", width);
      const std::size_t np = net.params().size();
      int bad = 0;
      for (int k = 0; k < 50; ++k) {
        const std::size_t i = pick.below(np);
        const double keep = net.params()[i], h = 1e-5;
        net.params()[i] = keep + h;
        const double up = loss_value(net, ev);
        net.params()[i] = keep - h;
        const double down = loss_value(net, ev);
        net.params()[i] = keep;
        const double fd = (up - down) / (2 * h);
        // Entries below 1e-7 are dominated by rounding in the difference quotient.
        const double rel = std::abs(lg.grad[i] - fd) / std::max({std::abs(fd), std::abs(lg.grad[i]), 1e-7});
        bad += rel > 1e-4;
      }
      CHECK(bad == 0);
    }
  }
}

TEST_CASE("parallel and serial gradients agree bitwise") {
  const DenoiserNet net = random_net(small(2, {32, 32}), 12);
  const Dataset batch = sample_distribution(DistributionSpec::standard_normal(2), 500, 6);
  const DenoisingEvaluator ev(batch, TimeSampler{}, NoiseSchedule{}, 8);
  const LossGrad a = grad_params(net, ev), b = grad_params_serial(net, ev);
  CHECK(a.value == b.value);
  CHECK(a.grad == b.grad);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = testutil::scratch("net");
  NetTopology t = small(2, {8, 4});
  t.data_scale = 0.7;
  const DenoiserNet net = random_net(t, 2);
  net.save(dir / "n.ckpt");
  const DenoiserNet r = DenoiserNet::load(dir / "n.ckpt");
  CHECK(r.topology().hidden == t.hidden);
  CHECK(r.topology().data_scale == 0.7);
  CHECK(std::equal(r.params().begin(), r.params().end(), net.params().begin()));
  std::string s = testutil::slurp(dir / "n.ckpt");
  testutil::spit(dir / "t.ckpt", s.substr(0, s.size() - 3));
  CHECK_THROWS_AS(DenoiserNet::load(dir / "t.ckpt"), TruncatedPayloadError);
  testutil::spit(dir / "x.ckpt", s + "x");
  CHECK_THROWS_AS(DenoiserNet::load(dir / "x.ckpt"), MalformedHeaderError);
  testutil::spit(dir / "m.ckpt", "hello\n");
  CHECK_THROWS_AS(DenoiserNet::load(dir / "m.ckpt"), MalformedHeaderError);
}

TEST_CASE("trained net approximates the Gaussian posterior mean") {
  // p0 = N(0,1), sigma_t = 1: E[x0 | x_t = 2] = 2 / 2.
  NetTopology t = small(1, {32, 32});
  const Dataset data = sample_distribution(DistributionSpec::standard_normal(1), 10000, 31);
  TrainConfig cfg;
  cfg.steps = 3000;
  cfg.batch_size = 256;
  cfg.lr = 3e-3;
  cfg.sampler.t_min = 0.05;
  cfg.sampler.t_max = 5.0;
  const DenoiserNet net = pretrain(data, t, NoiseSchedule{}, cfg, 32);
  CHECK(net.denoise(std::vector<double>{2.0}, 1.0)[0] == doctest::Approx(1.0).epsilon(0.05));
}

}

TEST_SUITE("adam") {

TEST_CASE("zero gradient leaves parameters unchanged") {
  const std::vector<double> p{1.0, -2.0, 3.5};
  const auto [st, q] = adam_step(AdamState::for_size(3), p, std::vector<double>(3, 0.0));
  CHECK(q == p);
  CHECK(st.step == 1);
}

TEST_CASE("minimizes x^2") {
  AdamState st = AdamState::for_size(1, 0.1);
  std::vector<double> x{1.0};
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> g{2 * x[0]};
    std::tie(st, x) = adam_step(st, x, g);
  }
  CHECK(std::abs(x[0]) <= 1e-3);
}

TEST_CASE("first step has size lr") {
  // Bias correction: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  const auto [st, q] = adam_step(AdamState::for_size(2, 0.01), {0.0, 0.0}, std::vector<double>{4.0, -0.5});
  CHECK(q[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(q[1] == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("deterministic trajectories") {
  auto run = [] {
    AdamState st = AdamState::for_size(4, 0.05);
    std::vector<double> x{1, 2, 3, 4};
    Stream rng(5, "adam", 0);
    for (int i = 0; i < 50; ++i) {
      std::vector<double> g(4);
      for (std::size_t j = 0; j < 4; ++j) g[j] = x[j] + rng.normal();
      std::tie(st, x) = adam_step(st, x, g);
    }
    return x;
  };
  CHECK(run() == run());
}

TEST_CASE("errors") {
  std::vector<double> g{0.0, std::nan(""), 1.0};
  try {
    adam_step(AdamState::for_size(3), {1, 2, 3}, g);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.index() == 1);
  }
  CHECK_THROWS_AS(adam_step(AdamState::for_size(3), {1, 2}, std::vector<double>{1, 2}), ShapeError);
}

}
