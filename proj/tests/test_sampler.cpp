#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "sfbd/denoiser.hpp"
#include "sfbd/distributions.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/net.hpp"
#include "sfbd/rng.hpp"
#include "sfbd/sampler.hpp"

using namespace sfbd;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One-sample KS statistic of `v` against N(mean, var).
double ks_normal(std::vector<double> v, double mean, double var) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = normal_cdf((v[i] - mean) / std::sqrt(var));
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

std::pair<double, double> moments(const std::vector<double>& v) {
  double s = 0, q = 0;
  for (double x : v) {
    s += x;
    q += x * x;
  }
  const double n = static_cast<double>(v.size());
  return {s / n, (q - s * s / n) / (n - 1)};
}

class NanDenoiser : public Denoiser {
 public:
  std::size_t dim() const override { return 1; }
  void denoise_batch(const Eigen::MatrixXd& x, double, Eigen::MatrixXd& out) const override {
    out = Eigen::MatrixXd::Constant(1, x.cols(), std::numeric_limits<double>::quiet_NaN());
  }
};

SolverConfig backward_from(double zeta, SolverMethod m, std::size_t steps) {
  SolverConfig c;
  c.method = m;
  c.steps = steps;
  c.t_start = zeta;
  return c;
}

const GaussianDenoiser kStdNormal(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("model score examples") {
  const NoiseSchedule sched;
  const std::vector<double> x{2.0};
  CHECK(model_score(IdentityDenoiser(1), x, 0.7, sched)[0] == 0.0);
  // Score of N(0, 1 + 1) at 2.
  CHECK(model_score(kStdNormal, x, 1.0, sched)[0] == doctest::Approx(-1.0).epsilon(1e-14));
  const ConstantDenoiser c(Eigen::VectorXd::Constant(1, 0.5));
  CHECK(model_score(c, x, 0.5, sched)[0] == doctest::Approx((0.5 - 2.0) / 0.25).epsilon(1e-14));
  CHECK_THROWS_AS(model_score(kStdNormal, x, 0.0, sched), DomainError);
  CHECK_THROWS_AS(model_score(kStdNormal, std::vector<double>{1, 2}, 1.0, sched), ShapeError);
}

TEST_CASE("time grid") {
  const NoiseSchedule sched;
  SolverConfig c = backward_from(0.59, SolverMethod::heun2, 18);
  const auto g = time_grid(c, sched);
  REQUIRE(g.size() == 19);
  CHECK(g.front() == 0.59);
  CHECK(g.back() == kTimeFloor);
  // sigma_i = (a + i/N (b - a))^rho with a, b the rho-th roots of the end sigmas.
  const double a = std::pow(0.59, 1 / 7.0), b = std::pow(kTimeFloor, 1 / 7.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g[i] == doctest::Approx(std::pow(a + i / 18.0 * (b - a), 7.0)).epsilon(1e-12));
    if (i) CHECK(g[i] < g[i - 1]);
  }
  // Nesting: every fourth node of the 72-step grid.
  c.steps = 72;
  const auto f = time_grid(c, sched);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(f[4 * i] == doctest::Approx(g[i]).epsilon(1e-13));
  c.t_start = 0.0;
  CHECK_NOTHROW(c.validate());
  CHECK(time_grid(c, sched) == std::vector<double>{0.0});
  c.t_end = 0.3;
  c.t_start = 0.2;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.steps = 0;
  c.t_start = 1;
  c.t_end = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("frozen dynamics leave the state unchanged") {
  const NoiseSchedule sched;
  SolverConfig c = backward_from(1.0, SolverMethod::heun2, 20);
  c.t_end = 0.1;
  Eigen::MatrixXd x(1, 3);
  x << -1.0, 0.5, 3.0;
  const Eigen::MatrixXd x0 = x;
  solve_backward_batch(kStdNormal, x, c, FrozenDynamics{}, sched, 1, 0);
  CHECK(x == x0);
}

TEST_CASE("exact Gaussian score preserves the marginal") {
  const NoiseSchedule sched;
  const CorruptionSpec spec = corruption_for_sigma(sched, 0.2);
  const Dataset clean = sample_distribution(DistributionSpec::standard_normal(1), 10000, 1);
  const Dataset noisy = corrupt_dataset(clean, spec, 2);
  for (auto [m, steps] : {std::pair{SolverMethod::heun2, std::size_t{64}},
                          std::pair{SolverMethod::heun2, std::size_t{18}},
                          std::pair{SolverMethod::euler_maruyama, std::size_t{256}}}) {
    CAPTURE(static_cast<int>(m));
    CAPTURE(steps);
    const Dataset out = denoise_dataset(kStdNormal, noisy, spec, backward_from(0.2, m, steps), sched, 3);
    CHECK(out.tag == DatasetTag::denoised);
    const auto [mean, var] = moments(out.points);
    CHECK(std::abs(mean) <= 0.026);
    CHECK(var >= 0.97);
    CHECK(var <= 1.03);
    CHECK(ks_normal(out.points, 0, 1) < 1.628 / std::sqrt(10000.0));
  }
}

TEST_CASE("identity denoiser adds the forward variance again") {
  // Zero score leaves pure Brownian motion, whose variance over [0, zeta] is sigma_zeta^2.
  const NoiseSchedule sched;
  const CorruptionSpec spec = corruption_for_sigma(sched, 0.2);
  const Dataset noisy = corrupt_dataset(
      sample_distribution(DistributionSpec::standard_normal(1), 20000, 4), spec, 5);
  const Dataset out = denoise_dataset(IdentityDenoiser(1), noisy, spec,
                                      backward_from(0.2, SolverMethod::heun2, 18), sched, 6);
  const auto [m_in, v_in] = moments(noisy.points);
  const auto [m_out, v_out] = moments(out.points);
  CHECK(std::abs(m_out - m_in) <= 0.01);
  CHECK(v_out - v_in == doctest::Approx(0.04).epsilon(0.15));
}

TEST_CASE("zero corruption returns the input") {
  const NoiseSchedule sched;
  const CorruptionSpec spec = corruption_for_sigma(sched, 0.0);
  NetTopology t;
  t.hidden = {8};
  t.fourier_pairs = 2;
  DenoiserNet net = DenoiserNet::initialized(t, sched, 1);
  for (double& p : net.params()) p += 0.5;
  const Dataset clean = sample_distribution(DistributionSpec::standard_normal(1), 100, 1);
  const Dataset noisy = corrupt_dataset(clean, spec, 2);
  SolverConfig c = backward_from(0.0, SolverMethod::heun2, 1);
  const Dataset out = denoise_dataset(net, noisy, spec, c, sched, 3);
  CHECK(out.points == noisy.points);
}

TEST_CASE("solver order with common random numbers") {
  const NoiseSchedule sched;
  const ScheduleDynamics dyn(sched);
  const std::size_t fine = 4096, batch = 2000;
  SolverConfig c = backward_from(0.2, SolverMethod::heun2, fine);
  const auto ref_grid = time_grid(c, sched);
  Eigen::MatrixXd start(1, batch);
  Stream rng(11, "start", 0);
  for (Eigen::Index j = 0; j < start.cols(); ++j) start(0, j) = std::sqrt(1.04) * rng.normal();
  std::vector<Eigen::MatrixXd> inc(fine, Eigen::MatrixXd(1, batch));
  for (std::size_t k = 0; k < fine; ++k) {
    const double sd = std::sqrt(dyn.increment_variance(ref_grid[k], ref_grid[k + 1]));
    Stream r(11, "inc", k);
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(batch); ++j) inc[k](0, j) = sd * r.normal();
  }
  auto run = [&](std::size_t steps, SolverMethod m) {
    const std::size_t stride = fine / steps;
    std::vector<double> grid;
    std::vector<Eigen::MatrixXd> coarse(steps, Eigen::MatrixXd::Zero(1, batch));
    for (std::size_t k = 0; k <= steps; ++k) grid.push_back(ref_grid[k * stride]);
    for (std::size_t k = 0; k < fine; ++k) coarse[k / stride] += inc[k];
    Eigen::MatrixXd x = start;
    solve_with_increments(kStdNormal, x, grid, dyn, m, coarse);
    return x;
  };
  const Eigen::MatrixXd ref = run(fine, SolverMethod::heun2);
  auto err = [&](std::size_t steps, SolverMethod m) {
    return std::sqrt((run(steps, m) - ref).squaredNorm() / batch);
  };
  const std::vector<std::size_t> steps{8, 16, 32, 64};
  std::vector<double> eh, ee;
  for (std::size_t s : steps) {
    eh.push_back(err(s, SolverMethod::heun2));
    ee.push_back(err(s, SolverMethod::euler_maruyama));
  }
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    const double re = ee[i] / ee[i + 1], rh = eh[i] / eh[i + 1];
    MESSAGE("steps " << steps[i] << ": euler ratio " << re << ", heun ratio " << rh);
    CHECK(re >= 1.5);
    CHECK(re <= 2.8);
    CHECK(eh[i] <= ee[i]);
  }
}

TEST_CASE("non-finite state reports the step") {
  const NoiseSchedule sched;
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 2);
  try {
    solve_backward_batch(NanDenoiser{}, x, backward_from(0.5, SolverMethod::euler_maruyama, 4),
                         ScheduleDynamics(sched), sched, 1, 0);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.index() == 0);
  }
}

TEST_CASE("denoise_dataset preconditions") {
  const NoiseSchedule sched;
  const CorruptionSpec spec = corruption_for_sigma(sched, 0.2);
  const Dataset clean = sample_distribution(DistributionSpec::standard_normal(1), 10, 1);
  const Dataset noisy = corrupt_dataset(clean, spec, 2);
  const SolverConfig c = backward_from(0.2, SolverMethod::heun2, 8);
  CHECK_THROWS_AS(denoise_dataset(kStdNormal, clean, spec, c, sched, 1), DomainError);
  CHECK_THROWS_AS(denoise_dataset(kStdNormal, noisy, spec, backward_from(0.3, SolverMethod::heun2, 8), sched, 1), DomainError);
  CHECK_THROWS_AS(denoise_dataset(IdentityDenoiser(2), noisy, spec, c, sched, 1), ShapeError);
}

TEST_CASE("parallel and serial backward sampling agree bitwise") {
  const NoiseSchedule sched;
  const CorruptionSpec spec = corruption_for_sigma(sched, 0.59);
  const auto mix = DistributionSpec::ring(8, 1.0, 0.1);
  const Dataset noisy = corrupt_dataset(sample_distribution(mix, 1000, 1), spec, 2);
  const MixtureDenoiser den(*mix.mixture(), sched);
  const SolverConfig c = backward_from(0.59, SolverMethod::heun2, 18);
  const Dataset a = denoise_dataset(den, noisy, spec, c, sched, 4);
  const Dataset b = denoise_dataset_serial(den, noisy, spec, c, sched, 4);
  CHECK(a.points == b.points);
  CHECK(denoise_dataset(den, noisy, spec, c, sched, 4).points == a.points);
  // Point i depends only on its own stream.
  const Dataset head = denoise_dataset(den, subset(noisy, std::vector<std::size_t>{0, 1, 2}), spec, c, sched, 4);
  CHECK(std::equal(head.points.begin(), head.points.end(), a.points.begin()));
}

}
