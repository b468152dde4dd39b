#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "sfbd/deconv_kde.hpp"
#include "sfbd/distributions.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"
#include "test_util.hpp"

using namespace sfbd;
using std::numbers::pi;

namespace {

// Kernel at sigma = 0 in closed form: (B / 2pi) * 96 j_3(Bu) / (Bu)^3.
double kernel_closed(double B, double u) {
  const double x = B * u;
  double r;
  if (std::abs(x) < 1e-2) {
    // j_3(x)/x^3 = 1/105 - x^2/1890 + x^4/83160 - ...
    const double x2 = x * x;
    r = 1.0 / 105 - x2 / 1890 + x2 * x2 / 83160;
  } else {
    r = std::sph_bessel(3, std::abs(x)) / (x * x * x) * (x < 0 ? -1 : 1);
  }
  return B / (2 * pi) * 96 * r;
}

double phi(double x, double var) { return std::exp(-x * x / (2 * var)) / std::sqrt(2 * pi * var); }

MixtureModel normal_model(double mean, double var) {
  return *DistributionSpec::gaussian(Eigen::VectorXd::Constant(1, mean),
                                     Eigen::MatrixXd::Constant(1, 1, var))
              .mixture();
}

std::vector<double> noisy_normal(std::size_t n, double sigma, std::uint64_t seed) {
  std::vector<double> y(n);
  Stream rng(seed, "noisy", 0);
  for (double& v : y) v = rng.normal() + sigma * rng.normal();
  return y;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& f) {
  double s = 0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
  return s;
}

}  // namespace

TEST_SUITE("deconv") {

TEST_CASE("kernel spec") {
  DeconvKernelSpec s;
  CHECK(s.cf(0) == 1.0);
  CHECK(s.cf(0.3) == s.cf(-0.3));
  CHECK(s.cf(0.25) == doctest::Approx(std::pow(1 - 0.25, 3)));
  CHECK(s.cf(0.6) == 0.0);
  CHECK(s.kernel_mu2() == doctest::Approx(6 / 0.25));
  // int K^2 = (1 / 2pi) int phi_K^2 = (B / 2pi) * 2^13 (6!)^2 / 13!.
  const double beta = std::pow(2.0, 13) * 518400.0 / 6227020800.0;
  CHECK(s.kernel_roughness() == doctest::Approx(0.5 / (2 * pi) * beta).epsilon(1e-10));
  s.cf_support = 1.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.cf_support = 0.5;
  s.quadrature_points = 4096;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("bandwidth rules") {
  DeconvKernelSpec s;
  CHECK(bandwidth(8, 0.2, s) == doctest::Approx(0.1387).epsilon(3e-4));
  CHECK(bandwidth(10000, 0.2, s) == doctest::Approx(0.06591).epsilon(1e-4));
  CHECK_THROWS_AS(bandwidth(2, 0.2, s), DomainError);
  CHECK_THROWS_AS(bandwidth(100, 0.0, s), DomainError);
  s.rule = BandwidthRule::fixed;
  CHECK(bandwidth(100, 0.2, s) == 0.1);
  s.rule = BandwidthRule::normal_reference;
  const double rk = s.kernel_roughness(), mu2 = 6 / 0.25, sd = 1.5;
  const double rf = 3 / (8 * std::sqrt(pi) * std::pow(sd, 5));
  CHECK(bandwidth(5000, 0.0, s, sd) ==
        doctest::Approx(std::pow(rk / (mu2 * mu2 * rf * 5000), 0.2)).epsilon(1e-12));
}

TEST_CASE("kernel quadrature against the closed form at sigma 0") {
  DeconvKernelSpec s;
  for (double B : {0.5, 0.8}) {
    s.cf_support = B;
    const DeconvKernel k(s, 0.0, 1.0, 50);
    for (double u : {0.0, 0.003, 0.5, 1.7, 6.0, 13.3, 40.0, 49.99, 75.0}) {
      CAPTURE(B);
      CAPTURE(u);
      CHECK(k.exact(u) == doctest::Approx(kernel_closed(B, u)).scale(1.0).epsilon(1e-12));
      CHECK(k(u) == doctest::Approx(kernel_closed(B, u)).scale(1.0).epsilon(1e-10));
      CHECK(k(-u) == k(u));
    }
  }
}

TEST_CASE("table interpolation matches direct quadrature") {
  DeconvKernelSpec s;
  const DeconvKernel k(s, 0.2, 0.066, 100);
  Stream rng(1, "u", 0);
  double worst = 0;
  for (int i = 0; i < 2000; ++i) {
    const double u = 120 * rng.uniform();
    worst = std::max(worst, std::abs(k(u) - k.exact(u)));
  }
  CHECK(worst <= 1e-8);
  // Derivative by central differences.
  for (double u : {0.4, 3.0, 17.0}) {
    const double fd = (k.exact(u + 1e-5) - k.exact(u - 1e-5)) / 2e-5;
    CHECK(k.exact_derivative(u) == doctest::Approx(fd).scale(1.0).epsilon(1e-7));
  }
}

TEST_CASE("overflowing kernel asks for a larger bandwidth") {
  DeconvKernelSpec s;
  CHECK_NOTHROW(DeconvKernel(s, 0.2, 0.005, 10));
  CHECK_THROWS_AS(DeconvKernel(s, 0.2, 0.001, 10), NumericError);
}

TEST_CASE("sigma 0 reduces to the ordinary kernel estimate") {
  DeconvKernelSpec s;
  const auto y = noisy_normal(300, 0.0, 2);
  const auto grid = uniform_grid(-5, 5, 401);
  const double lambda = 0.3;
  const DeconvEstimate est = deconv_estimate(y, 0.0, s, grid, lambda);
  double worst = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double ref = 0;
    for (double v : y) ref += kernel_closed(0.5, (grid[i] - v) / lambda);
    ref /= y.size() * lambda;
    worst = std::max(worst, std::abs(est.density[i] - ref));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("one-point estimate is the kernel and integrates to one") {
  DeconvKernelSpec s;
  const auto grid = uniform_grid(-300, 300, 60001);
  const std::vector<double> y{0.0};
  const DeconvEstimate est = deconv_estimate(y, 0.0, s, grid, 1.0);
  CHECK(est.n == 1);
  CHECK(est.bandwidth == 1.0);
  for (std::size_t i = 0; i < grid.size(); i += 997)
    CHECK(est.density[i] == doctest::Approx(kernel_closed(0.5, grid[i])).scale(1.0).epsilon(1e-10));
  CHECK(trapezoid(grid, est.density) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("estimate integrates to one and may go negative") {
  DeconvKernelSpec s;
  const auto y = noisy_normal(10000, 0.2, 3);
  const auto grid = uniform_grid(-8, 8, 1601);
  const DeconvEstimate est = deconv_estimate(y, 0.2, s, grid);
  CHECK(est.bandwidth == doctest::Approx(0.2 / std::sqrt(std::log(1e4))));
  const double mass = trapezoid(grid, est.density);
  CHECK(mass >= 0.98);
  CHECK(mass <= 1.02);
  CHECK(*std::min_element(est.density.begin(), est.density.end()) < 0);
  const DeconvKernel k(s, 0.2, est.bandwidth, 16 / est.bandwidth + 1);
  const DeconvEstimate clipped = deconv_estimate(y, k, grid, true);
  CHECK(*std::min_element(clipped.density.begin(), clipped.density.end()) >= 0);
}

TEST_CASE("linearity in the sample") {
  DeconvKernelSpec s;
  const auto a = noisy_normal(200, 0.2, 4), b = noisy_normal(600, 0.2, 5);
  std::vector<double> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  const auto grid = uniform_grid(-5, 5, 201);
  const DeconvKernel k(s, 0.2, 0.08, 10 / 0.08 + 1);
  const auto pa = deconv_estimate(a, k, grid), pb = deconv_estimate(b, k, grid),
             pab = deconv_estimate(ab, k, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(pab.density[i] ==
          doctest::Approx(0.25 * pa.density[i] + 0.75 * pb.density[i]).scale(1.0).epsilon(1e-12));
}

TEST_CASE("kernel and Fourier routes agree") {
  DeconvKernelSpec s;
  const auto y = noisy_normal(500, 0.2, 6);
  const auto grid = uniform_grid(-4, 4, 161);
  for (double lambda : {0.066, 0.12}) {
    const auto k = deconv_estimate(y, 0.2, s, grid, lambda);
    const auto f = deconv_estimate_fourier(y, 0.2, s, grid, lambda);
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(std::abs(k.density[i] - f.density[i]) <= 1e-6);
  }
}

TEST_CASE("parallel and serial estimates agree bitwise") {
  DeconvKernelSpec s;
  const auto y = noisy_normal(3000, 0.2, 7);
  const auto grid = uniform_grid(-6, 6, 501);
  const DeconvKernel k(s, 0.2, 0.07, 12 / 0.07 + 1);
  CHECK(deconv_estimate(y, k, grid).density == deconv_estimate_serial(y, k, grid).density);
}

TEST_CASE("integrated squared error") {
  const MixtureModel truth = normal_model(0.1, 1);
  const auto [lo, hi] = mixture_support(truth);
  CHECK(hi - 0.1 == doctest::Approx(4.8916).epsilon(1e-4));
  CHECK(0.1 - lo == doctest::Approx(4.8916).epsilon(1e-4));
  DeconvEstimate e;
  e.grid = uniform_grid(-8, 8, 3201);
  for (double x : e.grid) e.density.push_back(mixture_pdf(truth, x));
  CHECK(ise(e, truth) == 0.0);
  for (std::size_t i = 0; i < e.grid.size(); ++i) e.density[i] = phi(e.grid[i], 1);
  // int (phi_0 - phi_0.1)^2 = (1 / sqrt(pi)) (1 - exp(-0.1^2 / 4)).
  const double exact = (1 - std::exp(-0.0025)) / std::sqrt(pi);
  CHECK(exact == doctest::Approx(0.001409).epsilon(1e-3));
  CHECK(ise(e, truth) == doctest::Approx(exact).epsilon(1e-6));
  DeconvEstimate narrow = e;
  narrow.grid = uniform_grid(-3, 3, 601);
  narrow.density.resize(601);
  CHECK_THROWS_AS(ise(narrow, truth), DomainError);
}

TEST_CASE("Monte-Carlo MISE is deterministic and grows with the noise") {
  DeconvKernelSpec s;
  const auto truth = DistributionSpec::standard_normal(1);
  const auto grid = uniform_grid(-6, 6, 601);
  const MiseResult a = mise_mc(truth, 0.2, 2000, 6, s, grid, 5);
  const MiseResult b = mise_mc(truth, 0.2, 2000, 6, s, grid, 5);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  CHECK(a.bandwidth == doctest::Approx(bandwidth(2000, 0.2, s)));
  CHECK(mise_mc(truth, 0.4, 2000, 6, s, grid, 5).mean > a.mean);
}

TEST_CASE("deconvolution beats the naive KDE at B = 0.8") {
  // Exact MISE of the Gaussian KDE of N(0, 1 + s^2) data against N(0, 1):
  // bias part int (phi_a - phi_1)^2, a = 1 + s^2 + h^2, plus variance part
  // (1/n) (1 / (2 sqrt(pi) h) - 1 / (2 sqrt(pi a))).
  const double n = 10000, s2 = 0.04;
  auto naive_mise = [&](double h) {
    const double a = 1 + s2 + h * h;
    const double bias = 1 / (2 * std::sqrt(pi)) * (1 / std::sqrt(a) + 1 - 2 * std::sqrt(2 / (a + 1)));
    return bias + (1 / (2 * std::sqrt(pi) * h) - 1 / (2 * std::sqrt(pi * a))) / n;
  };
  double best_h = 0.01, best = naive_mise(0.01);
  for (double h = 0.01; h < 1.0; h += 1e-4)
    if (naive_mise(h) < best) best = naive_mise(h), best_h = h;

  DeconvKernelSpec s;
  s.cf_support = 0.8;
  const auto grid = uniform_grid(-6, 6, 1201);
  const MixtureModel truth = normal_model(0, 1);
  double dsum = 0, nsum = 0;
  const int R = 20;
  for (int r = 0; r < R; ++r) {
    const auto y = noisy_normal(10000, 0.2, 100 + r);
    dsum += ise(deconv_estimate(y, 0.2, s, grid), truth);
    nsum += ise(kde_gaussian(y, best_h, grid), truth);
  }
  MESSAGE("deconv MISE " << dsum / R << ", naive KDE MISE " << nsum / R << " (exact " << best
                         << " at h = " << best_h << ")");
  CHECK(nsum / R == doctest::Approx(best).epsilon(0.25));
  CHECK(dsum < nsum);
}

TEST_CASE("rate sweep") {
  DeconvKernelSpec s;
  const auto truth = DistributionSpec::standard_normal(1);
  const auto grid = uniform_grid(-6, 6, 481);
  CHECK_THROWS_AS(rate_sweep(truth, 0.2, {100, 1000}, 2, s, grid, 1), ValidationError);
  CHECK_THROWS_AS(rate_sweep(truth, 0.2, {100, 1000, 1000}, 2, s, grid, 1), ValidationError);
  const RateSweep sw = rate_sweep(truth, 0.2, {300, 3000, 30000}, 4, s, grid, 1);
  REQUIRE(sw.rows.size() == 3);
  CHECK(sw.rows[0].mise_mean > sw.rows[1].mise_mean);
  CHECK(sw.rows[1].mise_mean > sw.rows[2].mise_mean);
  std::vector<double> lx, ly, px;
  for (const RateRow& r : sw.rows) {
    lx.push_back(std::log(std::log(double(r.n))));
    px.push_back(std::log(double(r.n)));
    ly.push_back(std::log(r.mise_mean));
  }
  CHECK(sw.log_exponent == doctest::Approx(-ls_slope(lx, ly)));
  CHECK(sw.poly_exponent == doctest::Approx(-ls_slope(px, ly)));
  CHECK(ls_slope(std::vector<double>{0, 1, 2}, std::vector<double>{1, 3, 5}) == doctest::Approx(2.0));

  const auto dir = testutil::scratch("deconv");
  write_rate_csv(sw, dir / "rate.csv");
  const std::string csv = testutil::slurp(dir / "rate.csv");
  CHECK(csv.rfind("n,mise_mean,mise_stderr,bandwidth\n300,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

}
