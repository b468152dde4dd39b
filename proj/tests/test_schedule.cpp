#include <cmath>
#include <vector>

#include "doctest.h"
#include "sfbd/distributions.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"
#include "sfbd/schedule.hpp"

using namespace sfbd;

TEST_SUITE("schedule") {

TEST_CASE("sigma at boundary and identity points") {
  const NoiseSchedule s;
  CHECK(s.sigma(0.0) == 0.0);
  CHECK(s.sigma(0.2) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.sigma(0.59) == doctest::Approx(0.59).epsilon(1e-15));
  CHECK(s.sigma(s.horizon) == s.sigma_max);
}

TEST_CASE("sigma outside [0, T] is a domain error") {
  const NoiseSchedule s;
  CHECK_THROWS_AS(s.sigma(-1e-9), DomainError);
  CHECK_THROWS_AS(s.sigma(80.0 + 1e-9), DomainError);
  CHECK_THROWS_AS(s.sigma(std::nan("")), DomainError);
}

TEST_CASE("sigma strictly increasing and g2 matches finite differences") {
  const NoiseSchedule s;
  Stream rng(11, "schedule-test", 0);
  const double h = 1e-5;
  for (int i = 0; i < 100; ++i) {
    const double a = h + rng.uniform() * (s.horizon - 2 * h);
    const double b = h + rng.uniform() * (s.horizon - 2 * h);
    if (a != b) CHECK((a < b) == (s.sigma(a) < s.sigma(b)));
    const double fd = (std::pow(s.sigma(a + h), 2) - std::pow(s.sigma(a - h), 2)) / (2 * h);
    CHECK(std::abs(s.g2(a) - fd) <= 1e-6 * std::max(1.0, s.g2(a)));
  }
}

TEST_CASE("schedule validation names the field") {
  NoiseSchedule s;
  s.sigma_max = -1.0;
  try {
    s.validate();
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "schedule.sigma_max");
  }
}

TEST_CASE("forward_sample arithmetic") {
  const NoiseSchedule s;
  const std::vector<double> x0{1.0}, z{2.0};
  CHECK(forward_sample(x0, s, 0.5, z)[0] == 2.0);
  const std::vector<double> x{0.3, -1.7}, n{5.0, -4.0};
  CHECK(forward_sample(x, s, 0.0, n) == x);
  CHECK_THROWS_AS(forward_sample(x0, s, 0.5, n), ShapeError);
}

TEST_CASE("forward_sample variance at sigma 0.2") {
  const NoiseSchedule s;
  const std::size_t n = 100000;
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Stream rng(5, "fwd", i);
    const double z = rng.normal();
    const double x = forward_sample(std::vector<double>{0.0}, s, 0.2, std::vector<double>{z})[0];
    sum += x;
    sq += x * x;
  }
  const double var = (sq - sum * sum / n) / (n - 1);
  CHECK(var >= 0.0392);
  CHECK(var <= 0.0408);
}

TEST_CASE("corruption spec validation") {
  const NoiseSchedule s;
  CHECK_NOTHROW(validate_corruption(s, make_corruption(s, 0.2)));
  CHECK_NOTHROW(validate_corruption(s, CorruptionSpec{0.2, 0.2}));
  CHECK_THROWS_AS(validate_corruption(s, CorruptionSpec{0.2, 0.21}), ValidationError);
  CHECK_THROWS_AS(validate_corruption(s, CorruptionSpec{80.0, 80.0}), ValidationError);
  CHECK_THROWS_AS(make_corruption(s, -0.1), ValidationError);
  const CorruptionSpec c = corruption_for_sigma(s, 0.59);
  CHECK(c.zeta == doctest::Approx(0.59));
}

TEST_CASE("corrupt_dataset with zero noise keeps the points") {
  const Dataset clean = sample_distribution(DistributionSpec::standard_normal(2), 100, 3);
  const Dataset noisy = corrupt_dataset(clean, CorruptionSpec{0.0, 0.0}, 9);
  CHECK(noisy.points == clean.points);
  CHECK(noisy.tag == DatasetTag::noisy);
  CHECK(noisy.source() == clean.source());
}

TEST_CASE("corrupt_dataset variance of N(0,1) at sigma 0.2") {
  // 99% chi-square interval for var = 1.04, n = 1e5, rebuilt from the normal quantile.
  const double n = 100000, v = 1.04, half = 2.5758 * v * std::sqrt(2.0 / (n - 1));
  CHECK(std::abs((v - half) - 1.028) < 5e-4);
  CHECK(std::abs((v + half) - 1.052) < 5e-4);

  // A single draw leaves the interval 1% of the time; check coverage instead.
  const NoiseSchedule s;
  int inside = 0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const Dataset clean = sample_distribution(DistributionSpec::standard_normal(1), 100000,
                                              stream_seed(4, "coverage", r));
    const Dataset noisy =
        corrupt_dataset(clean, make_corruption(s, 0.2), stream_seed(8, "coverage", r));
    double sum = 0, sq = 0;
    for (double y : noisy.points) {
      sum += y;
      sq += y * y;
    }
    const double var = (sq - sum * sum / n) / (n - 1);
    inside += var >= 1.028 && var <= 1.052;
  }
  CHECK(inside >= 95);
}

TEST_CASE("corrupt_dataset rejects non-clean input and is order independent") {
  const Dataset clean = sample_distribution(DistributionSpec::standard_normal(3), 513, 4);
  const CorruptionSpec c{0.2, 0.2};
  const Dataset a = corrupt_dataset(clean, c, 77);
  const Dataset b = corrupt_dataset_serial(clean, c, 77);
  CHECK(a.points == b.points);
  CHECK(a.lineage == b.lineage);
  CHECK_THROWS_AS(corrupt_dataset(a, c, 1), DomainError);
}

}
