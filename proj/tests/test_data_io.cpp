#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "sfbd/data_io.hpp"
#include "sfbd/dataset.hpp"
#include "sfbd/distributions.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"
#include "test_util.hpp"

using namespace sfbd;

TEST_SUITE("data_io") {

TEST_CASE("stream seeds depend on seed, label and index only") {
  CHECK(stream_seed(1, "a", 0) == stream_seed(1, "a", 0));
  CHECK(stream_seed(1, "a", 0) != stream_seed(2, "a", 0));
  CHECK(stream_seed(1, "a", 0) != stream_seed(1, "b", 0));
  CHECK(stream_seed(1, "a", 0) != stream_seed(1, "a", 1));
  Stream a(3, "x", 4), b(3, "x", 4);
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
  // FNV-1a 64 reference values.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("empty gaussian sample") {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
  const Dataset ds = sample_distribution(DistributionSpec::gaussian(m, Eigen::MatrixXd::Identity(2, 2)), 0, 1);
  CHECK(ds.empty());
  CHECK(ds.size() == 0);
  CHECK(ds.dim == 2);
}

TEST_CASE("two-component mixture moments") {
  GaussianComponent a{Eigen::VectorXd::Constant(1, -3.0), Eigen::MatrixXd::Identity(1, 1)};
  GaussianComponent b{Eigen::VectorXd::Constant(1, 3.0), Eigen::MatrixXd::Identity(1, 1)};
  const auto spec = DistributionSpec::mixture_of({0.5, 0.5}, {a, b});
  const Dataset ds = sample_distribution(spec, 100000, 21);
  const double mean = sample_mean(ds)(0);
  const double var = sample_covariance(ds)(0, 0);
  CHECK(std::abs(mean) <= 0.04);
  CHECK(std::abs(var - 10.0) <= 0.2);
}

TEST_CASE("ring of eight: per-mode counts") {
  const auto spec = DistributionSpec::ring(8, 4.0, 0.2);
  const std::size_t n = 80000;
  const Dataset ds = sample_distribution(spec, n, 5);
  const auto centres = spec.ring_centres();
  std::vector<std::size_t> count(8, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d x(ds.row(i)[0], ds.row(i)[1]);
    std::size_t best = 0;
    for (std::size_t k = 1; k < 8; ++k)
      if ((x - centres[k]).norm() < (x - centres[best]).norm()) best = k;
    ++count[best];
  }
  const double expect = n / 8.0, sd = std::sqrt(n * (1.0 / 8) * (7.0 / 8));
  for (std::size_t c : count) CHECK(std::abs(static_cast<double>(c) - expect) <= 3 * sd);
}

TEST_CASE("sampling is a pure function of spec, n and seed") {
  const auto spec = DistributionSpec::moons(0.1);
  CHECK(sample_distribution(spec, 300, 9).points == sample_distribution(spec, 300, 9).points);
  CHECK(sample_distribution(spec, 300, 9).points != sample_distribution(spec, 300, 10).points);
  // Point i does not depend on n.
  const Dataset a = sample_distribution(spec, 10, 9), b = sample_distribution(spec, 20, 9);
  CHECK(std::equal(a.points.begin(), a.points.end(), b.points.begin()));
}

TEST_CASE("invalid specs name the offending field") {
  GaussianComponent a{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
  auto check_field = [](const DistributionSpec& s, const std::string& field) {
    try {
      s.validate();
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.field().find(field) != std::string::npos);
    }
  };
  check_field(DistributionSpec::mixture_of({0.3, 0.3}, {a, a}), "weights");
  check_field(DistributionSpec::ring(8, 4.0, -1.0), "width");
  check_field(DistributionSpec::ring(8, 4.0, 0.2, {9}), "mode_subset");
  GaussianComponent bad{Eigen::VectorXd::Zero(1), -Eigen::MatrixXd::Identity(1, 1)};
  check_field(DistributionSpec::gaussian(bad.mean, bad.cov), "cov");
  CHECK_THROWS_AS(sample_distribution(DistributionSpec::ring(0, 4.0, 0.2), 5, 1), ValidationError);
}

TEST_CASE("split_clean_ratio") {
  const Dataset all = sample_distribution(DistributionSpec::standard_normal(1), 50000, 2);
  SUBCASE("ratio 0.04 of 50000") {
    const auto [a, b] = split_clean_ratio(all, 0.04, 7);
    CHECK(a.size() == 2000);
    CHECK(b.size() == 48000);
    std::multiset<double> u(a.points.begin(), a.points.end());
    u.insert(b.points.begin(), b.points.end());
    CHECK(u == std::multiset<double>(all.points.begin(), all.points.end()));
  }
  SUBCASE("ratio 1") {
    const auto [a, b] = split_clean_ratio(all, 1.0, 7);
    CHECK(a.size() == all.size());
    CHECK(b.empty());
  }
  SUBCASE("same seed, same split") {
    CHECK(split_clean_ratio(all, 0.1, 3).first.points == split_clean_ratio(all, 0.1, 3).first.points);
  }
  SUBCASE("out of range") {
    CHECK_THROWS_AS(split_clean_ratio(all, 0.0, 1), DomainError);
    CHECK_THROWS_AS(split_clean_ratio(all, 1.5, 1), DomainError);
    CHECK_THROWS_AS(split_clean_ratio(subset(all, std::vector<std::size_t>{0}), 0.1, 1), DomainError);
  }
}

TEST_CASE("dataset helpers") {
  Dataset a(2, {1, 2, 3, 4}, DatasetTag::clean, "gauss|x");
  Dataset b(2, {5, 6}, DatasetTag::noisy, "other");
  CHECK(a.source() == "gauss");
  const Dataset c = concat(a, b);
  CHECK(c.size() == 3);
  CHECK(c.tag == DatasetTag::clean);
  CHECK(c.points == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(concat(a, Dataset(1, {1}, DatasetTag::clean)), ShapeError);
  CHECK_THROWS_AS(Dataset(2, {1, 2, 3}, DatasetTag::clean).validate(), ShapeError);
  CHECK_THROWS_AS(Dataset(1, {1, std::nan("")}, DatasetTag::clean).validate(), NumericError);
  CHECK_THROWS_AS(sample_covariance(Dataset(1, {1}, DatasetTag::clean)), DomainError);
  CHECK(parse_tag("denoised") == DatasetTag::denoised);
  CHECK_THROWS_AS(parse_tag("blurry"), ValidationError);
}

TEST_CASE("save and load round trip") {
  const auto dir = testutil::scratch("data_io");
  SUBCASE("empty dataset") {
    Dataset e(3, {}, DatasetTag::denoised, "empty set", {1, 2});
    save_dataset(e, dir / "e.f64");
    const Dataset r = load_dataset(dir / "e.f64");
    CHECK(r.dim == 3);
    CHECK(r.empty());
    CHECK(r.tag == DatasetTag::denoised);
    CHECK(r.origin == "empty set");
    CHECK(r.lineage == std::vector<std::uint64_t>{1, 2});
  }
  SUBCASE("10^4 x 2 bit-identical") {
    std::vector<double> pts(20000);
    Stream rng(1, "rt", 0);
    for (double& v : pts) v = rng.normal() * 1e3;
    pts[0] = -0.0;
    pts[1] = 5e-324;
    Dataset d(2, pts, DatasetTag::noisy, "a=b\tc|d%e\nf", {~0ULL});
    save_dataset(d, dir / "d.f64");
    const Dataset r = load_dataset(dir / "d.f64");
    CHECK(std::memcmp(r.points.data(), d.points.data(), pts.size() * 8) == 0);
    CHECK(r.origin == d.origin);
    CHECK(r.lineage == d.lineage);
  }
  SUBCASE("corrupted payload byte") {
    Dataset d(1, {1.0, 2.0, 3.0}, DatasetTag::clean, "x");
    save_dataset(d, dir / "c.f64");
    std::string s = testutil::slurp(dir / "c.f64");
    s[s.size() - 12] ^= 0x01;
    testutil::spit(dir / "c.f64", s);
    CHECK_THROWS_AS(load_dataset(dir / "c.f64"), ChecksumMismatchError);
  }
  SUBCASE("truncated payload") {
    Dataset d(1, {1.0, 2.0, 3.0}, DatasetTag::clean, "x");
    save_dataset(d, dir / "t.f64");
    std::string s = testutil::slurp(dir / "t.f64");
    testutil::spit(dir / "t.f64", s.substr(0, s.size() - 9));
    CHECK_THROWS_AS(load_dataset(dir / "t.f64"), TruncatedPayloadError);
  }
  SUBCASE("malformed header") {
    testutil::spit(dir / "m.f64", "NOTSFBD");
    CHECK_THROWS_AS(load_dataset(dir / "m.f64"), MalformedHeaderError);
    Dataset d(1, {1.0}, DatasetTag::clean, "x");
    save_dataset(d, dir / "h.f64");
    std::string s = testutil::slurp(dir / "h.f64");
    s.replace(s.find("tag=clean"), 9, "tag=dirty");
    testutil::spit(dir / "h.f64", s);
    CHECK_THROWS_AS(load_dataset(dir / "h.f64"), MalformedHeaderError);
  }
}

TEST_CASE("csv export and number formatting") {
  const auto dir = testutil::scratch("csv");
  Dataset d(2, {0.1, -2.0, 1e-300, 3.0}, DatasetTag::clean);
  export_csv(d, dir / "d.csv");
  CHECK(testutil::slurp(dir / "d.csv") == "x1,x2\n0.1,-2\n1e-300,3\n");
  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK(percent_decode(percent_encode("a b\t%\n=")) == "a b\t%\n=");
  CHECK_THROWS_AS(percent_decode("%G1"), MalformedHeaderError);
}

}
