#include "sfbd/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "sfbd/data_io.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"

namespace sfbd {
namespace {

std::string vec_text(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s + "]";
}

std::string mat_text(const Eigen::MatrixXd& m) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) s += ';';
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) s += ',';
      s += format_double(m(i, j));
    }
  }
  return s + "]";
}

void validate_component(const GaussianComponent& c, std::size_t dim,
                        const std::string& field) {
  if (static_cast<std::size_t>(c.mean.size()) != dim)
    throw ValidationError(field + ".mean", "dimension mismatch");
  if (c.cov.rows() != c.cov.cols() ||
      static_cast<std::size_t>(c.cov.rows()) != dim)
    throw ValidationError(field + ".cov", "must be a d x d matrix");
  if (!c.mean.allFinite() || !c.cov.allFinite())
    throw ValidationError(field, "non-finite parameter");
  const double scale = std::max(1.0, c.cov.cwiseAbs().maxCoeff());
  if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ValidationError(field + ".cov", "not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
  if (llt.info() != Eigen::Success)
    throw ValidationError(field + ".cov", "not positive definite");
}

}  // namespace

std::size_t DistributionSpec::dim() const {
  switch (family) {
    case Family::gaussian:
    case Family::gaussian_mixture:
      return components.empty() ? 0 : components.front().mean.size();
    case Family::ring_of_gaussians:
    case Family::two_moons:
      return 2;
  }
  return 0;
}

std::string DistributionSpec::id() const {
  std::ostringstream os;
  switch (family) {
    case Family::gaussian:
      os << "gaussian(mean=" << vec_text(components.at(0).mean)
         << ",cov=" << mat_text(components.at(0).cov) << ")";
      break;
    case Family::gaussian_mixture:
      os << "gaussian-mixture(";
      for (std::size_t k = 0; k < components.size(); ++k) {
        if (k) os << ";";
        os << "w=" << format_double(weights[k])
           << ",mean=" << vec_text(components[k].mean)
           << ",cov=" << mat_text(components[k].cov);
      }
      os << ")";
      break;
    case Family::ring_of_gaussians:
      os << "ring(modes=" << modes << ",radius=" << format_double(radius)
         << ",width=" << format_double(width);
      if (!mode_subset.empty()) {
        os << ",subset=[";
        for (std::size_t i = 0; i < mode_subset.size(); ++i)
          os << (i ? "," : "") << mode_subset[i];
        os << "]";
      }
      os << ")";
      break;
    case Family::two_moons:
      os << "two-moons(noise=" << format_double(noise) << ")";
      break;
  }
  return os.str();
}

void DistributionSpec::validate() const {
  switch (family) {
    case Family::gaussian:
      if (components.size() != 1)
        throw ValidationError("components", "gaussian needs one component");
      if (components[0].mean.size() == 0)
        throw ValidationError("mean", "dimension must be positive");
      validate_component(components[0], components[0].mean.size(), "gaussian");
      break;
    case Family::gaussian_mixture: {
      if (components.empty())
        throw ValidationError("components", "mixture needs components");
      if (weights.size() != components.size())
        throw ValidationError("weights", "one weight per component required");
      const std::size_t d = components[0].mean.size();
      if (d == 0) throw ValidationError("mean", "dimension must be positive");
      double total = 0.0;
      for (std::size_t k = 0; k < weights.size(); ++k) {
        if (!(weights[k] > 0.0))
          throw ValidationError("weights[" + std::to_string(k) + "]",
                                "must be positive");
        total += weights[k];
        validate_component(components[k], d,
                           "components[" + std::to_string(k) + "]");
      }
      if (std::abs(total - 1.0) > 1e-12)
        throw ValidationError("weights", "must sum to 1");
      break;
    }
    case Family::ring_of_gaussians:
      if (modes == 0) throw ValidationError("modes", "must be positive");
      if (!(radius >= 0.0) || !std::isfinite(radius))
        throw ValidationError("radius", "must be nonnegative");
      if (!(width > 0.0) || !std::isfinite(width))
        throw ValidationError("width", "must be positive");
      for (std::size_t m : mode_subset)
        if (m >= modes)
          throw ValidationError("mode_subset", "mode index out of range");
      break;
    case Family::two_moons:
      if (!(noise >= 0.0) || !std::isfinite(noise))
        throw ValidationError("noise", "must be nonnegative");
      break;
  }
}

std::vector<Eigen::Vector2d> DistributionSpec::ring_centres() const {
  std::vector<Eigen::Vector2d> c(modes);
  for (std::size_t k = 0; k < modes; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) /
                     static_cast<double>(modes);
    c[k] = Eigen::Vector2d(radius * std::cos(a), radius * std::sin(a));
  }
  return c;
}

std::optional<MixtureModel> DistributionSpec::mixture() const {
  switch (family) {
    case Family::gaussian:
      return MixtureModel{{1.0}, components};
    case Family::gaussian_mixture:
      return MixtureModel{weights, components};
    case Family::ring_of_gaussians: {
      MixtureModel m;
      const auto centres = ring_centres();
      std::vector<std::size_t> active = mode_subset;
      if (active.empty()) {
        active.resize(modes);
        std::iota(active.begin(), active.end(), std::size_t{0});
      }
      for (std::size_t k : active) {
        m.weights.push_back(1.0 / static_cast<double>(active.size()));
        m.components.push_back(
            {centres[k], Eigen::Matrix2d::Identity() * width * width});
      }
      return m;
    }
    case Family::two_moons:
      return std::nullopt;
  }
  return std::nullopt;
}

DistributionSpec DistributionSpec::gaussian(Eigen::VectorXd mean,
                                            Eigen::MatrixXd cov) {
  DistributionSpec s;
  s.family = Family::gaussian;
  s.weights = {1.0};
  s.components = {{std::move(mean), std::move(cov)}};
  return s;
}

DistributionSpec DistributionSpec::standard_normal(std::size_t dim) {
  return gaussian(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)),
                  Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                            static_cast<Eigen::Index>(dim)));
}

DistributionSpec DistributionSpec::mixture_of(
    std::vector<double> weights, std::vector<GaussianComponent> comps) {
  DistributionSpec s;
  s.family = Family::gaussian_mixture;
  s.weights = std::move(weights);
  s.components = std::move(comps);
  return s;
}

DistributionSpec DistributionSpec::ring(std::size_t modes, double radius,
                                        double width,
                                        std::vector<std::size_t> subset) {
  DistributionSpec s;
  s.family = Family::ring_of_gaussians;
  s.modes = modes;
  s.radius = radius;
  s.width = width;
  s.mode_subset = std::move(subset);
  return s;
}

DistributionSpec DistributionSpec::moons(double noise) {
  DistributionSpec s;
  s.family = Family::two_moons;
  s.noise = noise;
  return s;
}

Dataset sample_distribution(const DistributionSpec& spec, std::size_t n,
                            std::uint64_t seed) {
  spec.validate();
  const std::size_t d = spec.dim();
  std::vector<double> pts(n * d);

  if (spec.family == Family::two_moons) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < count; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      Stream rng(seed, "sample", i);
      const bool lower = rng.uniform() < 0.5;
      const double theta = std::numbers::pi * rng.uniform();
      double x = std::cos(theta), y = std::sin(theta);
      if (lower) {
        x = 1.0 - x;
        y = 0.5 - y;
      }
      pts[2 * i] = x + spec.noise * rng.normal();
      pts[2 * i + 1] = y + spec.noise * rng.normal();
    }
  } else {
    const MixtureModel mix = *spec.mixture();
    std::vector<Eigen::MatrixXd> chol;
    for (const auto& c : mix.components)
      chol.push_back(Eigen::LLT<Eigen::MatrixXd>(c.cov).matrixL());
    std::vector<double> cumulative(mix.weights.size());
    std::partial_sum(mix.weights.begin(), mix.weights.end(),
                     cumulative.begin());
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < count; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      Stream rng(seed, "sample", i);
      std::size_t k = 0;
      if (mix.weights.size() > 1) {
        const double u = rng.uniform() * cumulative.back();
        while (k + 1 < cumulative.size() && u >= cumulative[k]) ++k;
      }
      Eigen::VectorXd z(static_cast<Eigen::Index>(d));
      for (std::size_t j = 0; j < d; ++j) z[static_cast<Eigen::Index>(j)] = rng.normal();
      const Eigen::VectorXd x = mix.components[k].mean + chol[k] * z;
      for (std::size_t j = 0; j < d; ++j) pts[i * d + j] = x[static_cast<Eigen::Index>(j)];
    }
  }
  return Dataset(d, std::move(pts), DatasetTag::clean, spec.id(), {seed});
}

std::pair<Dataset, Dataset> split_clean_ratio(const Dataset& clean,
                                              double ratio,
                                              std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw DomainError("split_clean_ratio: ratio must lie in (0, 1]");
  const std::size_t n = clean.size();
  const auto m = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  if (m < 1) throw DomainError("split_clean_ratio: ratio * n must be >= 1");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Stream rng(seed, "split", 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  std::vector<std::size_t> head(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  std::vector<std::size_t> tail(perm.begin() + static_cast<std::ptrdiff_t>(m), perm.end());
  std::sort(head.begin(), head.end());
  std::sort(tail.begin(), tail.end());
  Dataset a = subset(clean, head);
  Dataset b = subset(clean, tail);
  a.lineage.push_back(seed);
  b.lineage.push_back(seed);
  return {std::move(a), std::move(b)};
}

}  // namespace sfbd
