#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sfbd/dataset.hpp"

namespace sfbd {

struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Weighted Gaussian mixture; also used as the closed-form description of the
// gaussian and ring families.
struct MixtureModel {
  std::vector<double> weights;
  std::vector<GaussianComponent> components;
  std::size_t dim() const {
    return components.empty() ? 0 : components.front().mean.size();
  }
};

enum class Family { gaussian, gaussian_mixture, ring_of_gaussians, two_moons };

struct DistributionSpec {
  Family family = Family::gaussian;

  // gaussian (one component) and gaussian-mixture
  std::vector<double> weights;
  std::vector<GaussianComponent> components;

  // ring-of-gaussians: isotropic modes of std `width` evenly spaced on a
  // circle; `mode_subset` restricts sampling to the listed modes (equal weight).
  std::size_t modes = 8;
  double radius = 4.0;
  double width = 0.2;
  std::vector<std::size_t> mode_subset;

  // two-moons: interleaved half circles plus isotropic noise of std `noise`.
  double noise = 0.1;

  std::size_t dim() const;
  // Canonical textual identity; datasets record it as their origin.
  std::string id() const;
  // Throws ValidationError naming the offending field.
  void validate() const;
  // Closed form for every family except two-moons.
  std::optional<MixtureModel> mixture() const;
  // Mode centres of the ring family (all modes, regardless of subset).
  std::vector<Eigen::Vector2d> ring_centres() const;

  static DistributionSpec gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  static DistributionSpec standard_normal(std::size_t dim);
  static DistributionSpec mixture_of(std::vector<double> weights,
                                     std::vector<GaussianComponent> comps);
  static DistributionSpec ring(std::size_t modes, double radius, double width,
                               std::vector<std::size_t> subset = {});
  static DistributionSpec moons(double noise);
};

// n i.i.d. draws, tag clean. Point i uses stream (seed, "sample", i).
Dataset sample_distribution(const DistributionSpec& spec, std::size_t n,
                            std::uint64_t seed);

// Disjoint random split: the first part has round(ratio * n) points.
std::pair<Dataset, Dataset> split_clean_ratio(const Dataset& clean,
                                              double ratio, std::uint64_t seed);

}  // namespace sfbd
