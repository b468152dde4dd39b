#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sfbd/dataset.hpp"

namespace sfbd {

enum class ScheduleKind { variance_exploding_linear };

// Variance-exploding schedule with sigma linear in time:
//   sigma(t) = sigma_min + (sigma_max - sigma_min) * t / horizon,
//   g(t)^2   = d sigma(t)^2 / dt.
// The defaults (0, 80, 80) give sigma(t) = t and g(t) = sqrt(2t), so a
// corruption time zeta and its noise level coincide.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::variance_exploding_linear;
  double sigma_min = 0.0;
  double sigma_max = 80.0;
  double horizon = 80.0;

  // Throws DomainError for t outside [0, horizon].
  double sigma(double t) const;
  double g2(double t) const;
  double g(double t) const;
  // Inverse of sigma on [sigma_min, sigma_max].
  double time_of_sigma(double s) const;
  void validate() const;
};

struct CorruptionSpec {
  double zeta = 0.2;
  double sigma_zeta = 0.2;
};

// Builds a spec whose sigma_zeta matches the schedule at zeta. zeta = 0 is
// accepted as the degenerate noiseless case.
CorruptionSpec make_corruption(const NoiseSchedule& schedule, double zeta);
CorruptionSpec corruption_for_sigma(const NoiseSchedule& schedule, double sigma);
// Throws ValidationError unless zeta in [0, T) and sigma_zeta == sigma(zeta).
void validate_corruption(const NoiseSchedule& schedule, const CorruptionSpec& spec);

// x0 + sigma(t) * noise, a draw from N(x0, sigma(t)^2 I).
std::vector<double> forward_sample(std::span<const double> x0,
                                   const NoiseSchedule& schedule, double t,
                                   std::span<const double> noise);

// y_i = x_i + sigma_zeta * eps_i with eps_i from stream (seed, "corrupt", i).
Dataset corrupt_dataset(const Dataset& clean, const CorruptionSpec& spec,
                        std::uint64_t seed);
Dataset corrupt_dataset_serial(const Dataset& clean, const CorruptionSpec& spec,
                               std::uint64_t seed);

}  // namespace sfbd
