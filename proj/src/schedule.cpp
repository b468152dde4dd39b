#include "sfbd/schedule.hpp"

#include <cmath>

#include "sfbd/data_io.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"

namespace sfbd {

void NoiseSchedule::validate() const {
  if (!(sigma_min >= 0.0)) throw ValidationError("schedule.sigma_min", "must be >= 0");
  if (!(sigma_max > sigma_min))
    throw ValidationError("schedule.sigma_max", "must exceed sigma_min");
  if (!(horizon > 0.0)) throw ValidationError("schedule.horizon", "must be positive");
}

double NoiseSchedule::sigma(double t) const {
  if (!(t >= 0.0 && t <= horizon))
    throw DomainError("sigma: t outside [0, T]");
  return sigma_min + (sigma_max - sigma_min) * (t / horizon);
}

double NoiseSchedule::g2(double t) const {
  return 2.0 * sigma(t) * (sigma_max - sigma_min) / horizon;
}

double NoiseSchedule::g(double t) const { return std::sqrt(g2(t)); }

double NoiseSchedule::time_of_sigma(double s) const {
  if (!(s >= sigma_min && s <= sigma_max))
    throw DomainError("time_of_sigma: sigma outside schedule range");
  return horizon * (s - sigma_min) / (sigma_max - sigma_min);
}

CorruptionSpec make_corruption(const NoiseSchedule& schedule, double zeta) {
  if (!(zeta >= 0.0 && zeta < schedule.horizon))
    throw ValidationError("corruption.zeta", "must lie in [0, T)");
  return {zeta, schedule.sigma(zeta)};
}

CorruptionSpec corruption_for_sigma(const NoiseSchedule& schedule, double sigma) {
  if (!(sigma >= schedule.sigma_min && sigma < schedule.sigma_max))
    throw ValidationError("corruption.sigma_zeta", "outside schedule range");
  return make_corruption(schedule, schedule.time_of_sigma(sigma));
}

void validate_corruption(const NoiseSchedule& schedule, const CorruptionSpec& spec) {
  if (!(spec.zeta >= 0.0 && spec.zeta < schedule.horizon))
    throw ValidationError("corruption.zeta", "must lie in [0, T)");
  const double expect = schedule.sigma(spec.zeta);
  if (std::abs(spec.sigma_zeta - expect) > 1e-12 * std::max(1.0, std::abs(expect)))
    throw ValidationError("corruption.sigma_zeta", "does not match sigma(zeta)");
}

std::vector<double> forward_sample(std::span<const double> x0,
                                   const NoiseSchedule& schedule, double t,
                                   std::span<const double> noise) {
  if (x0.size() != noise.size()) throw ShapeError("forward_sample: dimension mismatch");
  const double s = schedule.sigma(t);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = x0[i] + s * noise[i];
  return out;
}

namespace {

void corrupt_point(const Dataset& clean, double sigma, std::uint64_t seed,
                   std::size_t i, std::vector<double>& out) {
  Stream rng(seed, "corrupt", i);
  for (std::size_t j = 0; j < clean.dim; ++j) {
    const std::size_t k = i * clean.dim + j;
    out[k] = clean.points[k] + sigma * rng.normal();
  }
}

Dataset noisy_shell(const Dataset& clean, const CorruptionSpec& spec,
                    std::uint64_t seed) {
  if (clean.tag != DatasetTag::clean)
    throw DomainError("corrupt_dataset: input must be tagged clean");
  Dataset out;
  out.dim = clean.dim;
  out.tag = DatasetTag::noisy;
  out.origin = clean.origin + "|corrupt(sigma=" + format_double(spec.sigma_zeta) + ")";
  out.lineage = clean.lineage;
  out.lineage.push_back(seed);
  out.points.resize(clean.points.size());
  return out;
}

}  // namespace

Dataset corrupt_dataset(const Dataset& clean, const CorruptionSpec& spec,
                        std::uint64_t seed) {
  Dataset out = noisy_shell(clean, spec, seed);
  const auto n = static_cast<std::int64_t>(clean.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    corrupt_point(clean, spec.sigma_zeta, seed, static_cast<std::size_t>(i), out.points);
  return out;
}

Dataset corrupt_dataset_serial(const Dataset& clean, const CorruptionSpec& spec,
                               std::uint64_t seed) {
  Dataset out = noisy_shell(clean, spec, seed);
  for (std::size_t i = 0; i < clean.size(); ++i)
    corrupt_point(clean, spec.sigma_zeta, seed, i, out.points);
  return out;
}

}  // namespace sfbd
