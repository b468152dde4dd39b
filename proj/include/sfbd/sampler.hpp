#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sfbd/dataset.hpp"
#include "sfbd/denoiser.hpp"
#include "sfbd/schedule.hpp"

namespace sfbd {

enum class SolverMethod { euler_maruyama, heun2 };
enum class TimestepSchedule { polynomial_rho };

// Integration stops at max(t_end, kTimeFloor). When t_end lies below the
// floor the state is finished with a Tweedie jump x <- D(x, floor).
inline constexpr double kTimeFloor = 1e-4;

struct SolverConfig {
  SolverMethod method = SolverMethod::heun2;
  std::size_t steps = 18;
  double t_start = 0.2;
  double t_end = 0.0;
  TimestepSchedule timestep_schedule = TimestepSchedule::polynomial_rho;
  double rho = 7.0;

  void validate() const;
};

// Decreasing nodes t_0 = t_start > ... > t_steps = max(t_end, kTimeFloor),
// uniform in sigma^(1/rho). Grids whose step counts divide each other nest.
// Returns the single node {t_start} when t_start is at or below the floor.
std::vector<double> time_grid(const SolverConfig& cfg, const NoiseSchedule& schedule);

// Coefficients of the reverse SDE dx = -g(t)^2 s(x, t) dt + g(t) dw.
class Dynamics {
 public:
  virtual ~Dynamics() = default;
  virtual double sigma(double t) const = 0;
  virtual double g2(double t) const = 0;
  // Variance of the diffusion increment over [t_next, t].
  virtual double increment_variance(double t, double t_next) const = 0;
};

class ScheduleDynamics : public Dynamics {
 public:
  explicit ScheduleDynamics(NoiseSchedule s) : s_(s) {}
  double sigma(double t) const override { return s_.sigma(t); }
  double g2(double t) const override { return s_.g2(t); }
  double increment_variance(double t, double t_next) const override {
    const double a = s_.sigma(t), b = s_.sigma(t_next);
    return a * a - b * b;
  }

 private:
  NoiseSchedule s_;
};

// g = 0: no drift and no noise, the state never moves.
class FrozenDynamics : public Dynamics {
 public:
  double sigma(double) const override { return 1.0; }
  double g2(double) const override { return 0.0; }
  double increment_variance(double, double) const override { return 0.0; }
};

// (D(x, t) - x) / sigma_t^2; DomainError when sigma_t = 0.
std::vector<double> model_score(const Denoiser& den, std::span<const double> x,
                                double t, const NoiseSchedule& schedule);

// Single trajectory; noise from stream (seed, "backward", index).
std::vector<double> solve_backward(const Denoiser& den, std::span<const double> x_start,
                                   const SolverConfig& cfg, const NoiseSchedule& schedule,
                                   std::uint64_t seed, std::uint64_t index = 0);

// Integrates every column of x in place. Column j draws its noise from
// stream (seed, label, first_index + j). Throws NumericError carrying the
// step index if the state stops being finite.
void solve_backward_batch(const Denoiser& den, Eigen::MatrixXd& x,
                          const SolverConfig& cfg, const Dynamics& dyn,
                          const NoiseSchedule& schedule, std::uint64_t seed,
                          std::uint64_t first_index, std::string_view label = "backward");

// Columns are processed in fixed blocks of kSampleBlock indices, so results
// do not depend on the thread count.
inline constexpr std::size_t kSampleBlock = 64;

// solve_backward_batch over fixed blocks of kSampleBlock columns, in
// parallel; column i uses stream index i.
void solve_backward_blocks(const Denoiser& den, Eigen::MatrixXd& x,
                           const SolverConfig& cfg, const NoiseSchedule& schedule,
                           std::uint64_t seed, std::string_view label);
void solve_backward_blocks_serial(const Denoiser& den, Eigen::MatrixXd& x,
                                  const SolverConfig& cfg, const NoiseSchedule& schedule,
                                  std::uint64_t seed, std::string_view label);

// Common-random-numbers entry: `increments[k]` is the d x B diffusion
// increment added on step k of `grid`. No jump is applied.
void solve_with_increments(const Denoiser& den, Eigen::MatrixXd& x,
                           std::span<const double> grid, const Dynamics& dyn,
                           SolverMethod method,
                           const std::vector<Eigen::MatrixXd>& increments);

// Maps each noisy y_i at time zeta to a draw at time cfg.t_end (0 by
// default) with the "backward" streams.

Dataset denoise_dataset(const Denoiser& den, const Dataset& noisy,
                        const CorruptionSpec& spec, const SolverConfig& cfg,
                        const NoiseSchedule& schedule, std::uint64_t seed);
Dataset denoise_dataset_serial(const Denoiser& den, const Dataset& noisy,
                               const CorruptionSpec& spec, const SolverConfig& cfg,
                               const NoiseSchedule& schedule, std::uint64_t seed);

}  // namespace sfbd
