#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sfbd/dataset.hpp"
#include "sfbd/net.hpp"
#include "sfbd/rng.hpp"
#include "sfbd/sampler.hpp"

namespace sfbd {

enum class TimeSamplerKind { log_uniform };

// log sigma_t uniform over [log sigma(t_min), log sigma(t_max)].
struct TimeSampler {
  TimeSamplerKind kind = TimeSamplerKind::log_uniform;
  double t_min = 0.002;
  double t_max = 80.0;

  void validate(const NoiseSchedule& schedule) const;
  double draw(Stream& rng, const NoiseSchedule& schedule) const;
};

// Weighted denoising loss with w(t) = 1 / sigma_t^2:
//   (1/n) sum_i w(t_i) |D(x0_i + sigma_{t_i} eps_i, t_i) - x0_i|^2.
// Point i draws (t_i, eps_i) from stream
// (stream_seed(seed, "denoise", h(x0_i)), "occurrence", c_i) where h hashes the
// coordinates' bit patterns and c_i counts earlier copies of the same point,
// so the loss does not depend on the order of the batch.
class DenoisingEvaluator : public LossEvaluator {
 public:
  // Random times from `sampler`.
  DenoisingEvaluator(const Dataset& batch, const TimeSampler& sampler,
                     const NoiseSchedule& schedule, std::uint64_t seed);
  // Every point at the fixed time t > 0.
  DenoisingEvaluator(const Dataset& batch, double t, const NoiseSchedule& schedule,
                     std::uint64_t seed);

  std::size_t groups() const override { return static_cast<std::size_t>(x0_.cols()); }
  std::size_t queries(std::size_t) const override { return 1; }
  void fill(std::size_t g, Eigen::Ref<Eigen::MatrixXd> x,
            Eigen::Ref<Eigen::VectorXd> t) const override;
  double loss(std::size_t g, const Eigen::Ref<const Eigen::MatrixXd>& out,
              Eigen::Ref<Eigen::MatrixXd> d_out) const override;

 private:
  void draw(const NoiseSchedule& schedule, std::uint64_t seed,
            const TimeSampler* sampler, double fixed_t);

  Eigen::MatrixXd x0_, xt_;
  Eigen::VectorXd t_, w_;
};

// Unweighted pair loss (1/n) sum_i (1/m) sum_j |D(xs_i, s) - target_ij|^2
// where targets of group i are columns i*m .. i*m+m-1.
class PairEvaluator : public LossEvaluator {
 public:
  PairEvaluator(Eigen::MatrixXd xs, double s, Eigen::MatrixXd targets, std::size_t m);

  std::size_t groups() const override { return static_cast<std::size_t>(xs_.cols()); }
  std::size_t queries(std::size_t) const override { return 1; }
  void fill(std::size_t g, Eigen::Ref<Eigen::MatrixXd> x,
            Eigen::Ref<Eigen::VectorXd> t) const override;
  double loss(std::size_t g, const Eigen::Ref<const Eigen::MatrixXd>& out,
              Eigen::Ref<Eigen::MatrixXd> d_out) const override;

 private:
  Eigen::MatrixXd xs_, targets_;
  double s_;
  std::size_t m_;
};

LossGrad denoising_loss(const DenoiserNet& net, const Dataset& batch,
                        const TimeSampler& sampler, std::uint64_t seed);
LossGrad denoising_loss_at(const DenoiserNet& net, const Dataset& batch, double t,
                           std::uint64_t seed);

// Samples of the nested chain used by the consistency loss. Column i of xs
// is a draw at time s started from noisy point i at time zeta (backward with
// the model if s < zeta, forward noise if s > zeta). Columns i*m .. i*m+m-1 of
// xr are backward draws from xs_i down to r; for r = 0 they end with the
// Tweedie jump. Samples are constants with respect to the parameters.
struct ConsistencyChain {
  double r = 0.0;
  double s = 0.0;
  std::size_t m = 4;
  Eigen::MatrixXd xs;
  Eigen::MatrixXd xr;
};

ConsistencyChain draw_consistency_chain(const Denoiser& den, const Dataset& noisy,
                                        const CorruptionSpec& spec, double r, double s,
                                        std::size_t m, const SolverConfig& solver,
                                        const NoiseSchedule& schedule, std::uint64_t seed);

// |D(xs_i, s) - (1/m) sum_j D(xr_ij, r)|^2 averaged over i. Both denoiser
// calls carry gradient; D(., 0) is the identity so at r = 0 only the first does.
class ConsistencyEvaluator : public LossEvaluator {
 public:
  explicit ConsistencyEvaluator(const ConsistencyChain& chain) : chain_(chain) {}

  std::size_t groups() const override { return static_cast<std::size_t>(chain_.xs.cols()); }
  std::size_t queries(std::size_t) const override { return 1 + chain_.m; }
  void fill(std::size_t g, Eigen::Ref<Eigen::MatrixXd> x,
            Eigen::Ref<Eigen::VectorXd> t) const override;
  double loss(std::size_t g, const Eigen::Ref<const Eigen::MatrixXd>& out,
              Eigen::Ref<Eigen::MatrixXd> d_out) const override;

 private:
  const ConsistencyChain& chain_;
};

struct ConsistencyOptions {
  std::size_t m = 4;
  SolverConfig solver;
};

// Throws DomainError unless 0 <= r < s <= T.
LossGrad consistency_loss(const DenoiserNet& net, const Dataset& noisy,
                          const CorruptionSpec& spec, double r, double s,
                          const ConsistencyOptions& opt, std::uint64_t seed);

// Value-only form for arbitrary denoisers. `noise_floor` is the mean of the
// inner Monte-Carlo variance term S_i^2 / m, the part of the loss that stays
// positive for an exact denoiser at finite m.
struct ConsistencyStats {
  double value = 0.0;
  double std_error = 0.0;
  double noise_floor = 0.0;
};
ConsistencyStats consistency_stats(const Denoiser& den, const Dataset& noisy,
                                   const CorruptionSpec& spec, double r, double s,
                                   const ConsistencyOptions& opt,
                                   const NoiseSchedule& schedule, std::uint64_t seed);

// Gradient comparison of consistency_loss(r = 0, s) and the denoising loss at
// t = s evaluated on the same chain pairs (xs_i, xr_ij).
struct EquivalenceReport {
  double cosine = 0.0;
  double consistency_value = 0.0;
  double denoising_value = 0.0;
  // denoising_value - consistency_value; has zero gradient.
  double constant = 0.0;
  double grad_norm_consistency = 0.0;
  double grad_norm_denoising = 0.0;
};
EquivalenceReport check_consistency_equivalence(const DenoiserNet& net, const Dataset& noisy,
                                                const CorruptionSpec& spec, double s,
                                                const ConsistencyOptions& opt,
                                                std::uint64_t seed);

}  // namespace sfbd
