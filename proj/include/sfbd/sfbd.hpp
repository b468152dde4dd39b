#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sfbd/dataset.hpp"
#include "sfbd/distributions.hpp"
#include "sfbd/net.hpp"
#include "sfbd/sampler.hpp"
#include "sfbd/schedule.hpp"
#include "sfbd/train.hpp"

namespace sfbd {

struct SfbdConfig {
  std::size_t iterations = 5;
  NetTopology net;
  NoiseSchedule schedule;
  TrainConfig pretrain;
  TrainConfig finetune;
  bool clean_injection = false;
  CorruptionSpec corruption;
  // t_start is replaced by corruption.zeta.
  SolverConfig solver;
  std::uint64_t seed = 0;
  // Control run: phi_0 is the untrained initialization (identity denoiser).
  bool skip_pretrain = false;
  // When set, every iteration is checkpointed under run_dir/iter_<k>/.
  std::filesystem::path run_dir;

  void validate() const;
  SolverConfig backward_solver() const;
};

// Reference used to score each iteration's samples.
struct EvalSpec {
  // KL(truth || Gaussian fit) when set; otherwise kNN KL(reference || samples).
  std::optional<GaussianComponent> truth;
  // Held-out clean points for MMD and (without truth) moments and kNN KL.
  Dataset reference;
  // Gaussian-kernel bandwidth; 0 selects the median heuristic on `reference`.
  double mmd_bandwidth = 0.0;
  // MMD uses the first mmd_points points of each set.
  std::size_t mmd_points = 2000;
  std::size_t knn_k = 5;
};

struct MetricsRow {
  std::size_t iter = 0;
  double kl_estimate = 0.0;
  double mmd = 0.0;
  double mean_err = 0.0;
  double cov_err = 0.0;
  double mmd_stderr = 0.0;
  double train_loss = 0.0;
};

// Row k describes p_0 induced by phi_k: the noisy set mapped to time 0 with
// the backward SDE under phi_k.
MetricsRow evaluate_samples(const Dataset& samples, const EvalSpec& eval, std::size_t iter,
                            double train_loss);

struct SfbdState {
  DenoiserNet net;        // phi_k
  std::size_t k = 0;
  Dataset training_set;   // E_k (empty for k = 0)
  Dataset samples;        // denoise_dataset(phi_k, noisy); seeds E_{k+1}
  std::vector<MetricsRow> history;
};

// Pretraining (or the control initialization), backward sampling with
// phi_0 and metrics row 0.
SfbdState sfbd_start(const Dataset& clean, const Dataset& noisy, const SfbdConfig& cfg,
                     const EvalSpec& eval);

// E_{k+1} = samples_k (+ clean when injecting); phi_{k+1} = phi_k fine-tuned
// on E_{k+1}; samples_{k+1} and metrics row k+1 follow.
SfbdState sfbd_iteration(SfbdState state, const Dataset& clean, const Dataset& noisy,
                         const SfbdConfig& cfg, const EvalSpec& eval);

// Start plus cfg.iterations iterations. With `resume` the run continues from
// the last complete iter_<k> directory under cfg.run_dir.
SfbdState run_sfbd(const Dataset& clean, const Dataset& noisy, const SfbdConfig& cfg,
                   const EvalSpec& eval, bool resume = false);

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

}  // namespace sfbd
