#pragma once

#include <cstdint>
#include <vector>

#include "sfbd/dataset.hpp"
#include "sfbd/losses.hpp"
#include "sfbd/net.hpp"

namespace sfbd {

struct TrainConfig {
  std::size_t epochs = 200;
  // When nonzero, train for exactly this many minibatch steps instead.
  std::size_t steps = 0;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  // Cosine decay of the step size from lr to lr * lr_floor over the run.
  bool cosine_decay = true;
  double lr_floor = 0.01;
  TimeSampler sampler;

  void validate(const NoiseSchedule& schedule) const;
  std::size_t total_steps(std::size_t n) const;
};

// Minibatch Adam on the denoising loss. Epoch e visits the data in the order
// of a shuffle drawn from stream (seed, "shuffle", e); step k uses loss seed
// stream_seed(seed, "step", k). Adam starts from a fresh state. Returns the
// mean loss of each epoch.
std::vector<double> train_denoiser(DenoiserNet& net, const Dataset& data,
                                   const TrainConfig& cfg, std::uint64_t seed);

// phi_0: fresh initialization (seed stream "init") trained on the clean set.
DenoiserNet pretrain(const Dataset& clean, const NetTopology& topo,
                     const NoiseSchedule& schedule, const TrainConfig& cfg,
                     std::uint64_t seed, std::vector<double>* trace = nullptr);

}  // namespace sfbd
