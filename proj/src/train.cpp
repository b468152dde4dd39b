#include "sfbd/train.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "sfbd/adam.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"

namespace sfbd {

void TrainConfig::validate(const NoiseSchedule& schedule) const {
  if (batch_size == 0) throw ValidationError("train.batch_size", "must be positive");
  if (!(lr > 0.0)) throw ValidationError("train.lr", "must be positive");
  if (!(lr_floor > 0.0 && lr_floor <= 1.0))
    throw ValidationError("train.lr_floor", "must lie in (0, 1]");
  sampler.validate(schedule);
}

std::size_t TrainConfig::total_steps(std::size_t n) const {
  if (steps > 0) return steps;
  return epochs * ((n + batch_size - 1) / batch_size);
}

std::vector<double> train_denoiser(DenoiserNet& net, const Dataset& data,
                                   const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate(net.schedule());
  if (data.empty()) throw DomainError("train: empty dataset");
  if (data.dim != net.dim()) throw ShapeError("train: dataset dimension mismatch");
  const std::size_t n = data.size();
  const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = cfg.total_steps(n);

  AdamState adam = AdamState::for_size(net.params().size(), cfg.lr);
  std::vector<double> trace;
  std::vector<std::size_t> order(n);
  double epoch_loss = 0.0;
  std::size_t epoch_batches = 0;
  for (std::size_t step = 0; step < total; ++step) {
    const std::size_t epoch = step / per_epoch, pos = step % per_epoch;
    if (pos == 0) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Stream rng(seed, "shuffle", epoch);
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    const std::size_t b0 = pos * cfg.batch_size;
    const std::size_t b1 = std::min(n, b0 + cfg.batch_size);
    const Dataset batch =
        subset(data, std::span<const std::size_t>(order.data() + b0, b1 - b0));
    const LossGrad lg = denoising_loss(net, batch, cfg.sampler,
                                       stream_seed(seed, "step", step));
    if (cfg.cosine_decay) {
      const double f = static_cast<double>(step) / static_cast<double>(total);
      adam.lr = cfg.lr * (cfg.lr_floor + (1.0 - cfg.lr_floor) * 0.5 *
                                             (1.0 + std::cos(std::numbers::pi * f)));
    }
    adam_update(adam, net.params(), lg.grad);
    epoch_loss += lg.value;
    ++epoch_batches;
    if (pos + 1 == per_epoch || step + 1 == total) {
      trace.push_back(epoch_loss / static_cast<double>(epoch_batches));
      epoch_loss = 0.0;
      epoch_batches = 0;
    }
  }
  return trace;
}

DenoiserNet pretrain(const Dataset& clean, const NetTopology& topo,
                     const NoiseSchedule& schedule, const TrainConfig& cfg,
                     std::uint64_t seed, std::vector<double>* trace) {
  if (clean.empty()) throw DomainError("pretrain: empty clean set");
  DenoiserNet net = DenoiserNet::initialized(topo, schedule, stream_seed(seed, "init", 0));
  std::vector<double> t = train_denoiser(net, clean, cfg, seed);
  if (trace) *trace = std::move(t);
  return net;
}

}  // namespace sfbd
