#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace sfbd {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_size(std::size_t n, double lr = 1e-3);
};

// Bias-corrected Adam. Throws NumericError naming the first non-finite
// gradient entry, ShapeError when lengths disagree.
std::pair<AdamState, std::vector<double>> adam_step(AdamState state,
                                                    std::vector<double> params,
                                                    std::span<const double> grad);

// In-place form used by the training loops.
void adam_update(AdamState& state, std::span<double> params,
                 std::span<const double> grad);

}  // namespace sfbd
