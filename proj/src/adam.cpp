#include "sfbd/adam.hpp"

#include <cmath>

#include "sfbd/errors.hpp"

namespace sfbd {

AdamState AdamState::for_size(std::size_t n, double lr) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.lr = lr;
  return s;
}

void adam_update(AdamState& s, std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size() || s.m.size() != params.size() ||
      s.v.size() != params.size())
    throw ShapeError("adam: vector lengths disagree");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i])) throw NumericError("adam: non-finite gradient", i);

  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    params[i] -= s.lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + s.eps);
  }
}

std::pair<AdamState, std::vector<double>> adam_step(AdamState state,
                                                    std::vector<double> params,
                                                    std::span<const double> grad) {
  adam_update(state, params, grad);
  return {std::move(state), std::move(params)};
}

}  // namespace sfbd
