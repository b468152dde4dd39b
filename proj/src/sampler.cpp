#include "sfbd/sampler.hpp"

#include <cmath>

#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"

namespace sfbd {

void SolverConfig::validate() const {
  if (steps == 0) throw ValidationError("solver.steps", "must be positive");
  if (!(rho > 0.0)) throw ValidationError("solver.rho", "must be positive");
  if (!(t_end >= 0.0)) throw ValidationError("solver.t_end", "must be >= 0");
  const bool degenerate = t_start == 0.0 && t_end == 0.0;
  if (!(t_start > t_end) && !degenerate)
    throw ValidationError("solver.t_start", "must exceed t_end");
}

std::vector<double> time_grid(const SolverConfig& cfg, const NoiseSchedule& schedule) {
  cfg.validate();
  const double end = std::max(cfg.t_end, kTimeFloor);
  if (cfg.t_start <= end) return {cfg.t_start};
  const double a = std::pow(schedule.sigma(cfg.t_start), 1.0 / cfg.rho);
  const double b = std::pow(schedule.sigma(end), 1.0 / cfg.rho);
  const auto n = cfg.steps;
  std::vector<double> grid(n + 1);
  grid[0] = cfg.t_start;
  grid[n] = end;
  for (std::size_t i = 1; i < n; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(n);
    grid[i] = schedule.time_of_sigma(std::pow(a + f * (b - a), cfg.rho));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!(grid[i] > grid[i + 1]))
      throw DomainError("time_grid: nodes not strictly decreasing; reduce steps");
  return grid;
}

std::vector<double> model_score(const Denoiser& den, std::span<const double> x,
                                double t, const NoiseSchedule& schedule) {
  const double s = schedule.sigma(t);
  if (!(s > 0.0)) throw DomainError("model_score: sigma_t = 0");
  if (x.size() != den.dim()) throw ShapeError("model_score: dimension mismatch");
  Eigen::MatrixXd in = Eigen::Map<const Eigen::MatrixXd>(
      x.data(), static_cast<Eigen::Index>(x.size()), 1);
  Eigen::MatrixXd out;
  den.denoise_batch(in, t, out);
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    r[i] = (out(static_cast<Eigen::Index>(i), 0) - x[i]) / (s * s);
  return r;
}

namespace {

// Backward drift b(x, t) = -g^2 (D(x, t) - x) / sigma_t^2, written into `b`.
void drift(const Denoiser& den, const Dynamics& dyn, const Eigen::MatrixXd& x,
           double t, Eigen::MatrixXd& b) {
  const double g2 = dyn.g2(t);
  if (g2 == 0.0) {
    b.setZero(x.rows(), x.cols());
    return;
  }
  const double s = dyn.sigma(t);
  den.denoise_batch(x, t, b);
  b = (-g2 / (s * s)) * (b - x);
}

void step(const Denoiser& den, const Dynamics& dyn, SolverMethod method,
          Eigen::MatrixXd& x, double t, double t_next, const Eigen::MatrixXd& xi,
          Eigen::MatrixXd& b, Eigen::MatrixXd& b2) {
  const double dt = t_next - t;
  drift(den, dyn, x, t, b);
  if (method == SolverMethod::euler_maruyama) {
    x += dt * b + xi;
    return;
  }
  Eigen::MatrixXd pred = x + dt * b + xi;
  drift(den, dyn, pred, t_next, b2);
  x += (0.5 * dt) * (b + b2) + xi;
}

}  // namespace

void solve_with_increments(const Denoiser& den, Eigen::MatrixXd& x,
                           std::span<const double> grid, const Dynamics& dyn,
                           SolverMethod method,
                           const std::vector<Eigen::MatrixXd>& increments) {
  if (grid.empty() || increments.size() + 1 != grid.size())
    throw ShapeError("solve_with_increments: one increment per step required");
  Eigen::MatrixXd b, b2;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    if (increments[k].rows() != x.rows() || increments[k].cols() != x.cols())
      throw ShapeError("solve_with_increments: increment shape mismatch");
    step(den, dyn, method, x, grid[k], grid[k + 1], increments[k], b, b2);
    if (!x.allFinite()) throw NumericError("backward SDE state became non-finite", k);
  }
}

void solve_backward_batch(const Denoiser& den, Eigen::MatrixXd& x,
                          const SolverConfig& cfg, const Dynamics& dyn,
                          const NoiseSchedule& schedule, std::uint64_t seed,
                          std::uint64_t first_index, std::string_view label) {
  if (static_cast<std::size_t>(x.rows()) != den.dim())
    throw ShapeError("solve_backward: dimension mismatch");
  const std::vector<double> grid = time_grid(cfg, schedule);
  std::vector<Stream> streams;
  streams.reserve(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    streams.emplace_back(seed, label, first_index + static_cast<std::uint64_t>(j));

  Eigen::MatrixXd xi(x.rows(), x.cols()), b, b2;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double sd = std::sqrt(dyn.increment_variance(grid[k], grid[k + 1]));
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        xi(i, j) = sd * streams[static_cast<std::size_t>(j)].normal();
    step(den, dyn, cfg.method, x, grid[k], grid[k + 1], xi, b, b2);
    if (!x.allFinite()) throw NumericError("backward SDE state became non-finite", k);
  }
  if (cfg.t_end < kTimeFloor) {
    Eigen::MatrixXd out;
    den.denoise_batch(x, grid.back(), out);
    x = std::move(out);
    if (!x.allFinite()) throw NumericError("Tweedie jump produced non-finite state", grid.size() - 1);
  }
}

std::vector<double> solve_backward(const Denoiser& den, std::span<const double> x_start,
                                   const SolverConfig& cfg, const NoiseSchedule& schedule,
                                   std::uint64_t seed, std::uint64_t index) {
  Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(
      x_start.data(), static_cast<Eigen::Index>(x_start.size()), 1);
  solve_backward_batch(den, x, cfg, ScheduleDynamics(schedule), schedule, seed, index);
  return {x.data(), x.data() + x.size()};
}

namespace {

Dataset denoised_shell(const Dataset& noisy, const CorruptionSpec& spec,
                       const SolverConfig& cfg, const NoiseSchedule& schedule,
                       std::uint64_t seed) {
  if (noisy.tag != DatasetTag::noisy)
    throw DomainError("denoise_dataset: input must be tagged noisy");
  validate_corruption(schedule, spec);
  if (std::abs(cfg.t_start - spec.zeta) > 1e-12 * std::max(1.0, spec.zeta))
    throw DomainError("denoise_dataset: solver t_start must equal zeta");
  Dataset out = noisy;
  out.tag = DatasetTag::denoised;
  out.origin += "|backward";
  out.lineage.push_back(seed);
  return out;
}

void backward_block(const Denoiser& den, Eigen::MatrixXd& x, const SolverConfig& cfg,
                    const NoiseSchedule& schedule, std::uint64_t seed,
                    std::string_view label, std::size_t block) {
  const auto i0 = static_cast<Eigen::Index>(block * kSampleBlock);
  const Eigen::Index cnt = std::min<Eigen::Index>(kSampleBlock, x.cols() - i0);
  Eigen::MatrixXd part = x.middleCols(i0, cnt);
  solve_backward_batch(den, part, cfg, ScheduleDynamics(schedule), schedule, seed,
                       static_cast<std::uint64_t>(i0), label);
  x.middleCols(i0, cnt) = part;
}

}  // namespace

void solve_backward_blocks(const Denoiser& den, Eigen::MatrixXd& x,
                           const SolverConfig& cfg, const NoiseSchedule& schedule,
                           std::uint64_t seed, std::string_view label) {
  const auto blocks = static_cast<std::int64_t>(
      (static_cast<std::size_t>(x.cols()) + kSampleBlock - 1) / kSampleBlock);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t b = 0; b < blocks; ++b)
    backward_block(den, x, cfg, schedule, seed, label, static_cast<std::size_t>(b));
}

void solve_backward_blocks_serial(const Denoiser& den, Eigen::MatrixXd& x,
                                  const SolverConfig& cfg, const NoiseSchedule& schedule,
                                  std::uint64_t seed, std::string_view label) {
  const std::size_t blocks = (static_cast<std::size_t>(x.cols()) + kSampleBlock - 1) / kSampleBlock;
  for (std::size_t b = 0; b < blocks; ++b) backward_block(den, x, cfg, schedule, seed, label, b);
}

Dataset denoise_dataset(const Denoiser& den, const Dataset& noisy,
                        const CorruptionSpec& spec, const SolverConfig& cfg,
                        const NoiseSchedule& schedule, std::uint64_t seed) {
  Dataset out = denoised_shell(noisy, spec, cfg, schedule, seed);
  if (out.dim != den.dim()) throw ShapeError("denoise_dataset: dimension mismatch");
  Eigen::MatrixXd x = out.matrix();
  solve_backward_blocks(den, x, cfg, schedule, seed, "backward");
  out.matrix() = x;
  return out;
}

Dataset denoise_dataset_serial(const Denoiser& den, const Dataset& noisy,
                               const CorruptionSpec& spec, const SolverConfig& cfg,
                               const NoiseSchedule& schedule, std::uint64_t seed) {
  Dataset out = denoised_shell(noisy, spec, cfg, schedule, seed);
  if (out.dim != den.dim()) throw ShapeError("denoise_dataset: dimension mismatch");
  Eigen::MatrixXd x = out.matrix();
  solve_backward_blocks_serial(den, x, cfg, schedule, seed, "backward");
  out.matrix() = x;
  return out;
}

}  // namespace sfbd
