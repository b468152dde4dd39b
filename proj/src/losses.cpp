#include "sfbd/losses.hpp"

#include <bit>
#include <cmath>
#include <unordered_map>

#include "sfbd/errors.hpp"

namespace sfbd {
namespace {

std::uint64_t point_key(const double* p, std::size_t d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t j = 0; j < d; ++j) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(p[j] == 0.0 ? 0.0 : p[j]);
    for (int k = 0; k < 8; ++k, u >>= 8) {
      h ^= u & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void check_batch(const Dataset& batch) {
  if (batch.empty()) throw DomainError("denoising_loss: empty batch");
  if (batch.tag == DatasetTag::noisy)
    throw DomainError("denoising_loss: batch must be clean or denoised");
}

}  // namespace

void TimeSampler::validate(const NoiseSchedule& schedule) const {
  if (!(t_min > 0.0)) throw ValidationError("train.t_min", "must be positive");
  if (!(t_max > t_min)) throw ValidationError("train.t_max", "must exceed t_min");
  if (!(t_max <= schedule.horizon)) throw ValidationError("train.t_max", "must be <= T");
  if (!(schedule.sigma(t_min) > 0.0))
    throw ValidationError("train.t_min", "sigma(t_min) must be positive");
}

double TimeSampler::draw(Stream& rng, const NoiseSchedule& schedule) const {
  const double a = std::log(schedule.sigma(t_min));
  const double b = std::log(schedule.sigma(t_max));
  const double s = std::exp(a + rng.uniform() * (b - a));
  return std::clamp(schedule.time_of_sigma(std::clamp(s, schedule.sigma(t_min),
                                                      schedule.sigma(t_max))),
                    t_min, t_max);
}

DenoisingEvaluator::DenoisingEvaluator(const Dataset& batch, const TimeSampler& sampler,
                                       const NoiseSchedule& schedule, std::uint64_t seed) {
  check_batch(batch);
  sampler.validate(schedule);
  x0_ = batch.matrix();
  draw(schedule, seed, &sampler, 0.0);
}

DenoisingEvaluator::DenoisingEvaluator(const Dataset& batch, double t,
                                       const NoiseSchedule& schedule, std::uint64_t seed) {
  check_batch(batch);
  if (!(schedule.sigma(t) > 0.0)) throw DomainError("denoising_loss: sigma_t must be positive");
  x0_ = batch.matrix();
  draw(schedule, seed, nullptr, t);
}

void DenoisingEvaluator::draw(const NoiseSchedule& schedule, std::uint64_t seed,
                              const TimeSampler* sampler, double fixed_t) {
  const Eigen::Index n = x0_.cols(), d = x0_.rows();
  xt_.resize(d, n);
  t_.resize(n);
  w_.resize(n);
  // Repeated points take successive occurrence numbers so each gets its own draw.
  std::unordered_map<std::uint64_t, std::uint64_t> seen;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint64_t key = point_key(&x0_(0, i), static_cast<std::size_t>(d));
    const std::uint64_t occurrence = seen[key]++;
    Stream rng(stream_seed(seed, "denoise", key), "occurrence", occurrence);
    t_[i] = sampler ? sampler->draw(rng, schedule) : fixed_t;
    const double s = schedule.sigma(t_[i]);
    w_[i] = 1.0 / (s * s);
    for (Eigen::Index k = 0; k < d; ++k) xt_(k, i) = x0_(k, i) + s * rng.normal();
  }
}

void DenoisingEvaluator::fill(std::size_t g, Eigen::Ref<Eigen::MatrixXd> x,
                              Eigen::Ref<Eigen::VectorXd> t) const {
  const auto i = static_cast<Eigen::Index>(g);
  x.col(0) = xt_.col(i);
  t[0] = t_[i];
}

double DenoisingEvaluator::loss(std::size_t g, const Eigen::Ref<const Eigen::MatrixXd>& out,
                                Eigen::Ref<Eigen::MatrixXd> d_out) const {
  const auto i = static_cast<Eigen::Index>(g);
  const double scale = w_[i] / static_cast<double>(x0_.cols());
  const Eigen::VectorXd r = out.col(0) - x0_.col(i);
  d_out.col(0) = 2.0 * scale * r;
  return scale * r.squaredNorm();
}

PairEvaluator::PairEvaluator(Eigen::MatrixXd xs, double s, Eigen::MatrixXd targets,
                             std::size_t m)
    : xs_(std::move(xs)), targets_(std::move(targets)), s_(s), m_(m) {
  if (m_ == 0 || targets_.cols() != xs_.cols() * static_cast<Eigen::Index>(m_) ||
      targets_.rows() != xs_.rows())
    throw ShapeError("PairEvaluator: targets must hold m columns per query");
}

void PairEvaluator::fill(std::size_t g, Eigen::Ref<Eigen::MatrixXd> x,
                         Eigen::Ref<Eigen::VectorXd> t) const {
  x.col(0) = xs_.col(static_cast<Eigen::Index>(g));
  t[0] = s_;
}

double PairEvaluator::loss(std::size_t g, const Eigen::Ref<const Eigen::MatrixXd>& out,
                           Eigen::Ref<Eigen::MatrixXd> d_out) const {
  const double scale = 1.0 / (static_cast<double>(xs_.cols()) * static_cast<double>(m_));
  const auto m = static_cast<Eigen::Index>(m_);
  double value = 0.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(xs_.rows());
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::VectorXd r = out.col(0) - targets_.col(static_cast<Eigen::Index>(g) * m + j);
    value += r.squaredNorm();
    grad += r;
  }
  d_out.col(0) = 2.0 * scale * grad;
  return scale * value;
}

LossGrad denoising_loss(const DenoiserNet& net, const Dataset& batch,
                        const TimeSampler& sampler, std::uint64_t seed) {
  return grad_params(net, DenoisingEvaluator(batch, sampler, net.schedule(), seed));
}

LossGrad denoising_loss_at(const DenoiserNet& net, const Dataset& batch, double t,
                           std::uint64_t seed) {
  return grad_params(net, DenoisingEvaluator(batch, t, net.schedule(), seed));
}

ConsistencyChain draw_consistency_chain(const Denoiser& den, const Dataset& noisy,
                                        const CorruptionSpec& spec, double r, double s,
                                        std::size_t m, const SolverConfig& solver,
                                        const NoiseSchedule& schedule, std::uint64_t seed) {
  if (!(r >= 0.0 && r < s && s <= schedule.horizon))
    throw DomainError("consistency_loss: requires 0 <= r < s <= T");
  if (m == 0) throw DomainError("consistency_loss: m must be positive");
  if (noisy.empty()) throw DomainError("consistency_loss: empty noisy set");
  if (noisy.dim != den.dim()) throw ShapeError("consistency_loss: dimension mismatch");
  validate_corruption(schedule, spec);

  ConsistencyChain c;
  c.r = r;
  c.s = s;
  c.m = m;
  c.xs = noisy.matrix();
  if (s < spec.zeta) {
    SolverConfig outer = solver;
    outer.t_start = spec.zeta;
    outer.t_end = s;
    solve_backward_blocks(den, c.xs, outer, schedule, seed, "consistency-outer");
  } else if (s > spec.zeta) {
    const double sz = spec.sigma_zeta, ss = schedule.sigma(s);
    const double sd = std::sqrt(ss * ss - sz * sz);
    for (Eigen::Index i = 0; i < c.xs.cols(); ++i) {
      Stream rng(seed, "consistency-forward", static_cast<std::uint64_t>(i));
      for (Eigen::Index k = 0; k < c.xs.rows(); ++k) c.xs(k, i) += sd * rng.normal();
    }
  }
  const auto mm = static_cast<Eigen::Index>(m);
  c.xr.resize(c.xs.rows(), c.xs.cols() * mm);
  for (Eigen::Index i = 0; i < c.xs.cols(); ++i)
    for (Eigen::Index j = 0; j < mm; ++j) c.xr.col(i * mm + j) = c.xs.col(i);
  SolverConfig inner = solver;
  inner.t_start = s;
  inner.t_end = r;
  solve_backward_blocks(den, c.xr, inner, schedule, seed, "consistency-inner");
  return c;
}

void ConsistencyEvaluator::fill(std::size_t g, Eigen::Ref<Eigen::MatrixXd> x,
                                Eigen::Ref<Eigen::VectorXd> t) const {
  const auto i = static_cast<Eigen::Index>(g);
  const auto m = static_cast<Eigen::Index>(chain_.m);
  x.col(0) = chain_.xs.col(i);
  t[0] = chain_.s;
  x.rightCols(m) = chain_.xr.middleCols(i * m, m);
  t.tail(m).setConstant(chain_.r);
}

double ConsistencyEvaluator::loss(std::size_t, const Eigen::Ref<const Eigen::MatrixXd>& out,
                                  Eigen::Ref<Eigen::MatrixXd> d_out) const {
  const auto m = static_cast<Eigen::Index>(chain_.m);
  const double n = static_cast<double>(chain_.xs.cols());
  const Eigen::VectorXd diff = out.col(0) - out.rightCols(m).rowwise().mean();
  d_out.col(0) = (2.0 / n) * diff;
  for (Eigen::Index j = 0; j < m; ++j)
    d_out.col(1 + j) = (-2.0 / (n * static_cast<double>(m))) * diff;
  return diff.squaredNorm() / n;
}

LossGrad consistency_loss(const DenoiserNet& net, const Dataset& noisy,
                          const CorruptionSpec& spec, double r, double s,
                          const ConsistencyOptions& opt, std::uint64_t seed) {
  const ConsistencyChain chain = draw_consistency_chain(net, noisy, spec, r, s, opt.m,
                                                        opt.solver, net.schedule(), seed);
  return grad_params(net, ConsistencyEvaluator(chain));
}

ConsistencyStats consistency_stats(const Denoiser& den, const Dataset& noisy,
                                   const CorruptionSpec& spec, double r, double s,
                                   const ConsistencyOptions& opt,
                                   const NoiseSchedule& schedule, std::uint64_t seed) {
  const ConsistencyChain c =
      draw_consistency_chain(den, noisy, spec, r, s, opt.m, opt.solver, schedule, seed);
  Eigen::MatrixXd ds, dr;
  den.denoise_batch(c.xs, s, ds);
  den.denoise_batch(c.xr, r, dr);
  const auto m = static_cast<Eigen::Index>(c.m);
  const Eigen::Index n = c.xs.cols();
  Eigen::VectorXd l(n);
  double floor = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto block = dr.middleCols(i * m, m);
    const Eigen::VectorXd mean = block.rowwise().mean();
    l[i] = (ds.col(i) - mean).squaredNorm();
    if (m > 1)
      floor += (block.colwise() - mean).squaredNorm() /
               (static_cast<double>(m - 1) * static_cast<double>(m));
  }
  ConsistencyStats st;
  st.value = l.mean();
  st.noise_floor = floor / static_cast<double>(n);
  if (n > 1)
    st.std_error = std::sqrt((l.array() - st.value).square().sum() /
                             static_cast<double>(n - 1) / static_cast<double>(n));
  return st;
}

EquivalenceReport check_consistency_equivalence(const DenoiserNet& net, const Dataset& noisy,
                                                const CorruptionSpec& spec, double s,
                                                const ConsistencyOptions& opt,
                                                std::uint64_t seed) {
  const ConsistencyChain chain = draw_consistency_chain(net, noisy, spec, 0.0, s, opt.m,
                                                        opt.solver, net.schedule(), seed);
  const LossGrad a = grad_params(net, ConsistencyEvaluator(chain));
  const LossGrad b = grad_params(net, PairEvaluator(chain.xs, s, chain.xr, chain.m));
  Eigen::Map<const Eigen::VectorXd> ga(a.grad.data(), static_cast<Eigen::Index>(a.grad.size()));
  Eigen::Map<const Eigen::VectorXd> gb(b.grad.data(), static_cast<Eigen::Index>(b.grad.size()));
  EquivalenceReport rep;
  rep.consistency_value = a.value;
  rep.denoising_value = b.value;
  rep.constant = b.value - a.value;
  rep.grad_norm_consistency = ga.norm();
  rep.grad_norm_denoising = gb.norm();
  const double denom = rep.grad_norm_consistency * rep.grad_norm_denoising;
  rep.cosine = denom > 0.0 ? ga.dot(gb) / denom : 0.0;
  return rep;
}

}  // namespace sfbd
