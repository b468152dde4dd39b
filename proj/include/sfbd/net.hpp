#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sfbd/denoiser.hpp"
#include "sfbd/schedule.hpp"

namespace sfbd {

// Topology of the residual denoiser
//
//   D(x, t) = x + sigma_t * F([x / sqrt(sigma_t^2 + data_scale^2), e(t)])
//
// where F is a softplus MLP and e(t) holds `fourier_pairs` sin/cos pairs of
// c(t) = ln(sigma_t) / 4 at frequencies 2^0, 2^1, ...
// The sigma_t factor makes D(., 0) the identity for every parameter value.
struct NetTopology {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden = {64, 64, 64};
  std::size_t fourier_pairs = 8;
  double data_scale = 1.0;

  std::size_t time_embed_dim() const { return 2 * fourier_pairs; }
  std::size_t layer_count() const { return hidden.size() + 1; }
  std::size_t fan_in(std::size_t layer) const;
  std::size_t fan_out(std::size_t layer) const;
  std::size_t parameter_count() const;
  void validate() const;
};

class DenoiserNet : public Denoiser {
 public:
  // Per-batch activations retained for the reverse pass.
  struct Cache {
    Eigen::VectorXd sigma;
    std::vector<Eigen::MatrixXd> pre;  // pre-activations of hidden layers
    std::vector<Eigen::MatrixXd> act;  // act[0] is the network input
  };

  DenoiserNet(NetTopology topology, NoiseSchedule schedule);

  // Fan-in scaled uniform hidden layers, zero final layer (identity denoiser).
  static DenoiserNet initialized(NetTopology topology, NoiseSchedule schedule,
                                 std::uint64_t seed);

  const NetTopology& topology() const { return topo_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  std::size_t dim() const override { return topo_.input_dim; }

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  void set_params(std::span<const double> p);

  std::vector<double> denoise(std::span<const double> x, double t) const;

  // Columns of x are points; one time for the whole batch or one per column.
  void denoise_batch(const Eigen::MatrixXd& x, double t,
                     Eigen::MatrixXd& out) const override;
  void denoise_batch(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                     Eigen::MatrixXd& out) const;

  void forward(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
               Eigen::MatrixXd& out, Cache& cache) const;
  // Accumulates d loss / d params into `grad` given d loss / d out.
  void backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                std::span<double> grad) const;

  // Checkpoint: one text header line with topology and schedule, then the
  // parameters as little-endian float64.
  void save(const std::filesystem::path& path) const;
  static DenoiserNet load(const std::filesystem::path& path);

 private:
  void embed(const Eigen::MatrixXd& x, const Eigen::VectorXd& sigma,
             Eigen::MatrixXd& input) const;
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

  NetTopology topo_;
  NoiseSchedule schedule_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
};

// A scalar loss assembled from groups of denoiser queries. Group g issues
// queries(g) evaluations D(x_j, t_j); its contribution depends only on those
// outputs. Samples feeding the queries are treated as constants.
class LossEvaluator {
 public:
  virtual ~LossEvaluator() = default;
  virtual std::size_t groups() const = 0;
  virtual std::size_t queries(std::size_t g) const = 0;
  virtual void fill(std::size_t g, Eigen::Ref<Eigen::MatrixXd> x,
                    Eigen::Ref<Eigen::VectorXd> t) const = 0;
  // Returns the group's loss and writes d loss / d outputs.
  virtual double loss(std::size_t g, const Eigen::Ref<const Eigen::MatrixXd>& out,
                      Eigen::Ref<Eigen::MatrixXd> d_out) const = 0;
  // Direct dependence on the parameters, e.g. a weight penalty.
  virtual double parameter_term(std::span<const double> /*params*/,
                                std::span<double> /*grad*/) const {
    return 0.0;
  }
};

struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// Groups are processed in fixed chunks of `kGradChunk` and the chunk results
// are summed in index order, so the result does not depend on thread count.
inline constexpr std::size_t kGradChunk = 64;

LossGrad grad_params(const DenoiserNet& net, const LossEvaluator& loss);
LossGrad grad_params_serial(const DenoiserNet& net, const LossEvaluator& loss);
double loss_value(const DenoiserNet& net, const LossEvaluator& loss);

}  // namespace sfbd
