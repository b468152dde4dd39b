#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "sfbd/distributions.hpp"
#include "sfbd/schedule.hpp"

namespace sfbd {

// Anything that maps a batch of noisy points (columns of x) at time t to
// estimates of E[x0 | x_t].
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::size_t dim() const = 0;
  virtual void denoise_batch(const Eigen::MatrixXd& x, double t,
                             Eigen::MatrixXd& out) const = 0;
};

// Closed-form posterior means under a known p0 and x_t = x0 + sigma(t) * eps.

class GaussianDenoiser : public Denoiser {
 public:
  GaussianDenoiser(Eigen::VectorXd mean, Eigen::MatrixXd cov, NoiseSchedule schedule = {});
  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }
  void denoise_batch(const Eigen::MatrixXd& x, double t, Eigen::MatrixXd& out) const override;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  NoiseSchedule schedule_;
};

class MixtureDenoiser : public Denoiser {
 public:
  explicit MixtureDenoiser(MixtureModel model, NoiseSchedule schedule = {});
  std::size_t dim() const override { return model_.dim(); }
  void denoise_batch(const Eigen::MatrixXd& x, double t, Eigen::MatrixXd& out) const override;

 private:
  MixtureModel model_;
  NoiseSchedule schedule_;
};

class IdentityDenoiser : public Denoiser {
 public:
  explicit IdentityDenoiser(std::size_t d) : d_(d) {}
  std::size_t dim() const override { return d_; }
  void denoise_batch(const Eigen::MatrixXd& x, double, Eigen::MatrixXd& out) const override {
    out = x;
  }

 private:
  std::size_t d_;
};

class ConstantDenoiser : public Denoiser {
 public:
  explicit ConstantDenoiser(Eigen::VectorXd value) : value_(std::move(value)) {}
  std::size_t dim() const override { return static_cast<std::size_t>(value_.size()); }
  void denoise_batch(const Eigen::MatrixXd& x, double, Eigen::MatrixXd& out) const override {
    out = value_.replicate(1, x.cols());
  }

 private:
  Eigen::VectorXd value_;
};

}  // namespace sfbd
