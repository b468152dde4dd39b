#include "sfbd/denoiser.hpp"

#include <cmath>

#include "sfbd/errors.hpp"

namespace sfbd {

GaussianDenoiser::GaussianDenoiser(Eigen::VectorXd mean, Eigen::MatrixXd cov,
                                   NoiseSchedule schedule)
    : mean_(std::move(mean)), cov_(std::move(cov)), schedule_(schedule) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
    throw ShapeError("GaussianDenoiser: covariance shape mismatch");
}

void GaussianDenoiser::denoise_batch(const Eigen::MatrixXd& x, double t,
                                     Eigen::MatrixXd& out) const {
  if (x.rows() != mean_.size()) throw ShapeError("GaussianDenoiser: dimension mismatch");
  const Eigen::Index d = mean_.size();
  const double s = schedule_.sigma(t);
  const Eigen::MatrixXd a = cov_ + s * s * Eigen::MatrixXd::Identity(d, d);
  // gain = cov * a^{-1}; a is SPD, so solve a * gain^T = cov^T.
  const Eigen::MatrixXd gain = a.llt().solve(cov_).transpose();
  out = gain * (x.colwise() - mean_);
  out.colwise() += mean_;
}

MixtureDenoiser::MixtureDenoiser(MixtureModel model, NoiseSchedule schedule)
    : model_(std::move(model)), schedule_(schedule) {
  if (model_.components.empty() || model_.weights.size() != model_.components.size())
    throw ShapeError("MixtureDenoiser: malformed mixture");
}

void MixtureDenoiser::denoise_batch(const Eigen::MatrixXd& x, double t,
                                    Eigen::MatrixXd& out) const {
  const auto d = static_cast<Eigen::Index>(model_.dim());
  if (x.rows() != d) throw ShapeError("MixtureDenoiser: dimension mismatch");
  const std::size_t k = model_.components.size();
  const double s = schedule_.sigma(t);
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
  std::vector<Eigen::MatrixXd> gains;
  std::vector<double> log_norm;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& comp = model_.components[c];
    Eigen::MatrixXd a = comp.cov + s * s * Eigen::MatrixXd::Identity(d, d);
    llts.emplace_back(a);
    gains.push_back(llts.back().solve(comp.cov).transpose());
    const Eigen::MatrixXd l = llts.back().matrixL();
    log_norm.push_back(std::log(model_.weights[c]) - l.diagonal().array().log().sum());
  }
  out.resize(d, x.cols());
  std::vector<double> logw(k);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < k; ++c) {
      const Eigen::VectorXd r = x.col(j) - model_.components[c].mean;
      const Eigen::VectorXd z = llts[c].matrixL().solve(r);
      logw[c] = log_norm[c] - 0.5 * z.squaredNorm();
      mx = std::max(mx, logw[c]);
    }
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += (logw[c] = std::exp(logw[c] - mx));
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (std::size_t c = 0; c < k; ++c) {
      const auto& mu = model_.components[c].mean;
      acc += (logw[c] / total) * (mu + gains[c] * (x.col(j) - mu));
    }
    out.col(j) = acc;
  }
}

}  // namespace sfbd
