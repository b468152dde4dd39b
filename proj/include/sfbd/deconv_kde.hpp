#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sfbd/distributions.hpp"

namespace sfbd {

// 1-D deconvolving kernel density estimation for y = x + sigma_zeta * eps.

enum class CfShape { polynomial_cubed };
enum class BandwidthRule { paper_log, fixed, normal_reference };

struct DeconvKernelSpec {
  // Kernel CF phi_K(t) = (1 - (t/B)^2)^3 on [-B, B], zero outside.
  double cf_support = 0.5;
  CfShape cf_shape = CfShape::polynomial_cubed;
  BandwidthRule rule = BandwidthRule::paper_log;
  double fixed_bandwidth = 0.1;
  // Simpson nodes on [-B, B] (odd).
  std::size_t quadrature_points = 4097;
  // Spacing in u of the cubic Hermite kernel table.
  double table_step = 0.01;
  // Post-processing only; the raw estimate may be negative.
  bool clip_negative = false;

  void validate() const;
  double cf(double t) const;
  // Second moment of the kernel, -phi_K''(0).
  double kernel_mu2() const;
  // Integral of K^2.
  double kernel_roughness() const;
};

// paper_log: sigma_zeta / sqrt(log n); fixed: the configured constant;
// normal_reference: AMISE-optimal bandwidth for the kernel when the target is
// N(., data_sd^2). DomainError when n < 3, or sigma_zeta <= 0 under paper_log.
double bandwidth(std::size_t n, double sigma_zeta, const DeconvKernelSpec& spec,
                 double data_sd = 1.0);

// K_lambda(u) = (1/2pi) int e^{-itu} phi_K(t) / phi_h(t/lambda) dt with
// phi_h(t) = exp(-sigma^2 t^2 / 2). Values for |u| <= u_max come from a cubic
// Hermite table built by Simpson quadrature; larger |u| fall back to direct
// quadrature. NumericError when the integrand overflows.
class DeconvKernel {
 public:
  DeconvKernel(const DeconvKernelSpec& spec, double sigma_zeta, double lambda, double u_max);

  double operator()(double u) const;
  // Direct quadrature without the table.
  double exact(double u) const;
  double exact_derivative(double u) const;

  double lambda() const { return lambda_; }
  double u_max() const { return u_max_; }

 private:
  std::vector<double> t_, w_;  // half-range Simpson nodes and weights times the CF ratio
  std::vector<double> k_, dk_;
  double lambda_, step_, u_max_;
};

struct DeconvEstimate {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  std::size_t n = 0;
};

// Uniform grid of `points` nodes on [lo, hi].
std::vector<double> uniform_grid(double lo, double hi, std::size_t points);

// p(x) = (1 / (n lambda)) sum_j K_lambda((x - y_j) / lambda), parallel over
// grid points. The bandwidth comes from the spec's rule unless given.
DeconvEstimate deconv_estimate(std::span<const double> y, double sigma_zeta,
                               const DeconvKernelSpec& spec, std::span<const double> grid);
DeconvEstimate deconv_estimate(std::span<const double> y, double sigma_zeta,
                               const DeconvKernelSpec& spec, std::span<const double> grid,
                               double lambda);
DeconvEstimate deconv_estimate(std::span<const double> y, const DeconvKernel& kernel,
                               std::span<const double> grid, bool clip_negative = false);
DeconvEstimate deconv_estimate_serial(std::span<const double> y, const DeconvKernel& kernel,
                                      std::span<const double> grid,
                                      bool clip_negative = false);

// Same estimate through the empirical CF:
//   p(x) = (1/2pi) int e^{-itx} Phi_n(t) phi_K(lambda t) / phi_h(t) dt.
DeconvEstimate deconv_estimate_fourier(std::span<const double> y, double sigma_zeta,
                                       const DeconvKernelSpec& spec,
                                       std::span<const double> grid, double lambda);

// Gaussian-kernel KDE of the raw samples.
DeconvEstimate kde_gaussian(std::span<const double> y, double h, std::span<const double> grid);

// Density of a 1-D mixture.
double mixture_pdf(const MixtureModel& m, double x);
// Range holding all but 1e-6 of the mass (1e-6 / 2 in each tail).
std::pair<double, double> mixture_support(const MixtureModel& m);

// Integrated squared error by the trapezoid rule on the estimate's grid.
// DomainError unless the grid covers mixture_support(truth).
double ise(const DeconvEstimate& est, const MixtureModel& truth);

struct MiseResult {
  double mean = 0.0;
  double std_error = 0.0;
  double bandwidth = 0.0;
};

// R replicates; replicate r draws n clean points with seed
// stream_seed(seed, "replicate", r) and adds N(0, sigma_zeta^2) noise.
// normal_reference uses the truth's standard deviation.
MiseResult mise_mc(const DistributionSpec& truth, double sigma_zeta, std::size_t n,
                   std::size_t replicates, const DeconvKernelSpec& spec,
                   std::span<const double> grid, std::uint64_t seed);

struct RateRow {
  std::size_t n = 0;
  double mise_mean = 0.0;
  double mise_stderr = 0.0;
  double bandwidth = 0.0;
};

struct RateSweep {
  std::vector<RateRow> rows;
  // Least squares fits of log MISE against log log n (MISE ~ a (log n)^-b)
  // and against log n (MISE ~ c n^-p).
  double log_exponent = 0.0;
  double poly_exponent = 0.0;
};

// n_list strictly increasing with at least three entries (ValidationError).
// The seed of size index i is stream_seed(seed, "sweep", i).
RateSweep rate_sweep(const DistributionSpec& truth, double sigma_zeta,
                     const std::vector<std::size_t>& n_list, std::size_t replicates,
                     const DeconvKernelSpec& spec, std::span<const double> grid,
                     std::uint64_t seed);

// Slope of the least squares line through (x_i, y_i).
double ls_slope(std::span<const double> x, std::span<const double> y);

// Columns n, mise_mean, mise_stderr, bandwidth.
void write_rate_csv(const RateSweep& sweep, const std::filesystem::path& path);

}  // namespace sfbd
