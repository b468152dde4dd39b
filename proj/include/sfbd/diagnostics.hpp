#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sfbd/dataset.hpp"
#include "sfbd/distributions.hpp"
#include "sfbd/schedule.hpp"

namespace sfbd {

// ---- characteristic functions -------------------------------------------

struct CfProbe {
  std::vector<Eigen::VectorXd> u;
  std::vector<std::complex<double>> value;
  // 1/sqrt(n): bounds the standard error of both real and imaginary parts.
  std::vector<double> std_error;
};

CfProbe empirical_cf(const Dataset& samples, const std::vector<Eigen::VectorXd>& u);
std::complex<double> gaussian_cf(const GaussianComponent& g, const Eigen::VectorXd& u);

struct BoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double slack = 0.0;  // rhs - lhs
};

inline constexpr double kBoundTolerance = 1e-9;

// Closed-form KL(p || q) between Gaussians.
double gaussian_kl(const GaussianComponent& p, const GaussianComponent& q);

// |Phi_p(u) - Phi_q(u)| <= exp(sigma^2 |u|^2 / 2) sqrt(2 KL(p*h || q*h)) with
// h = N(0, sigma^2 I). Both specs must be of the gaussian family, otherwise
// DomainError.
BoundReport check_prop31(const DistributionSpec& p, const DistributionSpec& q,
                         double sigma_zeta, const Eigen::VectorXd& u);

struct Prop31Case {
  GaussianComponent p, q;
  double sigma_zeta = 0.0;
  Eigen::VectorXd u;
};
// 1-D cases: means in [-2, 2], variances in [0.5, 2], sigma from
// {0.1, 0.2, 0.59}, u in [-3, 3]. Case i uses stream (seed, "prop31", i).
std::vector<Prop31Case> prop31_grid(std::size_t count, std::uint64_t seed);
BoundReport check_prop31(const Prop31Case& c);

// ---- divergence and distance estimators ---------------------------------

struct KlEstimate {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double std_error = 0.0;
};

// k-nearest-neighbour estimate of KL(p || q):
//   (d/n) sum_i log(nu_k(i) / rho_k(i)) + log(m / (n - 1))
// with rho_k(i) the distance from x_i to its k-th neighbour among the other
// p points and nu_k(i) the distance to its k-th neighbour in q. Distances are
// floored at 1e-12 so duplicated points stay finite.
//
// Interval: replicate b recomputes the estimate on random halves of p and q
// (drawn without replacement from stream (seed, "bootstrap", b)). The spread
// of half-sample estimates matches the sampling variance of the full-size
// estimate, and covers the randomness of both sets. The reported 95%
// interval is the value shifted by the replicates' centred 2.5/97.5
// percentiles; std_error is their standard deviation.
KlEstimate kl_knn(const Dataset& p, const Dataset& q, std::size_t k = 5,
                  std::size_t bootstrap = 200, std::uint64_t seed = 0);
KlEstimate kl_knn_serial(const Dataset& p, const Dataset& q, std::size_t k = 5,
                         std::size_t bootstrap = 200, std::uint64_t seed = 0);
// Point estimate by exhaustive neighbour search, used as the test reference.
double kl_knn_bruteforce(const Dataset& p, const Dataset& q, std::size_t k = 5);

// Monte-Carlo form of the identifiability bound for sample sets: lhs from
// empirical CFs, rhs from kl_knn on the two sets convolved with h.
// holds compares lhs - 3 se against rhs evaluated at the upper KL bound.
BoundReport check_prop31_mc(const Dataset& p, const Dataset& q, double sigma_zeta,
                            const Eigen::VectorXd& u, std::uint64_t seed);

struct MmdEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Squared MMD with k(x, y) = exp(-|x - y|^2 / (2 h^2)). The unbiased form
// drops the diagonal terms; std_error is the first-order delta-method value.
MmdEstimate mmd(const Dataset& p, const Dataset& q, double bandwidth, bool unbiased = true);
MmdEstimate mmd_serial(const Dataset& p, const Dataset& q, double bandwidth,
                       bool unbiased = true);
// Median pairwise distance over the pooled first `max_points` points of p
// and of q (either may be empty).
double median_heuristic(const Dataset& p, const Dataset& q, std::size_t max_points = 1000);

struct GaussianFitKl {
  double kl = 0.0;
  bool ridged = false;
};
// KL(truth || N(sample mean, sample covariance)); adds 1e-9 I when the fitted
// covariance is singular and sets `ridged`.
GaussianFitKl gaussian_fit_kl(const Dataset& samples, const GaussianComponent& truth);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};
// One-sample Kolmogorov-Smirnov test of 1-D samples against N(mean, sd^2).
KsResult ks_test_normal(std::span<const double> x, double mean = 0.0, double sd = 1.0);
// Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

// ---- analytic Gaussian SFBD ---------------------------------------------

// Gauss-Legendre nodes and weights on [a, b].
void gauss_legendre(std::size_t n, double a, double b, std::vector<double>& x,
                    std::vector<double>& w);

// 1-D SFBD with exact denoisers and p_data = N(mu, s2): the model after
// iteration k is N(mean[k], var[k]) and p_0^(k+1) is obtained by backward
// sampling p_data * h with the exact score of that model. Entry 0 is the
// pretrained model.
struct GaussianSfbdTrace {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> kl;          // KL(p_data || model k)
  std::vector<double> kl_noisy;    // KL(p_data * h || model k * h)
};
GaussianSfbdTrace analytic_gaussian_sfbd(double mu, double s2, double m0, double v0,
                                         double sigma_zeta, std::size_t iterations);

// M_0 = 1/2 int_0^zeta g(t)^2 E_{p*_t} |grad log p*_t - s_0|^2 dt for
// p_data = N(mu, s2) and the exact score of the pretrained model N(m0, v0),
// by `nodes`-point Gauss-Legendre quadrature.
double m0_gaussian(double mu, double s2, double m0, double v0, double zeta,
                   const NoiseSchedule& schedule, std::size_t nodes = 64);

// min_{k=1..K} |Phi_data(u) - Phi_{p_0^(k)}(u)| against
// exp(sigma^2 u^2 / 2) sqrt(2 M_0 / K), for K = 1..iterations.
std::vector<BoundReport> prop51_cf_bound(const GaussianSfbdTrace& trace, double mu,
                                         double s2, double sigma_zeta, double m0_value,
                                         double u);

}  // namespace sfbd
