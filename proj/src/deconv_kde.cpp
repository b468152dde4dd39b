#include "sfbd/deconv_kde.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <optional>

#include "sfbd/data_io.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"

namespace sfbd {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxExponent = 700.0;

// Simpson nodes and weights on [0, b] with `intervals` (even) subintervals.
void simpson(double b, std::size_t intervals, std::vector<double>& t, std::vector<double>& w) {
  const double h = b / static_cast<double>(intervals);
  t.resize(intervals + 1);
  w.resize(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) {
    t[i] = h * static_cast<double>(i);
    const double c = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    w[i] = c * h / 3.0;
  }
}

void check_exponent(double sigma_zeta, double b, double lambda) {
  const double e = 0.5 * sigma_zeta * sigma_zeta * b * b / (lambda * lambda);
  if (!(e <= kMaxExponent))
    throw NumericError("deconvolving kernel overflows for bandwidth " + std::to_string(lambda) +
                           "; use a larger bandwidth",
                       0);
}

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw DomainError("deconv: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw NumericError("deconv: non-finite grid node", i);
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw DomainError("deconv: grid must be strictly increasing");
  }
}

void check_samples(std::span<const double> y) {
  if (y.empty()) throw DomainError("deconv: no samples");
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!std::isfinite(y[i])) throw NumericError("deconv: non-finite sample", i);
}

double required_u_max(std::span<const double> y, std::span<const double> grid, double lambda) {
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  const double span = std::max(std::abs(grid.back() - *ymin), std::abs(*ymax - grid.front()));
  return span / lambda;
}

void finish(DeconvEstimate& est, bool clip) {
  if (clip)
    for (double& v : est.density) v = std::max(v, 0.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

void DeconvKernelSpec::validate() const {
  if (!(cf_support > 0.0 && cf_support < 1.0))
    throw ValidationError("deconv.cf_support", "must lie in (0, 1)");
  if (rule == BandwidthRule::fixed && !(fixed_bandwidth > 0.0 && std::isfinite(fixed_bandwidth)))
    throw ValidationError("deconv.fixed_bandwidth", "must be positive");
  if (quadrature_points < 5 || quadrature_points % 4 != 1)
    throw ValidationError("deconv.quadrature_points", "must be 4m + 1 with m >= 1");
  if (!(table_step > 0.0 && table_step <= 0.5))
    throw ValidationError("deconv.table_step", "must lie in (0, 0.5]");
}

double DeconvKernelSpec::cf(double t) const {
  const double s = t / cf_support;
  if (std::abs(s) >= 1.0) return 0.0;
  const double a = 1.0 - s * s;
  return a * a * a;
}

double DeconvKernelSpec::kernel_mu2() const { return 6.0 / (cf_support * cf_support); }

double DeconvKernelSpec::kernel_roughness() const {
  // int_{-1}^{1} (1 - s^2)^6 ds by the binomial expansion.
  static constexpr double binom[] = {1, 6, 15, 20, 15, 6, 1};
  double s = 0.0;
  for (int k = 0; k <= 6; ++k) s += (k % 2 ? -1.0 : 1.0) * binom[k] / (2.0 * k + 1.0);
  return cf_support * 2.0 * s / (2.0 * kPi);
}

double bandwidth(std::size_t n, double sigma_zeta, const DeconvKernelSpec& spec,
                 double data_sd) {
  spec.validate();
  if (n < 3) throw DomainError("bandwidth: need n >= 3 so that log n > 1");
  switch (spec.rule) {
    case BandwidthRule::paper_log:
      if (!(sigma_zeta > 0.0))
        throw DomainError("bandwidth: the log rule needs sigma_zeta > 0");
      return sigma_zeta / std::sqrt(std::log(static_cast<double>(n)));
    case BandwidthRule::fixed:
      return spec.fixed_bandwidth;
    case BandwidthRule::normal_reference: {
      if (!(data_sd > 0.0)) throw DomainError("bandwidth: data_sd must be positive");
      const double rf2 = 3.0 / (8.0 * std::sqrt(kPi) * std::pow(data_sd, 5));
      const double mu2 = spec.kernel_mu2();
      return std::pow(spec.kernel_roughness() / (mu2 * mu2 * rf2 * static_cast<double>(n)),
                      0.2);
    }
  }
  throw DomainError("bandwidth: unknown rule");
}

DeconvKernel::DeconvKernel(const DeconvKernelSpec& spec, double sigma_zeta, double lambda,
                           double u_max)
    : lambda_(lambda), step_(spec.table_step), u_max_(0.0) {
  spec.validate();
  if (!(sigma_zeta >= 0.0)) throw DomainError("deconv: sigma_zeta must be >= 0");
  if (!(lambda > 0.0 && std::isfinite(lambda))) throw DomainError("deconv: bandwidth must be positive");
  if (!(u_max >= 0.0 && std::isfinite(u_max))) throw DomainError("deconv: bad table range");
  check_exponent(sigma_zeta, spec.cf_support, lambda);

  simpson(spec.cf_support, (spec.quadrature_points - 1) / 2, t_, w_);
  const double c = 0.5 * sigma_zeta * sigma_zeta / (lambda * lambda);
  for (std::size_t i = 0; i < t_.size(); ++i)
    w_[i] *= spec.cf(t_[i]) * std::exp(c * t_[i] * t_[i]) / kPi;

  const std::size_t entries = static_cast<std::size_t>(std::ceil(u_max / step_)) + 2;
  k_.assign(entries, 0.0);
  dk_.assign(entries, 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < entries; ++j) {
    const double u = step_ * static_cast<double>(j);
    k_[j] = exact(u);
    dk_[j] = exact_derivative(u);
  }
  for (std::size_t j = 0; j < entries; ++j)
    if (!std::isfinite(k_[j]) || !std::isfinite(dk_[j]))
      throw NumericError("deconvolving kernel is not finite; use a larger bandwidth", j);
  u_max_ = step_ * static_cast<double>(entries - 1);
}

double DeconvKernel::exact(double u) const {
  // cos(t_i u) by rotation; t_i = i h.
  const double h = t_.size() > 1 ? t_[1] : 0.0;
  const std::complex<double> rot(std::cos(h * u), std::sin(h * u));
  std::complex<double> z(1.0, 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < t_.size(); ++i) {
    s += w_[i] * z.real();
    z *= rot;
  }
  return s;
}

double DeconvKernel::exact_derivative(double u) const {
  const double h = t_.size() > 1 ? t_[1] : 0.0;
  const std::complex<double> rot(std::cos(h * u), std::sin(h * u));
  std::complex<double> z(1.0, 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < t_.size(); ++i) {
    s -= w_[i] * t_[i] * z.imag();
    z *= rot;
  }
  return s;
}

double DeconvKernel::operator()(double u) const {
  const double a = std::abs(u);
  if (!(a < u_max_)) return exact(a);
  const double x = a / step_;
  const std::size_t j = static_cast<std::size_t>(x);
  const double s = x - static_cast<double>(j);
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * k_[j] + (s3 - 2 * s2 + s) * step_ * dk_[j] +
         (-2 * s3 + 3 * s2) * k_[j + 1] + (s3 - s2) * step_ * dk_[j + 1];
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
  if (points < 2 || !(hi > lo)) throw DomainError("uniform_grid: need hi > lo and >= 2 points");
  std::vector<double> g(points);
  const double h = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = lo + h * static_cast<double>(i);
  g.back() = hi;
  return g;
}

DeconvEstimate deconv_estimate(std::span<const double> y, const DeconvKernel& kernel,
                               std::span<const double> grid, bool clip_negative) {
  check_samples(y);
  check_grid(grid);
  DeconvEstimate est{{grid.begin(), grid.end()}, std::vector<double>(grid.size()),
                     kernel.lambda(), y.size()};
  const double lam = kernel.lambda();
  const double scale = 1.0 / (static_cast<double>(y.size()) * lam);
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (double yj : y) s += kernel((grid[i] - yj) / lam);
    est.density[i] = s * scale;
  }
  finish(est, clip_negative);
  return est;
}

DeconvEstimate deconv_estimate_serial(std::span<const double> y, const DeconvKernel& kernel,
                                      std::span<const double> grid, bool clip_negative) {
  check_samples(y);
  check_grid(grid);
  DeconvEstimate est{{grid.begin(), grid.end()}, std::vector<double>(grid.size()),
                     kernel.lambda(), y.size()};
  const double lam = kernel.lambda();
  const double scale = 1.0 / (static_cast<double>(y.size()) * lam);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double s = 0.0;
    for (double yj : y) s += kernel((grid[i] - yj) / lam);
    est.density[i] = s * scale;
  }
  finish(est, clip_negative);
  return est;
}

DeconvEstimate deconv_estimate(std::span<const double> y, double sigma_zeta,
                               const DeconvKernelSpec& spec, std::span<const double> grid,
                               double lambda) {
  check_samples(y);
  check_grid(grid);
  const DeconvKernel kernel(spec, sigma_zeta, lambda, required_u_max(y, grid, lambda));
  return deconv_estimate(y, kernel, grid, spec.clip_negative);
}

DeconvEstimate deconv_estimate(std::span<const double> y, double sigma_zeta,
                               const DeconvKernelSpec& spec, std::span<const double> grid) {
  double sd = 1.0;
  if (spec.rule == BandwidthRule::normal_reference && y.size() > 1) {
    double m = 0.0, v = 0.0;
    for (double yj : y) m += yj;
    m /= static_cast<double>(y.size());
    for (double yj : y) v += (yj - m) * (yj - m);
    v = v / static_cast<double>(y.size() - 1) - sigma_zeta * sigma_zeta;
    sd = v > 0.0 ? std::sqrt(v) : 1e-3;
  }
  return deconv_estimate(y, sigma_zeta, spec, grid, bandwidth(y.size(), sigma_zeta, spec, sd));
}

DeconvEstimate deconv_estimate_fourier(std::span<const double> y, double sigma_zeta,
                                       const DeconvKernelSpec& spec,
                                       std::span<const double> grid, double lambda) {
  spec.validate();
  check_samples(y);
  check_grid(grid);
  if (!(sigma_zeta >= 0.0)) throw DomainError("deconv: sigma_zeta must be >= 0");
  if (!(lambda > 0.0)) throw DomainError("deconv: bandwidth must be positive");
  check_exponent(sigma_zeta, spec.cf_support, lambda);

  std::vector<double> t, w;
  simpson(spec.cf_support / lambda, (spec.quadrature_points - 1) / 2, t, w);
  const std::size_t nt = t.size();
  const double h = t[1];
  // Empirical CF Phi_n(t_i) = C_i + i S_i.
  std::vector<double> c(nt, 0.0), s(nt, 0.0);
  for (double yj : y) {
    const std::complex<double> rot(std::cos(h * yj), std::sin(h * yj));
    std::complex<double> z(1.0, 0.0);
    for (std::size_t i = 0; i < nt; ++i) {
      c[i] += z.real();
      s[i] += z.imag();
      z *= rot;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(y.size());
  for (std::size_t i = 0; i < nt; ++i) {
    const double r = w[i] * spec.cf(lambda * t[i]) *
                     std::exp(0.5 * sigma_zeta * sigma_zeta * t[i] * t[i]) * inv_n / kPi;
    c[i] *= r;
    s[i] *= r;
  }
  DeconvEstimate est{{grid.begin(), grid.end()}, std::vector<double>(grid.size()), lambda,
                     y.size()};
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const std::complex<double> rot(std::cos(h * grid[g]), std::sin(h * grid[g]));
    std::complex<double> z(1.0, 0.0);
    double v = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
      v += z.real() * c[i] + z.imag() * s[i];
      z *= rot;
    }
    est.density[g] = v;
  }
  finish(est, spec.clip_negative);
  return est;
}

DeconvEstimate kde_gaussian(std::span<const double> y, double h, std::span<const double> grid) {
  check_samples(y);
  check_grid(grid);
  if (!(h > 0.0)) throw DomainError("kde: bandwidth must be positive");
  DeconvEstimate est{{grid.begin(), grid.end()}, std::vector<double>(grid.size()), h, y.size()};
  const double scale = 1.0 / (static_cast<double>(y.size()) * h * std::sqrt(2.0 * kPi));
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (double yj : y) {
      const double u = (grid[i] - yj) / h;
      s += std::exp(-0.5 * u * u);
    }
    est.density[i] = s * scale;
  }
  return est;
}

double mixture_pdf(const MixtureModel& m, double x) {
  if (m.dim() != 1) throw ShapeError("mixture_pdf: 1-D mixture required");
  double p = 0.0;
  for (std::size_t c = 0; c < m.components.size(); ++c) {
    const double mu = m.components[c].mean(0), v = m.components[c].cov(0, 0);
    p += m.weights[c] * std::exp(-0.5 * (x - mu) * (x - mu) / v) / std::sqrt(2.0 * kPi * v);
  }
  return p;
}

std::pair<double, double> mixture_support(const MixtureModel& m) {
  if (m.dim() != 1) throw ShapeError("mixture_support: 1-D mixture required");
  double lo = 0.0, hi = 0.0, smax = 0.0;
  bool first = true;
  for (const auto& c : m.components) {
    const double mu = c.mean(0);
    lo = first ? mu : std::min(lo, mu);
    hi = first ? mu : std::max(hi, mu);
    smax = std::max(smax, std::sqrt(c.cov(0, 0)));
    first = false;
  }
  lo -= 10.0 * smax;
  hi += 10.0 * smax;
  auto cdf = [&](double x) {
    double p = 0.0;
    for (std::size_t c = 0; c < m.components.size(); ++c)
      p += m.weights[c] * normal_cdf((x - m.components[c].mean(0)) /
                                     std::sqrt(m.components[c].cov(0, 0)));
    return p;
  };
  auto quantile = [&](double q) {
    double a = lo, b = hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      (cdf(mid) < q ? a : b) = mid;
    }
    return 0.5 * (a + b);
  };
  return {quantile(0.5e-6), quantile(1.0 - 0.5e-6)};
}

double ise(const DeconvEstimate& est, const MixtureModel& truth) {
  if (est.grid.size() != est.density.size() || est.grid.size() < 2)
    throw ShapeError("ise: grid and density sizes differ");
  const auto [lo, hi] = mixture_support(truth);
  if (est.grid.front() > lo || est.grid.back() < hi)
    throw DomainError("ise: grid does not cover the truth's 1 - 1e-6 mass range");
  double s = 0.0;
  double prev = est.density[0] - mixture_pdf(truth, est.grid[0]);
  prev *= prev;
  for (std::size_t i = 1; i < est.grid.size(); ++i) {
    double d = est.density[i] - mixture_pdf(truth, est.grid[i]);
    d *= d;
    s += 0.5 * (prev + d) * (est.grid[i] - est.grid[i - 1]);
    prev = d;
  }
  return s;
}

MiseResult mise_mc(const DistributionSpec& truth, double sigma_zeta, std::size_t n,
                   std::size_t replicates, const DeconvKernelSpec& spec,
                   std::span<const double> grid, std::uint64_t seed) {
  spec.validate();
  check_grid(grid);
  if (replicates == 0) throw DomainError("mise_mc: need at least one replicate");
  if (!(sigma_zeta >= 0.0)) throw DomainError("mise_mc: sigma_zeta must be >= 0");
  const auto model = truth.mixture();
  if (!model || model->dim() != 1) throw DomainError("mise_mc: truth must be a 1-D mixture");

  double mean = 0.0, var = 0.0;
  for (std::size_t c = 0; c < model->components.size(); ++c) {
    const double mu = model->components[c].mean(0);
    mean += model->weights[c] * mu;
    var += model->weights[c] * (model->components[c].cov(0, 0) + mu * mu);
  }
  var -= mean * mean;
  const double lam = bandwidth(n, sigma_zeta, spec, std::sqrt(var));

  std::vector<double> err(replicates);
  std::optional<DeconvKernel> kernel;
  for (std::size_t r = 0; r < replicates; ++r) {
    const std::uint64_t rs = stream_seed(seed, "replicate", r);
    Dataset clean = sample_distribution(truth, n, rs);
    std::vector<double> y(clean.points);
    for (std::size_t i = 0; i < n; ++i) {
      Stream rng(rs, "noise", i);
      y[i] += sigma_zeta * rng.normal();
    }
    const double need = required_u_max(y, grid, lam);
    if (!kernel || kernel->u_max() < need) kernel.emplace(spec, sigma_zeta, lam, 1.25 * need);
    err[r] = ise(deconv_estimate(y, *kernel, grid, spec.clip_negative), *model);
  }
  MiseResult out;
  out.bandwidth = lam;
  for (double e : err) out.mean += e;
  out.mean /= static_cast<double>(replicates);
  if (replicates > 1) {
    double v = 0.0;
    for (double e : err) v += (e - out.mean) * (e - out.mean);
    out.std_error = std::sqrt(v / static_cast<double>(replicates - 1) /
                              static_cast<double>(replicates));
  }
  return out;
}

double ls_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("ls_slope: need two paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("ls_slope: x values are all equal");
  return sxy / sxx;
}

RateSweep rate_sweep(const DistributionSpec& truth, double sigma_zeta,
                     const std::vector<std::size_t>& n_list, std::size_t replicates,
                     const DeconvKernelSpec& spec, std::span<const double> grid,
                     std::uint64_t seed) {
  if (n_list.size() < 3) throw ValidationError("rate.n_list", "needs at least three sizes");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1])
      throw ValidationError("rate.n_list", "must be strictly increasing");
  RateSweep out;
  std::vector<double> ln, lln, lm;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const MiseResult r = mise_mc(truth, sigma_zeta, n_list[i], replicates, spec, grid,
                                 stream_seed(seed, "sweep", i));
    out.rows.push_back({n_list[i], r.mean, r.std_error, r.bandwidth});
    const double l = std::log(static_cast<double>(n_list[i]));
    ln.push_back(l);
    lln.push_back(std::log(l));
    lm.push_back(std::log(r.mean));
  }
  out.log_exponent = -ls_slope(lln, lm);
  out.poly_exponent = -ls_slope(ln, lm);
  return out;
}

void write_rate_csv(const RateSweep& sweep, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path.string());
  f << "n,mise_mean,mise_stderr,bandwidth\n";
  for (const RateRow& r : sweep.rows)
    f << r.n << ',' << format_double(r.mise_mean) << ',' << format_double(r.mise_stderr) << ','
      << format_double(r.bandwidth) << '\n';
  if (!f) throw FormatError("write failed for " + path.string());
}

}  // namespace sfbd
