#include "sfbd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"

namespace sfbd {

CfProbe empirical_cf(const Dataset& samples, const std::vector<Eigen::VectorXd>& u) {
  if (samples.empty()) throw DomainError("empirical_cf: empty sample set");
  const auto x = samples.matrix();
  const double n = static_cast<double>(samples.size());
  CfProbe probe;
  probe.u = u;
  for (const auto& v : u) {
    if (static_cast<std::size_t>(v.size()) != samples.dim)
      throw ShapeError("empirical_cf: frequency dimension mismatch");
    double re = 0.0, im = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double a = v.dot(x.col(j));
      re += std::cos(a);
      im += std::sin(a);
    }
    probe.value.emplace_back(re / n, im / n);
    probe.std_error.push_back(1.0 / std::sqrt(n));
  }
  return probe;
}

std::complex<double> gaussian_cf(const GaussianComponent& g, const Eigen::VectorXd& u) {
  const double phase = u.dot(g.mean);
  const double mag = std::exp(-0.5 * u.dot(g.cov * u));
  return std::polar(mag, phase);
}

double gaussian_kl(const GaussianComponent& p, const GaussianComponent& q) {
  const auto d = static_cast<double>(p.mean.size());
  Eigen::LLT<Eigen::MatrixXd> lq(q.cov), lp(p.cov);
  if (lq.info() != Eigen::Success || lp.info() != Eigen::Success)
    throw DomainError("gaussian_kl: covariance not positive definite");
  const Eigen::VectorXd diff = q.mean - p.mean;
  const double trace = lq.solve(p.cov).trace();
  const double quad = diff.dot(lq.solve(diff));
  const double logdet_q = 2.0 * Eigen::MatrixXd(lq.matrixL()).diagonal().array().log().sum();
  const double logdet_p = 2.0 * Eigen::MatrixXd(lp.matrixL()).diagonal().array().log().sum();
  return 0.5 * (trace + quad - d + logdet_q - logdet_p);
}

namespace {

BoundReport bound(double lhs, double rhs) {
  return {lhs, rhs, lhs <= rhs + kBoundTolerance, rhs - lhs};
}

BoundReport prop31_closed_form(const GaussianComponent& p, const GaussianComponent& q,
                               double sigma, const Eigen::VectorXd& u) {
  if (u.size() != p.mean.size() || q.mean.size() != p.mean.size())
    throw ShapeError("check_prop31: dimension mismatch");
  const double lhs = std::abs(gaussian_cf(p, u) - gaussian_cf(q, u));
  const Eigen::MatrixXd noise =
      sigma * sigma * Eigen::MatrixXd::Identity(u.size(), u.size());
  const double kl = gaussian_kl({p.mean, p.cov + noise}, {q.mean, q.cov + noise});
  const double rhs =
      std::exp(0.5 * sigma * sigma * u.squaredNorm()) * std::sqrt(2.0 * std::max(kl, 0.0));
  return bound(lhs, rhs);
}

}  // namespace

BoundReport check_prop31(const DistributionSpec& p, const DistributionSpec& q,
                         double sigma_zeta, const Eigen::VectorXd& u) {
  if (p.family != Family::gaussian || q.family != Family::gaussian)
    throw DomainError("check_prop31: closed form needs gaussian specs; use check_prop31_mc");
  p.validate();
  q.validate();
  return prop31_closed_form(p.components[0], q.components[0], sigma_zeta, u);
}

std::vector<Prop31Case> prop31_grid(std::size_t count, std::uint64_t seed) {
  static constexpr double kSigmas[] = {0.1, 0.2, 0.59};
  std::vector<Prop31Case> cases;
  for (std::size_t i = 0; i < count; ++i) {
    Stream rng(seed, "prop31", i);
    auto draw = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
    Prop31Case c;
    c.p.mean = Eigen::VectorXd::Constant(1, draw(-2.0, 2.0));
    c.q.mean = Eigen::VectorXd::Constant(1, draw(-2.0, 2.0));
    c.p.cov = Eigen::MatrixXd::Constant(1, 1, draw(0.5, 2.0));
    c.q.cov = Eigen::MatrixXd::Constant(1, 1, draw(0.5, 2.0));
    c.sigma_zeta = kSigmas[rng.below(3)];
    c.u = Eigen::VectorXd::Constant(1, draw(-3.0, 3.0));
    cases.push_back(std::move(c));
  }
  return cases;
}

BoundReport check_prop31(const Prop31Case& c) {
  return prop31_closed_form(c.p, c.q, c.sigma_zeta, c.u);
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

// Points sorted by their first coordinate; k-th neighbour queries sweep
// outwards from the query position and stop once the first-coordinate gap
// alone exceeds the current k-th best distance.
class SweepIndex {
 public:
  SweepIndex(const Dataset& ds, std::span<const std::size_t> rows) : d_(ds.dim) {
    std::vector<std::size_t> order(rows.begin(), rows.end());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ds.points[a * d_] < ds.points[b * d_];
    });
    pts_.reserve(order.size() * d_);
    for (std::size_t r : order)
      pts_.insert(pts_.end(), ds.points.begin() + static_cast<std::ptrdiff_t>(r * d_),
                  ds.points.begin() + static_cast<std::ptrdiff_t>((r + 1) * d_));
  }

  std::size_t size() const { return pts_.size() / d_; }
  const double* point(std::size_t i) const { return pts_.data() + i * d_; }

  // k-th smallest squared distance from x, ignoring sorted position `skip`
  // (pass size() for none). `heap` is scratch space.
  double kth(const double* x, std::size_t k, std::size_t skip, std::vector<double>& heap) const {
    const std::size_t n = size();
    heap.clear();
    auto offer = [&](std::size_t j) {
      const double dist = sq_dist(point(j), x, d_);
      if (heap.size() < k) {
        heap.push_back(dist);
        std::push_heap(heap.begin(), heap.end());
      } else if (dist < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = dist;
        std::push_heap(heap.begin(), heap.end());
      }
    };
    std::size_t hi = lower(x[0]);
    std::size_t lo = hi;  // next candidates: lo - 1 and hi
    bool left = lo > 0, right = hi < n;
    while (left || right) {
      const double full = heap.size() < k ? INFINITY : heap.front();
      if (left) {
        const double g = x[0] - point(lo - 1)[0];
        if (g * g > full) {
          left = false;
        } else {
          if (lo - 1 != skip) offer(lo - 1);
          --lo;
          left = lo > 0;
        }
      }
      const double full2 = heap.size() < k ? INFINITY : heap.front();
      if (right) {
        const double g = point(hi)[0] - x[0];
        if (g * g > full2) {
          right = false;
        } else {
          if (hi != skip) offer(hi);
          ++hi;
          right = hi < n;
        }
      }
    }
    return heap.front();
  }

 private:
  std::size_t lower(double v) const {
    std::size_t a = 0, b = size();
    while (a < b) {
      const std::size_t m = (a + b) / 2;
      if (point(m)[0] < v) a = m + 1; else b = m;
    }
    return a;
  }

  std::size_t d_;
  std::vector<double> pts_;
};

void check_knn_inputs(const Dataset& p, const Dataset& q, std::size_t k,
                      std::size_t bootstrap) {
  if (k == 0) throw DomainError("kl_knn: k must be positive");
  if (p.dim != q.dim) throw ShapeError("kl_knn: dimension mismatch");
  if (p.size() < k + 1 || q.size() < k + 1)
    throw DomainError("kl_knn: both sets need at least k + 1 points");
  if (bootstrap > 0 && (p.size() / 2 < k + 1 || q.size() / 2 < k + 1))
    throw DomainError("kl_knn: half-sample replicates need 2(k + 1) points per set");
}

// Estimate on the given rows of p and q.
double knn_estimate(const Dataset& p, std::span<const std::size_t> prow, const Dataset& q,
                    std::span<const std::size_t> qrow, std::size_t k) {
  const SweepIndex ip(p, prow), iq(q, qrow);
  const std::size_t n = ip.size(), m = iq.size();
  std::vector<double> heap;
  heap.reserve(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = std::max(std::sqrt(ip.kth(ip.point(i), k, i, heap)), 1e-12);
    const double nu = std::max(std::sqrt(iq.kth(ip.point(i), k, m, heap)), 1e-12);
    sum += std::log(nu / rho);
  }
  return static_cast<double>(p.dim) * sum / static_cast<double>(n) +
         std::log(static_cast<double>(m) / static_cast<double>(n - 1));
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

std::vector<std::size_t> half_rows(std::size_t n, Stream& rng) {
  std::vector<std::size_t> r = all_rows(n);
  const std::size_t h = n / 2;
  for (std::size_t i = 0; i < h; ++i) std::swap(r[i], r[i + rng.below(n - i)]);
  r.resize(h);
  std::sort(r.begin(), r.end());
  return r;
}

double half_sample_replicate(const Dataset& p, const Dataset& q, std::size_t k,
                             std::uint64_t seed, std::size_t b) {
  Stream rng(seed, "bootstrap", b);
  const auto pr = half_rows(p.size(), rng);
  const auto qr = half_rows(q.size(), rng);
  return knn_estimate(p, pr, q, qr, k);
}

KlEstimate summarize_knn(double value, std::vector<double> reps) {
  KlEstimate est;
  est.value = value;
  const std::size_t b = reps.size();
  if (b == 0) {
    est.ci_low = est.ci_high = value;
    return est;
  }
  double mu = 0.0;
  for (double v : reps) mu += v;
  mu /= static_cast<double>(b);
  double var = 0.0;
  for (double v : reps) var += (v - mu) * (v - mu);
  est.std_error = b > 1 ? std::sqrt(var / static_cast<double>(b - 1)) : 0.0;
  std::sort(reps.begin(), reps.end());
  auto pct = [&](double q) {
    const double pos = q * static_cast<double>(b - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, b - 1);
    return reps[lo] + (pos - static_cast<double>(lo)) * (reps[hi] - reps[lo]);
  };
  est.ci_low = value + pct(0.025) - mu;
  est.ci_high = value + pct(0.975) - mu;
  return est;
}

}  // namespace

KlEstimate kl_knn(const Dataset& p, const Dataset& q, std::size_t k, std::size_t bootstrap,
                  std::uint64_t seed) {
  check_knn_inputs(p, q, k, bootstrap);
  const double value = knn_estimate(p, all_rows(p.size()), q, all_rows(q.size()), k);
  std::vector<double> reps(bootstrap);
  const auto count = static_cast<std::int64_t>(bootstrap);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t b = 0; b < count; ++b)
    reps[static_cast<std::size_t>(b)] =
        half_sample_replicate(p, q, k, seed, static_cast<std::size_t>(b));
  return summarize_knn(value, std::move(reps));
}

KlEstimate kl_knn_serial(const Dataset& p, const Dataset& q, std::size_t k,
                         std::size_t bootstrap, std::uint64_t seed) {
  check_knn_inputs(p, q, k, bootstrap);
  const double value = knn_estimate(p, all_rows(p.size()), q, all_rows(q.size()), k);
  std::vector<double> reps(bootstrap);
  for (std::size_t b = 0; b < bootstrap; ++b) reps[b] = half_sample_replicate(p, q, k, seed, b);
  return summarize_knn(value, std::move(reps));
}

double kl_knn_bruteforce(const Dataset& p, const Dataset& q, std::size_t k) {
  check_knn_inputs(p, q, k, 0);
  const std::size_t n = p.size(), m = q.size(), d = p.dim;
  std::vector<double> buf;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = p.points.data() + i * d;
    buf.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) buf.push_back(sq_dist(p.points.data() + j * d, x, d));
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k - 1), buf.end());
    const double rho = std::max(std::sqrt(buf[k - 1]), 1e-12);
    buf.clear();
    for (std::size_t j = 0; j < m; ++j) buf.push_back(sq_dist(q.points.data() + j * d, x, d));
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k - 1), buf.end());
    const double nu = std::max(std::sqrt(buf[k - 1]), 1e-12);
    sum += std::log(nu / rho);
  }
  return static_cast<double>(d) * sum / static_cast<double>(n) +
         std::log(static_cast<double>(m) / static_cast<double>(n - 1));
}

BoundReport check_prop31_mc(const Dataset& p, const Dataset& q, double sigma_zeta,
                            const Eigen::VectorXd& u, std::uint64_t seed) {
  const CfProbe cp = empirical_cf(p, {u}), cq = empirical_cf(q, {u});
  const double lhs = std::abs(cp.value[0] - cq.value[0]);
  const double se = std::sqrt(1.0 / static_cast<double>(p.size()) +
                              1.0 / static_cast<double>(q.size()));
  auto convolve = [&](const Dataset& ds, std::string_view label) {
    Dataset out = ds;
    for (std::size_t i = 0; i < out.size(); ++i) {
      Stream rng(seed, label, i);
      for (double& v : out.row(i)) v += sigma_zeta * rng.normal();
    }
    return out;
  };
  const KlEstimate kl = kl_knn(convolve(p, "prop31-mc-p"), convolve(q, "prop31-mc-q"), 5,
                               200, seed);
  const double rhs = std::exp(0.5 * sigma_zeta * sigma_zeta * u.squaredNorm()) *
                     std::sqrt(2.0 * std::max(kl.ci_high, 0.0));
  BoundReport r{lhs, rhs, lhs - 3.0 * se <= rhs + kBoundTolerance, rhs - lhs};
  return r;
}

namespace {

double kernel(const Eigen::Ref<const Eigen::VectorXd>& a,
              const Eigen::Ref<const Eigen::VectorXd>& b, double inv2h2) {
  return std::exp(-(a - b).squaredNorm() * inv2h2);
}

// Full row sum including any diagonal term, in column order.
double row_sum(const Eigen::Map<const Eigen::MatrixXd>& a, Eigen::Index i,
               const Eigen::Map<const Eigen::MatrixXd>& b, double inv2h2) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < b.cols(); ++j) s += kernel(a.col(i), b.col(j), inv2h2);
  return s;
}

MmdEstimate combine_mmd(const std::vector<double>& xx, const std::vector<double>& xy,
                        const std::vector<double>& yy, const std::vector<double>& yx,
                        bool unbiased) {
  const auto n = static_cast<double>(xx.size());
  const auto m = static_cast<double>(yy.size());
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xx.size(); ++i) {
    sxx += xx[i];
    sxy += xy[i];
  }
  for (double v : yy) syy += v;
  MmdEstimate est;
  if (unbiased) {
    est.value = (sxx - n) / (n * (n - 1.0)) + (syy - m) / (m * (m - 1.0)) -
                2.0 * sxy / (n * m);
  } else {
    est.value = sxx / (n * n) + syy / (m * m) - 2.0 * sxy / (n * m);
  }
  std::vector<double> f(xx.size()), g(yy.size());
  for (std::size_t i = 0; i < xx.size(); ++i) f[i] = (xx[i] - 1.0) / (n - 1.0) - xy[i] / m;
  for (std::size_t j = 0; j < yy.size(); ++j) g[j] = (yy[j] - 1.0) / (m - 1.0) - yx[j] / n;
  auto variance = [](const std::vector<double>& v) {
    double mu = 0.0;
    for (double x : v) mu += x;
    mu /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.size() - 1);
  };
  est.std_error = std::sqrt(4.0 * variance(f) / n + 4.0 * variance(g) / m);
  return est;
}

void check_mmd_inputs(const Dataset& p, const Dataset& q, double h) {
  if (p.dim != q.dim) throw ShapeError("mmd: dimension mismatch");
  if (p.size() < 2 || q.size() < 2) throw DomainError("mmd: need at least 2 points per set");
  if (!(h > 0.0)) throw DomainError("mmd: bandwidth must be positive");
}

}  // namespace

MmdEstimate mmd(const Dataset& p, const Dataset& q, double bandwidth, bool unbiased) {
  check_mmd_inputs(p, q, bandwidth);
  const double inv = std::isinf(bandwidth) ? 0.0 : 1.0 / (2.0 * bandwidth * bandwidth);
  const auto x = p.matrix(), y = q.matrix();
  std::vector<double> xx(p.size()), xy(p.size()), yy(q.size()), yx(q.size());
  const auto n = static_cast<std::int64_t>(p.size()), m = static_cast<std::int64_t>(q.size());
#pragma omp parallel
  {
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      xx[static_cast<std::size_t>(i)] = row_sum(x, i, x, inv);
      xy[static_cast<std::size_t>(i)] = row_sum(x, i, y, inv);
    }
#pragma omp for schedule(static)
    for (std::int64_t j = 0; j < m; ++j) {
      yy[static_cast<std::size_t>(j)] = row_sum(y, j, y, inv);
      yx[static_cast<std::size_t>(j)] = row_sum(y, j, x, inv);
    }
  }
  return combine_mmd(xx, xy, yy, yx, unbiased);
}

MmdEstimate mmd_serial(const Dataset& p, const Dataset& q, double bandwidth, bool unbiased) {
  check_mmd_inputs(p, q, bandwidth);
  const double inv = std::isinf(bandwidth) ? 0.0 : 1.0 / (2.0 * bandwidth * bandwidth);
  const auto x = p.matrix(), y = q.matrix();
  std::vector<double> xx(p.size()), xy(p.size()), yy(q.size()), yx(q.size());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    xx[static_cast<std::size_t>(i)] = row_sum(x, i, x, inv);
    xy[static_cast<std::size_t>(i)] = row_sum(x, i, y, inv);
  }
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    yy[static_cast<std::size_t>(j)] = row_sum(y, j, y, inv);
    yx[static_cast<std::size_t>(j)] = row_sum(y, j, x, inv);
  }
  return combine_mmd(xx, xy, yy, yx, unbiased);
}

double median_heuristic(const Dataset& p, const Dataset& q, std::size_t max_points) {
  if (!p.empty() && !q.empty() && p.dim != q.dim)
    throw ShapeError("median_heuristic: dimension mismatch");
  const std::size_t dim = p.empty() ? q.dim : p.dim;
  std::vector<std::span<const double>> pts;
  for (std::size_t i = 0; i < std::min(max_points, p.size()); ++i) pts.push_back(p.row(i));
  for (std::size_t i = 0; i < std::min(max_points, q.size()); ++i) pts.push_back(q.row(i));
  if (pts.size() < 2) throw DomainError("median_heuristic: need at least 2 points");
  std::vector<double> d;
  d.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
      d.push_back(std::sqrt(s));
    }
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

GaussianFitKl gaussian_fit_kl(const Dataset& samples, const GaussianComponent& truth) {
  if (samples.empty()) throw DomainError("gaussian_fit_kl: empty sample set");
  if (static_cast<std::size_t>(truth.mean.size()) != samples.dim)
    throw ShapeError("gaussian_fit_kl: dimension mismatch");
  const auto d = static_cast<Eigen::Index>(samples.dim);
  GaussianComponent fit{sample_mean(samples), Eigen::MatrixXd::Zero(d, d)};
  if (samples.size() >= 2) fit.cov = sample_covariance(samples);
  GaussianFitKl out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.cov, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, fit.cov.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() <= 1e-12 * scale) {
    fit.cov += 1e-9 * Eigen::MatrixXd::Identity(d, d);
    out.ridged = true;
  }
  out.kl = gaussian_kl(truth, fit);
  return out;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double s = 0.0;
    for (int j = 1; j <= 6; ++j) {
      const double k = 2.0 * j - 1.0;
      s += std::exp(-k * k * pi2 / (8.0 * lambda * lambda));
    }
    return 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s;
  }
  double s = 0.0, sign = 1.0;
  for (int j = 1; j <= 100; ++j, sign = -sign) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    s += sign * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test_normal(std::span<const double> x, double mean, double sd) {
  if (x.empty()) throw DomainError("ks_test_normal: empty sample");
  if (!(sd > 0.0)) throw DomainError("ks_test_normal: sd must be positive");
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = 0.5 * std::erfc(-(v[i] - mean) / (sd * std::numbers::sqrt2));
    dmax = std::max({dmax, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double rn = std::sqrt(n);
  return {dmax, kolmogorov_survival((rn + 0.12 + 0.11 / rn) * dmax)};
}

void gauss_legendre(std::size_t n, double a, double b, std::vector<double>& x,
                    std::vector<double>& w) {
  if (n == 0) throw DomainError("gauss_legendre: need at least one node");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  const std::size_t m = (n + 1) / 2;
  const auto nd = static_cast<double>(n);
  for (std::size_t i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const auto jd = static_cast<double>(j);
        p1 = ((2.0 * jd - 1.0) * z * p2 - (jd - 1.0) * p3) / jd;
      }
      pp = nd * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    x[i] = mid - half * z;
    x[n - 1 - i] = mid + half * z;
    w[i] = w[n - 1 - i] = 2.0 * half / ((1.0 - z * z) * pp * pp);
  }
}

namespace {

double kl_1d(double m1, double v1, double m2, double v2) {
  return 0.5 * (v1 / v2 + (m2 - m1) * (m2 - m1) / v2 - 1.0 + std::log(v2 / v1));
}

}  // namespace

GaussianSfbdTrace analytic_gaussian_sfbd(double mu, double s2, double m0, double v0,
                                         double sigma_zeta, std::size_t iterations) {
  if (!(s2 > 0.0 && v0 > 0.0)) throw DomainError("analytic_gaussian_sfbd: variances must be positive");
  const double h = sigma_zeta * sigma_zeta;
  GaussianSfbdTrace tr;
  double m = m0, v = v0;
  for (std::size_t k = 0;; ++k) {
    tr.mean.push_back(m);
    tr.var.push_back(v);
    tr.kl.push_back(kl_1d(mu, s2, m, v));
    tr.kl_noisy.push_back(kl_1d(mu, s2 + h, m, v + h));
    if (k == iterations) break;
    const double a = v / (v + h);
    m = m + a * (mu - m);
    v = a * a * (s2 + h) + a * h;
  }
  return tr;
}

double m0_gaussian(double mu, double s2, double m0, double v0, double zeta,
                   const NoiseSchedule& schedule, std::size_t nodes) {
  std::vector<double> t, w;
  gauss_legendre(nodes, 0.0, zeta, t, w);
  double total = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double s = schedule.sigma(t[i]);
    const double a = s2 + s * s, b = v0 + s * s;
    const double gap = a * (1.0 / b - 1.0 / a) * (1.0 / b - 1.0 / a) + (mu - m0) * (mu - m0) / (b * b);
    total += w[i] * 0.5 * schedule.g2(t[i]) * gap;
  }
  return total;
}

std::vector<BoundReport> prop51_cf_bound(const GaussianSfbdTrace& trace, double mu,
                                         double s2, double sigma_zeta, double m0_value,
                                         double u) {
  const std::complex<double> data = std::polar(std::exp(-0.5 * s2 * u * u), mu * u);
  std::vector<BoundReport> out;
  double best = INFINITY;
  for (std::size_t k = 1; k < trace.mean.size(); ++k) {
    const std::complex<double> model =
        std::polar(std::exp(-0.5 * trace.var[k] * u * u), trace.mean[k] * u);
    best = std::min(best, std::abs(data - model));
    const double rhs = std::exp(0.5 * sigma_zeta * sigma_zeta * u * u) *
                       std::sqrt(2.0 * m0_value / static_cast<double>(k));
    out.push_back(bound(best, rhs));
  }
  return out;
}

}  // namespace sfbd
