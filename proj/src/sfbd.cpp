#include "sfbd/sfbd.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sfbd/data_io.hpp"
#include "sfbd/diagnostics.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"

namespace sfbd {

namespace fs = std::filesystem;

void SfbdConfig::validate() const {
  net.validate();
  schedule.validate();
  if (!skip_pretrain) pretrain.validate(schedule);
  finetune.validate(schedule);
  validate_corruption(schedule, corruption);
  backward_solver().validate();
}

SolverConfig SfbdConfig::backward_solver() const {
  SolverConfig s = solver;
  s.t_start = corruption.zeta;
  return s;
}

namespace {

Dataset head(const Dataset& ds, std::size_t n) {
  if (ds.size() <= n) return ds;
  Dataset out = ds;
  out.points.resize(n * ds.dim);
  return out;
}

double last_or_nan(const std::vector<double>& trace) {
  return trace.empty() ? std::numeric_limits<double>::quiet_NaN() : trace.back();
}

void check_inputs(const Dataset& clean, const Dataset& noisy, const SfbdConfig& cfg) {
  cfg.validate();
  if (noisy.empty()) throw DomainError("sfbd: empty noisy set");
  if (noisy.dim != cfg.net.input_dim) throw ShapeError("sfbd: noisy dimension mismatch");
  if (cfg.clean_injection && clean.source() != noisy.source())
    throw ValidationError("sfbd.clean_injection",
                          "clean and noisy sets come from different distributions");
}

Dataset training_set_for(const Dataset& samples, const Dataset& clean, const SfbdConfig& cfg) {
  return cfg.clean_injection && !clean.empty() ? concat(samples, clean) : samples;
}

Dataset backward(const DenoiserNet& net, const Dataset& noisy, const SfbdConfig& cfg,
                 std::size_t k) {
  return denoise_dataset(net, noisy, cfg.corruption, cfg.backward_solver(), cfg.schedule,
                         stream_seed(cfg.seed, "backward-iter", k));
}

fs::path iter_dir(const SfbdConfig& cfg, std::size_t k) {
  return cfg.run_dir / ("iter_" + std::to_string(k));
}

void checkpoint(const SfbdState& st, const SfbdConfig& cfg) {
  if (cfg.run_dir.empty()) return;
  const fs::path dir = iter_dir(cfg, st.k);
  fs::create_directories(dir);
  st.net.save(dir / "net.ckpt");
  save_dataset(st.samples, dir / "denoised.f64");
  // metrics.csv marks the iteration as complete, so it goes last.
  write_metrics_csv(st.history, dir / "metrics.csv");
  write_metrics_csv(st.history, cfg.run_dir / "metrics.csv");
}

}  // namespace

MetricsRow evaluate_samples(const Dataset& samples, const EvalSpec& eval, std::size_t iter,
                            double train_loss) {
  if (samples.size() < 2) throw DomainError("evaluate: need at least two samples");
  MetricsRow row;
  row.iter = iter;
  row.train_loss = train_loss;

  Eigen::VectorXd ref_mean;
  Eigen::MatrixXd ref_cov;
  if (eval.truth) {
    row.kl_estimate = gaussian_fit_kl(samples, *eval.truth).kl;
    ref_mean = eval.truth->mean;
    ref_cov = eval.truth->cov;
  } else {
    if (eval.reference.empty()) throw DomainError("evaluate: no truth and no reference");
    row.kl_estimate = kl_knn(eval.reference, samples, eval.knn_k, 0).value;
    ref_mean = sample_mean(eval.reference);
    ref_cov = sample_covariance(eval.reference);
  }
  row.mean_err = (sample_mean(samples) - ref_mean).norm();
  row.cov_err = (sample_covariance(samples) - ref_cov).norm();

  if (eval.reference.empty()) {
    row.mmd = std::numeric_limits<double>::quiet_NaN();
    row.mmd_stderr = std::numeric_limits<double>::quiet_NaN();
  } else {
    const Dataset p = head(eval.reference, eval.mmd_points);
    const Dataset q = head(samples, eval.mmd_points);
    const double h = eval.mmd_bandwidth > 0.0 ? eval.mmd_bandwidth
                                              : median_heuristic(p, Dataset{});
    const MmdEstimate m = mmd(p, q, h);
    row.mmd = m.value;
    row.mmd_stderr = m.std_error;
  }
  return row;
}

SfbdState sfbd_start(const Dataset& clean, const Dataset& noisy, const SfbdConfig& cfg,
                     const EvalSpec& eval) {
  check_inputs(clean, noisy, cfg);
  const std::uint64_t pseed = stream_seed(cfg.seed, "pretrain", 0);
  std::vector<double> trace;
  DenoiserNet net = cfg.skip_pretrain
                        ? DenoiserNet::initialized(cfg.net, cfg.schedule,
                                                   stream_seed(pseed, "init", 0))
                        : pretrain(clean, cfg.net, cfg.schedule, cfg.pretrain, pseed, &trace);
  SfbdState st{std::move(net), 0, Dataset{}, Dataset{}, {}};
  st.samples = backward(st.net, noisy, cfg, 0);
  st.history.push_back(evaluate_samples(st.samples, eval, 0, last_or_nan(trace)));
  checkpoint(st, cfg);
  return st;
}

SfbdState sfbd_iteration(SfbdState state, const Dataset& clean, const Dataset& noisy,
                         const SfbdConfig& cfg, const EvalSpec& eval) {
  if (state.k >= cfg.iterations)
    throw DomainError("sfbd_iteration: all iterations already done");
  check_inputs(clean, noisy, cfg);
  const std::size_t k = state.k + 1;
  state.training_set = training_set_for(state.samples, clean, cfg);
  const std::vector<double> trace = train_denoiser(state.net, state.training_set, cfg.finetune,
                                                   stream_seed(cfg.seed, "finetune", k));
  state.k = k;
  state.samples = backward(state.net, noisy, cfg, k);
  state.history.push_back(evaluate_samples(state.samples, eval, k, last_or_nan(trace)));
  checkpoint(state, cfg);
  return state;
}

SfbdState run_sfbd(const Dataset& clean, const Dataset& noisy, const SfbdConfig& cfg,
                   const EvalSpec& eval, bool resume) {
  check_inputs(clean, noisy, cfg);
  std::optional<SfbdState> st;
  if (resume && !cfg.run_dir.empty()) {
    std::size_t last = 0;
    bool found = false;
    for (std::size_t k = 0; k <= cfg.iterations; ++k) {
      if (!fs::exists(iter_dir(cfg, k) / "metrics.csv")) break;
      last = k;
      found = true;
    }
    if (found) {
      const fs::path dir = iter_dir(cfg, last);
      SfbdState s{DenoiserNet::load(dir / "net.ckpt"), last, Dataset{},
                  load_dataset(dir / "denoised.f64"), read_metrics_csv(dir / "metrics.csv")};
      if (s.history.size() != last + 1)
        throw FormatError("resume: metrics history of " + dir.string() +
                          " does not match its iteration");
      if (last > 0)
        s.training_set =
            training_set_for(load_dataset(iter_dir(cfg, last - 1) / "denoised.f64"), clean, cfg);
      st.emplace(std::move(s));
    }
  }
  if (!st) st.emplace(sfbd_start(clean, noisy, cfg, eval));
  while (st->k < cfg.iterations) st.emplace(sfbd_iteration(std::move(*st), clean, noisy, cfg, eval));
  return std::move(*st);
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "iter,kl_estimate,mmd,mean_err,cov_err,mmd_stderr,train_loss\n";
  for (const MetricsRow& r : rows) {
    out << r.iter << ',' << format_double(r.kl_estimate) << ',' << format_double(r.mmd) << ','
        << format_double(r.mean_err) << ',' << format_double(r.cov_err) << ','
        << format_double(r.mmd_stderr) << ',' << format_double(r.train_loss) << '\n';
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line != "iter,kl_estimate,mmd,mean_err,cov_err,mmd_stderr,train_loss")
    throw MalformedHeaderError("metrics csv: unexpected header in " + path.string());
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw MalformedHeaderError("metrics csv: bad row '" + line + "'");
    MetricsRow r;
    try {
      r.iter = std::stoull(f[0]);
      r.kl_estimate = std::stod(f[1]);
      r.mmd = std::stod(f[2]);
      r.mean_err = std::stod(f[3]);
      r.cov_err = std::stod(f[4]);
      r.mmd_stderr = std::stod(f[5]);
      r.train_loss = std::stod(f[6]);
    } catch (const std::exception&) {
      throw MalformedHeaderError("metrics csv: bad number in '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace sfbd
