#include "sfbd/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <Eigen/Core>

#include "sfbd/data_io.hpp"
#include "sfbd/deconv_kde.hpp"
#include "sfbd/diagnostics.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/losses.hpp"
#include "sfbd/rng.hpp"
#include "sfbd/sfbd.hpp"
#include "sfbd/train.hpp"

#ifndef SFBD_VERSION
#define SFBD_VERSION "0.0.0"
#endif

namespace sfbd {

namespace fs = std::filesystem;

namespace {

ExperimentConfig prepare(const KeyValueConfig& cfg, const CommandOptions& opt,
                         std::string_view what) {
  KeyValueConfig c = cfg;
  if (opt.out) c.set("out", opt.out->string());
  if (opt.seed) c.set("seed", std::to_string(*opt.seed));
  ExperimentConfig e = build_config(c, what);
  fs::create_directories(e.out);
  write_manifest(e, what);
  return e;
}

fs::path data_file(const ExperimentConfig& e, std::string_view name) {
  return e.out / "data" / (std::string(name) + ".f64");
}

Dataset load_required(const fs::path& p) {
  if (!fs::exists(p))
    throw DomainError("missing dataset " + p.string() + "; run the generate command first");
  return load_dataset(p);
}

std::ofstream open_csv(const fs::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write " + p.string());
  return f;
}

}  // namespace

std::string config_hash(const KeyValueConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(cfg.canonical())));
  return buf;
}

void write_manifest(const ExperimentConfig& e, std::string_view command) {
  std::ofstream f(e.out / ("manifest_" + std::string(command) + ".cfg"),
                  std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write manifest in " + e.out.string());
  f << "# command = " << command << "\n"
    << "# config_hash = " << config_hash(e.raw) << "\n"
    << "# seed = " << e.seed << "\n"
    << "# version = " << SFBD_VERSION << "\n"
    << "# compiler = " << __VERSION__ << "\n"
    << "# eigen = " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
    << EIGEN_MINOR_VERSION << "\n"
    << e.raw.canonical();
}

int cmd_generate(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig e = prepare(cfg, opt, "generate");
  const DataConfig& d = e.data;
  const std::uint64_t s = e.seed;
  Dataset clean, rest;
  if (d.clean_ratio) {
    Dataset all = sample_distribution(d.spec, d.n, stream_seed(s, "data", 0));
    std::tie(clean, rest) = split_clean_ratio(all, *d.clean_ratio, stream_seed(s, "split", 0));
  } else {
    clean = sample_distribution(d.spec, d.n_clean, stream_seed(s, "data", 0));
    rest = sample_distribution(d.spec, d.n_noisy, stream_seed(s, "data", 1));
  }
  if (!d.clean_subset.empty()) {
    DistributionSpec a = d.spec;
    a.mode_subset = d.clean_subset;
    clean = sample_distribution(a, clean.size(), stream_seed(s, "data", 2));
  }
  if (rest.empty()) throw ValidationError("data.n", "leaves no points to corrupt");
  const Dataset noisy = corrupt_dataset(rest, e.sfbd.corruption, stream_seed(s, "corrupt", 0));
  const Dataset ref = sample_distribution(d.spec, d.n_reference, stream_seed(s, "reference", 0));
  fs::create_directories(e.out / "data");
  save_dataset(clean, data_file(e, "clean"));
  save_dataset(noisy, data_file(e, "noisy"));
  save_dataset(ref, data_file(e, "reference"));
  log << "generate: " << clean.size() << " clean, " << noisy.size() << " noisy, " << ref.size()
      << " reference points in " << (e.out / "data").string() << "\n";
  return 0;
}

int cmd_pretrain(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig e = prepare(cfg, opt, "pretrain");
  const Dataset clean = load_required(data_file(e, "clean"));
  std::vector<double> trace;
  const DenoiserNet net = pretrain(clean, e.sfbd.net, e.sfbd.schedule, e.sfbd.pretrain,
                                   stream_seed(e.seed, "pretrain", 0), &trace);
  fs::create_directories(e.out / "pretrain");
  net.save(e.out / "pretrain" / "net.ckpt");
  std::ofstream f = open_csv(e.out / "pretrain" / "loss.csv");
  f << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) f << i << ',' << format_double(trace[i]) << '\n';
  log << "pretrain: " << trace.size() << " epochs, final loss "
      << (trace.empty() ? std::string("n/a") : format_double(trace.back())) << "\n";
  return 0;
}

int cmd_sfbd(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log) {
  ExperimentConfig e = prepare(cfg, opt, "sfbd");
  const Dataset clean = load_required(data_file(e, "clean"));
  const Dataset noisy = load_required(data_file(e, "noisy"));
  e.eval.reference = load_required(data_file(e, "reference"));
  e.sfbd.run_dir = e.out;
  const SfbdState st = run_sfbd(clean, noisy, e.sfbd, e.eval, opt.resume);
  for (const MetricsRow& r : st.history)
    log << "sfbd: iter " << r.iter << " kl " << format_double(r.kl_estimate) << " mmd "
        << format_double(r.mmd) << "\n";
  return 0;
}

int cmd_rate(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig e = prepare(cfg, opt, "rate");
  const RateConfig& r = e.rate;
  const auto grid = uniform_grid(r.grid_lo, r.grid_hi, r.grid_points);
  const RateSweep sweep = rate_sweep(e.data.spec, r.sigma_zeta, r.n_list, r.replicates,
                                     r.kernel, grid, stream_seed(e.seed, "rate", 0));
  write_rate_csv(sweep, e.out / "rate.csv");
  std::ofstream f = open_csv(e.out / "rate_summary.csv");
  f << "sigma_zeta,log_exponent,poly_exponent\n"
    << format_double(r.sigma_zeta) << ',' << format_double(sweep.log_exponent) << ','
    << format_double(sweep.poly_exponent) << '\n';
  for (const RateRow& row : sweep.rows)
    log << "rate: n " << row.n << " mise " << format_double(row.mise_mean) << " +- "
        << format_double(row.mise_stderr) << "\n";
  log << "rate: log exponent " << format_double(sweep.log_exponent) << ", n exponent "
      << format_double(sweep.poly_exponent) << "\n";
  return 0;
}

int cmd_deconv(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig e = prepare(cfg, opt, "deconv");
  const RateConfig& r = e.rate;
  const auto grid = uniform_grid(r.grid_lo, r.grid_hi, r.grid_points);
  const Dataset clean =
      sample_distribution(e.data.spec, r.deconv_n, stream_seed(e.seed, "deconv", 0));
  std::vector<double> y = clean.points;
  for (std::size_t i = 0; i < y.size(); ++i) {
    Stream rng(stream_seed(e.seed, "deconv", 1), "noise", i);
    y[i] += r.sigma_zeta * rng.normal();
  }
  const DeconvEstimate est = deconv_estimate(y, r.sigma_zeta, r.kernel, grid);
  const MixtureModel truth = *e.data.spec.mixture();
  std::ofstream f = open_csv(e.out / "deconv.csv");
  f << "x,density,truth\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    f << format_double(grid[i]) << ',' << format_double(est.density[i]) << ','
      << format_double(mixture_pdf(truth, grid[i])) << '\n';
  const double err = ise(est, truth);
  std::ofstream s = open_csv(e.out / "deconv_summary.csv");
  s << "n,bandwidth,ise\n"
    << est.n << ',' << format_double(est.bandwidth) << ',' << format_double(err) << '\n';
  log << "deconv: n " << est.n << " bandwidth " << format_double(est.bandwidth) << " ise "
      << format_double(err) << "\n";
  return 0;
}

int cmd_diagnose(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig e = prepare(cfg, opt, "diagnose");
  const DiagnoseConfig& d = e.diagnose;
  std::ofstream f = open_csv(e.out / "diagnose.csv");
  f << "check,case,lhs,rhs,holds\n";
  std::size_t failures = 0;

  const auto cases = prop31_grid(d.prop31_cases, stream_seed(e.seed, "diagnose", 0));
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const BoundReport b = check_prop31(cases[i]);
    failures += !b.holds;
    f << "prop31," << i << ',' << format_double(b.lhs) << ',' << format_double(b.rhs) << ','
      << (b.holds ? "true" : "false") << '\n';
  }

  // Gradient equivalence on random 1-D networks and noisy batches.
  const NoiseSchedule sched = e.sfbd.schedule;
  const CorruptionSpec spec = corruption_for_sigma(sched, 0.2);
  NetTopology topo;
  topo.hidden = {32, 32};
  topo.fourier_pairs = 4;
  for (std::size_t c = 0; c < d.equivalence_cases; ++c) {
    const std::uint64_t cs = stream_seed(e.seed, "equivalence", c);
    DenoiserNet net = DenoiserNet::initialized(topo, sched, cs);
    {
      Stream rng(cs, "perturb", 0);
      for (double& p : net.params()) p += 0.1 * rng.normal();
    }
    const Dataset clean = sample_distribution(DistributionSpec::standard_normal(1),
                                              d.equivalence_batch, stream_seed(cs, "batch", 0));
    const Dataset noisy = corrupt_dataset(clean, spec, stream_seed(cs, "batch", 1));
    Stream rng(cs, "time", 0);
    const double s = std::exp(std::log(0.05) + rng.uniform() * (std::log(2.0) - std::log(0.05)));
    ConsistencyOptions co;
    const EquivalenceReport rep = check_consistency_equivalence(net, noisy, spec, s, co, cs);
    const bool ok = rep.cosine >= d.min_cosine;
    failures += !ok;
    f << "prop52," << c << ',' << format_double(rep.cosine) << ',' << format_double(d.min_cosine)
      << ',' << (ok ? "true" : "false") << '\n';
  }
  log << "diagnose: " << cases.size() + d.equivalence_cases << " checks, " << failures
      << " failed\n";
  return failures == 0 ? 0 : 1;
}

const std::vector<std::string_view>& command_names() {
  static const std::vector<std::string_view> names = {"generate", "pretrain", "sfbd",
                                                      "rate",     "deconv",   "diagnose"};
  return names;
}

int run_command(std::string_view name, const KeyValueConfig& cfg, const CommandOptions& opt,
                std::ostream& log) {
  if (name == "generate") return cmd_generate(cfg, opt, log);
  if (name == "pretrain") return cmd_pretrain(cfg, opt, log);
  if (name == "sfbd") return cmd_sfbd(cfg, opt, log);
  if (name == "rate") return cmd_rate(cfg, opt, log);
  if (name == "deconv") return cmd_deconv(cfg, opt, log);
  if (name == "diagnose") return cmd_diagnose(cfg, opt, log);
  throw ValidationError("command", "unknown command '" + std::string(name) + "'");
}

}  // namespace sfbd
