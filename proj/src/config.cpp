#include "sfbd/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "sfbd/data_io.hpp"
#include "sfbd/errors.hpp"

namespace sfbd {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto c = s.find(',', pos);
    const auto part = trim(s.substr(pos, c == std::string_view::npos ? s.npos : c - pos));
    if (!part.empty()) out.emplace_back(part);
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
    throw ValidationError(std::string(key), "expected a finite number, got '" + std::string(v) + "'");
  return x;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ValidationError(std::string(key),
                          "expected a non-negative integer, got '" + std::string(v) + "'");
  return x;
}

const std::vector<std::string_view> kKnownKeys = {
    "experiment", "out", "seed",
    "data.family", "data.dim", "data.mean", "data.var", "data.weights", "data.means",
    "data.vars", "data.modes", "data.radius", "data.width", "data.subset", "data.noise",
    "data.n", "data.clean_ratio", "data.n_clean", "data.n_noisy", "data.n_reference",
    "data.clean_subset",
    "corruption.sigma",
    "schedule.sigma_min", "schedule.sigma_max", "schedule.horizon",
    "net.hidden", "net.fourier_pairs", "net.data_scale",
    "pretrain.epochs", "pretrain.steps", "pretrain.batch_size", "pretrain.lr",
    "pretrain.cosine_decay", "pretrain.lr_floor", "pretrain.t_min", "pretrain.t_max",
    "finetune.epochs", "finetune.steps", "finetune.batch_size", "finetune.lr",
    "finetune.cosine_decay", "finetune.lr_floor", "finetune.t_min", "finetune.t_max",
    "solver.method", "solver.steps", "solver.rho", "solver.t_end",
    "sfbd.iterations", "sfbd.clean_injection", "sfbd.skip_pretrain",
    "eval.mmd_bandwidth", "eval.mmd_points", "eval.knn_k",
    "rate.sigma", "rate.n_list", "rate.replicates", "rate.cf_support", "rate.rule",
    "rate.fixed_bandwidth", "rate.quadrature_points", "rate.table_step", "rate.clip_negative",
    "rate.grid_lo", "rate.grid_hi", "rate.grid_points", "rate.deconv_n",
    "diagnose.prop31_cases", "diagnose.equivalence_cases", "diagnose.equivalence_batch",
    "diagnose.min_cosine",
};

TrainConfig train_section(const KeyValueConfig& c, const std::string& p, TrainConfig t) {
  t.epochs = c.integer(p + ".epochs", t.epochs);
  t.steps = c.integer(p + ".steps", t.steps);
  t.batch_size = c.integer(p + ".batch_size", t.batch_size);
  t.lr = c.real(p + ".lr", t.lr);
  t.cosine_decay = c.flag(p + ".cosine_decay", t.cosine_decay);
  t.lr_floor = c.real(p + ".lr_floor", t.lr_floor);
  t.sampler.t_min = c.real(p + ".t_min", t.sampler.t_min);
  t.sampler.t_max = c.real(p + ".t_max", t.sampler.t_max);
  if (t.epochs == 0 && t.steps == 0 && p == "finetune")
    throw ValidationError(p + ".epochs", "fine-tuning needs epochs or steps");
  return t;
}

Eigen::MatrixXd iso(std::size_t d, double v) {
  return v * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
}

DistributionSpec distribution_section(const KeyValueConfig& c) {
  const std::string fam = c.str("data.family");
  if (fam == "gaussian") {
    const std::size_t d = c.integer("data.dim", 1);
    if (d == 0) throw ValidationError("data.dim", "must be positive");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    if (c.has("data.mean")) {
      const auto m = c.reals("data.mean");
      if (m.size() != d) throw ValidationError("data.mean", "needs data.dim entries");
      for (std::size_t i = 0; i < d; ++i) mean(static_cast<Eigen::Index>(i)) = m[i];
    }
    const double var = c.real("data.var", 1.0);
    if (!(var > 0.0)) throw ValidationError("data.var", "must be positive");
    return DistributionSpec::gaussian(mean, iso(d, var));
  }
  if (fam == "mixture") {
    const std::size_t d = c.integer("data.dim", 1);
    const auto w = c.reals("data.weights");
    const auto mu = c.reals("data.means");
    const auto v = c.reals("data.vars");
    if (d == 0) throw ValidationError("data.dim", "must be positive");
    if (mu.size() != w.size() * d)
      throw ValidationError("data.means", "needs data.dim entries per component");
    if (v.size() != w.size()) throw ValidationError("data.vars", "needs one entry per component");
    std::vector<GaussianComponent> comps;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (!(v[k] > 0.0)) throw ValidationError("data.vars", "must be positive");
      Eigen::VectorXd m(static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < d; ++i) m(static_cast<Eigen::Index>(i)) = mu[k * d + i];
      comps.push_back({m, iso(d, v[k])});
    }
    return DistributionSpec::mixture_of(w, comps);
  }
  if (fam == "ring") {
    std::vector<std::size_t> subset;
    if (c.has("data.subset")) subset = c.integers("data.subset");
    return DistributionSpec::ring(c.integer("data.modes", 8), c.real("data.radius", 4.0),
                                  c.real("data.width", 0.2), subset);
  }
  if (fam == "moons") return DistributionSpec::moons(c.real("data.noise", 0.1));
  throw ValidationError("data.family", "unknown family '" + fam +
                                           "' (gaussian, mixture, ring, moons)");
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig c;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = nl == text.npos ? text.size() : nl + 1;
    ++line_no;
    if (const auto h = line.find('#'); h != line.npos) line = line.substr(0, h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == line.npos)
      throw ValidationError("line " + std::to_string(line_no), "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ValidationError("line " + std::to_string(line_no), "empty key");
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end())
      throw ValidationError(key, "unknown key");
    if (c.kv_.count(key)) throw ValidationError(key, "given twice");
    c.kv_.emplace(key, value);
  }
  return c;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool KeyValueConfig::has(std::string_view key) const { return kv_.find(key) != kv_.end(); }

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end())
    throw ValidationError(key, "unknown key");
  kv_[key] = value;
}

std::string KeyValueConfig::str(std::string_view key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw ValidationError(std::string(key), "missing required field");
  return it->second;
}

std::string KeyValueConfig::str(std::string_view key, std::string_view fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? std::string(fallback) : it->second;
}

double KeyValueConfig::real(std::string_view key) const { return parse_real(key, str(key)); }

double KeyValueConfig::real(std::string_view key, double fallback) const {
  return has(key) ? real(key) : fallback;
}

std::uint64_t KeyValueConfig::integer(std::string_view key) const {
  return parse_uint(key, str(key));
}

std::uint64_t KeyValueConfig::integer(std::string_view key, std::uint64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

bool KeyValueConfig::flag(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(std::string(key), "expected true or false, got '" + v + "'");
}

std::vector<double> KeyValueConfig::reals(std::string_view key) const {
  std::vector<double> out;
  for (const auto& p : split_list(str(key))) out.push_back(parse_real(key, p));
  if (out.empty()) throw ValidationError(std::string(key), "empty list");
  return out;
}

std::vector<std::size_t> KeyValueConfig::integers(std::string_view key) const {
  std::vector<std::size_t> out;
  for (const auto& p : split_list(str(key))) out.push_back(parse_uint(key, p));
  if (out.empty()) throw ValidationError(std::string(key), "empty list");
  return out;
}

std::string KeyValueConfig::canonical() const {
  std::string s;
  for (const auto& [k, v] : kv_) s += k + " = " + v + "\n";
  return s;
}

const std::vector<std::string_view>& known_keys() { return kKnownKeys; }

ExperimentConfig build_config(const KeyValueConfig& c, std::string_view what) {
  ExperimentConfig e;
  e.raw = c;
  e.name = c.str("experiment");
  if (e.name.empty() || e.name.find_first_of("/\\") != std::string::npos)
    throw ValidationError("experiment", "must be a plain non-empty name");
  e.out = c.str("out", "runs/" + e.name);
  e.seed = c.integer("seed", 0);

  const bool needs_data = what == "generate" || what == "pretrain" || what == "sfbd" ||
                          what == "rate" || what == "deconv" || c.has("data.family");
  if (needs_data) {
    e.data.spec = distribution_section(c);
    e.data.spec.validate();
  }
  if (what == "generate" || what == "pretrain" || what == "sfbd") {
    if (c.has("data.clean_ratio")) {
      e.data.n = c.integer("data.n");
      const double r = c.real("data.clean_ratio");
      if (!(r >= 0.0 && r < 1.0)) throw ValidationError("data.clean_ratio", "must lie in [0, 1)");
      e.data.clean_ratio = r;
      if (e.data.n < 2) throw ValidationError("data.n", "must be at least 2");
    } else {
      e.data.n_clean = c.integer("data.n_clean");
      e.data.n_noisy = c.integer("data.n_noisy");
      if (e.data.n_noisy == 0) throw ValidationError("data.n_noisy", "must be positive");
    }
    e.data.n_reference = c.integer("data.n_reference", 2000);
    if (c.has("data.clean_subset")) {
      if (e.data.spec.family != Family::ring_of_gaussians)
        throw ValidationError("data.clean_subset", "only the ring family has modes");
      e.data.clean_subset = c.integers("data.clean_subset");
      DistributionSpec s = e.data.spec;
      s.mode_subset = e.data.clean_subset;
      s.validate();
    }
  }

  SfbdConfig& s = e.sfbd;
  s.schedule.sigma_min = c.real("schedule.sigma_min", s.schedule.sigma_min);
  s.schedule.sigma_max = c.real("schedule.sigma_max", s.schedule.sigma_max);
  s.schedule.horizon = c.real("schedule.horizon", s.schedule.horizon);
  s.schedule.validate();
  if (needs_data) s.net.input_dim = e.data.spec.dim();
  if (c.has("net.hidden")) s.net.hidden = c.integers("net.hidden");
  s.net.fourier_pairs = c.integer("net.fourier_pairs", s.net.fourier_pairs);
  s.net.data_scale = c.real("net.data_scale", s.net.data_scale);
  s.net.validate();
  s.pretrain = train_section(c, "pretrain", s.pretrain);
  s.finetune = train_section(c, "finetune", s.finetune);
  const std::string method = c.str("solver.method", "heun");
  if (method == "heun") s.solver.method = SolverMethod::heun2;
  else if (method == "euler") s.solver.method = SolverMethod::euler_maruyama;
  else throw ValidationError("solver.method", "expected heun or euler");
  s.solver.steps = c.integer("solver.steps", s.solver.steps);
  s.solver.rho = c.real("solver.rho", s.solver.rho);
  s.solver.t_end = c.real("solver.t_end", s.solver.t_end);
  s.iterations = c.integer("sfbd.iterations", s.iterations);
  s.clean_injection = c.flag("sfbd.clean_injection", s.clean_injection);
  s.skip_pretrain = c.flag("sfbd.skip_pretrain", s.skip_pretrain);
  s.seed = e.seed;
  if (what == "generate" || what == "pretrain" || what == "sfbd") {
    const double sig = c.real("corruption.sigma");
    if (!(sig >= 0.0)) throw ValidationError("corruption.sigma", "must be non-negative");
    s.corruption = corruption_for_sigma(s.schedule, sig);
    s.validate();
  }

  e.eval.mmd_bandwidth = c.real("eval.mmd_bandwidth", 0.0);
  if (e.eval.mmd_bandwidth < 0.0) throw ValidationError("eval.mmd_bandwidth", "must be >= 0");
  e.eval.mmd_points = c.integer("eval.mmd_points", e.eval.mmd_points);
  e.eval.knn_k = c.integer("eval.knn_k", e.eval.knn_k);
  if (e.eval.mmd_points < 2) throw ValidationError("eval.mmd_points", "must be at least 2");
  if (e.eval.knn_k == 0) throw ValidationError("eval.knn_k", "must be positive");
  if (needs_data && e.data.spec.family == Family::gaussian)
    e.eval.truth = e.data.spec.components.front();

  RateConfig& r = e.rate;
  r.sigma_zeta = c.real("rate.sigma", r.sigma_zeta);
  if (c.has("rate.n_list")) r.n_list = c.integers("rate.n_list");
  r.replicates = c.integer("rate.replicates", r.replicates);
  r.kernel.cf_support = c.real("rate.cf_support", r.kernel.cf_support);
  const std::string rule = c.str("rate.rule", r.sigma_zeta > 0.0 ? "paper_log" : "normal_reference");
  if (rule == "paper_log") r.kernel.rule = BandwidthRule::paper_log;
  else if (rule == "fixed") r.kernel.rule = BandwidthRule::fixed;
  else if (rule == "normal_reference") r.kernel.rule = BandwidthRule::normal_reference;
  else throw ValidationError("rate.rule", "expected paper_log, fixed or normal_reference");
  r.kernel.fixed_bandwidth = c.real("rate.fixed_bandwidth", r.kernel.fixed_bandwidth);
  r.kernel.quadrature_points = c.integer("rate.quadrature_points", r.kernel.quadrature_points);
  r.kernel.table_step = c.real("rate.table_step", r.kernel.table_step);
  r.kernel.clip_negative = c.flag("rate.clip_negative", r.kernel.clip_negative);
  r.grid_lo = c.real("rate.grid_lo", r.grid_lo);
  r.grid_hi = c.real("rate.grid_hi", r.grid_hi);
  r.grid_points = c.integer("rate.grid_points", r.grid_points);
  r.deconv_n = c.integer("rate.deconv_n", r.deconv_n);
  if (what == "rate" || what == "deconv") {
    if (!(r.sigma_zeta >= 0.0)) throw ValidationError("rate.sigma", "must be non-negative");
    if (e.data.spec.dim() != 1) throw ValidationError("data.dim", "deconvolution is 1-D only");
    if (!e.data.spec.mixture()) throw ValidationError("data.family", "needs a closed-form density");
    r.kernel.validate();
    if (r.replicates == 0) throw ValidationError("rate.replicates", "must be positive");
    if (!(r.grid_hi > r.grid_lo)) throw ValidationError("rate.grid_hi", "must exceed rate.grid_lo");
    if (r.grid_points < 2) throw ValidationError("rate.grid_points", "must be at least 2");
    if (what == "rate") {
      if (r.n_list.size() < 3) throw ValidationError("rate.n_list", "needs at least three sizes");
      for (std::size_t i = 1; i < r.n_list.size(); ++i)
        if (r.n_list[i] <= r.n_list[i - 1])
          throw ValidationError("rate.n_list", "must be strictly increasing");
    }
    if (what == "deconv" && r.deconv_n < 3) throw ValidationError("rate.deconv_n", "must be >= 3");
  }

  DiagnoseConfig& d = e.diagnose;
  d.prop31_cases = c.integer("diagnose.prop31_cases", d.prop31_cases);
  d.equivalence_cases = c.integer("diagnose.equivalence_cases", d.equivalence_cases);
  d.equivalence_batch = c.integer("diagnose.equivalence_batch", d.equivalence_batch);
  d.min_cosine = c.real("diagnose.min_cosine", d.min_cosine);
  if (what == "diagnose") {
    if (d.prop31_cases == 0) throw ValidationError("diagnose.prop31_cases", "empty grid");
    if (d.equivalence_batch == 0)
      throw ValidationError("diagnose.equivalence_batch", "must be positive");
  }
  return e;
}

}  // namespace sfbd
