#pragma once

// Flat key=value experiment configuration.
//
//   # comment
//   experiment = ring_ratio_04
//   data.family = ring
//   sfbd.iterations = 5
//
// Keys carry a section prefix. Unknown keys, duplicate keys and malformed
// values raise ValidationError naming the key.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sfbd/deconv_kde.hpp"
#include "sfbd/distributions.hpp"
#include "sfbd/losses.hpp"
#include "sfbd/sfbd.hpp"

namespace sfbd {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  void set(const std::string& key, const std::string& value);

  std::string str(std::string_view key) const;  // required
  std::string str(std::string_view key, std::string_view fallback) const;
  double real(std::string_view key) const;
  double real(std::string_view key, double fallback) const;
  std::uint64_t integer(std::string_view key) const;
  std::uint64_t integer(std::string_view key, std::uint64_t fallback) const;
  bool flag(std::string_view key, bool fallback) const;
  std::vector<double> reals(std::string_view key) const;
  std::vector<std::size_t> integers(std::string_view key) const;

  // Sorted key=value lines; parse(canonical()) reproduces the config.
  std::string canonical() const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string, std::less<>> kv_;
};

// Every key the experiment runner understands.
const std::vector<std::string_view>& known_keys();

struct DataConfig {
  DistributionSpec spec;
  // Either n with clean_ratio (the clean part is split off and the rest is
  // corrupted), or n_clean and n_noisy drawn independently.
  std::size_t n = 0;
  std::optional<double> clean_ratio;
  std::size_t n_clean = 0;
  std::size_t n_noisy = 0;
  std::size_t n_reference = 2000;
  // Ring family only: pretraining modes, when they differ from the data.
  std::vector<std::size_t> clean_subset;
};

struct RateConfig {
  double sigma_zeta = 0.2;
  std::vector<std::size_t> n_list{1000, 10000, 100000};
  std::size_t replicates = 20;
  DeconvKernelSpec kernel;
  double grid_lo = -6.0, grid_hi = 6.0;
  std::size_t grid_points = 1201;
  std::size_t deconv_n = 10000;
};

struct DiagnoseConfig {
  std::size_t prop31_cases = 100;
  std::size_t equivalence_cases = 20;
  std::size_t equivalence_batch = 64;
  double min_cosine = 0.9999;
};

struct ExperimentConfig {
  std::string name;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  DataConfig data;
  SfbdConfig sfbd;  // carries net, schedule, training, corruption, solver
  EvalSpec eval;    // reference filled in at run time
  RateConfig rate;
  DiagnoseConfig diagnose;
  KeyValueConfig raw;
};

// Reads and validates every field in `raw`; `what` selects which sections
// must be present ("generate", "pretrain", "sfbd", "rate", "deconv",
// "diagnose").
ExperimentConfig build_config(const KeyValueConfig& raw, std::string_view what);

}  // namespace sfbd
