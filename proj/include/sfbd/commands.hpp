#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "sfbd/config.hpp"

namespace sfbd {

// Command-line overrides; they are written back into the config before
// validation, so the manifest records the values actually used.
struct CommandOptions {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  bool resume = false;
};

// Output layout under the experiment directory:
//   data/{clean,noisy,reference}.f64        generate
//   pretrain/{net.ckpt,loss.csv}            pretrain
//   iter_<k>/{net.ckpt,denoised.f64,metrics.csv}, metrics.csv    sfbd
//   rate.csv, rate_summary.csv              rate
//   deconv.csv, deconv_summary.csv          deconv
//   diagnose.csv                            diagnose
//   manifest_<command>.cfg                  every command; a loadable config
//
// Each returns the process exit status. Errors propagate as exceptions.
int cmd_generate(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log);
int cmd_pretrain(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log);
int cmd_sfbd(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log);
int cmd_rate(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log);
int cmd_deconv(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log);
int cmd_diagnose(const KeyValueConfig& cfg, const CommandOptions& opt, std::ostream& log);

const std::vector<std::string_view>& command_names();
int run_command(std::string_view name, const KeyValueConfig& cfg, const CommandOptions& opt,
                std::ostream& log);

// FNV-1a 64 of the canonical config text, as 16 hex digits.
std::string config_hash(const KeyValueConfig& cfg);
void write_manifest(const ExperimentConfig& e, std::string_view command);

}  // namespace sfbd
