// Experiment runner: sfbd_cli <command> --config <path> [--out <dir>] [--seed <n>] [--resume]

#include <iostream>

#include "CLI11.hpp"
#include "sfbd/commands.hpp"
#include "sfbd/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"SFBD and deconvolution experiment runner"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool resume = false;

  for (std::string_view name : sfbd::command_names()) {
    CLI::App* sub = app.add_subcommand(std::string(name));
    sub->add_option("--config", config_path, "key=value config file")->required();
    sub->add_option("--out", out, "output directory (overrides `out`)");
    sub->add_option("--seed", seed, "run seed (overrides `seed`)");
    if (name == "sfbd") sub->add_flag("--resume", resume, "continue from the last complete iteration");
  }
  CLI11_PARSE(app, argc, argv);

  const CLI::App* sub = app.get_subcommands().front();
  try {
    sfbd::CommandOptions opt;
    if (sub->count("--out")) opt.out = out;
    if (sub->count("--seed")) opt.seed = seed;
    opt.resume = resume;
    const auto cfg = sfbd::KeyValueConfig::load(config_path);
    return sfbd::run_command(sub->get_name(), cfg, opt, std::cout);
  } catch (const sfbd::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
