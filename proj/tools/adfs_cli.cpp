#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adfs/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kDivergence = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized stochastic optimization experiments"};
  app.set_help_all_flag("--help-all", "Print help for all subcommands");
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string seed_list;
  std::vector<std::string> algos;
  bool theorem4 = false;

  app.add_option("--config", config_path, "Flat key = value configuration file");
  app.add_option("--set", overrides, "Override a configuration key (KEY=VALUE)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--out", out_dir, "Output directory for traces and summary");
  app.add_option("--seed-list", seed_list, "Comma-separated schedule seeds");
  app.add_option("--algo", algos, "adfs, ns_adfs, point_saga or agd (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_flag("--check-theorem4", theorem4, "Check the average-time bound on the configured graph");
  CLI::App* dump = app.add_subcommand("dump-parameters", "Print derived parameters and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    adfs::ExperimentConfig cfg = config_path.empty() ? adfs::ExperimentConfig{} : adfs::load_config(config_path);
    for (const std::string& s : overrides) adfs::apply_override(cfg, s);
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!seed_list.empty()) adfs::set_config_value(cfg, "seeds", seed_list);
    if (!algos.empty()) {
      std::string joined;
      for (const std::string& a : algos) joined += (joined.empty() ? "" : ",") + a;
      adfs::set_config_value(cfg, "algorithms", joined);
    }
    cfg.validate();

    if (dump->parsed()) {
      std::cout << adfs::dump_parameters(cfg);
      return 0;
    }
    if (theorem4) {
      const adfs::Theorem4Report r = adfs::run_theorem4_check(cfg);
      std::cout << adfs::format_theorem4(r);
      return 0;
    }
    const adfs::ExperimentResult result = adfs::run_experiment(cfg);
    std::cout << result.summary;
    return 0;
  } catch (const adfs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const adfs::DivergenceError& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
