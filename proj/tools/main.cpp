#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cli/commands.hpp"
#include "gcgpn/errors.hpp"

int main(int argc, char** argv) {
  using namespace gcgpn::cli;
  CLI::App app{"Graph-convolutional prototype networks for generalized few-shot learning"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  app.add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "global seed (overrides run.seed)");
  app.add_option("--out", out, "output directory (overrides run.out)");

  using Command = int (*)(const RunConfig&, const std::string&, std::ostream&);
  const std::map<std::string, std::pair<Command, std::string>> commands{
      {"synth", {cmd_synth, "generate a synthetic dataset"}},
      {"build-operator", {cmd_build_operator, "build the class similarity matrix"}},
      {"train", {cmd_train, "train a model and save a checkpoint"}},
      {"eval", {cmd_eval, "evaluate a checkpoint on meta-test episodes"}},
      {"ablate", {cmd_ablate, "train and evaluate a list of variants"}},
      {"sweep-k", {cmd_sweep_k, "train and evaluate over several shot counts"}},
      {"gradcheck", {cmd_gradcheck, "finite-difference check of all model gradients"}},
  };
  app.fallthrough();  // global flags may follow the subcommand
  for (const auto& [name, cmd] : commands) app.add_subcommand(name, cmd.second);

  CLI11_PARSE(app, argc, argv);

  try {
    std::string text;
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
      cfg = parse_run_config(text);
    }
    if (app.count("--seed") > 0) cfg.seed = seed;
    if (app.count("--out") > 0) cfg.out = out;
    const std::string name = app.get_subcommands().front()->get_name();
    return commands.at(name).first(cfg, text, std::cout);
  } catch (const gcgpn::ParseError& e) {
    std::cerr << "error: " << config_path << ":" << e.line() << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}
