// ckl <command> --config <file> [--seed N] [--out DIR] [--threads N] [--<key> <value> ...]

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "ckl/error.hpp"
#include "ckl/experiment.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Leftover arguments are config overrides, given as `--key value` or `--key=value`.
Overrides parse_overrides(const std::vector<std::string>& rest) {
  Overrides out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& a = rest[i];
    if (a.rfind("--", 0) != 0 || a.size() == 2) throw ckl::ConfigError("unexpected argument '" + a + "'");
    if (const auto eq = a.find('='); eq != std::string::npos) {
      out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
      continue;
    }
    if (i + 1 >= rest.size()) throw ckl::ConfigError("missing value for " + a);
    out.emplace_back(a.substr(2), rest[++i]);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace ckl;

  CLI::App app{"Core knowledge learning experiments.\n"
               "Any config key can be overridden with --<key> <value>; `ckl keys` lists them."};
  app.allow_extras();
  std::string command, config_path, seed, out, threads;
  app.add_option("command", command, "train-mask, adapt, fewshot, kernel, gen-synthetic or keys")
      ->required()
      ->check(CLI::IsMember({"train-mask", "adapt", "fewshot", "kernel", "gen-synthetic", "keys"}));
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", threads, "worker threads for the kernel matrix (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (command == "keys") {
    for (const auto& k : experiment::ExperimentConfig::keys()) std::cout << k << '\n';
    return 0;
  }

  try {
    Overrides overrides = parse_overrides(app.remaining());
    for (const auto& [key, value] : {std::pair{"seed", seed}, {"out", out}, {"threads", threads}})
      if (!value.empty()) overrides.emplace_back(key, value);
    if (config_path.empty()) throw ConfigError("--config <file> is required");

    const experiment::ExperimentConfig cfg = experiment::load_config(config_path, overrides);
    const experiment::MetricsRecord rec = experiment::run_command(experiment::parse_command(command), cfg);
    std::cout << rec.run_id << '\n';
    for (const auto& [k, v] : rec.finals) std::cout << "  " << k << " = " << v << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "ckl: " << e.what() << '\n' << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ckl: " << e.what() << '\n';
    return 1;
  }
}
