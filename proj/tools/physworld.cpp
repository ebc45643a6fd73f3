// Command-line front end: physworld <command> --manifest PATH [options]
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "physworld/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Real-to-sim scene grounding and residual RL pipeline"};
  std::string command;
  std::string manifest;
  physworld::pipeline::Overrides overrides;
  std::uint64_t seed = 0;
  std::string out, log;
  int iterations = 0;
  std::size_t episodes = 0;

  app.add_option("command", command, "calibrate, build-scene, train, evaluate, run or replay")
      ->required()
      ->check(CLI::IsMember({"calibrate", "build-scene", "train", "evaluate", "run", "replay"}));
  app.add_option("--manifest", manifest, "pipeline manifest (JSON)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "override the manifest seed");
  auto* out_opt = app.add_option("--out", out, "override the output directory");
  auto* iter_opt = app.add_option("--iterations", iterations, "PPO iterations")
                       ->check(CLI::NonNegativeNumber);
  auto* ep_opt = app.add_option("--episodes", episodes, "evaluation episodes");
  auto* log_opt = app.add_option("--log", log, "episode log for replay");
  app.add_flag("--resume", overrides.resume, "skip stages whose outputs are up to date");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (*seed_opt) overrides.seed = seed;
  if (*out_opt) overrides.out = out;
  if (*iter_opt) overrides.iterations = iterations;
  if (*ep_opt) overrides.episodes = episodes;
  if (*log_opt) overrides.log = log;
  return physworld::pipeline::run_command(command, manifest, overrides, std::cout, std::cerr);
}
