// Command-line driver: run, compare and discover.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autonet/orchestrator.hpp"

using namespace autonet;

int main(int argc, char** argv) {
  CLI::App app{"Autonomic network + RL MAC experiment driver"};
  app.require_subcommand(1);

  std::string scenario = "central-multi", mode = "train", env = "demo";
  std::size_t episodes = 300;
  std::uint64_t seed = 1;
  std::string topology, out_dir, policy;
  std::vector<std::string> failures;
  auto* run = app.add_subcommand("run", "Boot the network and run one scenario");
  run->add_option("--scenario", scenario, "central-single | central-multi | distributed-single")->capture_default_str();
  run->add_option("--mode", mode, "train | infer")->capture_default_str();
  run->add_option("--episodes", episodes, "Episodes to run (at most 65535)")->capture_default_str();
  run->add_option("--seed", seed, "Run seed")->capture_default_str();
  run->add_option("--topology", topology, "Topology file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--policy", policy, "Policy snapshot (infer mode)");
  run->add_option("--fail", failures, "Link failure \"t_ms a b\", relative to the scenario loop start (repeatable)");
  run->add_option("--env", env, "demo | dynamic")->capture_default_str();

  std::vector<std::string> dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Compare completed run directories");
  compare->add_option("dirs", dirs, "Run directories")->required();
  compare->add_option("--out", compare_out, "Directory for comparison.txt/.csv");

  std::string discover_topology;
  auto* discover = app.add_subcommand("discover", "Register and resolve every service name");
  discover->add_option("--topology", discover_topology, "Topology file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? exit_code::kOk : exit_code::kUsage;
  }

  if (*run) {
    RunManifest m;
    try {
      m.scenario.kind = parse_scenario(scenario);
      m.mode = parse_run_mode(mode);
      m.scenario.env.mode = parse_env_mode(env);
      for (const auto& f : failures) m.scenario.failures.push_back(parse_failure(f));
    } catch (const std::invalid_argument& e) {
      std::cerr << "usage error: " << e.what() << '\n';
      return exit_code::kUsage;
    }
    m.scenario.episodes = episodes;
    m.scenario.seed = seed;
    m.topology = topology;
    m.out = out_dir;
    if (!policy.empty()) m.policy = policy;
    return cmd_run(m, std::cout, std::cerr);
  }
  if (*compare) {
    std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
    std::optional<std::filesystem::path> out;
    if (!compare_out.empty()) out = compare_out;
    return cmd_compare(paths, out, std::cout, std::cerr);
  }
  return cmd_discover(discover_topology, std::cout, std::cerr);
}
