#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "autonet/event_log.hpp"
#include "autonet/protocol.hpp"
#include "autonet/rl.hpp"
#include "autonet/routing.hpp"
#include "autonet/topology.hpp"
#include "autonet/wireless_env.hpp"

namespace autonet {

/// Unrecoverable failure in one phase of a run; what() starts with the phase.
class PhaseError : public std::runtime_error {
 public:
  PhaseError(std::string phase, const std::string& message)
      : std::runtime_error(phase + ": " + message), phase_(std::move(phase)) {}
  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

/// Link failure at `at` after the start of the scenario loop.
struct FailureEvent {
  TimeUs at = 0;
  std::string a;
  std::string b;
};

/// Parses "t_ms a b", e.g. "1500 router1 router2".
FailureEvent parse_failure(std::string_view text);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::CentralMulti;
  EnvConfig env;
  std::size_t episodes = 300;
  std::uint64_t seed = 1;
  std::vector<FailureEvent> failures;
  QParams q;
  RoutingConfig routing;
};

/// AP ids an agent layout is built over: 1..4 in demo mode, 1..max_aps in dynamic mode.
std::vector<int> ap_universe(const EnvConfig& env);

struct NameResolution {
  std::string name;
  std::string node;  // registering node
  bool registered = false;
  bool resolved = false;
  NodeId address;
  TimeUs latency = 0;
};

struct StepRecord {
  std::uint64_t episode = 0;
  std::size_t step = 0;
  int ap_id = 0;
  std::uint32_t delivered = 0;
  std::uint32_t collisions = 0;
  std::uint32_t queue_len = 0;
  double reward = 0;
};

struct EpisodeRecord {
  std::uint64_t episode = 0;
  std::size_t n_aps = 0;
  /// NaN when the episode was aborted.
  double episode_return = 0;
  double mean_throughput = 0;
  EpisodeOutcome outcome;
};

struct RunResult {
  std::vector<AgentAssignment> agents;
  std::vector<Policy> policies;  // index = agent_id - 1
  std::vector<NameResolution> names;
  std::vector<EpisodeRecord> episodes;
  std::vector<StepRecord> steps;
  std::vector<std::string> policy_hashes_before;
  std::vector<std::string> policy_hashes_after;
  ConvergenceReport convergence;
  TimeUs loop_started = 0;
  TimeUs finished = 0;
};

struct RunOptions {
  EventLog* log = nullptr;
  bool record_steps = true;
  /// Optional per-frame loss applied to agent traffic.
  FaultInjector* faults = nullptr;
};

/// Boots the network, registers and discovers the agent names, then trains
/// fresh policies for `spec.episodes` episodes.
RunResult run_training(const Topology& topology, const ScenarioSpec& spec, const RunOptions& options = {});

/// Same phases with frozen policies in greedy mode. `policies` must match
/// the scenario's agent layout.
RunResult run_inference(const Topology& topology, const ScenarioSpec& spec, std::vector<Policy> policies,
                        const RunOptions& options = {});

/// Registers rlagent{k}.kira.internal for every RL node and gateway.kira.internal,
/// then resolves all of them from the gateway.
std::vector<NameResolution> discover_names(const Topology& topology, EventLog* log = nullptr,
                                           RoutingConfig routing = {});

/// Mean per-slot throughput of fixed per-AP configs, simulated directly
/// with the same episode draws a scenario run sees.
double evaluate_static(const EnvConfig& env, std::uint64_t seed, std::size_t episodes,
                       const std::vector<MacConfig>& per_ap);

struct GridResult {
  std::vector<MacConfig> best;  // one per AP
  double best_throughput = 0;
  MacConfig best_uniform;
  double best_uniform_throughput = 0;
  std::size_t evaluated = 0;
};

/// Exhaustive search over every assignment of the per-AP choices to the
/// demo APs (8^4 = 4096 joint configs for the default space).
GridResult grid_search(const EnvConfig& env, std::uint64_t seed, std::size_t episodes,
                       const std::vector<MacConfig>& choices = ActionSpace::default_choices());

/// Multi-agent policy snapshot: a header followed by each agent's policy text.
std::string serialize_policies(ScenarioKind kind, const std::vector<Policy>& policies);
std::vector<Policy> deserialize_policies(std::string_view text, ScenarioKind* kind = nullptr);

/// Trailing moving average; NaN entries are skipped and a window with no
/// finite entries yields NaN.
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

}  // namespace autonet
