#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autonet/random.hpp"
#include "autonet/wireless_env.hpp"

namespace autonet {

/// Discretized observation: 5 bits per AP (busy quartile, collision-rate
/// quartile, backlog bit), first AP in the most significant position.
struct ObsBin {
  std::uint8_t n_aps = 0;
  std::uint64_t bits = 0;
  friend auto operator<=>(const ObsBin&, const ObsBin&) = default;
};

struct ApBin {
  int busy = 0;
  int collision = 0;
  int backlog = 0;
  friend bool operator==(const ApBin&, const ApBin&) = default;
};

/// min(3, floor(4x)) for x in [0, 1].
int quartile(double x);
ApBin ap_bin(const ApObservation& ap);
ApBin unpack(ObsBin bin, std::size_t index);
/// At most 12 APs fit in one bin; more throws std::invalid_argument.
ObsBin discretize(const Observation& obs);

/// Enumerated actions: `arity` independent picks from `choices`, encoded
/// big-endian in base |choices|.
class ActionSpace {
 public:
  ActionSpace(std::vector<MacConfig> choices, std::size_t arity);

  /// The eight per-AP configurations used by the agents.
  static std::vector<MacConfig> default_choices();
  static ActionSpace constant(const MacConfig& config, std::size_t arity = 1) { return {{config}, arity}; }

  const std::vector<MacConfig>& choices() const { return choices_; }
  std::size_t arity() const { return arity_; }
  std::size_t size() const { return size_; }

  std::vector<MacConfig> decode(std::size_t action) const;
  std::size_t encode(std::span<const MacConfig> configs) const;

  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;

 private:
  std::vector<MacConfig> choices_;
  std::size_t arity_;
  std::size_t size_;
};

struct QParams {
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon_start = 0.5;
  double epsilon_end = 0.05;
  /// Share of the run over which epsilon decays linearly.
  double anneal_fraction = 0.8;
};

/// Exploration rate for `episode` of `total`.
double epsilon_for_episode(const QParams& params, std::size_t episode, std::size_t total);

enum class SelectMode { Train, Infer };

/// Tabular Q-learning policy. Unvisited cells read as zero.
class Policy {
 public:
  explicit Policy(ActionSpace space, QParams params = {});

  const ActionSpace& space() const { return space_; }
  const QParams& params() const { return params_; }
  double epsilon() const { return epsilon_; }
  void set_epsilon(double epsilon);

  /// Train: epsilon-greedy. Infer: greedy, touches neither the table nor `rng`.
  std::size_t select_action(ObsBin state, SelectMode mode, Rng& rng) const;
  /// Highest-valued action; ties go to the lowest index.
  std::size_t greedy(ObsBin state) const;

  /// One-step Q-learning backup of Q(state, action). Throws std::logic_error when frozen.
  void update(ObsBin state, std::size_t action, double reward, ObsBin next);

  double q(ObsBin state, std::size_t action) const;
  double max_q(ObsBin state) const;
  std::size_t visited_cells() const;
  std::size_t state_count() const { return rows_.size(); }

  void freeze() { frozen_ = true; }
  void unfreeze() { frozen_ = false; }
  bool frozen() const { return frozen_; }

  /// Stable text dump; the frozen flag is not part of it.
  std::string serialize() const;
  /// Throws std::runtime_error on malformed input.
  static Policy deserialize(std::string_view text);
  /// SHA-256 of serialize(), hex.
  std::string hash() const;

 private:
  struct Row {
    std::vector<double> values;
    std::vector<bool> seen;
  };

  ActionSpace space_;
  QParams params_;
  double epsilon_;
  bool frozen_ = false;
  std::map<ObsBin, Row> rows_;
};

enum class ScenarioKind { CentralSingle, CentralMulti, DistributedSingle };

std::string_view to_string(ScenarioKind kind);
/// Accepts "central-single", "central-multi", "distributed-single".
ScenarioKind parse_scenario(std::string_view text);

struct AgentAssignment {
  std::uint16_t agent_id = 0;  // 1-based
  std::size_t rl_node = 0;     // index into the discovered RL nodes
  std::vector<int> ap_ids;
  /// Joint arity of the agent's action space.
  std::size_t arity = 1;
};

/// Joint action spaces are capped at this many independently configured APs;
/// an agent with more APs gives AP i the config of slot i mod kMaxJointArity.
inline constexpr std::size_t kMaxJointArity = 4;

/// Maps agents to RL nodes and AP subsets. Throws std::invalid_argument when
/// the scenario cannot be placed (no nodes, no APs, or a distributed
/// scenario with fewer than two nodes).
std::vector<AgentAssignment> assign_agents(ScenarioKind kind, std::span<const int> ap_ids,
                                           std::size_t rl_nodes_available);

/// Expands an agent's action into one config per AP in `assignment.ap_ids`.
std::vector<MacConfig> configs_for(const ActionSpace& space, std::size_t action, std::size_t ap_count);

}  // namespace autonet
