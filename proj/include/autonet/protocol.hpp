#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autonet/rl.hpp"
#include "autonet/routing.hpp"
#include "autonet/wire.hpp"
#include "autonet/wireless_env.hpp"

namespace autonet {

enum class MsgType : std::uint8_t { ObsReward = 1, Action = 2, EpisodeStart = 3, EpisodeEnd = 4, Ack = 5 };

std::string_view to_string(MsgType type);

inline constexpr std::size_t kHeaderSize = 13;
inline constexpr int kRetryMax = 5;

struct Frame {
  MsgType type = MsgType::Ack;
  std::uint32_t seq = 0;
  std::uint16_t episode = 0;
  std::uint16_t step = 0;
  std::uint16_t agent_id = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Throws std::length_error for payloads over 65535 bytes.
std::vector<std::uint8_t> encode(const Frame& frame);
/// Throws DecodeError on truncation, unknown type or a length mismatch.
Frame decode(std::span<const std::uint8_t> bytes);

/// Observations for one agent's AP subset plus the global reward.
struct ObsRewardPayload {
  std::uint8_t n_aps = 0;  // APs in the whole environment
  std::vector<ApObservation> aps;
  double reward = 0;

  friend bool operator==(const ObsRewardPayload& a, const ObsRewardPayload& b);
};

std::vector<std::uint8_t> encode_obs(const ObsRewardPayload& payload);
ObsRewardPayload decode_obs(std::span<const std::uint8_t> bytes);

/// (ap_id, config) pairs, 4 bytes each.
using ActionPayload = std::vector<std::pair<int, MacConfig>>;
std::vector<std::uint8_t> encode_actions(const ActionPayload& actions);
ActionPayload decode_actions(std::span<const std::uint8_t> bytes);

/// EPISODE_START carries the AP ids the agent controls this episode.
std::vector<std::uint8_t> encode_ap_list(std::span<const int> ap_ids);
std::vector<int> decode_ap_list(std::span<const std::uint8_t> bytes);

/// Retransmission timeout: max(4 x smoothed RTT, repair window).
TimeUs timeout_policy(TimeUs smoothed_rtt, TimeUs repair_window);

/// EWMA round-trip estimate (gain 1/8). Callers apply Karn's rule by only
/// sampling exchanges that were never retransmitted.
class RttEstimator {
 public:
  void sample(TimeUs rtt);
  bool has_sample() const { return samples_ > 0; }
  TimeUs smoothed() const { return static_cast<TimeUs>(srtt_); }
  std::uint64_t samples() const { return samples_; }

 private:
  double srtt_ = 0;
  std::uint64_t samples_ = 0;
};

/// Drops frames on the wire: an optional predicate for targeted drops plus
/// an independent Bernoulli loss with its own RNG.
class FaultInjector {
 public:
  using Filter = std::function<bool(const Frame&, NodeIndex from)>;

  FaultInjector() = default;
  FaultInjector(double loss, std::uint64_t seed) : loss_(loss), rng_(seed) {}

  void set_filter(Filter filter) { filter_ = std::move(filter); }
  bool should_drop(const Frame& frame, NodeIndex from);
  std::uint64_t dropped() const { return dropped_; }

 private:
  double loss_ = 0;
  Rng rng_{0};
  Filter filter_;
  std::uint64_t dropped_ = 0;
};

/// Carries frames over the routed network on Port::Agent and dispatches
/// them to the endpoint registered at the receiving node.
class FrameTransport {
 public:
  using Receiver = std::function<void(const Frame&, NodeId from)>;

  explicit FrameTransport(Router& router);

  Router& router() { return router_; }
  void attach(NodeIndex node, Receiver receiver);
  void send(NodeIndex from, NodeId to, const Frame& frame);
  void set_faults(FaultInjector* faults) { faults_ = faults; }

  std::uint64_t frames_sent() const { return frames_sent_; }
  std::uint64_t malformed() const { return malformed_; }

  /// `PROTO dir type seq episode step` log line; tx/rx at trace level, the rest at info.
  void log(std::string_view dir, const Frame& frame);

 private:
  Router& router_;
  std::map<NodeIndex, Receiver> receivers_;
  FaultInjector* faults_ = nullptr;
  std::uint64_t frames_sent_ = 0;
  std::uint64_t malformed_ = 0;
};

/// Learning agents hosted on one RL node. Responds to every request with
/// the same seq and replays its cached answer for duplicates, so a
/// retransmitted OBS_REWARD never triggers a second update or draw.
class AgentHost {
 public:
  struct Agent {
    Policy* policy = nullptr;
    SelectMode mode = SelectMode::Train;
    std::size_t total_episodes = 0;
    Rng rng{0};
    std::vector<int> ap_ids;
    std::optional<std::uint32_t> last_seq;
    Frame last_response;
    std::optional<std::pair<ObsBin, std::size_t>> previous;
    std::uint64_t updates = 0;
    std::uint64_t decisions = 0;
  };

  AgentHost(FrameTransport& transport, NodeIndex node);

  NodeIndex node() const { return node_; }
  /// `policy` must outlive the host.
  void add_agent(std::uint16_t agent_id, Policy& policy, SelectMode mode, std::size_t total_episodes,
                 std::uint64_t seed);
  const Agent& agent(std::uint16_t agent_id) const { return agents_.at(agent_id); }

 private:
  void on_frame(const Frame& frame, NodeId from);
  Frame respond(Agent& agent, const Frame& frame);

  FrameTransport& transport_;
  NodeIndex node_;
  std::map<std::uint16_t, Agent> agents_;
};

struct RemoteAgent {
  std::uint16_t agent_id = 0;
  NodeId address;
  std::vector<int> ap_ids;
};

struct EpisodeOutcome {
  std::uint64_t episode = 0;
  bool completed = false;
  double episode_return = 0;
  std::size_t steps = 0;
  std::uint64_t retransmissions = 0;
  /// Longest wait for one exchange round, in simulated time.
  TimeUs max_step_delay = 0;
  std::string cause;

  double mean_throughput() const { return steps == 0 ? 0.0 : episode_return / static_cast<double>(steps); }
};

/// Environment side of the exchange, running on the gateway. Stop-and-wait:
/// every phase sends one frame per active agent and waits for all answers
/// before the environment moves.
class GatewaySession {
 public:
  using Done = std::function<void(const EpisodeOutcome&)>;
  /// Called after each applied step with the per-AP window stats.
  using StepHook = std::function<void(std::uint64_t episode, std::size_t step, const StepResult&)>;

  GatewaySession(FrameTransport& transport, NodeIndex gateway, WirelessEnv& env, std::vector<RemoteAgent> agents,
                 std::uint64_t seed);

  void set_step_hook(StepHook hook) { step_hook_ = std::move(hook); }

  /// Runs one episode asynchronously; `done` fires exactly once.
  void start_episode(std::uint64_t episode, Done done);
  /// Drives the simulator until the episode finishes.
  EpisodeOutcome run_episode(std::uint64_t episode);

  const RttEstimator& rtt() const { return rtt_; }
  TimeUs current_timeout() const;
  std::uint64_t actions_applied() const { return actions_applied_; }

 private:
  enum class Phase { Start, Step, End, Idle };
  struct Pending {
    const RemoteAgent* agent = nullptr;
    std::vector<int> present;
    Frame request;
    int attempts = 0;
    TimeUs first_sent = 0;
    TimeUs last_sent = 0;
    std::optional<Frame> response;
  };

  void begin_phase(Phase phase);
  void transmit(Pending& pending);
  void on_timeout(std::uint32_t seq, int attempt);
  void on_frame(const Frame& frame, NodeId from);
  void phase_complete();
  void apply_and_advance();
  void finish(bool completed, std::string cause);

  FrameTransport& transport_;
  NodeIndex gateway_;
  WirelessEnv& env_;
  std::vector<RemoteAgent> agents_;
  std::uint64_t seed_;
  StepHook step_hook_;
  RttEstimator rtt_;

  Phase phase_ = Phase::Idle;
  std::uint32_t next_seq_ = 1;
  std::uint64_t episode_ = 0;
  std::size_t step_ = 0;
  Observation last_obs_;
  double last_reward_ = 0;
  TimeUs phase_started_ = 0;
  std::map<std::uint32_t, Pending> pending_;
  EpisodeOutcome outcome_;
  Done done_;
  std::uint64_t actions_applied_ = 0;
};

}  // namespace autonet
