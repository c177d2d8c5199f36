#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "autonet/random.hpp"

namespace autonet {

/// MAC parameters of one AP. CW bounds are 2^exp - 1 slots.
struct MacConfig {
  int cw_min_exp = 4;
  int cw_max_exp = 10;
  int retry_limit = 7;

  int cw_min() const { return (1 << cw_min_exp) - 1; }
  int cw_max() const { return (1 << cw_max_exp) - 1; }
  bool valid() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  friend bool operator==(const MacConfig&, const MacConfig&) = default;
  friend auto operator<=>(const MacConfig&, const MacConfig&) = default;
};

struct ApState {
  int ap_id = 0;  // 1-based
  double offered_load = 0;
  std::uint32_t queue_len = 0;
  int backoff_counter = 0;
  int cw = 0;
  int retry_count = 0;
  MacConfig config;
};

struct ApObservation {
  int ap_id = 0;
  std::uint32_t delivered = 0;
  std::uint32_t collisions = 0;
  std::uint32_t queue_len = 0;
  /// Fraction of the window in which some other AP was transmitting.
  double busy_fraction = 0;

  double collision_rate() const {
    auto attempts = delivered + collisions;
    return attempts == 0 ? 0.0 : static_cast<double>(collisions) / attempts;
  }
};

struct Observation {
  std::size_t n_aps = 0;
  std::vector<ApObservation> aps;
};

/// Per-AP accounting for one window; arrivals = delivered + dropped + queue delta.
struct ApWindowStats {
  std::uint32_t arrivals = 0;
  std::uint32_t delivered = 0;
  std::uint32_t collisions = 0;
  std::uint32_t dropped = 0;
  std::uint32_t queue_before = 0;
  std::uint32_t queue_after = 0;
};

struct StepResult {
  Observation observation;
  double reward = 0;
};

enum class EnvMode { Demo, Dynamic };

std::string_view to_string(EnvMode mode);
EnvMode parse_env_mode(std::string_view text);

struct EnvConfig {
  EnvMode mode = EnvMode::Demo;
  std::size_t window_slots = 200;
  std::size_t steps_per_episode = 50;
  std::size_t demo_aps = 4;
  double demo_load = 0.9;
  std::size_t min_aps = 2;
  std::size_t max_aps = 6;
  double min_load = 0.1;
  double max_load = 0.9;
  /// Tail-drop limit per AP queue.
  std::uint32_t queue_cap = 100;
  /// Weight the throughput reward by Jain's fairness index over delivered counts.
  bool jain_reward = false;
  /// Slot duration used to convert windows to simulated time.
  std::int64_t slot_us = 9;
};

/// n independent transmitters with per-slot probability p: expected successes per slot.
double analytic_success_rate(int n, double p);

/// Slotted CSMA/CA channel shared by n APs. Single collision domain, no
/// capture, no hidden terminals; a successful transmission occupies one slot.
class WirelessEnv {
 public:
  explicit WirelessEnv(EnvConfig config = {});

  const EnvConfig& config() const { return config_; }

  /// Draws the episode's AP count and loads from (seed, episode) and zeroes all state.
  Observation reset(std::uint64_t seed, std::uint64_t episode);

  /// Stages one config per AP; installed at the start of the next window.
  /// Throws std::invalid_argument for missing, unknown or invalid entries.
  void apply_actions(const std::map<int, MacConfig>& actions);

  StepResult step_window(std::size_t window_len);
  StepResult step_window() { return step_window(config_.window_slots); }

  /// Test mode: every AP is permanently backlogged and transmits with
  /// probability p in each slot, ignoring backoff.
  void set_fixed_probability(std::optional<double> p);

  /// Records a bitmask of transmitting APs per slot.
  void set_slot_trace(bool on) { tracing_ = on; }
  const std::vector<std::uint64_t>& slot_trace() const { return trace_; }

  std::size_t n_aps() const { return aps_.size(); }
  const std::vector<ApState>& aps() const { return aps_; }
  const std::vector<ApWindowStats>& last_window() const { return stats_; }
  std::uint64_t slots_elapsed() const { return slots_; }

 private:
  void install_pending();
  double reward(std::size_t window_len) const;

  EnvConfig config_;
  Rng rng_;
  std::vector<ApState> aps_;
  std::optional<std::map<int, MacConfig>> pending_;
  std::optional<double> fixed_p_;
  std::vector<ApWindowStats> stats_;
  std::uint64_t slots_ = 0;
  bool tracing_ = false;
  std::vector<std::uint64_t> trace_;
};

}  // namespace autonet
