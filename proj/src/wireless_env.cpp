#include "autonet/wireless_env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace autonet {

bool MacConfig::valid() const {
  return cw_min_exp >= 1 && cw_min_exp <= 6 && cw_max_exp >= cw_min_exp && cw_max_exp <= 10 && retry_limit >= 1 &&
         retry_limit <= 7;
}

void MacConfig::validate() const {
  if (cw_min_exp < 1 || cw_min_exp > 6) throw std::invalid_argument("cw_min_exp must be in 1..6");
  if (cw_max_exp < cw_min_exp || cw_max_exp > 10) throw std::invalid_argument("cw_max_exp must be in cw_min_exp..10");
  if (retry_limit < 1 || retry_limit > 7) throw std::invalid_argument("retry_limit must be in 1..7");
}

std::string_view to_string(EnvMode mode) { return mode == EnvMode::Demo ? "demo" : "dynamic"; }

EnvMode parse_env_mode(std::string_view text) {
  if (text == "demo") return EnvMode::Demo;
  if (text == "dynamic") return EnvMode::Dynamic;
  throw std::invalid_argument("unknown env mode: " + std::string(text));
}

double analytic_success_rate(int n, double p) {
  if (n < 1) throw std::domain_error("n must be at least 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("p must be in [0, 1]");
  return n * p * std::pow(1.0 - p, n - 1);
}

WirelessEnv::WirelessEnv(EnvConfig config) : config_(config) {
  if (config_.min_aps < 1 || config_.min_aps > config_.max_aps || config_.max_aps > 64 || config_.demo_aps < 1 ||
      config_.demo_aps > 64)
    throw std::invalid_argument("AP count must be in 1..64");
  reset(0, 0);
}

Observation WirelessEnv::reset(std::uint64_t seed, std::uint64_t episode) {
  rng_ = Rng::derive(seed, episode, 0x656e76);
  std::size_t n = config_.demo_aps;
  if (config_.mode == EnvMode::Dynamic)
    n = static_cast<std::size_t>(rng_.between(static_cast<std::int64_t>(config_.min_aps),
                                              static_cast<std::int64_t>(config_.max_aps)));
  aps_.assign(n, ApState{});
  Observation obs{n, {}};
  for (std::size_t i = 0; i < n; ++i) {
    ApState& ap = aps_[i];
    ap.ap_id = static_cast<int>(i + 1);
    ap.offered_load = config_.mode == EnvMode::Demo
                          ? config_.demo_load
                          : config_.min_load + (config_.max_load - config_.min_load) * rng_.uniform();
    ap.cw = ap.config.cw_min();
    obs.aps.push_back(ApObservation{ap.ap_id, 0, 0, 0, 0.0});
  }
  stats_.assign(n, ApWindowStats{});
  pending_.reset();
  slots_ = 0;
  trace_.clear();
  return obs;
}

void WirelessEnv::apply_actions(const std::map<int, MacConfig>& actions) {
  if (actions.size() != aps_.size()) throw std::invalid_argument("actions must cover every AP exactly once");
  for (const auto& [id, config] : actions) {
    if (id < 1 || static_cast<std::size_t>(id) > aps_.size())
      throw std::invalid_argument("unknown ap_id " + std::to_string(id));
    config.validate();
  }
  pending_ = actions;
}

void WirelessEnv::install_pending() {
  if (!pending_) return;
  for (ApState& ap : aps_) {
    ap.config = pending_->at(ap.ap_id);
    ap.cw = std::clamp(ap.cw, ap.config.cw_min(), ap.config.cw_max());
    ap.backoff_counter = std::min(ap.backoff_counter, ap.cw);
    ap.retry_count = std::min(ap.retry_count, ap.config.retry_limit);
  }
  pending_.reset();
}

void WirelessEnv::set_fixed_probability(std::optional<double> p) {
  if (p && !(*p >= 0.0 && *p <= 1.0)) throw std::invalid_argument("probability must be in [0, 1]");
  fixed_p_ = p;
}

StepResult WirelessEnv::step_window(std::size_t window_len) {
  install_pending();
  const std::size_t n = aps_.size();
  stats_.assign(n, ApWindowStats{});
  std::vector<std::uint32_t> busy(n, 0);
  for (std::size_t i = 0; i < n; ++i) stats_[i].queue_before = aps_[i].queue_len;

  std::vector<std::size_t> senders;
  senders.reserve(n);
  for (std::size_t slot = 0; slot < window_len; ++slot) {
    senders.clear();
    std::uint64_t mask = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bool sends = fixed_p_ ? rng_.bernoulli(*fixed_p_) : aps_[i].queue_len > 0 && aps_[i].backoff_counter == 0;
      if (sends) {
        senders.push_back(i);
        mask |= std::uint64_t{1} << i;
      }
    }
    if (tracing_) trace_.push_back(mask);

    for (std::size_t i = 0; i < n; ++i)
      if ((mask & ~(std::uint64_t{1} << i)) != 0) ++busy[i];

    if (fixed_p_) {
      if (senders.size() == 1) ++stats_[senders[0]].delivered;
      else
        for (std::size_t i : senders) ++stats_[i].collisions;
      ++slots_;
      continue;
    }

    if (senders.empty()) {
      for (ApState& ap : aps_)
        if (ap.backoff_counter > 0) --ap.backoff_counter;
    } else if (senders.size() == 1) {
      ApState& ap = aps_[senders[0]];
      ++stats_[senders[0]].delivered;
      --ap.queue_len;
      ap.retry_count = 0;
      ap.cw = ap.config.cw_min();
      ap.backoff_counter = static_cast<int>(rng_.between(0, ap.cw));
    } else {
      for (std::size_t i : senders) {
        ApState& ap = aps_[i];
        ++stats_[i].collisions;
        if (++ap.retry_count > ap.config.retry_limit) {
          --ap.queue_len;
          ++stats_[i].dropped;
          ap.retry_count = 0;
          ap.cw = ap.config.cw_min();
        } else {
          ap.cw = std::min(2 * ap.cw + 1, ap.config.cw_max());
        }
        ap.backoff_counter = static_cast<int>(rng_.between(0, ap.cw));
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (!rng_.bernoulli(aps_[i].offered_load)) continue;
      ++stats_[i].arrivals;
      if (aps_[i].queue_len < config_.queue_cap) ++aps_[i].queue_len;
      else ++stats_[i].dropped;
    }
    ++slots_;
  }

  StepResult result;
  result.observation.n_aps = n;
  for (std::size_t i = 0; i < n; ++i) {
    stats_[i].queue_after = aps_[i].queue_len;
    double frac = window_len == 0 ? 0.0 : static_cast<double>(busy[i]) / static_cast<double>(window_len);
    result.observation.aps.push_back(
        ApObservation{aps_[i].ap_id, stats_[i].delivered, stats_[i].collisions, aps_[i].queue_len, frac});
  }
  result.reward = reward(window_len);
  return result;
}

double WirelessEnv::reward(std::size_t window_len) const {
  if (window_len == 0) return 0.0;
  double total = 0, squares = 0;
  for (const auto& s : stats_) {
    total += s.delivered;
    squares += static_cast<double>(s.delivered) * s.delivered;
  }
  double throughput = total / static_cast<double>(window_len);
  if (!config_.jain_reward) return throughput;
  if (squares == 0) return 0.0;
  return throughput * (total * total) / (static_cast<double>(stats_.size()) * squares);
}

}  // namespace autonet
