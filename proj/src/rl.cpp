#include "autonet/rl.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace autonet {

namespace {

constexpr std::size_t kMaxBinAps = 12;
constexpr std::string_view kMagic = "autonet-policy v1";

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

// Whitespace tokenizer with typed reads; every failure is a runtime_error.
class Tokens {
 public:
  explicit Tokens(std::string_view text) : in_(std::string(text)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw std::runtime_error("policy: unexpected end of input");
    return w;
  }
  void expect(std::string_view keyword) {
    if (word() != keyword) throw std::runtime_error("policy: expected '" + std::string(keyword) + "'");
  }
  std::uint64_t integer() {
    std::string w = word();
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || end != w.data() + w.size()) throw std::runtime_error("policy: bad integer '" + w + "'");
    return v;
  }
  double real() {
    std::string w = word();
    double v = 0;
    auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || end != w.data() + w.size() || !std::isfinite(v))
      throw std::runtime_error("policy: bad number '" + w + "'");
    return v;
  }
  bool at_end() {
    std::string w;
    return !(in_ >> w);
  }

 private:
  std::istringstream in_;
};

}  // namespace

int quartile(double x) { return std::clamp(static_cast<int>(std::floor(4.0 * x)), 0, 3); }

ApBin ap_bin(const ApObservation& ap) {
  return ApBin{quartile(ap.busy_fraction), quartile(ap.collision_rate()), ap.queue_len > 0 ? 1 : 0};
}

ApBin unpack(ObsBin bin, std::size_t index) {
  if (index >= bin.n_aps) throw std::out_of_range("AP index outside bin");
  auto packed = static_cast<int>((bin.bits >> (5 * (bin.n_aps - 1 - index))) & 0x1f);
  return ApBin{packed >> 3, (packed >> 1) & 3, packed & 1};
}

ObsBin discretize(const Observation& obs) {
  if (obs.aps.size() > kMaxBinAps) throw std::invalid_argument("too many APs for one observation bin");
  ObsBin bin{static_cast<std::uint8_t>(obs.aps.size()), 0};
  for (const auto& ap : obs.aps) {
    ApBin b = ap_bin(ap);
    bin.bits = (bin.bits << 5) | static_cast<std::uint64_t>((b.busy << 3) | (b.collision << 1) | b.backlog);
  }
  return bin;
}

ActionSpace::ActionSpace(std::vector<MacConfig> choices, std::size_t arity)
    : choices_(std::move(choices)), arity_(arity), size_(1) {
  if (choices_.empty()) throw std::invalid_argument("action space needs at least one choice");
  if (arity_ == 0 || arity_ > kMaxJointArity) throw std::invalid_argument("action arity must be in 1..4");
  for (std::size_t i = 0; i < choices_.size(); ++i) {
    choices_[i].validate();
    if (std::find(choices_.begin(), choices_.begin() + static_cast<std::ptrdiff_t>(i), choices_[i]) !=
        choices_.begin() + static_cast<std::ptrdiff_t>(i))
      throw std::invalid_argument("duplicate action choice");
  }
  for (std::size_t i = 0; i < arity_; ++i) size_ *= choices_.size();
}

std::vector<MacConfig> ActionSpace::default_choices() {
  std::vector<MacConfig> out;
  for (int exp : {1, 3, 5})
    for (int retry : {3, 7}) out.push_back(MacConfig{exp, exp + 4, retry});
  out.push_back(MacConfig{1, 1, 1});
  out.push_back(MacConfig{6, 10, 7});
  return out;
}

std::vector<MacConfig> ActionSpace::decode(std::size_t action) const {
  if (action >= size_) throw std::out_of_range("action index outside action space");
  std::vector<MacConfig> out(arity_);
  for (std::size_t i = arity_; i-- > 0;) {
    out[i] = choices_[action % choices_.size()];
    action /= choices_.size();
  }
  return out;
}

std::size_t ActionSpace::encode(std::span<const MacConfig> configs) const {
  if (configs.size() != arity_) throw std::invalid_argument("wrong number of configs for action space");
  std::size_t action = 0;
  for (const auto& c : configs) {
    auto it = std::find(choices_.begin(), choices_.end(), c);
    if (it == choices_.end()) throw std::invalid_argument("config not in action space");
    action = action * choices_.size() + static_cast<std::size_t>(it - choices_.begin());
  }
  return action;
}

double epsilon_for_episode(const QParams& params, std::size_t episode, std::size_t total) {
  double span = params.anneal_fraction * static_cast<double>(total);
  if (span <= 0 || static_cast<double>(episode) >= span) return params.epsilon_end;
  return params.epsilon_start + (params.epsilon_end - params.epsilon_start) * static_cast<double>(episode) / span;
}

Policy::Policy(ActionSpace space, QParams params)
    : space_(std::move(space)), params_(params), epsilon_(params.epsilon_start) {
  if (!(params_.alpha > 0 && params_.alpha <= 1)) throw std::invalid_argument("alpha must be in (0, 1]");
  if (!(params_.gamma >= 0 && params_.gamma < 1)) throw std::invalid_argument("gamma must be in [0, 1)");
  set_epsilon(epsilon_);
}

void Policy::set_epsilon(double epsilon) {
  if (!(epsilon >= 0 && epsilon <= 1)) throw std::invalid_argument("epsilon must be in [0, 1]");
  epsilon_ = epsilon;
}

std::size_t Policy::greedy(ObsBin state) const {
  auto it = rows_.find(state);
  if (it == rows_.end()) return 0;
  const auto& values = it->second.values;
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::size_t Policy::select_action(ObsBin state, SelectMode mode, Rng& rng) const {
  if (mode == SelectMode::Train && rng.bernoulli(epsilon_)) return rng.below(space_.size());
  return greedy(state);
}

void Policy::update(ObsBin state, std::size_t action, double reward, ObsBin next) {
  if (frozen_) throw std::logic_error("update called on a frozen policy");
  if (action >= space_.size()) throw std::out_of_range("action index outside action space");
  double target = reward + params_.gamma * max_q(next);
  auto [it, fresh] = rows_.try_emplace(state);
  Row& row = it->second;
  if (fresh) {
    row.values.assign(space_.size(), 0.0);
    row.seen.assign(space_.size(), false);
  }
  row.values[action] += params_.alpha * (target - row.values[action]);
  row.seen[action] = true;
}

double Policy::q(ObsBin state, std::size_t action) const {
  auto it = rows_.find(state);
  return it == rows_.end() ? 0.0 : it->second.values.at(action);
}

double Policy::max_q(ObsBin state) const {
  auto it = rows_.find(state);
  if (it == rows_.end()) return 0.0;
  return *std::max_element(it->second.values.begin(), it->second.values.end());
}

std::size_t Policy::visited_cells() const {
  std::size_t n = 0;
  for (const auto& [state, row] : rows_) n += static_cast<std::size_t>(std::count(row.seen.begin(), row.seen.end(), true));
  return n;
}

std::string Policy::serialize() const {
  std::ostringstream out;
  out << kMagic << '\n';
  out << "alpha " << format_double(params_.alpha) << '\n';
  out << "gamma " << format_double(params_.gamma) << '\n';
  out << "anneal " << format_double(params_.epsilon_start) << ' ' << format_double(params_.epsilon_end) << ' '
      << format_double(params_.anneal_fraction) << '\n';
  out << "epsilon " << format_double(epsilon_) << '\n';
  out << "arity " << space_.arity() << '\n';
  out << "choices " << space_.choices().size() << '\n';
  for (const auto& c : space_.choices()) out << c.cw_min_exp << ' ' << c.cw_max_exp << ' ' << c.retry_limit << '\n';
  out << "states " << rows_.size() << '\n';
  for (const auto& [state, row] : rows_) {
    auto cells = std::count(row.seen.begin(), row.seen.end(), true);
    out << "state " << static_cast<int>(state.n_aps) << ' ' << state.bits << ' ' << cells << '\n';
    for (std::size_t a = 0; a < row.values.size(); ++a)
      if (row.seen[a]) out << a << ' ' << format_double(row.values[a]) << '\n';
  }
  return out.str();
}

Policy Policy::deserialize(std::string_view text) {
  if (!text.starts_with(kMagic)) throw std::runtime_error("policy: missing header");
  Tokens in(text.substr(kMagic.size()));
  QParams params;
  in.expect("alpha");
  params.alpha = in.real();
  in.expect("gamma");
  params.gamma = in.real();
  in.expect("anneal");
  params.epsilon_start = in.real();
  params.epsilon_end = in.real();
  params.anneal_fraction = in.real();
  in.expect("epsilon");
  double epsilon = in.real();
  in.expect("arity");
  std::size_t arity = in.integer();
  in.expect("choices");
  std::size_t count = in.integer();
  if (count == 0 || count > 1024) throw std::runtime_error("policy: bad choice count");
  std::vector<MacConfig> choices;
  for (std::size_t i = 0; i < count; ++i) {
    MacConfig c;
    c.cw_min_exp = static_cast<int>(in.integer());
    c.cw_max_exp = static_cast<int>(in.integer());
    c.retry_limit = static_cast<int>(in.integer());
    choices.push_back(c);
  }

  Policy policy = [&] {
    try {
      return Policy(ActionSpace(std::move(choices), arity), params);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(std::string("policy: ") + e.what());
    }
  }();
  policy.set_epsilon(epsilon);

  in.expect("states");
  std::size_t states = in.integer();
  for (std::size_t s = 0; s < states; ++s) {
    in.expect("state");
    std::uint64_t n_aps = in.integer();
    if (n_aps > kMaxBinAps) throw std::runtime_error("policy: bad state width");
    ObsBin bin{static_cast<std::uint8_t>(n_aps), in.integer()};
    std::size_t cells = in.integer();
    if (cells > policy.space_.size()) throw std::runtime_error("policy: too many cells");
    auto [it, fresh] = policy.rows_.try_emplace(bin);
    if (!fresh) throw std::runtime_error("policy: duplicate state");
    it->second.values.assign(policy.space_.size(), 0.0);
    it->second.seen.assign(policy.space_.size(), false);
    for (std::size_t c = 0; c < cells; ++c) {
      std::size_t a = in.integer();
      if (a >= policy.space_.size()) throw std::runtime_error("policy: action out of range");
      it->second.values[a] = in.real();
      it->second.seen[a] = true;
    }
  }
  if (!in.at_end()) throw std::runtime_error("policy: trailing data");
  return policy;
}

std::string Policy::hash() const {
  std::string text = serialize();
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest.data());
  std::string hex;
  for (unsigned char b : digest) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  return hex;
}

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::CentralSingle: return "central-single";
    case ScenarioKind::CentralMulti: return "central-multi";
    case ScenarioKind::DistributedSingle: return "distributed-single";
  }
  return "central-single";
}

ScenarioKind parse_scenario(std::string_view text) {
  if (text == "central-single") return ScenarioKind::CentralSingle;
  if (text == "central-multi") return ScenarioKind::CentralMulti;
  if (text == "distributed-single") return ScenarioKind::DistributedSingle;
  throw std::invalid_argument("unknown scenario: " + std::string(text));
}

std::vector<AgentAssignment> assign_agents(ScenarioKind kind, std::span<const int> ap_ids,
                                           std::size_t rl_nodes_available) {
  if (ap_ids.empty()) throw std::invalid_argument("no APs to assign");
  if (rl_nodes_available == 0) throw std::invalid_argument("no RL nodes available");
  std::vector<AgentAssignment> out;
  auto arity = [](std::size_t n) { return std::min(n, kMaxJointArity); };
  switch (kind) {
    case ScenarioKind::CentralSingle:
      out.push_back({1, 0, {ap_ids.begin(), ap_ids.end()}, arity(ap_ids.size())});
      break;
    case ScenarioKind::CentralMulti:
      for (std::size_t i = 0; i < ap_ids.size(); ++i)
        out.push_back({static_cast<std::uint16_t>(i + 1), 0, {ap_ids[i]}, 1});
      break;
    case ScenarioKind::DistributedSingle: {
      if (rl_nodes_available < 2) throw std::invalid_argument("distributed scenario needs at least two RL nodes");
      std::size_t agents = std::min(rl_nodes_available, ap_ids.size());
      std::size_t base = ap_ids.size() / agents, extra = ap_ids.size() % agents, next = 0;
      for (std::size_t k = 0; k < agents; ++k) {
        std::size_t take = base + (k < extra ? 1 : 0);
        std::vector<int> subset(ap_ids.begin() + static_cast<std::ptrdiff_t>(next),
                                ap_ids.begin() + static_cast<std::ptrdiff_t>(next + take));
        next += take;
        out.push_back({static_cast<std::uint16_t>(k + 1), k, std::move(subset), arity(take)});
      }
      break;
    }
  }
  return out;
}

std::vector<MacConfig> configs_for(const ActionSpace& space, std::size_t action, std::size_t ap_count) {
  auto joint = space.decode(action);
  std::vector<MacConfig> out(ap_count);
  for (std::size_t i = 0; i < ap_count; ++i) out[i] = joint[i % joint.size()];
  return out;
}

}  // namespace autonet
