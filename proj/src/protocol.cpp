#include "autonet/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace autonet {

namespace {

constexpr std::size_t kApRecord = 15;  // ap_id u8, delivered u16, collisions u16, queue u16, busy f64

std::uint16_t clamp16(std::uint32_t v) { return static_cast<std::uint16_t>(std::min<std::uint32_t>(v, 0xffff)); }

MsgType expected_reply(MsgType request) { return request == MsgType::ObsReward ? MsgType::Action : MsgType::Ack; }

}  // namespace

std::string_view to_string(MsgType type) {
  switch (type) {
    case MsgType::ObsReward: return "OBS_REWARD";
    case MsgType::Action: return "ACTION";
    case MsgType::EpisodeStart: return "EPISODE_START";
    case MsgType::EpisodeEnd: return "EPISODE_END";
    case MsgType::Ack: return "ACK";
  }
  return "UNKNOWN";
}

std::vector<std::uint8_t> encode(const Frame& frame) {
  if (frame.payload.size() > 0xffff) throw std::length_error("frame payload exceeds 65535 bytes");
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(frame.type));
  w.u32(frame.seq);
  w.u16(frame.episode);
  w.u16(frame.step);
  w.u16(frame.agent_id);
  w.u16(static_cast<std::uint16_t>(frame.payload.size()));
  w.raw(frame.payload);
  return w.take();
}

Frame decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw DecodeError("truncated buffer");
  ByteReader r(bytes);
  Frame f;
  std::uint8_t type = r.u8();
  if (type < 1 || type > 5) throw DecodeError("unknown msg_type " + std::to_string(type));
  f.type = static_cast<MsgType>(type);
  f.seq = r.u32();
  f.episode = r.u16();
  f.step = r.u16();
  f.agent_id = r.u16();
  std::size_t len = r.u16();
  if (r.remaining() < len) throw DecodeError("truncated buffer");
  if (r.remaining() > len) throw DecodeError("length mismatch");
  auto body = r.raw(len);
  f.payload.assign(body.begin(), body.end());
  return f;
}

bool operator==(const ObsRewardPayload& a, const ObsRewardPayload& b) {
  if (a.n_aps != b.n_aps || a.reward != b.reward || a.aps.size() != b.aps.size()) return false;
  for (std::size_t i = 0; i < a.aps.size(); ++i) {
    const auto& x = a.aps[i];
    const auto& y = b.aps[i];
    if (x.ap_id != y.ap_id || x.delivered != y.delivered || x.collisions != y.collisions ||
        x.queue_len != y.queue_len || x.busy_fraction != y.busy_fraction)
      return false;
  }
  return true;
}

std::vector<std::uint8_t> encode_obs(const ObsRewardPayload& payload) {
  if (payload.aps.size() > 255) throw std::length_error("too many APs in one observation");
  ByteWriter w;
  w.u8(payload.n_aps);
  w.u8(static_cast<std::uint8_t>(payload.aps.size()));
  for (const auto& ap : payload.aps) {
    if (ap.ap_id < 1 || ap.ap_id > 255) throw std::invalid_argument("ap_id must fit in one byte");
    w.u8(static_cast<std::uint8_t>(ap.ap_id));
    w.u16(clamp16(ap.delivered));
    w.u16(clamp16(ap.collisions));
    w.u16(clamp16(ap.queue_len));
    w.f64(ap.busy_fraction);
  }
  w.f64(payload.reward);
  return w.take();
}

ObsRewardPayload decode_obs(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ObsRewardPayload p;
  p.n_aps = r.u8();
  std::size_t count = r.u8();
  if (bytes.size() != 2 + count * kApRecord + 8) throw DecodeError("length mismatch");
  for (std::size_t i = 0; i < count; ++i) {
    ApObservation ap;
    ap.ap_id = r.u8();
    ap.delivered = r.u16();
    ap.collisions = r.u16();
    ap.queue_len = r.u16();
    ap.busy_fraction = r.f64();
    if (!(ap.busy_fraction >= 0.0 && ap.busy_fraction <= 1.0)) throw DecodeError("busy fraction out of range");
    p.aps.push_back(ap);
  }
  p.reward = r.f64();
  if (!std::isfinite(p.reward)) throw DecodeError("reward is not finite");
  return p;
}

std::vector<std::uint8_t> encode_actions(const ActionPayload& actions) {
  ByteWriter w;
  for (const auto& [id, c] : actions) {
    if (id < 1 || id > 255) throw std::invalid_argument("ap_id must fit in one byte");
    w.u8(static_cast<std::uint8_t>(id));
    w.u8(static_cast<std::uint8_t>(c.cw_min_exp));
    w.u8(static_cast<std::uint8_t>(c.cw_max_exp));
    w.u8(static_cast<std::uint8_t>(c.retry_limit));
  }
  return w.take();
}

ActionPayload decode_actions(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) throw DecodeError("length mismatch");
  ByteReader r(bytes);
  ActionPayload out;
  while (!r.done()) {
    int id = r.u8();
    MacConfig c;
    c.cw_min_exp = r.u8();
    c.cw_max_exp = r.u8();
    c.retry_limit = r.u8();
    out.emplace_back(id, c);
  }
  return out;
}

std::vector<std::uint8_t> encode_ap_list(std::span<const int> ap_ids) {
  if (ap_ids.size() > 255) throw std::length_error("too many APs");
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(ap_ids.size()));
  for (int id : ap_ids) {
    if (id < 1 || id > 255) throw std::invalid_argument("ap_id must fit in one byte");
    w.u8(static_cast<std::uint8_t>(id));
  }
  return w.take();
}

std::vector<int> decode_ap_list(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  std::size_t count = r.u8();
  if (bytes.size() != 1 + count) throw DecodeError("length mismatch");
  std::vector<int> ids;
  for (std::size_t i = 0; i < count; ++i) ids.push_back(r.u8());
  return ids;
}

TimeUs timeout_policy(TimeUs smoothed_rtt, TimeUs repair_window) {
  if (smoothed_rtt <= 0) throw std::invalid_argument("RTT estimate must be positive");
  return std::max(4 * smoothed_rtt, repair_window);
}

void RttEstimator::sample(TimeUs rtt) {
  srtt_ = samples_ == 0 ? static_cast<double>(rtt) : srtt_ + (static_cast<double>(rtt) - srtt_) / 8.0;
  ++samples_;
}

bool FaultInjector::should_drop(const Frame& frame, NodeIndex from) {
  bool drop = filter_ && filter_(frame, from);
  if (!drop && loss_ > 0) drop = rng_.bernoulli(loss_);
  if (drop) ++dropped_;
  return drop;
}

FrameTransport::FrameTransport(Router& router) : router_(router) {
  router_.set_handler(Port::Agent, [this](NodeIndex at, const Packet& packet) {
    auto it = receivers_.find(at);
    if (it == receivers_.end()) return;
    Frame frame;
    try {
      frame = decode(packet.data);
    } catch (const DecodeError&) {
      ++malformed_;
      return;
    }
    log("rx", frame);
    it->second(frame, packet.src);
  });
}

void FrameTransport::attach(NodeIndex node, Receiver receiver) { receivers_[node] = std::move(receiver); }

void FrameTransport::send(NodeIndex from, NodeId to, const Frame& frame) {
  ++frames_sent_;
  if (faults_ != nullptr && faults_->should_drop(frame, from)) {
    log("drop", frame);
    return;
  }
  log("tx", frame);
  router_.send(from, to, Port::Agent, encode(frame));
}

void FrameTransport::log(std::string_view dir, const Frame& frame) {
  EventLog* log = router_.net().log();
  if (log == nullptr) return;
  LogLevel level = dir == "tx" || dir == "rx" ? LogLevel::Trace : LogLevel::Info;
  if (level == LogLevel::Trace && !log->tracing()) return;
  log->emit(level, router_.net().now(), "PROTO",
            {dir, to_string(frame.type), std::to_string(frame.seq), std::to_string(frame.episode),
             std::to_string(frame.step)});
}

AgentHost::AgentHost(FrameTransport& transport, NodeIndex node) : transport_(transport), node_(node) {
  transport_.attach(node, [this](const Frame& frame, NodeId from) { on_frame(frame, from); });
}

void AgentHost::add_agent(std::uint16_t agent_id, Policy& policy, SelectMode mode, std::size_t total_episodes,
                          std::uint64_t seed) {
  Agent agent;
  agent.policy = &policy;
  agent.mode = mode;
  agent.total_episodes = total_episodes;
  agent.rng = Rng::derive(seed, agent_id, 0x6167);
  agents_[agent_id] = std::move(agent);
}

void AgentHost::on_frame(const Frame& frame, NodeId from) {
  auto it = agents_.find(frame.agent_id);
  if (it == agents_.end()) return;
  Agent& agent = it->second;
  if (agent.last_seq && frame.seq == *agent.last_seq) {
    transport_.log("dup", frame);
    transport_.send(node_, from, agent.last_response);
    return;
  }
  if (agent.last_seq && frame.seq < *agent.last_seq) return;
  Frame response;
  try {
    response = respond(agent, frame);
  } catch (const DecodeError&) {
    transport_.log("bad", frame);
    return;
  }
  agent.last_seq = frame.seq;
  agent.last_response = response;
  transport_.send(node_, from, response);
}

Frame AgentHost::respond(Agent& agent, const Frame& frame) {
  Frame reply{expected_reply(frame.type), frame.seq, frame.episode, frame.step, frame.agent_id, {}};
  Policy& policy = *agent.policy;
  bool training = agent.mode == SelectMode::Train;
  switch (frame.type) {
    case MsgType::EpisodeStart:
      agent.ap_ids = decode_ap_list(frame.payload);
      agent.previous.reset();
      if (training) policy.set_epsilon(epsilon_for_episode(policy.params(), frame.episode, agent.total_episodes));
      break;
    case MsgType::ObsReward: {
      auto payload = decode_obs(frame.payload);
      ObsBin state = discretize(Observation{payload.aps.size(), payload.aps});
      if (training && agent.previous) {
        policy.update(agent.previous->first, agent.previous->second, payload.reward, state);
        ++agent.updates;
      }
      std::size_t action = policy.select_action(state, agent.mode, agent.rng);
      ++agent.decisions;
      agent.previous = {state, action};
      auto configs = configs_for(policy.space(), action, agent.ap_ids.size());
      ActionPayload actions;
      for (std::size_t i = 0; i < agent.ap_ids.size(); ++i) actions.emplace_back(agent.ap_ids[i], configs[i]);
      reply.payload = encode_actions(actions);
      break;
    }
    case MsgType::EpisodeEnd: {
      auto payload = decode_obs(frame.payload);
      ObsBin state = discretize(Observation{payload.aps.size(), payload.aps});
      // Episodes are cut by a step limit rather than reaching a terminal
      // state, so the last transition still bootstraps.
      if (training && agent.previous) {
        policy.update(agent.previous->first, agent.previous->second, payload.reward, state);
        ++agent.updates;
      }
      agent.previous.reset();
      break;
    }
    case MsgType::Action:
    case MsgType::Ack:
      throw DecodeError("agent received a reply-type frame");
  }
  return reply;
}

GatewaySession::GatewaySession(FrameTransport& transport, NodeIndex gateway, WirelessEnv& env,
                               std::vector<RemoteAgent> agents, std::uint64_t seed)
    : transport_(transport), gateway_(gateway), env_(env), agents_(std::move(agents)), seed_(seed) {
  transport_.attach(gateway_, [this](const Frame& frame, NodeId from) { on_frame(frame, from); });
}

TimeUs GatewaySession::current_timeout() const {
  TimeUs window = transport_.router().config().repair_window;
  return rtt_.has_sample() ? timeout_policy(std::max<TimeUs>(1, rtt_.smoothed()), window) : window;
}

void GatewaySession::start_episode(std::uint64_t episode, Done done) {
  if (phase_ != Phase::Idle) throw std::logic_error("episode already running");
  done_ = std::move(done);
  episode_ = episode;
  step_ = 0;
  last_obs_ = env_.reset(seed_, episode);
  last_reward_ = 0;
  outcome_ = EpisodeOutcome{};
  outcome_.episode = episode;
  begin_phase(Phase::Start);
}

EpisodeOutcome GatewaySession::run_episode(std::uint64_t episode) {
  std::optional<EpisodeOutcome> result;
  start_episode(episode, [&](const EpisodeOutcome& o) { result = o; });
  auto& sim = transport_.router().net().sim();
  sim.run_while_pending([&] { return result.has_value(); }, std::numeric_limits<TimeUs>::max());
  if (!result) {
    finish(false, "simulation stalled");
    return outcome_;
  }
  return *result;
}

void GatewaySession::begin_phase(Phase phase) {
  phase_ = phase;
  pending_.clear();
  phase_started_ = transport_.router().net().now();
  const auto episode16 = static_cast<std::uint16_t>(episode_);
  const auto step16 = static_cast<std::uint16_t>(step_);

  std::vector<std::uint32_t> order;
  for (const RemoteAgent& agent : agents_) {
    Pending p;
    p.agent = &agent;
    for (int id : agent.ap_ids)
      if (id >= 1 && static_cast<std::size_t>(id) <= env_.n_aps()) p.present.push_back(id);
    if (p.present.empty()) continue;

    Frame& f = p.request;
    f.seq = next_seq_++;
    f.episode = episode16;
    f.step = step16;
    f.agent_id = agent.agent_id;
    if (phase == Phase::Start) {
      f.type = MsgType::EpisodeStart;
      f.payload = encode_ap_list(p.present);
    } else {
      f.type = phase == Phase::Step ? MsgType::ObsReward : MsgType::EpisodeEnd;
      ObsRewardPayload payload;
      payload.n_aps = static_cast<std::uint8_t>(env_.n_aps());
      payload.reward = last_reward_;
      for (int id : p.present) payload.aps.push_back(last_obs_.aps.at(static_cast<std::size_t>(id - 1)));
      f.payload = encode_obs(payload);
    }
    order.push_back(f.seq);
    pending_.emplace(f.seq, std::move(p));
  }
  if (order.empty()) {
    finish(false, "no agent controls any AP");
    return;
  }
  for (std::uint32_t seq : order) transmit(pending_.at(seq));
}

void GatewaySession::transmit(Pending& pending) {
  TimeUs now = transport_.router().net().now();
  if (pending.attempts == 0) pending.first_sent = now;
  ++pending.attempts;
  pending.last_sent = now;
  if (pending.attempts > 1) {
    ++outcome_.retransmissions;
    transport_.log("retx", pending.request);
  }
  transport_.send(gateway_, pending.agent->address, pending.request);
  std::uint32_t seq = pending.request.seq;
  int attempt = pending.attempts;
  transport_.router().net().sim().schedule_in(current_timeout(), EventKind::Timer, "proto-timeout",
                                              [this, seq, attempt] { on_timeout(seq, attempt); });
}

void GatewaySession::on_timeout(std::uint32_t seq, int attempt) {
  auto it = pending_.find(seq);
  if (it == pending_.end()) return;
  Pending& p = it->second;
  if (p.response || p.attempts != attempt) return;
  if (p.attempts > kRetryMax) {
    finish(false, "agent " + std::to_string(p.agent->agent_id) + " unreachable: " +
                      std::string(to_string(p.request.type)) + " step " + std::to_string(step_) + " unanswered after " +
                      std::to_string(kRetryMax) + " retransmissions");
    return;
  }
  transmit(p);
}

void GatewaySession::on_frame(const Frame& frame, NodeId) {
  if (phase_ == Phase::Idle) return;
  auto it = pending_.find(frame.seq);
  if (it == pending_.end()) return;
  Pending& p = it->second;
  if (p.response || frame.agent_id != p.agent->agent_id || frame.type != expected_reply(p.request.type)) return;
  if (frame.type == MsgType::Action) {
    try {
      auto actions = decode_actions(frame.payload);
      std::vector<int> ids;
      for (const auto& [id, c] : actions) {
        c.validate();
        ids.push_back(id);
      }
      if (ids != p.present) throw std::invalid_argument("action does not cover the agent's APs");
    } catch (const std::exception&) {
      transport_.log("bad", frame);
      return;
    }
  }
  TimeUs now = transport_.router().net().now();
  if (p.attempts == 1) rtt_.sample(std::max<TimeUs>(1, now - p.first_sent));
  p.response = frame;
  for (const auto& [seq, other] : pending_)
    if (!other.response) return;
  phase_complete();
}

void GatewaySession::phase_complete() {
  TimeUs delay = transport_.router().net().now() - phase_started_;
  outcome_.max_step_delay = std::max(outcome_.max_step_delay, delay);
  switch (phase_) {
    case Phase::Start: begin_phase(Phase::Step); break;
    case Phase::Step: apply_and_advance(); break;
    case Phase::End: finish(true, ""); break;
    case Phase::Idle: break;
  }
}

void GatewaySession::apply_and_advance() {
  std::map<int, MacConfig> actions;
  for (const auto& [seq, p] : pending_)
    for (const auto& [id, config] : decode_actions(p.response->payload)) actions[id] = config;
  TimeUs delay = transport_.router().net().now() - phase_started_;
  try {
    env_.apply_actions(actions);
  } catch (const std::invalid_argument& e) {
    finish(false, std::string("rejected actions: ") + e.what());
    return;
  }
  actions_applied_ += pending_.size();
  StepResult result = env_.step_window();
  outcome_.episode_return += result.reward;
  ++outcome_.steps;
  if (step_hook_) step_hook_(episode_, step_, result);
  if (EventLog* log = transport_.router().net().log(); log != nullptr && log->tracing())
    log->trace(transport_.router().net().now(), "STEP",
               {std::to_string(episode_), std::to_string(step_), std::to_string(result.reward), std::to_string(delay)});
  last_obs_ = std::move(result.observation);
  last_reward_ = result.reward;
  ++step_;
  Phase next = step_ < env_.config().steps_per_episode ? Phase::Step : Phase::End;
  pending_.clear();
  phase_ = next;
  TimeUs window = static_cast<TimeUs>(env_.config().window_slots) * env_.config().slot_us;
  std::uint64_t episode = episode_;
  transport_.router().net().sim().schedule_in(window, EventKind::Timer, "env-window", [this, next, episode] {
    if (phase_ == next && episode_ == episode && pending_.empty()) begin_phase(next);
  });
}

void GatewaySession::finish(bool completed, std::string cause) {
  phase_ = Phase::Idle;
  pending_.clear();
  outcome_.completed = completed;
  outcome_.cause = std::move(cause);
  if (EventLog* log = transport_.router().net().log())
    log->info(transport_.router().net().now(), "EPISODE",
              {std::to_string(episode_), completed ? "completed" : "aborted", outcome_.cause.empty() ? "-" : outcome_.cause});
  if (done_) {
    auto done = std::move(done_);
    done_ = nullptr;
    done(outcome_);
  }
}

}  // namespace autonet
