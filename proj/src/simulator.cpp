#include "autonet/simulator.hpp"

#include <stdexcept>

namespace autonet {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::PacketArrival: return "PacketArrival";
    case EventKind::LinkFail: return "LinkFail";
    case EventKind::LinkRestore: return "LinkRestore";
    case EventKind::Timer: return "Timer";
  }
  return "Timer";
}

void Simulator::schedule(Event event) {
  if (event.fire_time < now_)
    throw std::invalid_argument("event at " + std::to_string(event.fire_time) + " is before now (" +
                                std::to_string(now_) + ")");
  std::size_t slot;
  if (!free_slots_.empty()) {
    slot = free_slots_.back();
    free_slots_.pop_back();
    slots_[slot] = std::move(event);
  } else {
    slot = slots_.size();
    slots_.push_back(std::move(event));
  }
  queue_.push(Entry{slots_[slot].fire_time, next_seq_++, slot});
}

void Simulator::schedule_at(TimeUs time, EventKind kind, std::string detail, std::function<void()> action) {
  schedule(Event{time, kind, std::move(detail), std::move(action)});
}

void Simulator::dispatch(const Entry& entry) {
  Event event = std::move(slots_[entry.slot]);
  free_slots_.push_back(entry.slot);
  now_ = entry.time;
  ++processed_;
  if (tracing_) {
    trace_.push_back(std::to_string(now_) + '\t' + std::string(to_string(event.kind)) + '\t' + event.detail);
  }
  if (event.action) event.action();
}

bool Simulator::step() {
  if (queue_.empty()) return false;
  Entry entry = queue_.top();
  queue_.pop();
  dispatch(entry);
  return true;
}

std::optional<TimeUs> Simulator::next_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().time;
}

std::size_t Simulator::run_until(TimeUs t_end) {
  if (t_end < now_) throw std::invalid_argument("run_until into the past");
  std::size_t count = 0;
  while (!queue_.empty() && queue_.top().time <= t_end) {
    step();
    ++count;
  }
  now_ = t_end;
  return count;
}

bool Simulator::run_while_pending(const std::function<bool()>& done, TimeUs deadline) {
  while (!done()) {
    auto next = next_time();
    if (!next || *next > deadline) return done();
    step();
  }
  return true;
}

NetSim::NetSim(Topology topology, EventLog* log)
    : topology_(std::move(topology)), log_(log), link_epoch_(topology_.links().size(), 0) {}

namespace {
LinkIndex require_link(const Topology& topology, std::string_view a, std::string_view b) {
  auto link = topology.find_link(a, b);
  if (!link)
    throw TopologyError(TopologyError::Kind::UnknownLink, 0,
                        "unknown link " + std::string(a) + "-" + std::string(b));
  return *link;
}
}  // namespace

void NetSim::fail_link(std::string_view a, std::string_view b, TimeUs at) {
  fail_link(require_link(topology_, a, b), at);
}

void NetSim::restore_link(std::string_view a, std::string_view b, TimeUs at) {
  restore_link(require_link(topology_, a, b), at);
}

void NetSim::fail_link(LinkIndex link, TimeUs at) {
  const auto& l = topology_.link(link);
  sim_.schedule_at(at, EventKind::LinkFail, topology_.node(l.a).name + "-" + topology_.node(l.b).name,
                   [this, link] { apply_link_change(link, LinkState::Down); });
}

void NetSim::restore_link(LinkIndex link, TimeUs at) {
  const auto& l = topology_.link(link);
  sim_.schedule_at(at, EventKind::LinkRestore, topology_.node(l.a).name + "-" + topology_.node(l.b).name,
                   [this, link] { apply_link_change(link, LinkState::Up); });
}

void NetSim::fail_node(std::string_view node, TimeUs at) {
  NodeIndex index = topology_.node_index(node);
  for (const auto& [neighbor, link] : topology_.adjacency(index)) fail_link(link, at);
}

void NetSim::apply_link_change(LinkIndex link, LinkState state) {
  if (topology_.link(link).state == state) return;
  topology_.set_link_state(link, state);
  ++link_epoch_[link];
  if (log_ != nullptr) {
    const auto& l = topology_.link(link);
    log_->info(sim_.now(), state == LinkState::Down ? "LinkFail" : "LinkRestore",
               {topology_.node(l.a).name, topology_.node(l.b).name});
  }
  for (const auto& listener : listeners_) listener(link, state);
}

void NetSim::transmit(LinkIndex link, NodeIndex from, std::function<void()> on_arrival,
                      std::function<void()> on_drop) {
  const Link& l = topology_.link(link);
  if (!l.up()) {
    on_drop();
    return;
  }
  ++transmissions_;
  std::uint64_t epoch = link_epoch_[link];
  NodeIndex to = l.other(from);
  sim_.schedule_in(l.latency, EventKind::PacketArrival,
                   topology_.node(from).name + ">" + topology_.node(to).name,
                   [this, link, epoch, arrive = std::move(on_arrival), drop = std::move(on_drop)] {
                     if (link_epoch_[link] != epoch) {
                       drop();
                     } else {
                       arrive();
                     }
                   });
}

}  // namespace autonet
