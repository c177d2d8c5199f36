#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "autonet/event_log.hpp"
#include "autonet/topology.hpp"

namespace autonet {

enum class EventKind { PacketArrival, LinkFail, LinkRestore, Timer };

std::string_view to_string(EventKind kind);

struct Event {
  TimeUs fire_time = 0;
  EventKind kind = EventKind::Timer;
  std::string detail;
  std::function<void()> action;
};

/// Single global event queue with integer-microsecond time. Events fire in
/// nondecreasing time; equal times fire in insertion order.
class Simulator {
 public:
  TimeUs now() const { return now_; }

  /// Throws std::invalid_argument for events in the past.
  void schedule(Event event);
  void schedule_at(TimeUs time, EventKind kind, std::string detail, std::function<void()> action);
  void schedule_in(TimeUs delay, EventKind kind, std::string detail, std::function<void()> action) {
    schedule_at(now_ + delay, kind, std::move(detail), std::move(action));
  }

  /// Processes every event with fire_time <= t_end, then sets now = t_end.
  std::size_t run_until(TimeUs t_end);

  /// Processes events (up to `deadline`) until `done()` holds. Returns done().
  /// The clock is left at the last processed event.
  bool run_while_pending(const std::function<bool()>& done, TimeUs deadline);

  /// Dispatches the next event if any. Returns false on an empty queue.
  bool step();

  std::optional<TimeUs> next_time() const;
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t processed() const { return processed_; }

  /// Dispatch trace `time<TAB>kind<TAB>detail`, kept when tracing is on.
  const std::vector<std::string>& trace() const { return trace_; }
  void set_tracing(bool on) { tracing_ = on; }

 private:
  struct Entry {
    TimeUs time;
    std::uint64_t seq;
    std::size_t slot;
  };
  struct Later {
    bool operator()(const Entry& x, const Entry& y) const {
      return x.time != y.time ? x.time > y.time : x.seq > y.seq;
    }
  };

  void dispatch(const Entry& entry);

  TimeUs now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::vector<Event> slots_;
  std::vector<std::size_t> free_slots_;
  bool tracing_ = false;
  std::vector<std::string> trace_;
};

/// The wired core: a topology whose links can fail and carry packets with
/// fixed latency. Owns the simulator that drives everything above it.
class NetSim {
 public:
  using LinkListener = std::function<void(LinkIndex, LinkState)>;

  explicit NetSim(Topology topology, EventLog* log = nullptr);

  NetSim(const NetSim&) = delete;
  NetSim& operator=(const NetSim&) = delete;

  Simulator& sim() { return sim_; }
  const Simulator& sim() const { return sim_; }
  TimeUs now() const { return sim_.now(); }
  const Topology& topology() const { return topology_; }
  EventLog* log() const { return log_; }

  /// Schedules a LinkFail/LinkRestore event. Throws TopologyError(UnknownLink).
  void fail_link(std::string_view a, std::string_view b, TimeUs at);
  void restore_link(std::string_view a, std::string_view b, TimeUs at);
  void fail_link(LinkIndex link, TimeUs at);
  void restore_link(LinkIndex link, TimeUs at);
  /// Fails every link incident to `node`.
  void fail_node(std::string_view node, TimeUs at);

  void add_link_listener(LinkListener listener) { listeners_.push_back(std::move(listener)); }

  /// Sends one packet across `link` starting at `from`. Exactly one of the
  /// callbacks runs: on_arrival after the link latency, or on_drop when the
  /// link is down at departure or changes state while the packet is in flight.
  void transmit(LinkIndex link, NodeIndex from, std::function<void()> on_arrival,
                std::function<void()> on_drop);

  std::uint64_t transmissions() const { return transmissions_; }

 private:
  void apply_link_change(LinkIndex link, LinkState state);

  Topology topology_;
  EventLog* log_;
  Simulator sim_;
  std::vector<std::uint64_t> link_epoch_;
  std::vector<LinkListener> listeners_;
  std::uint64_t transmissions_ = 0;
};

}  // namespace autonet
