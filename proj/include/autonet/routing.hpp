#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "autonet/node_id.hpp"
#include "autonet/simulator.hpp"

namespace autonet {

struct RoutingConfig {
  std::size_t k_bucket = 4;
  /// Initial flood radius; doubled while the flood reports a truncated frontier.
  int flood_ttl = 8;
  TimeUs repair_window = 50 * kMillisecond;
  /// A blocking sender gives up after this many repair windows.
  int unreachable_windows = 3;
  std::size_t convergence_samples = 64;
  std::uint64_t seed = 0;
};

/// A known node together with a source route to it.
struct Contact {
  NodeId id;
  NodeIndex node = 0;
  /// Owner first, contact last; consecutive entries share a link.
  std::vector<NodeIndex> path;
  int bucket = 0;

  std::size_t hops() const { return path.empty() ? 0 : path.size() - 1; }
};

/// Per-node routing state: 128 XOR buckets of at most k contacts (ordered by
/// path length, then id) plus the direct neighbors, which are always kept.
class RoutingTable {
 public:
  static constexpr int kBuckets = 128;

  RoutingTable() = default;
  RoutingTable(NodeIndex owner_index, NodeId owner) : owner_index_(owner_index), owner_(owner) {}

  NodeId owner() const { return owner_; }
  NodeIndex owner_index() const { return owner_index_; }

  const std::array<std::vector<Contact>, kBuckets>& buckets() const { return buckets_; }
  const std::vector<Contact>& neighbors() const { return neighbors_; }
  /// Every id learned by the last discovery (the owner's component), ascending.
  const std::vector<NodeId>& known_ids() const { return known_; }

  void add_neighbor(Contact contact);
  /// Inserts into the contact's bucket, keeping the k best by (hops, id).
  void insert(Contact contact, std::size_t k_bucket);
  void set_known(std::vector<NodeId> ids);

  /// Drops every contact whose path crosses `link`. Returns how many.
  std::size_t invalidate_link(const Topology& topology, LinkIndex link);

  std::size_t contact_count() const;

  template <typename F>
  void for_each_contact(F&& f) const {
    for (const auto& c : neighbors_) f(c);
    for (const auto& bucket : buckets_)
      for (const auto& c : bucket) f(c);
  }

 private:
  NodeIndex owner_index_ = 0;
  NodeId owner_;
  std::array<std::vector<Contact>, kBuckets> buckets_;
  std::vector<Contact> neighbors_;
  std::vector<NodeId> known_;
};

struct NextHop {
  enum class Kind { Local, Forward, NoProgress };
  Kind kind = Kind::NoProgress;
  const Contact* via = nullptr;
};

/// Greedy XOR choice: the contact with the smallest resulting distance that is
/// strictly closer than the owner; ties go to the shorter path, then the
/// smaller id.
NextHop next_hop(const RoutingTable& table, NodeId dst);

enum class Port : std::uint8_t { Raw = 0, Dns = 1, Agent = 2 };

struct Packet {
  NodeId src;
  NodeId dst;
  Port port = Port::Raw;
  std::vector<std::uint8_t> data;
};

struct DeliveryOutcome {
  bool delivered = false;
  /// Physical link traversals.
  std::size_t hops = 0;
  /// Greedy forwarding decisions.
  std::size_t overlay_hops = 0;
  TimeUs latency = 0;
  std::vector<NodeIndex> path;
  std::string reason;
};

struct ConvergenceReport {
  bool converged = false;
  TimeUs convergence_time = 0;
  std::size_t components = 0;
};

/// ID-based routing over the NetSim core. Each node discovers its component
/// with an expanding flood, keeps source-routed contacts in XOR buckets, and
/// forwards greedily; link failures invalidate affected contacts at once and
/// trigger rediscovery.
class Router {
 public:
  using Handler = std::function<void(NodeIndex at, const Packet&)>;
  using Completion = std::function<void(const DeliveryOutcome&)>;

  explicit Router(NetSim& net, RoutingConfig config = {});

  Router(const Router&) = delete;
  Router& operator=(const Router&) = delete;

  NetSim& net() { return net_; }
  const NetSim& net() const { return net_; }
  const RoutingConfig& config() const { return config_; }

  NodeId id(NodeIndex node) const { return ids_.at(node); }
  std::optional<NodeIndex> index_of(NodeId id) const;
  std::string name_of(NodeId id) const;

  /// Floods from every node and runs the simulator until all tables are
  /// installed. Throws std::runtime_error on an id collision.
  ConvergenceReport bootstrap();
  bool converged() const { return converged_; }

  const RoutingTable& table(NodeIndex node) const { return tables_.at(node); }

  void set_handler(Port port, Handler handler) { handlers_[port] = std::move(handler); }

  /// Fire-and-forget send. `done` (optional) observes delivery or loss.
  void send(NodeIndex src, NodeId dst, Port port, std::vector<std::uint8_t> data, Completion done = {});

  /// Blocking send: retries once per repair window and reports unreachable
  /// after `unreachable_windows` windows.
  DeliveryOutcome route_packet(NodeIndex src, NodeId dst, std::vector<std::uint8_t> data = {});

  /// Walks the current tables without simulating time.
  DeliveryOutcome trace_route(NodeIndex src, NodeId dst) const;

  /// Simulated time at which the most recent repair finished.
  TimeUs last_repair_completed() const { return last_repair_completed_; }
  bool repair_pending() const { return pending_rebuilds_ > 0; }
  std::uint64_t packets_sent() const { return packets_sent_; }

 private:
  struct Discovery {
    std::vector<Contact> reached;  // excluding the owner
    TimeUs duration = 0;
  };
  struct InFlight;

  Discovery discover(NodeIndex owner) const;
  RoutingTable build_table(NodeIndex owner, const Discovery& discovery) const;
  void on_link_change(LinkIndex link, LinkState state);
  void schedule_rebuilds(TimeUs started);
  bool check_convergence() const;

  void forward(const std::shared_ptr<InFlight>& state, NodeIndex at);
  void traverse(const std::shared_ptr<InFlight>& state, std::shared_ptr<const std::vector<NodeIndex>> route,
                std::size_t pos);
  void finish(const std::shared_ptr<InFlight>& state, NodeIndex at, bool delivered, std::string reason);

  NetSim& net_;
  RoutingConfig config_;
  std::vector<NodeId> ids_;
  std::map<NodeId, NodeIndex> by_id_;
  std::vector<RoutingTable> tables_;
  std::map<Port, Handler> handlers_;
  bool bootstrapped_ = false;
  bool converged_ = false;
  std::size_t pending_rebuilds_ = 0;
  TimeUs repair_started_ = 0;
  TimeUs last_repair_completed_ = 0;
  std::uint64_t packets_sent_ = 0;
};

}  // namespace autonet
