#include "autonet/routing.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "autonet/random.hpp"

namespace autonet {

namespace {

bool better_in_bucket(const Contact& x, const Contact& y) {
  return std::make_tuple(x.hops(), x.id) < std::make_tuple(y.hops(), y.id);
}

bool path_uses(const std::vector<NodeIndex>& path, NodeIndex a, NodeIndex b) {
  for (std::size_t i = 1; i < path.size(); ++i) {
    if ((path[i - 1] == a && path[i] == b) || (path[i - 1] == b && path[i] == a)) return true;
  }
  return false;
}

}  // namespace

void RoutingTable::add_neighbor(Contact contact) {
  auto it = std::find_if(neighbors_.begin(), neighbors_.end(), [&](const Contact& c) { return c.id == contact.id; });
  if (it != neighbors_.end()) {
    *it = std::move(contact);
  } else {
    neighbors_.push_back(std::move(contact));
  }
  std::sort(neighbors_.begin(), neighbors_.end(), [](const Contact& x, const Contact& y) { return x.id < y.id; });
}

void RoutingTable::insert(Contact contact, std::size_t k_bucket) {
  auto& bucket = buckets_.at(static_cast<std::size_t>(contact.bucket));
  auto it = std::find_if(bucket.begin(), bucket.end(), [&](const Contact& c) { return c.id == contact.id; });
  if (it != bucket.end()) {
    if (!better_in_bucket(contact, *it)) return;
    bucket.erase(it);
  }
  bucket.insert(std::upper_bound(bucket.begin(), bucket.end(), contact, better_in_bucket), std::move(contact));
  if (bucket.size() > k_bucket) bucket.resize(k_bucket);
}

void RoutingTable::set_known(std::vector<NodeId> ids) {
  std::sort(ids.begin(), ids.end());
  known_ = std::move(ids);
}

std::size_t RoutingTable::invalidate_link(const Topology& topology, LinkIndex link) {
  const Link& l = topology.link(link);
  auto uses = [&](const Contact& c) { return path_uses(c.path, l.a, l.b); };
  std::size_t removed = 0;
  removed += static_cast<std::size_t>(std::erase_if(neighbors_, uses));
  for (auto& bucket : buckets_) removed += static_cast<std::size_t>(std::erase_if(bucket, uses));
  return removed;
}

std::size_t RoutingTable::contact_count() const {
  std::size_t n = neighbors_.size();
  for (const auto& bucket : buckets_) n += bucket.size();
  return n;
}

NextHop next_hop(const RoutingTable& table, NodeId dst) {
  if (dst == table.owner()) return NextHop{NextHop::Kind::Local, nullptr};
  XorDistance own = xor_distance(table.owner(), dst);
  const Contact* best = nullptr;
  XorDistance best_distance;
  table.for_each_contact([&](const Contact& c) {
    XorDistance d = xor_distance(c.id, dst);
    if (!(d < own)) return;
    if (best == nullptr || std::make_tuple(d, c.hops(), c.id) < std::make_tuple(best_distance, best->hops(), best->id)) {
      best = &c;
      best_distance = d;
    }
  });
  if (best == nullptr) return NextHop{NextHop::Kind::NoProgress, nullptr};
  return NextHop{NextHop::Kind::Forward, best};
}

Router::Router(NetSim& net, RoutingConfig config) : net_(net), config_(config) {
  const auto& topology = net_.topology();
  for (NodeIndex i = 0; i < topology.node_count(); ++i) {
    NodeId id = derive_node_id(topology.node(i).name);
    if (!by_id_.emplace(id, i).second)
      throw std::runtime_error("node id collision between '" + topology.node(by_id_[id]).name + "' and '" +
                               topology.node(i).name + "'");
    ids_.push_back(id);
    tables_.emplace_back(i, id);
  }
  net_.add_link_listener([this](LinkIndex link, LinkState state) { on_link_change(link, state); });
}

std::optional<NodeIndex> Router::index_of(NodeId id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::string Router::name_of(NodeId id) const {
  auto index = index_of(id);
  return index ? net_.topology().node(*index).name : id.hex();
}

Router::Discovery Router::discover(NodeIndex owner) const {
  const Topology& topology = net_.topology();
  const std::size_t n = topology.node_count();
  constexpr NodeIndex kNone = std::numeric_limits<NodeIndex>::max();

  struct Item {
    TimeUs time;
    std::size_t hops;
    NodeIndex node;
    NodeIndex parent;
    bool operator>(const Item& o) const {
      return std::tie(time, hops, node, parent) > std::tie(o.time, o.hops, o.node, o.parent);
    }
  };

  Discovery result;
  std::vector<NodeIndex> parent;
  std::vector<std::size_t> hops;
  std::size_t ttl = static_cast<std::size_t>(std::max(config_.flood_ttl, 1));
  for (;;) {
    // First copy wins; a node forwards only while its copy has TTL left.
    parent.assign(n, kNone);
    hops.assign(n, 0);
    std::vector<TimeUs> arrival(n, 0);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
    frontier.push(Item{0, 0, owner, owner});
    TimeUs farthest = 0;
    while (!frontier.empty()) {
      Item item = frontier.top();
      frontier.pop();
      if (parent[item.node] != kNone) continue;
      parent[item.node] = item.parent;
      hops[item.node] = item.hops;
      arrival[item.node] = item.time;
      farthest = std::max(farthest, item.time);
      if (item.hops >= ttl) continue;
      for (const auto& [neighbor, link] : topology.adjacency(item.node)) {
        const Link& l = topology.link(link);
        if (l.up() && parent[neighbor] == kNone)
          frontier.push(Item{item.time + l.latency, item.hops + 1, neighbor, item.node});
      }
    }
    // Replies travel back along the reverse path.
    result.duration += 2 * farthest;

    bool truncated = false;
    for (NodeIndex v = 0; v < n && !truncated; ++v) {
      if (parent[v] == kNone || hops[v] < ttl) continue;
      for (const auto& [neighbor, link] : topology.adjacency(v))
        if (topology.link(link).up() && parent[neighbor] == kNone) truncated = true;
    }
    if (!truncated) break;
    ttl *= 2;
  }

  for (NodeIndex v = 0; v < n; ++v) {
    if (v == owner || parent[v] == kNone) continue;
    Contact c;
    c.id = ids_[v];
    c.node = v;
    c.bucket = bucket_index(ids_[owner], ids_[v]);
    for (NodeIndex at = v; at != owner; at = parent[at]) c.path.push_back(at);
    c.path.push_back(owner);
    std::reverse(c.path.begin(), c.path.end());
    result.reached.push_back(std::move(c));
  }
  return result;
}

RoutingTable Router::build_table(NodeIndex owner, const Discovery& discovery) const {
  const Topology& topology = net_.topology();
  RoutingTable table(owner, ids_[owner]);
  std::vector<NodeId> known{ids_[owner]};
  std::vector<bool> adjacent(topology.node_count(), false);
  for (const auto& [neighbor, link] : topology.adjacency(owner)) {
    if (!topology.link(link).up()) continue;
    adjacent[neighbor] = true;
    table.add_neighbor(Contact{ids_[neighbor], neighbor, {owner, neighbor}, bucket_index(ids_[owner], ids_[neighbor])});
  }
  for (Contact c : discovery.reached) {
    known.push_back(c.id);
    if (adjacent[c.node]) c.path = {owner, c.node};
    table.insert(std::move(c), config_.k_bucket);
  }
  table.set_known(std::move(known));
  return table;
}

ConvergenceReport Router::bootstrap() {
  bootstrapped_ = true;
  TimeUs start = net_.now();
  schedule_rebuilds(start);
  net_.sim().run_while_pending([this] { return pending_rebuilds_ == 0; }, std::numeric_limits<TimeUs>::max());
  converged_ = check_convergence();

  // Count Up-link components.
  const Topology& topology = net_.topology();
  std::vector<bool> seen(topology.node_count(), false);
  std::size_t components = 0;
  for (NodeIndex s = 0; s < topology.node_count(); ++s) {
    if (seen[s]) continue;
    ++components;
    std::vector<NodeIndex> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      NodeIndex v = stack.back();
      stack.pop_back();
      for (const auto& [w, link] : topology.adjacency(v)) {
        if (topology.link(link).up() && !seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
  }
  if (auto* log = net_.log()) {
    log->info(net_.now(), "ROUTING",
              {"converged", converged_ ? "yes" : "no", std::to_string(last_repair_completed_ - start)});
  }
  return ConvergenceReport{converged_, last_repair_completed_ - start, components};
}

void Router::schedule_rebuilds(TimeUs started) {
  repair_started_ = started;
  for (NodeIndex node = 0; node < tables_.size(); ++node) {
    TimeUs delay = discover(node).duration;
    ++pending_rebuilds_;
    net_.sim().schedule_in(delay, EventKind::Timer, "rebuild " + net_.topology().node(node).name, [this, node] {
      tables_[node] = build_table(node, discover(node));
      if (--pending_rebuilds_ == 0) {
        last_repair_completed_ = net_.now();
        if (auto* log = net_.log(); log != nullptr && repair_started_ != last_repair_completed_) {
          log->info(net_.now(), "ROUTING", {"repaired", std::to_string(net_.now() - repair_started_)});
        }
      }
    });
  }
}

void Router::on_link_change(LinkIndex link, LinkState state) {
  if (!bootstrapped_) return;
  if (state == LinkState::Down) {
    std::size_t removed = 0;
    for (auto& table : tables_) removed += table.invalidate_link(net_.topology(), link);
    if (auto* log = net_.log()) {
      const Link& l = net_.topology().link(link);
      log->info(net_.now(), "ROUTING",
                {"invalidate", net_.topology().node(l.a).name + "-" + net_.topology().node(l.b).name,
                 std::to_string(removed)});
    }
  }
  schedule_rebuilds(net_.now());
}

bool Router::check_convergence() const {
  std::vector<std::pair<NodeIndex, NodeId>> pairs;
  for (NodeIndex src = 0; src < tables_.size(); ++src)
    for (NodeId dst : tables_[src].known_ids())
      if (dst != ids_[src]) pairs.emplace_back(src, dst);
  if (pairs.size() > config_.convergence_samples) {
    Rng rng(config_.seed);
    std::vector<std::pair<NodeIndex, NodeId>> sample;
    for (std::size_t i = 0; i < config_.convergence_samples; ++i) sample.push_back(pairs[rng.below(pairs.size())]);
    pairs = std::move(sample);
  }
  return std::all_of(pairs.begin(), pairs.end(),
                     [this](const auto& p) { return trace_route(p.first, p.second).delivered; });
}

DeliveryOutcome Router::trace_route(NodeIndex src, NodeId dst) const {
  const Topology& topology = net_.topology();
  DeliveryOutcome out;
  out.path = {src};
  NodeIndex at = src;
  if (ids_[src] == dst) {
    out.delivered = true;
    return out;
  }
  for (std::size_t guard = 0; guard <= topology.node_count(); ++guard) {
    NextHop nh = next_hop(tables_[at], dst);
    if (nh.kind != NextHop::Kind::Forward) {
      out.reason = "no-progress";
      return out;
    }
    ++out.overlay_hops;
    const auto& path = nh.via->path;
    for (std::size_t i = 1; i < path.size(); ++i) {
      auto link = topology.find_link(path[i - 1], path[i]);
      if (!link || !topology.link(*link).up()) {
        out.reason = "link-down";
        return out;
      }
      ++out.hops;
      out.latency += topology.link(*link).latency;
      out.path.push_back(path[i]);
      if (ids_[path[i]] == dst) {
        out.delivered = true;
        return out;
      }
    }
    at = path.back();
  }
  out.reason = "loop";
  return out;
}

struct Router::InFlight {
  Packet packet;
  NodeIndex src;
  TimeUs sent;
  DeliveryOutcome outcome;
  Completion done;
};

void Router::send(NodeIndex src, NodeId dst, Port port, std::vector<std::uint8_t> data, Completion done) {
  ++packets_sent_;
  auto state = std::make_shared<InFlight>();
  state->packet = Packet{ids_.at(src), dst, port, std::move(data)};
  state->src = src;
  state->sent = net_.now();
  state->outcome.path = {src};
  state->done = std::move(done);
  if (ids_[src] == dst) {
    net_.sim().schedule_in(0, EventKind::Timer, "local", [this, state, src] { finish(state, src, true, ""); });
    return;
  }
  forward(state, src);
}

void Router::forward(const std::shared_ptr<InFlight>& state, NodeIndex at) {
  NodeId dst = state->packet.dst;
  if (ids_[at] == dst) {
    finish(state, at, true, "");
    return;
  }
  if (state->outcome.overlay_hops > net_.topology().node_count()) {
    finish(state, at, false, "loop");
    return;
  }
  NextHop nh = next_hop(tables_[at], dst);
  if (nh.kind != NextHop::Kind::Forward) {
    finish(state, at, false, "no-progress");
    return;
  }
  ++state->outcome.overlay_hops;
  traverse(state, std::make_shared<const std::vector<NodeIndex>>(nh.via->path), 0);
}

void Router::traverse(const std::shared_ptr<InFlight>& state, std::shared_ptr<const std::vector<NodeIndex>> route,
                      std::size_t pos) {
  const auto& path = *route;
  NodeIndex at = path[pos];
  if (pos + 1 >= path.size()) {
    forward(state, at);
    return;
  }
  NodeIndex next = path[pos + 1];
  auto link = net_.topology().find_link(at, next);
  if (!link) {
    finish(state, at, false, "link-down");
    return;
  }
  net_.transmit(
      *link, at,
      [this, state, route, pos, next] {
        ++state->outcome.hops;
        state->outcome.path.push_back(next);
        if (ids_[next] == state->packet.dst) {
          finish(state, next, true, "");
        } else {
          traverse(state, route, pos + 1);
        }
      },
      [this, state, at] { finish(state, at, false, "link-down"); });
}

void Router::finish(const std::shared_ptr<InFlight>& state, NodeIndex at, bool delivered, std::string reason) {
  auto& out = state->outcome;
  out.delivered = delivered;
  out.reason = std::move(reason);
  out.latency = net_.now() - state->sent;
  if (auto* log = net_.log(); log != nullptr && log->tracing()) {
    const auto& topology = net_.topology();
    if (delivered) {
      log->trace(net_.now(), "ROUTE",
                 {topology.node(state->src).name, name_of(state->packet.dst), std::to_string(out.hops),
                  std::to_string(out.latency)});
    } else {
      log->trace(net_.now(), "ROUTE",
                 {topology.node(state->src).name, name_of(state->packet.dst), "DROP",
                  out.reason + "@" + topology.node(at).name});
    }
  }
  if (delivered) {
    if (auto it = handlers_.find(state->packet.port); it != handlers_.end() && it->second) it->second(at, state->packet);
  }
  if (state->done) state->done(out);
}

DeliveryOutcome Router::route_packet(NodeIndex src, NodeId dst, std::vector<std::uint8_t> data) {
  TimeUs start = net_.now();
  for (int attempt = 0; attempt < config_.unreachable_windows; ++attempt) {
    TimeUs attempt_at = start + attempt * config_.repair_window;
    if (net_.now() < attempt_at) net_.sim().run_until(attempt_at);
    bool finished = false;
    DeliveryOutcome outcome;
    send(src, dst, Port::Raw, data, [&](const DeliveryOutcome& o) {
      finished = true;
      outcome = o;
    });
    net_.sim().run_while_pending([&] { return finished; }, std::numeric_limits<TimeUs>::max());
    if (outcome.delivered) return outcome;
  }
  TimeUs give_up = start + config_.unreachable_windows * config_.repair_window;
  if (net_.now() < give_up) net_.sim().run_until(give_up);
  DeliveryOutcome out;
  out.path = {src};
  out.reason = "unreachable";
  return out;
}

}  // namespace autonet
