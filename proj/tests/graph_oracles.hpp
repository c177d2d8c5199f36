#pragma once

// Random graph generators and graph-theoretic oracles shared by the unit and
// acceptance suites. These work on the Topology's link list directly and do
// not touch any routing state.

#include <algorithm>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "autonet/random.hpp"
#include "autonet/topology.hpp"

namespace oracle {

using autonet::NodeIndex;
using autonet::Topology;

inline std::string node_name(std::size_t i) { return "n" + std::to_string(i); }

inline Topology make_topology(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                              autonet::Rng& rng, autonet::TimeUs min_latency = 100,
                              autonet::TimeUs max_latency = 1000) {
  std::vector<Topology::NodeDecl> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back({node_name(i), autonet::NodeRole::Router});
  std::vector<Topology::LinkDecl> links;
  for (auto [a, b] : edges) links.push_back({node_name(a), node_name(b), rng.between(min_latency, max_latency)});
  return Topology(std::move(nodes), std::move(links));
}

/// Random spanning tree plus `extra` random chords.
inline Topology random_connected(std::size_t n, std::size_t extra, autonet::Rng& rng) {
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i < n; ++i) {
    std::size_t parent = rng.below(i);
    edges.emplace(parent, i);
  }
  for (std::size_t tries = 0; tries < extra * 4 && edges.size() < n - 1 + extra; ++tries) {
    std::size_t a = rng.below(n), b = rng.below(n);
    if (a == b) continue;
    edges.emplace(std::min(a, b), std::max(a, b));
  }
  return make_topology(n, {edges.begin(), edges.end()}, rng);
}

/// Hamiltonian cycle over a random permutation plus random chords (n >= 3).
inline Topology random_two_edge_connected(std::size_t n, std::size_t chords, autonet::Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t a = order[i], b = order[(i + 1) % n];
    edges.emplace(std::min(a, b), std::max(a, b));
  }
  for (std::size_t tries = 0; tries < chords * 4 && edges.size() < n + chords; ++tries) {
    std::size_t a = rng.below(n), b = rng.below(n);
    if (a == b) continue;
    edges.emplace(std::min(a, b), std::max(a, b));
  }
  return make_topology(n, {edges.begin(), edges.end()}, rng);
}

/// Two cycles joined by a single bridge edge.
inline Topology random_with_bridge(std::size_t left, std::size_t right, autonet::Rng& rng) {
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < left; ++i) edges.emplace(std::min(i, (i + 1) % left), std::max(i, (i + 1) % left));
  for (std::size_t i = 0; i < right; ++i) {
    std::size_t a = left + i, b = left + (i + 1) % right;
    edges.emplace(std::min(a, b), std::max(a, b));
  }
  edges.emplace(rng.below(left), left + rng.below(right));
  return make_topology(left + right, {edges.begin(), edges.end()}, rng);
}

/// Component label per node over Up links.
inline std::vector<std::size_t> components(const Topology& t) {
  std::vector<std::size_t> label(t.node_count(), SIZE_MAX);
  std::size_t next = 0;
  for (NodeIndex s = 0; s < t.node_count(); ++s) {
    if (label[s] != SIZE_MAX) continue;
    std::queue<NodeIndex> q;
    q.push(s);
    label[s] = next;
    while (!q.empty()) {
      NodeIndex v = q.front();
      q.pop();
      for (auto [w, link] : t.adjacency(v)) {
        if (t.link(link).up() && label[w] == SIZE_MAX) {
          label[w] = next;
          q.push(w);
        }
      }
    }
    ++next;
  }
  return label;
}

/// BFS hop distance over Up links, nullopt when disconnected.
inline std::optional<std::size_t> hop_distance(const Topology& t, NodeIndex src, NodeIndex dst) {
  std::vector<std::size_t> dist(t.node_count(), SIZE_MAX);
  std::queue<NodeIndex> q;
  q.push(src);
  dist[src] = 0;
  while (!q.empty()) {
    NodeIndex v = q.front();
    q.pop();
    if (v == dst) return dist[v];
    for (auto [w, link] : t.adjacency(v)) {
      if (t.link(link).up() && dist[w] == SIZE_MAX) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
    }
  }
  return std::nullopt;
}

/// Links whose removal disconnects the Up graph (brute force).
inline std::vector<autonet::LinkIndex> bridges(Topology t) {
  std::vector<autonet::LinkIndex> out;
  auto base = components(t);
  std::size_t base_count = *std::max_element(base.begin(), base.end()) + 1;
  for (autonet::LinkIndex l = 0; l < t.links().size(); ++l) {
    if (!t.link(l).up()) continue;
    t.set_link_state(l, autonet::LinkState::Down);
    auto c = components(t);
    if (*std::max_element(c.begin(), c.end()) + 1 > base_count) out.push_back(l);
    t.set_link_state(l, autonet::LinkState::Up);
  }
  return out;
}

}  // namespace oracle
