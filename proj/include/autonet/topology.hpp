#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "autonet/event_log.hpp"

namespace autonet {

enum class NodeRole { Router, RlNode, Gateway };
enum class LinkState { Up, Down };

std::string_view to_string(NodeRole role);
std::optional<NodeRole> parse_role(std::string_view text);

/// Index into Topology::nodes(); stable for the lifetime of a topology.
using NodeIndex = std::size_t;
using LinkIndex = std::size_t;

struct Node {
  std::string name;
  NodeRole role = NodeRole::Router;
};

/// Undirected link; endpoints are stored with a < b (by name).
struct Link {
  NodeIndex a = 0;
  NodeIndex b = 0;
  TimeUs latency = 0;
  LinkState state = LinkState::Up;

  bool up() const { return state == LinkState::Up; }
  NodeIndex other(NodeIndex end) const { return end == a ? b : a; }
};

class TopologyError : public std::runtime_error {
 public:
  enum class Kind { Parse, DuplicateNode, DuplicateLink, DanglingEndpoint, SelfLink, BadLatency, UnknownLink };

  TopologyError(Kind kind, std::size_t line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        kind_(kind),
        line_(line) {}

  Kind kind() const { return kind_; }
  /// 1-based source line, 0 when the error is not tied to a file position.
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

/// Declarative network description. Nodes and links are held in canonical
/// order (nodes by name, links by endpoint names) so iteration and id
/// assignment do not depend on declaration order.
class Topology {
 public:
  struct NodeDecl {
    std::string name;
    NodeRole role;
  };
  struct LinkDecl {
    std::string a;
    std::string b;
    TimeUs latency;
  };

  Topology() = default;
  /// Validates and canonicalizes. Throws TopologyError.
  Topology(std::vector<NodeDecl> nodes, std::vector<LinkDecl> links);

  /// Parses the line-oriented topology format:
  ///   node <name> <router|rlnode|gateway>
  ///   link <a> <b> <latency_us>
  ///   # comment
  static Topology parse(std::string_view text);
  static Topology load(const std::filesystem::path& path);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  std::size_t node_count() const { return nodes_.size(); }

  const Node& node(NodeIndex index) const { return nodes_.at(index); }
  const Link& link(LinkIndex index) const { return links_.at(index); }

  std::optional<NodeIndex> find_node(std::string_view name) const;
  NodeIndex node_index(std::string_view name) const;  // throws if unknown
  std::optional<LinkIndex> find_link(std::string_view a, std::string_view b) const;
  std::optional<LinkIndex> find_link(NodeIndex a, NodeIndex b) const;

  /// (neighbor, link) pairs for a node over all links regardless of state,
  /// ordered by neighbor index.
  const std::vector<std::pair<NodeIndex, LinkIndex>>& adjacency(NodeIndex node) const {
    return adjacency_.at(node);
  }

  void set_link_state(LinkIndex link, LinkState state) { links_.at(link).state = state; }

  std::vector<NodeIndex> nodes_with_role(NodeRole role) const;

  /// Renders back to the text format (canonical order, current links only).
  std::string to_text() const;

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<std::vector<std::pair<NodeIndex, LinkIndex>>> adjacency_;
};

}  // namespace autonet
