#include "autonet/topology.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace autonet {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> words;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '\r') ++pos;
    if (pos > start) words.push_back(line.substr(start, pos - start));
  }
  return words;
}

using Kind = TopologyError::Kind;

}  // namespace

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Router: return "router";
    case NodeRole::RlNode: return "rlnode";
    case NodeRole::Gateway: return "gateway";
  }
  return "router";
}

std::optional<NodeRole> parse_role(std::string_view text) {
  if (text == "router") return NodeRole::Router;
  if (text == "rlnode") return NodeRole::RlNode;
  if (text == "gateway") return NodeRole::Gateway;
  return std::nullopt;
}

Topology::Topology(std::vector<NodeDecl> nodes, std::vector<LinkDecl> links) {
  std::sort(nodes.begin(), nodes.end(), [](const auto& x, const auto& y) { return x.name < y.name; });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name.empty()) throw TopologyError(Kind::Parse, 0, "empty node name");
    if (i > 0 && nodes[i].name == nodes[i - 1].name)
      throw TopologyError(Kind::DuplicateNode, 0, "duplicate node '" + nodes[i].name + "'");
    nodes_.push_back(Node{nodes[i].name, nodes[i].role});
  }

  std::set<std::pair<NodeIndex, NodeIndex>> seen;
  for (const auto& decl : links) {
    auto a = find_node(decl.a);
    auto b = find_node(decl.b);
    if (!a) throw TopologyError(Kind::DanglingEndpoint, 0, "link references undeclared node '" + decl.a + "'");
    if (!b) throw TopologyError(Kind::DanglingEndpoint, 0, "link references undeclared node '" + decl.b + "'");
    if (*a == *b) throw TopologyError(Kind::SelfLink, 0, "self-link on '" + decl.a + "'");
    if (decl.latency <= 0)
      throw TopologyError(Kind::BadLatency, 0, "nonpositive latency on link " + decl.a + "-" + decl.b);
    auto key = std::minmax(*a, *b);
    if (!seen.insert(key).second)
      throw TopologyError(Kind::DuplicateLink, 0, "duplicate link " + decl.a + "-" + decl.b);
    links_.push_back(Link{key.first, key.second, decl.latency, LinkState::Up});
  }
  // Node indices follow name order, so sorting by index pair is sorting by names.
  std::sort(links_.begin(), links_.end(),
            [](const Link& x, const Link& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });

  adjacency_.resize(nodes_.size());
  for (LinkIndex i = 0; i < links_.size(); ++i) {
    adjacency_[links_[i].a].emplace_back(links_[i].b, i);
    adjacency_[links_[i].b].emplace_back(links_[i].a, i);
  }
  for (auto& row : adjacency_) std::sort(row.begin(), row.end());
}

Topology Topology::parse(std::string_view text) {
  std::vector<NodeDecl> nodes;
  std::vector<LinkDecl> links;
  std::map<std::string, std::size_t, std::less<>> node_lines;
  std::vector<std::size_t> link_lines;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto words = split_ws(line);
    if (words.empty()) continue;

    if (words[0] == "node") {
      if (words.size() != 3) throw TopologyError(Kind::Parse, line_no, "expected 'node <name> <role>'");
      auto role = parse_role(words[2]);
      if (!role) throw TopologyError(Kind::Parse, line_no, "unknown role '" + std::string(words[2]) + "'");
      std::string name(words[1]);
      if (!node_lines.emplace(name, line_no).second)
        throw TopologyError(Kind::DuplicateNode, line_no, "duplicate node '" + name + "'");
      nodes.push_back(NodeDecl{std::move(name), *role});
    } else if (words[0] == "link") {
      if (words.size() != 4) throw TopologyError(Kind::Parse, line_no, "expected 'link <a> <b> <latency_us>'");
      long long latency = 0;
      auto lat = words[3];
      auto [ptr, ec] = std::from_chars(lat.data(), lat.data() + lat.size(), latency);
      if (ec != std::errc() || ptr != lat.data() + lat.size())
        throw TopologyError(Kind::Parse, line_no, "bad latency '" + std::string(lat) + "'");
      if (latency <= 0) throw TopologyError(Kind::BadLatency, line_no, "nonpositive latency");
      links.push_back(LinkDecl{std::string(words[1]), std::string(words[2]), latency});
      link_lines.push_back(line_no);
    } else {
      throw TopologyError(Kind::Parse, line_no, "unknown directive '" + std::string(words[0]) + "'");
    }
  }

  // Re-run link checks here to attach line numbers; the constructor repeats them.
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto& l = links[i];
    for (const auto& end : {l.a, l.b})
      if (!node_lines.contains(end))
        throw TopologyError(Kind::DanglingEndpoint, link_lines[i], "link references undeclared node '" + end + "'");
    if (l.a == l.b) throw TopologyError(Kind::SelfLink, link_lines[i], "self-link on '" + l.a + "'");
    auto key = std::minmax(l.a, l.b);
    if (!seen.emplace(key.first, key.second).second)
      throw TopologyError(Kind::DuplicateLink, link_lines[i], "duplicate link " + l.a + "-" + l.b);
  }
  return Topology(std::move(nodes), std::move(links));
}

Topology Topology::load(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open topology " + path.string());
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse(buffer.str());
}

std::optional<NodeIndex> Topology::find_node(std::string_view name) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), name,
                             [](const Node& n, std::string_view key) { return n.name < key; });
  if (it == nodes_.end() || it->name != name) return std::nullopt;
  return static_cast<NodeIndex>(it - nodes_.begin());
}

NodeIndex Topology::node_index(std::string_view name) const {
  auto index = find_node(name);
  if (!index) throw std::out_of_range("unknown node '" + std::string(name) + "'");
  return *index;
}

std::optional<LinkIndex> Topology::find_link(NodeIndex a, NodeIndex b) const {
  if (a >= nodes_.size() || b >= nodes_.size()) return std::nullopt;
  for (const auto& [neighbor, link] : adjacency_[a])
    if (neighbor == b) return link;
  return std::nullopt;
}

std::optional<LinkIndex> Topology::find_link(std::string_view a, std::string_view b) const {
  auto ia = find_node(a);
  auto ib = find_node(b);
  if (!ia || !ib) return std::nullopt;
  return find_link(*ia, *ib);
}

std::vector<NodeIndex> Topology::nodes_with_role(NodeRole role) const {
  std::vector<NodeIndex> out;
  for (NodeIndex i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].role == role) out.push_back(i);
  return out;
}

std::string Topology::to_text() const {
  std::string out;
  for (const auto& n : nodes_) out += "node " + n.name + " " + std::string(to_string(n.role)) + "\n";
  for (const auto& l : links_)
    out += "link " + nodes_[l.a].name + " " + nodes_[l.b].name + " " + std::to_string(l.latency) + "\n";
  return out;
}

}  // namespace autonet
