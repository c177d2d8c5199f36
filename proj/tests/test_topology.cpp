#include <doctest.h>

#include <string>
#include <vector>

#include "autonet/routing.hpp"
#include "autonet/simulator.hpp"
#include "autonet/topology.hpp"
#include "graph_oracles.hpp"

using namespace autonet;

namespace {
const std::string kDemo = std::string(AUTONET_TOPOLOGIES) + "/demo.topo";

TopologyError::Kind parse_error_kind(const std::string& text) {
  try {
    Topology::parse(text);
  } catch (const TopologyError& e) {
    return e.kind();
  }
  FAIL("expected a TopologyError");
  return TopologyError::Kind::Parse;
}
}  // namespace

TEST_CASE("minimal two-node topology") {
  auto t = Topology::parse("node A router\nnode B router\nlink A B 1000\n");
  CHECK(t.node_count() == 2);
  REQUIRE(t.links().size() == 1);
  CHECK(t.link(0).latency == 1000);
  CHECK(t.link(0).up());
}

TEST_CASE("demo topology has the demo node mix") {
  auto t = Topology::load(kDemo);
  CHECK(t.node_count() == 8);
  CHECK(t.nodes_with_role(NodeRole::RlNode).size() == 2);
  CHECK(t.nodes_with_role(NodeRole::Gateway).size() == 1);
  CHECK(t.nodes_with_role(NodeRole::Router).size() == 5);
  CHECK(oracle::bridges(t).empty());
}

TEST_CASE("canonical order does not depend on declaration order") {
  auto x = Topology::parse("node B rlnode\nnode A router\nnode C gateway\nlink C A 5\nlink B A 7\n");
  auto y = Topology::parse("node C gateway\nnode A router\nnode B rlnode\nlink A B 7\nlink A C 5\n");
  CHECK(x.to_text() == y.to_text());
  CHECK(x.node(0).name == "A");
  CHECK(x.node_index("C") == 2);
}

TEST_CASE("topology validation errors") {
  using K = TopologyError::Kind;
  CHECK(parse_error_kind("node A router\nlink A X 10\n") == K::DanglingEndpoint);
  CHECK(parse_error_kind("node A router\nnode A rlnode\n") == K::DuplicateNode);
  CHECK(parse_error_kind("node A router\nnode B router\nlink A B 0\n") == K::BadLatency);
  CHECK(parse_error_kind("node A router\nnode B router\nlink A B -4\n") == K::BadLatency);
  CHECK(parse_error_kind("node A router\nlink A A 3\n") == K::SelfLink);
  CHECK(parse_error_kind("node A switch\n") == K::Parse);
  CHECK(parse_error_kind("node A router\nnode B router\nlink A B 1\nlink B A 2\n") == K::DuplicateLink);
  CHECK(parse_error_kind("bogus\n") == K::Parse);
}

TEST_CASE("parse errors carry the line number") {
  try {
    Topology::parse("# header\nnode A router\n\nlink A X 10\n");
    FAIL("expected error");
  } catch (const TopologyError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("equal-time events dequeue in insertion order") {
  Simulator sim;
  std::vector<std::string> order;
  sim.schedule_at(5, EventKind::Timer, "e1", [&] { order.push_back("e1"); });
  sim.schedule_at(3, EventKind::Timer, "e0", [&] { order.push_back("e0"); });
  sim.schedule_at(5, EventKind::Timer, "e2", [&] { order.push_back("e2"); });
  sim.schedule_at(0, EventKind::Timer, "now", [&] { order.push_back("now"); });
  sim.run_until(10);
  CHECK(order == std::vector<std::string>{"now", "e0", "e1", "e2"});
  CHECK(sim.now() == 10);
}

TEST_CASE("scheduling in the past is rejected") {
  Simulator sim;
  sim.run_until(100);
  CHECK_THROWS_AS(sim.schedule_at(99, EventKind::Timer, "", {}), std::invalid_argument);
  CHECK_NOTHROW(sim.schedule_at(100, EventKind::Timer, "", {}));
}

TEST_CASE("run_until processes only due events and sets the clock") {
  Simulator sim;
  CHECK(sim.run_until(10 * kMillisecond) == 0);
  CHECK(sim.now() == 10 * kMillisecond);

  Simulator s2;
  for (int ms : {1, 2, 3}) s2.schedule_at(ms * kMillisecond, EventKind::Timer, "t", {});
  CHECK(s2.run_until(2 * kMillisecond) == 2);
  CHECK(s2.pending() == 1);
  CHECK(s2.now() == 2 * kMillisecond);
}

TEST_CASE("tie-break stability under scheduling permutations") {
  // Events at a few distinct times inserted in shuffled order: within a time
  // the dispatch order must equal insertion order.
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Simulator sim;
    std::vector<std::pair<int, int>> fired;
    std::vector<std::pair<int, int>> inserted;
    for (int i = 0; i < 40; ++i) {
      int t = static_cast<int>(rng.below(4));
      inserted.emplace_back(t, i);
      sim.schedule_at(t, EventKind::Timer, "", [&fired, t, i] { fired.emplace_back(t, i); });
    }
    sim.run_until(10);
    std::stable_sort(inserted.begin(), inserted.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    CHECK(fired == inserted);
  }
}

TEST_CASE("identical inputs produce identical event traces") {
  auto run = [] {
    NetSim net(Topology::load(kDemo));
    net.sim().set_tracing(true);
    Router router(net);
    router.bootstrap();
    net.fail_link("router1", "router2", net.now() + 1000);
    for (NodeIndex s = 0; s < 8; ++s)
      for (NodeIndex d = 0; d < 8; ++d) router.send(s, router.id(d), Port::Raw, {});
    net.sim().run_until(net.now() + 200 * kMillisecond);
    return net.sim().trace();
  };
  auto first = run();
  auto second = run();
  CHECK(first.size() > 100);
  CHECK(first == second);
}

TEST_CASE("link failure drops in-flight packets and toggles state") {
  NetSim net(Topology::parse("node A router\nnode B router\nlink A B 1000\n"));
  int arrived = 0, dropped = 0;
  net.transmit(0, 0, [&] { ++arrived; }, [&] { ++dropped; });
  net.fail_link("A", "B", 500);
  net.sim().run_until(2000);
  CHECK(arrived == 0);
  CHECK(dropped == 1);
  CHECK_FALSE(net.topology().link(0).up());

  net.transmit(0, 0, [&] { ++arrived; }, [&] { ++dropped; });
  CHECK(dropped == 2);

  net.restore_link("A", "B", 3000);
  net.sim().run_until(3000);
  net.transmit(0, 1, [&] { ++arrived; }, [&] { ++dropped; });
  net.sim().run_until(5000);
  CHECK(arrived == 1);
}

TEST_CASE("unknown link is rejected") {
  NetSim net(Topology::parse("node A router\nnode B router\nnode C router\nlink A B 10\n"));
  CHECK_THROWS_AS(net.fail_link("A", "C", 0), TopologyError);
  CHECK_THROWS_AS(net.restore_link("A", "Z", 0), TopologyError);
}

TEST_CASE("link listeners see fail and restore") {
  NetSim net(Topology::parse("node A router\nnode B router\nlink A B 10\n"));
  std::vector<LinkState> seen;
  net.add_link_listener([&](LinkIndex, LinkState s) { seen.push_back(s); });
  net.fail_link("A", "B", 5);
  net.restore_link("B", "A", 6);
  net.sim().run_until(10);
  CHECK(seen == std::vector<LinkState>{LinkState::Down, LinkState::Up});
}
