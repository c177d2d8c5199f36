#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "autonet/rl.hpp"
#include "mdp_oracle.hpp"

using namespace autonet;

namespace {

ApObservation ap_obs(std::uint32_t delivered, std::uint32_t collisions, std::uint32_t queue, double busy) {
  return ApObservation{1, delivered, collisions, queue, busy};
}

}  // namespace

TEST_CASE("discretize: quartiles and backlog bit") {
  Observation zero{4, std::vector<ApObservation>(4)};
  CHECK(discretize(zero).bits == 0);
  CHECK(discretize(zero).n_aps == 4);

  Observation one{1, {ap_obs(1, 9, 5, 0.99)}};
  CHECK(unpack(discretize(one), 0) == ApBin{3, 3, 1});

  // Only the delivered count differs; both land in the same quartiles.
  Observation a{1, {ap_obs(10, 2, 0, 0.30)}};
  Observation b{1, {ap_obs(12, 2, 0, 0.30)}};
  CHECK(ap_bin(a.aps[0]) == ApBin{1, 0, 0});
  CHECK(discretize(a) == discretize(b));

  CHECK(quartile(0.0) == 0);
  CHECK(quartile(0.25) == 1);
  CHECK(quartile(0.7499) == 2);
  CHECK(quartile(1.0) == 3);
}

TEST_CASE("discretize keeps AP order") {
  Observation obs{2, {ap_obs(0, 0, 1, 0.0), ap_obs(0, 1, 0, 0.6)}};
  auto bin = discretize(obs);
  CHECK(unpack(bin, 0) == ApBin{0, 0, 1});
  CHECK(unpack(bin, 1) == ApBin{2, 3, 0});
  CHECK_THROWS_AS(discretize(Observation{13, std::vector<ApObservation>(13)}), std::invalid_argument);
}

TEST_CASE("default action space") {
  auto choices = ActionSpace::default_choices();
  CHECK(choices.size() == 8);
  CHECK(std::set<MacConfig>(choices.begin(), choices.end()).size() == 8);
  for (const auto& c : choices) CHECK(c.valid());
  ActionSpace joint(choices, 4);
  CHECK(joint.size() == 4096);
  for (std::size_t a : {0UL, 1UL, 511UL, 4095UL}) CHECK(joint.encode(joint.decode(a)) == a);
  CHECK(joint.decode(1)[3] == choices[1]);
  CHECK(joint.decode(8)[2] == choices[1]);
  CHECK_THROWS_AS(ActionSpace({choices[0], choices[0]}, 1), std::invalid_argument);
  CHECK_THROWS_AS(ActionSpace({}, 1), std::invalid_argument);
  CHECK_THROWS_AS(joint.decode(4096), std::out_of_range);
}

TEST_CASE("configs beyond the joint cap repeat cyclically") {
  ActionSpace joint(ActionSpace::default_choices(), 4);
  auto six = configs_for(joint, 1 * 512 + 2 * 64 + 3 * 8 + 4, 6);
  auto c = ActionSpace::default_choices();
  CHECK(six == std::vector<MacConfig>{c[1], c[2], c[3], c[4], c[1], c[2]});
}

TEST_CASE("epsilon schedule") {
  QParams p;
  CHECK(epsilon_for_episode(p, 0, 300) == 0.5);
  CHECK(epsilon_for_episode(p, 120, 300) == doctest::Approx(0.275));
  CHECK(epsilon_for_episode(p, 240, 300) == 0.05);
  CHECK(epsilon_for_episode(p, 299, 300) == 0.05);
}

TEST_CASE("unique argmax is chosen in both modes when epsilon is zero") {
  Policy policy(oracle::n_actions(4), QParams{1.0, 0.0});
  policy.set_epsilon(0);
  ObsBin s{1, 3};
  policy.update(s, 2, 0.7, s);
  Rng rng(1);
  CHECK(policy.select_action(s, SelectMode::Train, rng) == 2);
  CHECK(policy.select_action(s, SelectMode::Infer, rng) == 2);
}

TEST_CASE("full exploration is uniform over actions") {
  Policy policy(ActionSpace(ActionSpace::default_choices(), 1));
  policy.set_epsilon(1);
  Rng rng(9);
  std::vector<int> counts(8, 0);
  for (int i = 0; i < 10000; ++i) ++counts[policy.select_action(ObsBin{}, SelectMode::Train, rng)];
  double stat = 0;
  for (int c : counts) stat += (c - 1250.0) * (c - 1250.0) / 1250.0;
  // 7 degrees of freedom, 0.1% critical value.
  CHECK(stat < 24.322);
}

TEST_CASE("inference breaks ties low and consumes no randomness") {
  Policy policy(ActionSpace(ActionSpace::default_choices(), 1));
  policy.set_epsilon(1);
  Rng rng(3), untouched(3);
  CHECK(policy.select_action(ObsBin{2, 5}, SelectMode::Infer, rng) == 0);
  CHECK(rng.next() == untouched.next());
  auto before = policy.serialize();
  for (int i = 0; i < 100; ++i) policy.select_action(ObsBin{1, static_cast<std::uint64_t>(i)}, SelectMode::Infer, rng);
  CHECK(policy.serialize() == before);
}

TEST_CASE("update rule") {
  SUBCASE("one-step collapse") {
    Policy policy(oracle::n_actions(2), QParams{1.0, 0.0});
    policy.update(ObsBin{1, 0}, 1, 0.5, ObsBin{1, 1});
    CHECK(policy.q(ObsBin{1, 0}, 1) == 0.5);
  }
  SUBCASE("zero reward keeps the table at zero") {
    Policy policy(oracle::n_actions(3));
    Rng rng(5);
    for (int i = 0; i < 1000; ++i)
      policy.update(ObsBin{1, rng.below(4)}, rng.below(3), 0.0, ObsBin{1, rng.below(4)});
    for (std::uint64_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < 3; ++a) CHECK(policy.q(ObsBin{1, s}, a) == 0.0);
  }
  SUBCASE("exactly one cell changes") {
    Policy policy(oracle::n_actions(3));
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
      ObsBin s{1, rng.below(3)};
      std::size_t a = rng.below(3);
      std::vector<double> before;
      for (std::uint64_t x = 0; x < 3; ++x)
        for (std::size_t y = 0; y < 3; ++y) before.push_back(policy.q(ObsBin{1, x}, y));
      policy.update(s, a, rng.uniform(), ObsBin{1, rng.below(3)});
      std::size_t changed = 0, k = 0;
      for (std::uint64_t x = 0; x < 3; ++x)
        for (std::size_t y = 0; y < 3; ++y, ++k)
          if (policy.q(ObsBin{1, x}, y) != before[k]) {
            ++changed;
            CHECK(ObsBin{1, x} == s);
            CHECK(y == a);
          }
      CHECK(changed <= 1);
    }
  }
  SUBCASE("frozen policy rejects updates") {
    Policy policy(oracle::n_actions(2));
    policy.freeze();
    CHECK_THROWS_AS(policy.update(ObsBin{}, 0, 1.0, ObsBin{}), std::logic_error);
  }
}

TEST_CASE("q-learning matches value iteration on the two-state chain") {
  auto mdp = oracle::two_state_chain();
  auto expect = oracle::value_iteration(mdp);
  // Hand check: staying in state 1 forever is worth 1 / (1 - 0.9).
  CHECK(expect[1][0] == doctest::Approx(10.0));
  Policy policy(oracle::n_actions(2), QParams{0.1, mdp.gamma});
  oracle::sweep(mdp, policy, 3000);
  CHECK(oracle::max_error(mdp, policy, expect) < 1e-6);
  CHECK(policy.greedy(oracle::state_bin(0)) == 1);
  CHECK(policy.greedy(oracle::state_bin(1)) == 0);
}

TEST_CASE("scaling rewards scales Q and keeps the greedy actions") {
  auto mdp = oracle::four_by_four();
  Policy base(oracle::n_actions(4), QParams{0.1, mdp.gamma});
  Policy scaled(oracle::n_actions(4), QParams{0.1, mdp.gamma});
  oracle::sweep(mdp, base, 40);
  oracle::sweep(mdp, scaled, 40, 3.5);
  for (std::size_t s = 0; s < mdp.states; ++s) {
    for (std::size_t a = 0; a < mdp.actions; ++a)
      CHECK(scaled.q(oracle::state_bin(s), a) == doctest::Approx(3.5 * base.q(oracle::state_bin(s), a)).epsilon(1e-12));
    CHECK(scaled.greedy(oracle::state_bin(s)) == base.greedy(oracle::state_bin(s)));
  }
}

TEST_CASE("policy text round-trips exactly") {
  Policy policy(ActionSpace(ActionSpace::default_choices(), 2), QParams{0.3, 0.7, 0.4, 0.02, 0.5});
  Rng rng(17);
  for (int i = 0; i < 500; ++i)
    policy.update(ObsBin{2, rng.below(50)}, rng.below(64), rng.uniform() / 3.0, ObsBin{2, rng.below(50)});
  policy.set_epsilon(0.123);
  auto text = policy.serialize();
  auto copy = Policy::deserialize(text);
  CHECK(copy.serialize() == text);
  CHECK(copy.hash() == policy.hash());
  CHECK(copy.hash().size() == 64);
  CHECK(copy.space() == policy.space());
  for (std::uint64_t s = 0; s < 50; ++s)
    for (std::size_t a = 0; a < 64; ++a) CHECK(copy.q(ObsBin{2, s}, a) == policy.q(ObsBin{2, s}, a));
}

TEST_CASE("malformed policy text is rejected") {
  Policy policy(oracle::n_actions(2));
  policy.update(ObsBin{1, 1}, 1, 0.25, ObsBin{1, 0});
  auto text = policy.serialize();
  CHECK_THROWS_AS(Policy::deserialize("garbage"), std::runtime_error);
  CHECK_THROWS_AS(Policy::deserialize(text.substr(0, text.size() / 2)), std::runtime_error);
  CHECK_THROWS_AS(Policy::deserialize(text + "extra\n"), std::runtime_error);
  std::string bad_action = text;
  bad_action.replace(bad_action.rfind("\n1 "), 3, "\n9 ");
  CHECK_THROWS_AS(Policy::deserialize(bad_action), std::runtime_error);
}

TEST_CASE("agent assignment per scenario") {
  std::vector<int> aps{1, 2, 3, 4};
  auto single = assign_agents(ScenarioKind::CentralSingle, aps, 2);
  REQUIRE(single.size() == 1);
  CHECK(single[0].rl_node == 0);
  CHECK(single[0].ap_ids == aps);
  CHECK(single[0].arity == 4);

  auto multi = assign_agents(ScenarioKind::CentralMulti, aps, 2);
  REQUIRE(multi.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(multi[i].rl_node == 0);
    CHECK(multi[i].ap_ids == std::vector<int>{aps[i]});
    CHECK(multi[i].agent_id == i + 1);
  }

  auto dist = assign_agents(ScenarioKind::DistributedSingle, aps, 2);
  REQUIRE(dist.size() == 2);
  CHECK(dist[0].ap_ids == std::vector<int>{1, 2});
  CHECK(dist[1].ap_ids == std::vector<int>{3, 4});
  CHECK(dist[1].rl_node == 1);

  std::vector<int> five{1, 2, 3, 4, 5};
  auto uneven = assign_agents(ScenarioKind::DistributedSingle, five, 3);
  REQUIRE(uneven.size() == 3);
  CHECK(uneven[0].ap_ids == std::vector<int>{1, 2});
  CHECK(uneven[1].ap_ids == std::vector<int>{3, 4});
  CHECK(uneven[2].ap_ids == std::vector<int>{5});

  CHECK_THROWS_AS(assign_agents(ScenarioKind::DistributedSingle, aps, 1), std::invalid_argument);
  CHECK_THROWS_AS(assign_agents(ScenarioKind::CentralSingle, aps, 0), std::invalid_argument);
  CHECK(parse_scenario("central-multi") == ScenarioKind::CentralMulti);
  CHECK_THROWS_AS(parse_scenario("central"), std::invalid_argument);
}
