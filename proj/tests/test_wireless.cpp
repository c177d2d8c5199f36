#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>

#include "autonet/wireless_env.hpp"

using namespace autonet;

namespace {

std::map<int, MacConfig> uniform_actions(const WirelessEnv& env, MacConfig config) {
  std::map<int, MacConfig> out;
  for (const auto& ap : env.aps()) out[ap.ap_id] = config;
  return out;
}

EnvConfig demo_with_load(double load, std::size_t aps = 4) {
  EnvConfig c;
  c.demo_aps = aps;
  c.demo_load = load;
  return c;
}

// Chi-square statistic for observed counts against equal expected counts.
double chi_square_uniform(const std::vector<int>& counts) {
  double total = 0;
  for (int c : counts) total += c;
  double expect = total / static_cast<double>(counts.size());
  double stat = 0;
  for (int c : counts) stat += (c - expect) * (c - expect) / expect;
  return stat;
}

}  // namespace

TEST_CASE("mac config validation") {
  CHECK(MacConfig{1, 1, 1}.valid());
  CHECK(MacConfig{6, 10, 7}.valid());
  CHECK_THROWS_AS((MacConfig{4, 3, 3}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MacConfig{0, 3, 3}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MacConfig{7, 10, 3}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MacConfig{3, 11, 3}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MacConfig{3, 5, 0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MacConfig{3, 5, 8}.validate()), std::invalid_argument);
  CHECK(MacConfig{3, 5, 2}.cw_min() == 7);
  CHECK(MacConfig{3, 5, 2}.cw_max() == 31);
}

TEST_CASE("analytic slotted-aloha success rate") {
  CHECK(analytic_success_rate(1, 1.0) == 1.0);
  CHECK(analytic_success_rate(2, 0.5) == 0.5);
  CHECK(analytic_success_rate(4, 0.25) == doctest::Approx(0.421875).epsilon(1e-15));
  CHECK(analytic_success_rate(3, 0.0) == 0.0);
  CHECK_THROWS_AS(analytic_success_rate(0, 0.5), std::domain_error);
  CHECK_THROWS_AS(analytic_success_rate(2, 1.5), std::domain_error);
  CHECK_THROWS_AS(analytic_success_rate(2, -0.1), std::domain_error);
}

TEST_CASE("demo mode always has four APs at the demo load") {
  WirelessEnv env;
  for (std::uint64_t e = 0; e < 50; ++e) {
    auto obs = env.reset(3, e);
    CHECK(obs.n_aps == 4);
    CHECK(env.n_aps() == 4);
    for (const auto& ap : env.aps()) {
      CHECK(ap.offered_load == 0.9);
      CHECK(ap.queue_len == 0);
      CHECK(ap.backoff_counter == 0);
    }
    for (const auto& ap : obs.aps) CHECK(ap.delivered + ap.collisions + ap.queue_len == 0);
  }
}

TEST_CASE("reset is a pure function of seed and episode") {
  EnvConfig c;
  c.mode = EnvMode::Dynamic;
  WirelessEnv a(c), b(c);
  a.reset(8, 3);
  b.reset(1, 1);
  b.reset(8, 3);
  REQUIRE(a.n_aps() == b.n_aps());
  for (std::size_t i = 0; i < a.n_aps(); ++i) CHECK(a.aps()[i].offered_load == b.aps()[i].offered_load);
  a.set_slot_trace(true);
  b.set_slot_trace(true);
  for (int w = 0; w < 5; ++w) {
    a.step_window();
    b.step_window();
  }
  CHECK(a.slot_trace() == b.slot_trace());
}

TEST_CASE("dynamic mode draws AP counts uniformly from 2..6") {
  EnvConfig c;
  c.mode = EnvMode::Dynamic;
  WirelessEnv env(c);
  std::vector<int> counts(5, 0);
  for (std::uint64_t e = 0; e < 1000; ++e) {
    env.reset(42, e);
    REQUIRE(env.n_aps() >= 2);
    REQUIRE(env.n_aps() <= 6);
    ++counts[env.n_aps() - 2];
    for (const auto& ap : env.aps()) {
      CHECK(ap.offered_load >= 0.1);
      CHECK(ap.offered_load <= 0.9);
    }
  }
  // 4 degrees of freedom, 0.1% critical value.
  CHECK(chi_square_uniform(counts) < 18.467);
}

TEST_CASE("apply_actions validation") {
  WirelessEnv env;
  env.reset(1, 0);
  auto ok = uniform_actions(env, MacConfig{3, 7, 3});
  CHECK_NOTHROW(env.apply_actions(ok));

  auto missing = ok;
  missing.erase(2);
  CHECK_THROWS_AS(env.apply_actions(missing), std::invalid_argument);

  auto unknown = missing;
  unknown[9] = MacConfig{3, 7, 3};
  CHECK_THROWS_AS(env.apply_actions(unknown), std::invalid_argument);

  auto bad = ok;
  bad[1] = MacConfig{5, 4, 3};
  CHECK_THROWS_AS(env.apply_actions(bad), std::invalid_argument);
}

TEST_CASE("configs take effect at the next window") {
  WirelessEnv env;
  env.reset(1, 0);
  env.apply_actions(uniform_actions(env, MacConfig{2, 6, 5}));
  CHECK(env.aps()[0].config == MacConfig{});
  env.step_window(1);
  for (const auto& ap : env.aps()) CHECK(ap.config == MacConfig{2, 6, 5});
}

TEST_CASE("re-applying the current configs leaves the run unchanged") {
  WirelessEnv a, b;
  a.reset(5, 1);
  b.reset(5, 1);
  auto cfg = uniform_actions(a, MacConfig{3, 7, 7});
  a.apply_actions(cfg);
  b.apply_actions(cfg);
  for (int w = 0; w < 20; ++w) {
    a.apply_actions(cfg);
    auto ra = a.step_window();
    auto rb = b.step_window();
    CHECK(ra.reward == rb.reward);
    for (std::size_t i = 0; i < 4; ++i) CHECK(ra.observation.aps[i].collisions == rb.observation.aps[i].collisions);
  }
}

TEST_CASE("larger contention windows collide less under saturation") {
  auto collisions = [](MacConfig cfg) {
    WirelessEnv env(demo_with_load(1.0));
    env.reset(77, 0);
    env.apply_actions(uniform_actions(env, cfg));
    std::uint64_t total = 0;
    for (int w = 0; w < 500; ++w) {  // 10^5 slots
      env.step_window();
      for (const auto& s : env.last_window()) total += s.collisions;
    }
    return total;
  };
  CHECK(collisions(MacConfig{6, 10, 7}) < collisions(MacConfig{1, 5, 7}));
}

TEST_CASE("a lone saturated AP never collides and matches the renewal throughput") {
  // After each success the AP idles for U{0..CWmin} slots, so the long-run
  // throughput is 1 / (1 + CWmin/2).
  for (int exp = 1; exp <= 6; ++exp) {
    WirelessEnv env(demo_with_load(1.0, 1));
    env.reset(10 + static_cast<std::uint64_t>(exp), 0);
    MacConfig cfg{exp, 10, 7};
    env.apply_actions({{1, cfg}});
    const std::size_t windows = 500, len = 200;
    std::uint64_t delivered = 0, collisions = 0;
    for (std::size_t w = 0; w < windows; ++w) {
      env.step_window(len);
      delivered += env.last_window()[0].delivered;
      collisions += env.last_window()[0].collisions;
    }
    double slots = static_cast<double>(windows * len);
    double c = cfg.cw_min();
    double mean_cycle = 1 + c / 2;
    double var_cycle = ((c + 1) * (c + 1) - 1) / 12;
    double expect = 1 / mean_cycle;
    double sigma = std::sqrt(var_cycle / (mean_cycle * mean_cycle * mean_cycle * slots));
    CAPTURE(exp);
    CHECK(collisions == 0);
    CHECK(std::abs(delivered / slots - expect) < 3 * sigma + 1.0 / slots);
    if (exp == 1) CHECK(delivered / slots >= 0.5);
  }
}

TEST_CASE("fixed-probability mode matches slotted aloha") {
  WirelessEnv env;
  env.reset(2, 0);
  env.set_fixed_probability(0.25);
  const double slots = 1e5;
  std::uint64_t delivered = 0;
  for (int w = 0; w < 500; ++w) {
    env.step_window(200);
    for (const auto& s : env.last_window()) delivered += s.delivered;
  }
  double q = analytic_success_rate(4, 0.25);
  double sigma = std::sqrt(q * (1 - q) / slots);
  CHECK(std::abs(delivered / slots - q) < 3 * sigma);
  CHECK_THROWS_AS(env.set_fixed_probability(1.2), std::invalid_argument);
}

TEST_CASE("zero offered load produces an empty channel") {
  WirelessEnv env(demo_with_load(0.0));
  env.reset(4, 0);
  for (int w = 0; w < 10; ++w) {
    auto r = env.step_window();
    CHECK(r.reward == 0.0);
    for (const auto& ap : r.observation.aps) {
      CHECK(ap.delivered == 0);
      CHECK(ap.busy_fraction == 0.0);
    }
  }
}

TEST_CASE("window accounting invariants under random configs") {
  Rng rng(123);
  for (int run = 0; run < 30; ++run) {
    EnvConfig c;
    c.mode = EnvMode::Dynamic;
    c.queue_cap = 1 + static_cast<std::uint32_t>(rng.below(40));
    c.jain_reward = run % 2 == 1;
    WirelessEnv env(c);
    env.reset(rng.next(), 0);
    for (int w = 0; w < 20; ++w) {
      std::map<int, MacConfig> actions;
      for (const auto& ap : env.aps()) {
        int lo = 1 + static_cast<int>(rng.below(6));
        int hi = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(11 - lo)));
        actions[ap.ap_id] = MacConfig{lo, hi, 1 + static_cast<int>(rng.below(7))};
      }
      env.apply_actions(actions);
      std::size_t len = 1 + rng.below(300);
      auto r = env.step_window(len);
      double delivered = 0;
      for (std::size_t i = 0; i < env.n_aps(); ++i) {
        const auto& s = env.last_window()[i];
        const auto& o = r.observation.aps[i];
        const auto& ap = env.aps()[i];
        CHECK(s.arrivals + s.queue_before == s.delivered + s.dropped + s.queue_after);
        CHECK(o.delivered + o.collisions <= len);
        CHECK(o.busy_fraction >= 0.0);
        CHECK(o.busy_fraction <= 1.0);
        CHECK(ap.queue_len <= c.queue_cap);
        CHECK(ap.backoff_counter <= ap.cw);
        CHECK(ap.retry_count <= ap.config.retry_limit);
        delivered += s.delivered;
      }
      CHECK(r.reward >= 0.0);
      CHECK(r.reward <= 1.0);
      if (!c.jain_reward) CHECK(r.reward == delivered / static_cast<double>(len));
      else CHECK(r.reward <= delivered / static_cast<double>(len) + 1e-12);
    }
  }
}

TEST_CASE("jain-weighted reward equals throughput when shares are equal") {
  EnvConfig c = demo_with_load(0.9, 1);
  c.jain_reward = true;
  WirelessEnv env(c);
  env.reset(1, 0);
  env.apply_actions({{1, MacConfig{1, 5, 3}}});
  auto r = env.step_window();
  CHECK(r.reward == doctest::Approx(env.last_window()[0].delivered / 200.0));
}
