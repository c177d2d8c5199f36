#include "autonet/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "autonet/name_service.hpp"

namespace autonet {

namespace {

constexpr std::string_view kPolicySetMagic = "autonet-policy-set v1";

std::string agent_name(std::size_t k) { return "rlagent" + std::to_string(k) + ".kira.internal"; }
constexpr std::string_view kGatewayName = "gateway.kira.internal";

struct Stack {
  Stack(const Topology& topology, const RoutingConfig& routing, EventLog* log)
      : net(topology, log), router(net, routing), dns(router) {}
  NetSim net;
  Router router;
  NameService dns;
};

void phase(Stack& s, std::string_view name, std::string_view detail = "-") {
  if (EventLog* log = s.net.log()) log->info(s.net.now(), "PHASE", {name, detail});
}

NodeIndex gateway_of(const Topology& topology) {
  auto gateways = topology.nodes_with_role(NodeRole::Gateway);
  if (gateways.empty()) throw PhaseError("bootstrap", "topology has no gateway node");
  return gateways.front();
}

ConvergenceReport bootstrap(Stack& s) {
  phase(s, "bootstrap");
  ConvergenceReport report = s.router.bootstrap();
  if (!report.converged) throw PhaseError("bootstrap", "routing did not converge");
  phase(s, "converged", std::to_string(report.convergence_time));
  return report;
}

// DNS registration from every service node followed by discovery from the gateway.
std::vector<NameResolution> register_and_discover(Stack& s) {
  const Topology& t = s.net.topology();
  NodeIndex gateway = gateway_of(t);
  std::vector<std::pair<std::string, NodeIndex>> services;
  auto rl_nodes = t.nodes_with_role(NodeRole::RlNode);
  for (std::size_t k = 0; k < rl_nodes.size(); ++k) services.emplace_back(agent_name(k + 1), rl_nodes[k]);
  services.emplace_back(std::string(kGatewayName), gateway);

  phase(s, "dns-update");
  std::vector<NameResolution> out;
  for (const auto& [name, node] : services) {
    NameResolution r;
    r.name = name;
    r.node = t.node(node).name;
    auto response = s.dns.frontend(node).handle_blocking({DnsRequest::Kind::Update, name, s.router.id(node)});
    r.registered = response.code == DnsResponse::Code::Ok;
    out.push_back(r);
  }

  phase(s, "discovery");
  for (auto& r : out) {
    auto response = s.dns.frontend(gateway).handle_blocking({DnsRequest::Kind::Query, r.name, {}});
    r.resolved = response.code == DnsResponse::Code::Ok;
    r.address = response.address;
    r.latency = response.latency;
  }
  return out;
}

std::vector<Policy> fresh_policies(const std::vector<AgentAssignment>& agents, const QParams& q) {
  std::vector<Policy> out;
  for (const auto& a : agents) out.emplace_back(ActionSpace(ActionSpace::default_choices(), a.arity), q);
  return out;
}

RunResult run_scenario(const Topology& topology, const ScenarioSpec& spec, const RunOptions& options,
                       std::vector<Policy>* provided) {
  if (spec.episodes > 0xffff) throw std::invalid_argument("at most 65535 episodes per run");
  Stack s(topology, spec.routing, options.log);
  RunResult result;
  result.convergence = bootstrap(s);
  result.names = register_and_discover(s);

  std::vector<NodeIndex> agent_nodes;
  std::vector<NodeId> agent_addresses;
  for (const auto& r : result.names) {
    if (!r.name.starts_with("rlagent") || !r.resolved) continue;
    auto node = s.router.index_of(r.address);
    if (!node) continue;
    agent_nodes.push_back(*node);
    agent_addresses.push_back(r.address);
  }
  if (agent_nodes.empty()) throw PhaseError("discovery", "no RL agent name resolved");

  auto universe = ap_universe(spec.env);
  try {
    result.agents = assign_agents(spec.kind, universe, agent_nodes.size());
  } catch (const std::invalid_argument& e) {
    throw PhaseError("scenario", e.what());
  }

  const bool training = provided == nullptr;
  if (training) {
    result.policies = fresh_policies(result.agents, spec.q);
  } else {
    if (provided->size() != result.agents.size())
      throw PhaseError("scenario", "policy snapshot has " + std::to_string(provided->size()) +
                                       " agents, scenario needs " + std::to_string(result.agents.size()));
    for (std::size_t i = 0; i < provided->size(); ++i)
      if ((*provided)[i].space().arity() != result.agents[i].arity)
        throw PhaseError("scenario", "policy snapshot does not match the agent layout");
    result.policies = std::move(*provided);
    for (auto& p : result.policies) {
      result.policy_hashes_before.push_back(p.hash());
      p.freeze();
    }
  }

  s.dns.start_refresh();
  FrameTransport transport(s.router);
  transport.set_faults(options.faults);
  std::map<NodeIndex, std::unique_ptr<AgentHost>> hosts;
  std::vector<RemoteAgent> remotes;
  for (std::size_t i = 0; i < result.agents.size(); ++i) {
    const auto& a = result.agents[i];
    NodeIndex node = agent_nodes.at(a.rl_node);
    auto& host = hosts[node];
    if (!host) host = std::make_unique<AgentHost>(transport, node);
    host->add_agent(a.agent_id, result.policies[i], training ? SelectMode::Train : SelectMode::Infer, spec.episodes,
                    spec.seed);
    remotes.push_back(RemoteAgent{a.agent_id, agent_addresses.at(a.rl_node), a.ap_ids});
  }

  WirelessEnv env(spec.env);
  GatewaySession session(transport, gateway_of(topology), env, remotes, spec.seed);
  if (options.record_steps) {
    session.set_step_hook([&result](std::uint64_t episode, std::size_t step, const StepResult& r) {
      for (const auto& ap : r.observation.aps)
        result.steps.push_back(StepRecord{episode, step, ap.ap_id, ap.delivered, ap.collisions, ap.queue_len, r.reward});
    });
  }

  phase(s, "scenario", to_string(spec.kind));
  result.loop_started = s.net.now();
  for (const auto& f : spec.failures) {
    try {
      s.net.fail_link(f.a, f.b, result.loop_started + f.at);
    } catch (const TopologyError& e) {
      throw PhaseError("scenario", e.what());
    }
  }

  for (std::size_t e = 0; e < spec.episodes; ++e) {
    EpisodeOutcome outcome = session.run_episode(e);
    EpisodeRecord rec;
    rec.episode = e;
    rec.n_aps = env.n_aps();
    rec.outcome = outcome;
    rec.episode_return = outcome.completed ? outcome.episode_return : std::numeric_limits<double>::quiet_NaN();
    rec.mean_throughput = outcome.completed ? outcome.mean_throughput() : std::numeric_limits<double>::quiet_NaN();
    result.episodes.push_back(std::move(rec));
  }

  if (!training) {
    for (auto& p : result.policies) {
      p.unfreeze();
      result.policy_hashes_after.push_back(p.hash());
    }
  }
  result.finished = s.net.now();
  phase(s, "done");
  return result;
}

}  // namespace

FailureEvent parse_failure(std::string_view text) {
  std::istringstream in{std::string(text)};
  double ms = 0;
  FailureEvent f;
  std::string extra;
  if (!(in >> ms >> f.a >> f.b) || (in >> extra) || !(ms >= 0) || !std::isfinite(ms))
    throw std::invalid_argument("failure must be \"t_ms a b\": " + std::string(text));
  f.at = static_cast<TimeUs>(std::llround(ms * kMillisecond));
  return f;
}

std::vector<int> ap_universe(const EnvConfig& env) {
  std::size_t n = env.mode == EnvMode::Demo ? env.demo_aps : env.max_aps;
  std::vector<int> ids;
  for (std::size_t i = 1; i <= n; ++i) ids.push_back(static_cast<int>(i));
  return ids;
}

RunResult run_training(const Topology& topology, const ScenarioSpec& spec, const RunOptions& options) {
  return run_scenario(topology, spec, options, nullptr);
}

RunResult run_inference(const Topology& topology, const ScenarioSpec& spec, std::vector<Policy> policies,
                        const RunOptions& options) {
  return run_scenario(topology, spec, options, &policies);
}

std::vector<NameResolution> discover_names(const Topology& topology, EventLog* log, RoutingConfig routing) {
  Stack s(topology, routing, log);
  bootstrap(s);
  return register_and_discover(s);
}

double evaluate_static(const EnvConfig& config, std::uint64_t seed, std::size_t episodes,
                       const std::vector<MacConfig>& per_ap) {
  WirelessEnv env(config);
  double total = 0;
  std::size_t steps = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset(seed, e);
    std::map<int, MacConfig> actions;
    for (const auto& ap : env.aps()) actions[ap.ap_id] = per_ap.at(static_cast<std::size_t>(ap.ap_id - 1) % per_ap.size());
    for (std::size_t t = 0; t < config.steps_per_episode; ++t) {
      env.apply_actions(actions);
      total += env.step_window().reward;
      ++steps;
    }
  }
  return steps == 0 ? 0.0 : total / static_cast<double>(steps);
}

GridResult grid_search(const EnvConfig& env, std::uint64_t seed, std::size_t episodes,
                       const std::vector<MacConfig>& choices) {
  if (env.mode != EnvMode::Demo) throw std::invalid_argument("grid search needs a fixed AP count");
  if (choices.empty()) throw std::invalid_argument("grid search needs at least one choice");
  const std::size_t n = env.demo_aps;
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= choices.size();

  GridResult out;
  out.best_throughput = -1;
  out.best_uniform_throughput = -1;
  std::vector<MacConfig> per_ap(n);
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t rest = code;
    for (std::size_t i = n; i-- > 0;) {
      per_ap[i] = choices[rest % choices.size()];
      rest /= choices.size();
    }
    double value = evaluate_static(env, seed, episodes, per_ap);
    ++out.evaluated;
    if (value > out.best_throughput) {
      out.best_throughput = value;
      out.best = per_ap;
    }
    bool uniform = std::all_of(per_ap.begin(), per_ap.end(), [&](const MacConfig& c) { return c == per_ap[0]; });
    if (uniform && value > out.best_uniform_throughput) {
      out.best_uniform_throughput = value;
      out.best_uniform = per_ap[0];
    }
  }
  return out;
}

std::string serialize_policies(ScenarioKind kind, const std::vector<Policy>& policies) {
  std::ostringstream out;
  out << kPolicySetMagic << '\n' << "scenario " << to_string(kind) << '\n' << "agents " << policies.size() << '\n';
  for (std::size_t i = 0; i < policies.size(); ++i) {
    std::string text = policies[i].serialize();
    auto lines = std::count(text.begin(), text.end(), '\n');
    out << "agent " << i + 1 << ' ' << lines << '\n' << text;
  }
  return out.str();
}

std::vector<Policy> deserialize_policies(std::string_view text, ScenarioKind* kind) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw std::runtime_error("policy set: unexpected end of input");
    return line;
  };
  if (next() != kPolicySetMagic) throw std::runtime_error("policy set: missing header");
  std::string word, value;
  std::istringstream(next()) >> word >> value;
  if (word != "scenario") throw std::runtime_error("policy set: expected scenario");
  try {
    ScenarioKind k = parse_scenario(value);
    if (kind != nullptr) *kind = k;
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("policy set: ") + e.what());
  }
  std::size_t count = 0;
  if (!(std::istringstream(next()) >> word >> count) || word != "agents" || count == 0 || count > 1024)
    throw std::runtime_error("policy set: bad agent count");
  std::vector<Policy> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t id = 0, lines = 0;
    if (!(std::istringstream(next()) >> word >> id >> lines) || word != "agent" || id != i + 1)
      throw std::runtime_error("policy set: bad agent header");
    std::string body;
    for (std::size_t l = 0; l < lines; ++l) body += next() + '\n';
    out.push_back(Policy::deserialize(body));
  }
  if (std::getline(in, line) && !line.empty()) throw std::runtime_error("policy set: trailing data");
  return out;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  std::vector<double> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t j = i + 1 > window ? i + 1 - window : 0; j <= i; ++j)
      if (std::isfinite(values[j])) {
        sum += values[j];
        ++n;
      }
    out.push_back(n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n));
  }
  return out;
}

}  // namespace autonet
