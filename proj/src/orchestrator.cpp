#include "autonet/orchestrator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>

#include <json.hpp>

namespace autonet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kReturnsHeader = "scenario,seed,episode,agent_id,return";
constexpr std::string_view kThroughputHeader = "scenario,seed,episode,mean_throughput";
constexpr std::string_view kStepsHeader = "episode,step,ap_id,delivered,collisions,queue_len,reward";
constexpr std::size_t kSummaryWindow = 10;
constexpr std::size_t kSmoothing = 10;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool agent_active(const AgentAssignment& a, std::size_t n_aps) {
  return std::any_of(a.ap_ids.begin(), a.ap_ids.end(), [&](int id) { return static_cast<std::size_t>(id) <= n_aps; });
}

double mean_finite(std::span<const double> values) {
  double sum = 0;
  std::size_t n = 0;
  for (double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

double tail_mean(const std::vector<double>& values, std::size_t window) {
  std::size_t from = values.size() > window ? values.size() - window : 0;
  return mean_finite(std::span<const double>(values).subspan(from));
}

std::string ms(TimeUs t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(t) / static_cast<double>(kMillisecond));
  return buf;
}

// --- run artifacts ---

struct Artifacts {
  std::string returns_csv;
  std::string throughput_csv;
  std::string steps_csv;
  std::string summary;
  json manifest;
};

Artifacts build_artifacts(const RunManifest& m, const RunResult& r) {
  const ScenarioSpec& spec = m.scenario;
  const std::string scenario(to_string(spec.kind));
  const std::string seed = std::to_string(spec.seed);
  Artifacts a;

  std::vector<double> per_episode;
  std::size_t aborted = 0;
  for (const auto& e : r.episodes) {
    per_episode.push_back(m.mode == RunMode::Train ? e.episode_return : e.mean_throughput);
    if (!e.outcome.completed) ++aborted;
  }

  std::ostringstream csv;
  if (m.mode == RunMode::Train) {
    csv << kReturnsHeader << '\n';
    for (const auto& e : r.episodes)
      for (const auto& agent : r.agents)
        if (agent_active(agent, e.n_aps))
          csv << scenario << ',' << seed << ',' << e.episode << ',' << agent.agent_id << ','
              << format_number(e.episode_return) << '\n';
    a.returns_csv = csv.str();
  } else {
    csv << kThroughputHeader << '\n';
    for (const auto& e : r.episodes)
      csv << scenario << ',' << seed << ',' << e.episode << ',' << format_number(e.mean_throughput) << '\n';
    a.throughput_csv = csv.str();
  }

  std::ostringstream steps;
  steps << kStepsHeader << '\n';
  for (const auto& s : r.steps)
    steps << s.episode << ',' << s.step << ',' << s.ap_id << ',' << s.delivered << ',' << s.collisions << ','
          << s.queue_len << ',' << format_number(s.reward) << '\n';
  a.steps_csv = steps.str();

  const std::string metric = m.mode == RunMode::Train ? "last10_mean_return" : "mean_throughput";
  const double value = m.mode == RunMode::Train ? tail_mean(per_episode, kSummaryWindow) : mean_finite(per_episode);
  std::ostringstream summary;
  summary << "scenario " << scenario << '\n'
          << "mode " << to_string(m.mode) << '\n'
          << "env " << to_string(spec.env.mode) << '\n'
          << "seed " << spec.seed << '\n'
          << "episodes " << r.episodes.size() << '\n'
          << "aborted " << aborted << '\n'
          << metric << ' ' << format_number(value) << '\n';
  a.summary = summary.str();

  json names = json::array();
  for (const auto& n : r.names)
    names.push_back({{"name", n.name},
                     {"node", n.node},
                     {"registered", n.registered},
                     {"resolved", n.resolved},
                     {"address", n.resolved ? n.address.ipv6() : ""},
                     {"latency_us", n.latency}});
  json agents = json::array();
  for (const auto& ag : r.agents) agents.push_back({{"agent_id", ag.agent_id}, {"rl_node", ag.rl_node}, {"ap_ids", ag.ap_ids}});
  json failures = json::array();
  for (const auto& f : spec.failures) failures.push_back({{"at_us", f.at}, {"a", f.a}, {"b", f.b}});
  json hashes = json::array();
  for (const auto& p : r.policies) hashes.push_back(p.hash());

  a.manifest = {{"scenario", scenario},
                {"mode", std::string(to_string(m.mode))},
                {"env", std::string(to_string(spec.env.mode))},
                {"seed", spec.seed},
                {"episodes", spec.episodes},
                {"aborted", aborted},
                {"topology", m.topology.filename().string()},
                {"failures", failures},
                {"convergence_time_us", r.convergence.convergence_time},
                {"loop_started_us", r.loop_started},
                {"finished_us", r.finished},
                {"names", names},
                {"agents", agents},
                {"policy_sha256", hashes},
                {metric, std::isfinite(value) ? json(value) : json(nullptr)}};
  return a;
}

// --- compare ---

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::string_view header) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != header) throw std::runtime_error(path.string() + ": unexpected header");
  std::size_t columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) throw std::runtime_error(path.string() + ": malformed row \"" + line + "\"");
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_number(const std::string& text, const fs::path& path) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw std::runtime_error(path.string() + ": bad number \"" + text + "\"");
  return v;
}

std::size_t parse_index(const std::string& text, const fs::path& path) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw std::runtime_error(path.string() + ": bad index \"" + text + "\"");
  return v;
}

struct RunDir {
  fs::path path;
  std::string scenario;
  RunMode mode = RunMode::Train;
  std::string env;
  std::uint64_t seed = 0;
  std::vector<double> returns;  // per episode, mean over agents
  double throughput = 0;
};

RunDir load_run(const fs::path& dir) {
  RunDir run;
  run.path = dir;
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "run.json"));
    run.scenario = manifest.at("scenario").get<std::string>();
    run.mode = parse_run_mode(manifest.at("mode").get<std::string>());
    run.env = manifest.at("env").get<std::string>();
    run.seed = manifest.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw std::runtime_error((dir / "run.json").string() + ": " + e.what());
  }
  if (run.mode == RunMode::Train) {
    fs::path csv = dir / "training_returns.csv";
    std::map<std::size_t, std::vector<double>> by_episode;
    for (const auto& row : read_csv(csv, kReturnsHeader))
      by_episode[parse_index(row[2], csv)].push_back(parse_number(row[4], csv));
    for (const auto& [episode, values] : by_episode) {
      if (episode != run.returns.size()) throw std::runtime_error(csv.string() + ": episodes are not contiguous");
      run.returns.push_back(mean_finite(values));
    }
  } else {
    fs::path csv = dir / "inference_throughput.csv";
    std::vector<double> values;
    for (const auto& row : read_csv(csv, kThroughputHeader)) values.push_back(parse_number(row[3], csv));
    run.throughput = mean_finite(values);
  }
  return run;
}

struct Column {
  std::string label;
  std::string scenario;
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> returns;
  std::vector<double> curve;  // smoothed returns
  std::optional<double> throughput;
};

std::vector<Column> arrange(const std::vector<RunDir>& runs) {
  std::vector<Column> columns;
  for (const auto& run : runs) {
    bool train = run.mode == RunMode::Train;
    auto fits = [&](const Column& c) {
      return c.scenario == run.scenario && c.seed == run.seed && (train ? !c.returns : !c.throughput);
    };
    auto it = std::find_if(columns.begin(), columns.end(), fits);
    if (it == columns.end()) {
      Column c;
      c.scenario = run.scenario;
      c.seed = run.seed;
      c.label = run.scenario;
      bool taken = std::any_of(columns.begin(), columns.end(), [&](const Column& o) { return o.label == c.label; });
      if (taken) c.label += "@" + run.path.filename().string();
      columns.push_back(std::move(c));
      it = columns.end() - 1;
    }
    if (train) {
      it->returns = run.returns;
      it->curve = moving_average(run.returns, kSmoothing);
    }
    else
      it->throughput = run.throughput;
  }
  return columns;
}

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : "-"; }

// Four decimals keep the text table aligned; the CSVs carry full precision.
std::string display(const std::string& csv_cell) {
  if (csv_cell == "-" || csv_cell == "nan") return csv_cell;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", std::stod(csv_cell));
  return buf;
}

}  // namespace

std::string_view to_string(RunMode mode) { return mode == RunMode::Train ? "train" : "infer"; }

RunMode parse_run_mode(std::string_view text) {
  if (text == "train") return RunMode::Train;
  if (text == "infer") return RunMode::Infer;
  throw std::invalid_argument("unknown mode: " + std::string(text));
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

void validate(const RunManifest& m) {
  if (m.mode == RunMode::Infer) {
    if (!m.policy) throw UsageError("--mode infer requires --policy");
    if (!fs::is_regular_file(*m.policy)) throw UsageError("policy snapshot not found: " + m.policy->string());
  }
  if (m.topology.empty()) throw UsageError("--topology is required");
  if (m.out.empty()) throw UsageError("--out is required");
  if (m.scenario.episodes > 0xffff) throw UsageError("--episodes must be at most 65535");
}

int cmd_run(const RunManifest& m, std::ostream& out, std::ostream& err) {
  try {
    validate(m);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_code::kUsage;
  }

  EventLog log(log_level_from_env());
  bool have_dir = false;
  try {
    Topology topology = [&] {
      try {
        return Topology::load(m.topology);
      } catch (const std::exception& e) {
        throw PhaseError("topology", e.what());
      }
    }();
    try {
      fs::create_directories(m.out);
      have_dir = true;
    } catch (const fs::filesystem_error& e) {
      throw PhaseError("output", e.what());
    }

    RunOptions options;
    options.log = &log;
    RunResult result;
    if (m.mode == RunMode::Train) {
      result = run_training(topology, m.scenario, options);
    } else {
      ScenarioKind kind{};
      std::vector<Policy> policies;
      try {
        policies = deserialize_policies(read_text(*m.policy), &kind);
      } catch (const std::runtime_error& e) {
        throw PhaseError("policy", e.what());
      }
      if (kind != m.scenario.kind)
        throw PhaseError("policy", "snapshot was trained for " + std::string(to_string(kind)) + ", not " +
                                       std::string(to_string(m.scenario.kind)));
      result = run_inference(topology, m.scenario, std::move(policies), options);
    }

    Artifacts a = build_artifacts(m, result);
    if (m.mode == RunMode::Train) {
      write_text(m.out / "training_returns.csv", a.returns_csv);
      write_text(m.out / "policy.txt", serialize_policies(m.scenario.kind, result.policies));
    } else {
      write_text(m.out / "inference_throughput.csv", a.throughput_csv);
    }
    write_text(m.out / "step_metrics.csv", a.steps_csv);
    write_text(m.out / "summary.txt", a.summary);
    write_text(m.out / "run.json", a.manifest.dump(2) + "\n");
    log.write(m.out / "events.log");
    out << a.summary;
    return exit_code::kOk;
  } catch (const std::exception& e) {
    if (have_dir) {
      try {
        log.write(m.out / "events.log");
      } catch (const std::exception&) {
      }
    }
    err << "error: " << e.what() << '\n';
    return exit_code::kRuntime;
  }
}

int cmd_compare(const std::vector<fs::path>& dirs, const std::optional<fs::path>& out_dir, std::ostream& out,
                std::ostream& err) {
  if (dirs.size() < 2) {
    err << "usage error: compare needs at least two run directories\n";
    return exit_code::kUsage;
  }
  try {
    std::vector<RunDir> runs;
    for (const auto& d : dirs) runs.push_back(load_run(d));

    std::set<std::string> envs, seeds;
    for (const auto& r : runs) {
      envs.insert(r.env);
      seeds.insert(std::to_string(r.seed));
    }
    if (envs.size() > 1) {
      err << "error: incompatible runs: env modes differ\n";
      return exit_code::kRuntime;
    }
    if (seeds.size() > 1) {
      std::string list;
      for (const auto& s : seeds) list += (list.empty() ? "" : ", ") + s;
      err << "warning: runs use different seeds (" << list << "); comparing anyway\n";
    }

    auto columns = arrange(runs);
    std::size_t episodes = 0;
    for (const auto& c : columns) episodes = std::max(episodes, c.curve.size());

    const int first = 30;
    std::vector<int> widths;
    for (const auto& c : columns) widths.push_back(std::max<int>(14, static_cast<int>(c.label.size())) + 2);

    std::ostringstream text, csv, summary;
    auto row = [&](const std::string& head, const std::vector<std::string>& cells) {
      text << std::left << std::setw(first) << head;
      for (std::size_t i = 0; i < cells.size(); ++i) text << std::right << std::setw(widths[i]) << cells[i];
      text << '\n';
    };
    std::vector<std::string> labels;
    for (const auto& c : columns) labels.push_back(c.label);
    row("", labels);

    std::vector<std::string> seed_cells, last_cells, infer_cells;
    for (const auto& c : columns) {
      seed_cells.push_back(std::to_string(c.seed));
      last_cells.push_back(c.returns ? cell(tail_mean(*c.returns, kSummaryWindow)) : "-");
      infer_cells.push_back(cell(c.throughput));
    }
    auto shown = [](std::vector<std::string> v) {
      for (auto& c : v) c = display(c);
      return v;
    };
    row("seed", seed_cells);
    row("last-10 mean return", shown(last_cells));
    row("inference mean throughput", shown(infer_cells));
    text << '\n';
    row("smoothed return (window " + std::to_string(kSmoothing) + ")", labels);
    for (std::size_t e = 0; e < episodes; ++e) {
      std::vector<std::string> values;
      for (const auto& c : columns)
        values.push_back(e < c.curve.size() ? display(format_number(c.curve[e])) : "-");
      row("  episode " + std::to_string(e), values);
    }

    csv << "episode";
    for (const auto& c : columns) csv << ',' << c.label;
    csv << '\n';
    for (std::size_t e = 0; e < episodes; ++e) {
      csv << e;
      for (const auto& c : columns) csv << ',' << (e < c.curve.size() ? format_number(c.curve[e]) : "");
      csv << '\n';
    }
    summary << "column,scenario,seed,last10_mean_return,inference_mean_throughput\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      summary << columns[i].label << ',' << columns[i].scenario << ',' << columns[i].seed << ','
              << (last_cells[i] == "-" ? "" : last_cells[i]) << ',' << (infer_cells[i] == "-" ? "" : infer_cells[i])
              << '\n';

    if (out_dir) {
      fs::create_directories(*out_dir);
      write_text(*out_dir / "comparison.txt", text.str());
      write_text(*out_dir / "comparison.csv", csv.str());
      write_text(*out_dir / "comparison_summary.csv", summary.str());
    }
    out << text.str();
    return exit_code::kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kRuntime;
  }
}

int cmd_discover(const fs::path& topology_path, std::ostream& out, std::ostream& err) {
  try {
    Topology topology = Topology::load(topology_path);
    EventLog log(log_level_from_env());
    auto names = discover_names(topology, &log);
    std::size_t name_width = 4, node_width = 4;
    for (const auto& n : names) {
      name_width = std::max(name_width, n.name.size());
      node_width = std::max(node_width, n.node.size());
    }
    auto line = [&](const std::string& name, const std::string& node, const std::string& address,
                    const std::string& status, const std::string& latency) {
      out << std::left << std::setw(static_cast<int>(name_width + 2)) << name << std::setw(static_cast<int>(node_width + 2))
          << node << std::setw(41) << address << std::setw(10) << status << latency << '\n';
    };
    line("name", "node", "address", "status", "latency_ms");
    for (const auto& n : names)
      line(n.name, n.node, n.resolved ? n.address.ipv6() : "-", n.resolved ? "resolved" : "FAILED", n.resolved ? ms(n.latency) : "-");
    return exit_code::kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kRuntime;
  }
}

}  // namespace autonet
