#pragma once

// Scenario documents (YAML). Grammar: docs/scenario-format.md.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "son/agent.hpp"
#include "son/env.hpp"

namespace son {

inline constexpr const char* kScenarioSchema = "son.scenario/1";

struct OutputOptions {
  std::string dir = "out";
  bool trace = true;
  bool metrics = true;
  bool qtables = true;
  bool kb = true;
};

struct ScenarioSpec {
  std::string name = "scenario";
  ScenarioKind kind = ScenarioKind::ChannelAssignment;
  EnvConfig env;
  AgentConfig agent;
  std::vector<NodeId> agent_nodes;  // nodes that run an agent, ascending
  int horizon = 0;
  std::vector<std::uint64_t> seeds{1};
  bool random_initial_channels = false;
  bool oracle_channels = false;
  std::string kb_snapshot_dir;  // warm start from kb-node-<id>.json files
  OutputOptions output;

  void validate() const {
    env.validate();
    agent.validate();
    if (agent.kind != kind) throw Error("SpecValidation", "agent kind does not match scenario kind");
    for (const auto& f : agent.features.features) parse_measure(f.name);
    if (horizon < 0) throw Error("SpecValidation", "horizon must be >= 0");
    if (seeds.empty()) throw Error("SpecValidation", "at least one seed required");
    for (std::size_t i = 0; i < agent_nodes.size(); ++i) {
      if (index_of(agent_nodes[i]) >= env.topology.size())
        throw Error("SpecValidation", "agent references unknown node " + std::to_string(index_of(agent_nodes[i])));
      if (i > 0 && agent_nodes[i] <= agent_nodes[i - 1])
        throw Error("SpecValidation", "agent nodes must be unique and ascending");
    }
    if (kind == ScenarioKind::LocationOptimization) {
      for (const auto& n : env.topology.nodes)
        if (n.allowed.size() < 1) throw Error("SpecValidation", "location nodes need allowed cells");
    }
  }
};

// Inclusive seed range "a..b".
inline std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) return {std::stoull(text)};
    const auto a = std::stoull(text.substr(0, dots));
    const auto b = std::stoull(text.substr(dots + 2));
    if (b < a) throw Error("SpecValidation", "seed range '" + text + "' is empty");
    std::vector<std::uint64_t> out;
    for (auto s = a; s <= b; ++s) out.push_back(s);
    return out;
  } catch (const std::logic_error&) {
    throw Error("SpecValidation", "bad seed range '" + text + "'");
  }
}

namespace detail {

inline Cell parse_cell(const YAML::Node& n) {
  if (!n.IsSequence() || n.size() != 2) throw Error("SpecValidation", "cell must be [x, y]");
  return Cell{n[0].as<int>(), n[1].as<int>()};
}

inline DemandProfile parse_demand(const YAML::Node& n) {
  if (!n) return DemandProfile::constant(0.0);
  if (n.IsScalar()) return DemandProfile::constant(n.as<double>());
  DemandProfile p;
  if (n["random"]) {
    const auto r = n["random"];
    p.random = DemandProfile::Randomized{r["epoch"].as<int>(), r["min"].as<double>(), r["max"].as<double>()};
  } else {
    for (const auto& s : n["steps"]) p.steps.push_back(DemandStep{s[0].as<int>(), s[1].as<double>()});
  }
  p.period = n["period"].as<int>(0);
  return p;
}

inline ExplorationPolicy parse_policy(const YAML::Node& n) {
  if (!n) return EpsilonGreedy{0.1};
  const auto type = n["type"].as<std::string>("epsilon-greedy");
  if (type == "epsilon-greedy") return EpsilonGreedy{n["epsilon"].as<double>(0.1)};
  if (type == "boltzmann") return Boltzmann{n["tau"].as<double>(1.0)};
  if (type == "controlled") {
    Controlled c;
    c.epsilon = n["epsilon"].as<double>(c.epsilon);
    c.max_switches = n["max_switches"].as<int>(c.max_switches);
    c.window = n["window"].as<int>(c.window);
    c.forbid_while_serving = n["forbid_while_serving"].as<bool>(c.forbid_while_serving);
    c.serving_threshold = n["serving_threshold"].as<double>(c.serving_threshold);
    return c;
  }
  throw Error("SpecValidation", "unknown policy type '" + type + "'");
}

inline double max_demand_level(const DemandProfile& p) {
  if (p.random) return p.random->max;
  double m = 0.0;
  for (const auto& s : p.steps) m = std::max(m, s.level);
  return m;
}

// Percept layout used when the scenario does not list features.
inline void default_features(ScenarioSpec& spec, FeatureSpec& fs, StateCodec& codec) {
  const auto& topo = spec.env.topology;
  if (spec.kind == ScenarioKind::ChannelAssignment) {
    const int n = topo.channel_count;
    fs.features.push_back({"channel", 0.5, n + 0.5});
    codec.bins.push_back(n);
    for (int c = 1; c <= n; ++c) {
      fs.features.push_back({"occupancy_" + std::to_string(c), -0.5, 2.5});
      codec.bins.push_back(3);
    }
    return;
  }
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  bool first = true;
  for (const auto& node : topo.nodes)
    for (Cell c : node.allowed) {
      if (first) {
        x0 = x1 = c.x;
        y0 = y1 = c.y;
        first = false;
      }
      x0 = std::min(x0, c.x), x1 = std::max(x1, c.x), y0 = std::min(y0, c.y), y1 = std::max(y1, c.y);
    }
  fs.features.push_back({"x", x0 - 0.5, x1 + 0.5});
  codec.bins.push_back(x1 - x0 + 1);
  fs.features.push_back({"y", y0 - 0.5, y1 + 0.5});
  codec.bins.push_back(y1 - y0 + 1);
  for (std::size_t u = 0; u < spec.env.users.size(); ++u) {
    fs.features.push_back({"demand_u" + std::to_string(u), 0.0, std::max(max_demand_level(spec.env.users[u].demand), 1.0)});
    codec.bins.push_back(2);
  }
}

}  // namespace detail

inline ScenarioSpec parse_scenario(const std::string& text) {
  ScenarioSpec spec;
  try {
    const YAML::Node root = YAML::Load(text);
    if (!root["schema"] || root["schema"].as<std::string>() != kScenarioSchema)
      throw Error("SpecValidation", std::string("scenario must declare schema: ") + kScenarioSchema);
    spec.name = root["name"].as<std::string>(spec.name);
    const auto kind = root["kind"].as<std::string>("channel-assignment");
    if (kind == "channel-assignment")
      spec.kind = ScenarioKind::ChannelAssignment;
    else if (kind == "location-optimization")
      spec.kind = ScenarioKind::LocationOptimization;
    else
      throw Error("SpecValidation", "unknown scenario kind '" + kind + "'");
    spec.horizon = root["horizon"].as<int>(0);
    if (const auto s = root["seeds"]) {
      spec.seeds.clear();
      if (s.IsSequence())
        for (const auto& v : s) spec.seeds.push_back(v.as<std::uint64_t>());
      else
        spec.seeds = parse_seed_range(s.as<std::string>());
    }
    const auto init = root["initial_channels"].as<std::string>("fixed");
    if (init != "fixed" && init != "random") throw Error("SpecValidation", "initial_channels must be fixed or random");
    spec.random_initial_channels = init == "random";

    // Environment.
    const YAML::Node env = root["env"];
    if (!env) throw Error("SpecValidation", "scenario needs an env section");
    auto& cfg = spec.env;
    auto& topo = cfg.topology;
    topo.channel_count = env["channels"].as<int>(1);
    cfg.pathloss_exponent = env["pathloss_exponent"].as<double>(cfg.pathloss_exponent);
    cfg.tx_power = env["tx_power"].as<double>(cfg.tx_power);
    cfg.noise_floor = env["noise_floor"].as<double>(cfg.noise_floor);
    cfg.bandwidth_unit = env["bandwidth_unit"].as<double>(cfg.bandwidth_unit);
    cfg.serving_threshold = env["serving_threshold"].as<double>(cfg.serving_threshold);
    cfg.reassociate = env["reassociate"].as<bool>(false);
    cfg.horizon = spec.horizon;
    for (const auto& n : env["nodes"]) {
      NodeSpec ns;
      ns.position = detail::parse_cell(n["position"]);
      ns.channel = n["channel"].as<int>(1);
      if (const auto a = n["allowed"]) {
        for (const auto& c : a) ns.allowed.push_back(detail::parse_cell(c));
      } else if (const auto r = n["allowed_rect"]) {
        for (int y = r[1].as<int>(); y <= r[3].as<int>(); ++y)
          for (int x = r[0].as<int>(); x <= r[2].as<int>(); ++x) ns.allowed.push_back({x, y});
      } else {
        ns.allowed.push_back(ns.position);
      }
      topo.nodes.push_back(std::move(ns));
    }
    for (const auto& e : env["edges"])
      topo.edges.emplace_back(node_id(e[0].as<std::size_t>()), node_id(e[1].as<std::size_t>()));
    if (const auto radius = env["interference_radius"]) {
      const double r = radius.as<double>();
      for (std::size_t a = 0; a < topo.size(); ++a)
        for (std::size_t b = a + 1; b < topo.size(); ++b)
          if (distance(topo.nodes[a].position, topo.nodes[b].position) <= r + 1e-12) {
            const auto key = std::pair{node_id(a), node_id(b)};
            const auto rev = std::pair{node_id(b), node_id(a)};
            if (std::find(topo.edges.begin(), topo.edges.end(), key) == topo.edges.end() &&
                std::find(topo.edges.begin(), topo.edges.end(), rev) == topo.edges.end())
              topo.edges.push_back(key);
          }
    }
    if (const auto per = env["users_per_node"]) {
      for (const auto& n : topo.nodes) cfg.users.push_back(UserSpec{n.position, detail::parse_demand(per["demand"])});
    }
    for (const auto& u : env["users"]) cfg.users.push_back(UserSpec{detail::parse_cell(u["home"]), detail::parse_demand(u["demand"])});

    // Agents.
    const YAML::Node ag = root["agent"];
    auto& a = spec.agent;
    a.kind = spec.kind;
    if (ag && ag["features"]) {
      for (const auto& f : ag["features"]) {
        a.features.features.push_back({f["name"].as<std::string>(), f["min"].as<double>(0.0), f["max"].as<double>(1.0)});
        a.codec.bins.push_back(f["bins"].as<int>(2));
      }
    } else {
      detail::default_features(spec, a.features, a.codec);
    }
    if (ag) {
      a.q.alpha = ag["alpha"].as<double>(a.q.alpha);
      a.q.gamma = ag["gamma"].as<double>(a.q.gamma);
      a.policy = detail::parse_policy(ag["policy"]);
      a.thresholds.similarity = ag["theta_m"].as<double>(a.thresholds.similarity);
      a.thresholds.coefficient = ag["theta_L"].as<double>(a.thresholds.coefficient);
      a.kb_capacity = ag["kb_capacity"].as<std::size_t>(a.kb_capacity);
      if (ag["eviction"]) a.eviction = parse_eviction(ag["eviction"].as<std::string>());
      const auto driver = ag["reuse_driver"].as<std::string>("coefficient");
      if (driver == "coefficient" || driver == "L")
        a.driver = ReuseDriver::Coefficient;
      else if (driver == "q-value" || driver == "Q")
        a.driver = ReuseDriver::QValue;
      else
        throw Error("SpecValidation", "unknown reuse driver '" + driver + "'");
      a.disruption_cost = ag["disruption_cost"].as<double>(0.0);
      a.activation_probability = ag["activation_probability"].as<double>(1.0);
      spec.kb_snapshot_dir = ag["kb_snapshot_dir"].as<std::string>("");
    }
    if (ag && ag["nodes"] && ag["nodes"].IsSequence()) {
      for (const auto& n : ag["nodes"]) spec.agent_nodes.push_back(node_id(n.as<std::size_t>()));
      std::sort(spec.agent_nodes.begin(), spec.agent_nodes.end());
    } else {
      for (std::size_t i = 0; i < topo.size(); ++i) spec.agent_nodes.push_back(node_id(i));
    }

    if (const auto o = root["oracle"]) spec.oracle_channels = o["channels"].as<bool>(false);
    if (const auto o = root["output"]) {
      spec.output.dir = o["dir"].as<std::string>(spec.output.dir);
      spec.output.trace = o["trace"].as<bool>(true);
      spec.output.metrics = o["metrics"].as<bool>(true);
      spec.output.qtables = o["qtables"].as<bool>(true);
      spec.output.kb = o["kb"].as<bool>(true);
    }
  } catch (const YAML::Exception& e) {
    throw Error("SpecValidation", std::string("scenario parse error: ") + e.what());
  }
  spec.validate();
  return spec;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoFailure", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScenarioSpec load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

}  // namespace son
