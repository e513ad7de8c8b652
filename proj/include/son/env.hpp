#pragma once

// Discrete-time wireless mesh simulator. Nodes transmit on integer channels;
// co-channel interference is counted only along interference-graph edges.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "son/action.hpp"
#include "son/core.hpp"

namespace son {

struct NodeSpec {
  Cell position{};
  std::vector<Cell> allowed;  // cells the node may occupy, position included
  int channel = 1;            // channel at t = 0
};

struct MeshTopology {
  std::vector<NodeSpec> nodes;  // NodeId i is nodes[i]
  std::vector<std::pair<NodeId, NodeId>> edges;
  int channel_count = 1;

  std::size_t size() const noexcept { return nodes.size(); }

  bool is_allowed(NodeId n, Cell c) const {
    const auto& allowed = nodes.at(index_of(n)).allowed;
    return std::find(allowed.begin(), allowed.end(), c) != allowed.end();
  }

  void validate() const {
    if (channel_count < 1) throw Error("SpecValidation", "channel count must be >= 1");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      if (n.allowed.empty())
        throw Error("SpecValidation", "node " + std::to_string(i) + " has no allowed cell");
      if (!is_allowed(node_id(i), n.position))
        throw Error("SpecValidation", "node " + std::to_string(i) + " position not in its allowed set");
      if (n.channel < 1 || n.channel > channel_count)
        throw Error("SpecValidation", "node " + std::to_string(i) + " initial channel out of range");
    }
    for (auto [a, b] : edges) {
      if (index_of(a) >= nodes.size() || index_of(b) >= nodes.size())
        throw Error("SpecValidation", "interference edge references unknown node");
      if (a == b) throw Error("SpecValidation", "interference edge is a self-loop");
    }
    std::vector<std::pair<NodeId, NodeId>> keys;
    for (auto [a, b] : edges) keys.emplace_back(std::min(a, b), std::max(a, b));
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
      throw Error("SpecValidation", "duplicate interference edge");
  }
};

// Co-channel edge count of an assignment (channel_of indexed by node).
inline int count_conflicts(const MeshTopology& topo, std::span<const int> channel_of) {
  int conflicts = 0;
  for (auto [a, b] : topo.edges)
    if (channel_of[index_of(a)] == channel_of[index_of(b)]) ++conflicts;
  return conflicts;
}

struct DemandStep {
  int start = 0;
  double level = 0.0;
};

// Piecewise-constant demand. Either explicit (start, level) steps, or a
// randomized mode that draws one level per epoch from the run seed. A
// positive period repeats the profile.
struct DemandProfile {
  struct Randomized {
    int epoch = 1;
    double min = 0.0;
    double max = 0.0;
  };

  std::vector<DemandStep> steps;
  std::optional<Randomized> random;
  int period = 0;

  static DemandProfile constant(double level) { return DemandProfile{{{0, level}}, std::nullopt, 0}; }

  void validate() const {
    if (period < 0) throw Error("SpecValidation", "demand period must be >= 0");
    if (random) {
      if (random->epoch < 1) throw Error("SpecValidation", "random demand epoch must be >= 1");
      if (random->min < 0 || random->max < random->min)
        throw Error("SpecValidation", "random demand range invalid");
      return;
    }
    if (steps.empty() || steps.front().start != 0)
      throw Error("SpecValidation", "demand profile must start at step 0");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (steps[i].level < 0) throw Error("SpecValidation", "demand level must be >= 0");
      if (i > 0 && steps[i].start <= steps[i - 1].start)
        throw Error("SpecValidation", "demand steps must have increasing start");
    }
  }

  double level_at(int t, std::uint64_t seed, UserId user) const {
    const int local = period > 0 ? t % period : t;
    if (random) {
      const auto epoch = static_cast<std::uint64_t>(local / random->epoch);
      Rng rng(mix_seed(seed ^ mix_seed(0x5eed0000ULL + index_of(user)) ^ mix_seed(epoch + 1)));
      return uniform_real(rng, random->min, random->max);
    }
    double level = steps.front().level;
    for (const auto& s : steps) {
      if (s.start > local) break;
      level = s.level;
    }
    return level;
  }
};

struct UserSpec {
  Cell home{};
  DemandProfile demand;
};

struct EnvConfig {
  MeshTopology topology;
  std::vector<UserSpec> users;  // UserId i is users[i]
  double pathloss_exponent = 2.0;
  double tx_power = 1.0;
  double noise_floor = 0.01;
  double bandwidth_unit = 1.0;   // Mbps per bit/s/Hz
  double serving_threshold = 0.0;  // aggregate demand above which a node is in service
  std::uint64_t rng_seed = 1;
  int horizon = 1;
  bool reassociate = false;  // re-attach users to the nearest node every step

  void validate() const {
    topology.validate();
    if (!(pathloss_exponent > 0)) throw Error("SpecValidation", "pathloss exponent must be > 0");
    if (!(noise_floor > 0)) throw Error("SpecValidation", "noise floor must be > 0");
    if (!(tx_power > 0)) throw Error("SpecValidation", "tx power must be > 0");
    if (!(bandwidth_unit > 0)) throw Error("SpecValidation", "bandwidth unit must be > 0");
    if (horizon < 0) throw Error("SpecValidation", "horizon must be >= 0");
    if (topology.nodes.empty() && !users.empty())
      throw Error("SpecValidation", "users need at least one node");
    for (const auto& u : users) u.demand.validate();
  }
};

struct EnvState {
  int t = 0;
  std::vector<int> channel_of;
  std::vector<Cell> position_of;
  std::vector<NodeId> association;  // indexed by user
  std::vector<double> demand;       // indexed by user, Mbps
  std::vector<Action> last_actions;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct ThroughputReport {
  std::vector<double> achieved;       // per user, Mbps
  std::vector<double> per_node_load;  // per node, Mbps
  int conflicts = 0;
  std::vector<bool> disrupted;  // per node: switched channel while in service this step
  int disruptions = 0;

  friend bool operator==(const ThroughputReport&, const ThroughputReport&) = default;
};

// Shannon-style rate of one link, split evenly over `sharing_users`.
inline double capacity(double ratio, double bandwidth_unit, int sharing_users = 1) {
  if (sharing_users < 1) sharing_users = 1;
  return bandwidth_unit * std::log2(1.0 + std::max(ratio, 0.0)) / sharing_users;
}

class Environment {
 public:
  explicit Environment(EnvConfig config) : config_(std::move(config)) {
    config_.validate();
    adjacency_.resize(config_.topology.size());
    for (auto [a, b] : config_.topology.edges) {
      add_neighbor(a, b);
      add_neighbor(b, a);
    }
  }

  const EnvConfig& config() const noexcept { return config_; }
  const MeshTopology& topology() const noexcept { return config_.topology; }
  std::size_t node_count() const noexcept { return config_.topology.size(); }
  std::size_t user_count() const noexcept { return config_.users.size(); }

  std::span<const NodeId> neighbors(NodeId n) const { return adjacency_.at(index_of(n)); }

  EnvState initial_state() const {
    EnvState s;
    for (const auto& n : config_.topology.nodes) {
      s.channel_of.push_back(n.channel);
      s.position_of.push_back(n.position);
    }
    s.association = associate(s.position_of);
    return evolve_demand(std::move(s));
  }

  // Nearest node per user; ties go to the lowest node id.
  std::vector<NodeId> associate(std::span<const Cell> positions) const {
    std::vector<NodeId> out;
    out.reserve(config_.users.size());
    for (const auto& u : config_.users) {
      std::size_t best = 0;
      double best_d = distance(u.home, positions[0]);
      for (std::size_t i = 1; i < positions.size(); ++i) {
        const double d = distance(u.home, positions[i]);
        if (d < best_d) {
          best = i;
          best_d = d;
        }
      }
      out.push_back(node_id(best));
    }
    return out;
  }

  // Reason the action is invalid in `state`, or nullopt if it may be applied.
  std::optional<std::string> check_action(const EnvState& state, const Action& action) const {
    (void)state;
    const NodeId node = target_node(action);
    if (index_of(node) >= node_count()) return "unknown node";
    if (const auto* sc = std::get_if<SetChannel>(&action)) {
      if (sc->channel < 1 || sc->channel > config_.topology.channel_count) return "channel out of range";
    } else if (const auto* mv = std::get_if<MoveTo>(&action)) {
      if (!config_.topology.is_allowed(node, mv->cell)) return "cell " + to_string(mv->cell) + " not allowed";
    }
    return std::nullopt;
  }

  void validate_action(const EnvState& state, const Action& action) const {
    if (auto why = check_action(state, action))
      throw Error("InvalidAction", "node " + std::to_string(index_of(target_node(action))) + ": " + *why);
  }

  // Signal-to-interference-plus-noise ratio of a user on its serving node.
  double link_quality(const EnvState& state, UserId user) const {
    if (index_of(user) >= config_.users.size()) throw Error("UnknownUser", "unknown user " + std::to_string(index_of(user)));
    const NodeId server = state.association[index_of(user)];
    return link_quality_at(state, user, server, state.position_of[index_of(server)]);
  }

  // SINR of `user` if `server` were at `server_cell`.
  double link_quality_at(const EnvState& state, UserId user, NodeId server, Cell server_cell) const {
    const Cell home = config_.users[index_of(user)].home;
    const double received = received_power(distance(home, server_cell));
    const int channel = state.channel_of[index_of(server)];
    double interference = 0.0;
    for (NodeId nb : neighbors(server)) {
      if (state.channel_of[index_of(nb)] != channel) continue;
      interference += received_power(distance(home, state.position_of[index_of(nb)]));
    }
    return received / (config_.noise_floor + interference);
  }

  ThroughputReport evaluate(const EnvState& state) const {
    ThroughputReport r;
    r.achieved.assign(user_count(), 0.0);
    r.per_node_load.assign(node_count(), 0.0);
    r.disrupted.assign(node_count(), false);
    const auto active = active_users(state);
    for (std::size_t u = 0; u < user_count(); ++u) {
      const double demand = state.demand[u];
      if (demand <= 0.0) continue;
      const NodeId server = state.association[u];
      const double share =
          capacity(link_quality(state, user_id(u)), config_.bandwidth_unit, active[index_of(server)]);
      r.achieved[u] = std::min(share, demand);
      r.per_node_load[index_of(server)] += r.achieved[u];
    }
    r.conflicts = count_conflicts(config_.topology, state.channel_of);
    return r;
  }

  // Sum of achieved throughput of the node's users with the node moved to `cell`.
  double predicted_node_throughput(const EnvState& state, NodeId node, Cell cell) const {
    const auto active = active_users(state);
    double total = 0.0;
    for (std::size_t u = 0; u < user_count(); ++u) {
      if (state.association[u] != node || state.demand[u] <= 0.0) continue;
      const double share = capacity(link_quality_at(state, user_id(u), node, cell), config_.bandwidth_unit,
                                    active[index_of(node)]);
      total += std::min(share, state.demand[u]);
    }
    return total;
  }

  double node_demand(const EnvState& state, NodeId node) const {
    double total = 0.0;
    for (std::size_t u = 0; u < user_count(); ++u)
      if (state.association[u] == node) total += state.demand[u];
    return total;
  }

  bool in_service(const EnvState& state, NodeId node) const {
    return node_demand(state, node) > config_.serving_threshold;
  }

  EnvState evolve_demand(EnvState state) const {
    state.demand.resize(user_count());
    for (std::size_t u = 0; u < user_count(); ++u)
      state.demand[u] = config_.users[u].demand.level_at(state.t, config_.rng_seed, user_id(u));
    return state;
  }

  // Validates the whole batch first; nothing is applied if any action fails.
  std::pair<EnvState, ThroughputReport> apply_and_step(const EnvState& state, std::span<const Action> actions) const {
    for (const auto& a : actions) validate_action(state, a);

    EnvState next = state;
    std::vector<bool> disrupted(node_count(), false);
    for (const auto& a : actions) {
      if (const auto* sc = std::get_if<SetChannel>(&a)) {
        auto& ch = next.channel_of[index_of(sc->node)];
        if (ch != sc->channel && in_service(state, sc->node)) disrupted[index_of(sc->node)] = true;
        ch = sc->channel;
      } else if (const auto* mv = std::get_if<MoveTo>(&a)) {
        next.position_of[index_of(mv->node)] = mv->cell;
      }
    }
    next.last_actions.assign(actions.begin(), actions.end());
    next.t = state.t + 1;
    if (config_.reassociate) next.association = associate(next.position_of);
    next = evolve_demand(std::move(next));

    ThroughputReport report = evaluate(next);
    report.disrupted = std::move(disrupted);
    report.disruptions = static_cast<int>(std::count(report.disrupted.begin(), report.disrupted.end(), true));
    return {std::move(next), std::move(report)};
  }

 private:
  double received_power(double d) const {
    return config_.tx_power * std::pow(std::max(d, 1.0), -config_.pathloss_exponent);
  }

  // Users with positive demand per node; these share the node's airtime.
  std::vector<int> active_users(const EnvState& state) const {
    std::vector<int> active(node_count(), 0);
    for (std::size_t u = 0; u < user_count(); ++u)
      if (state.demand[u] > 0.0) ++active[index_of(state.association[u])];
    return active;
  }

  void add_neighbor(NodeId from, NodeId to) {
    auto& list = adjacency_.at(index_of(from));
    if (std::find(list.begin(), list.end(), to) == list.end()) list.push_back(to);
  }

  EnvConfig config_;
  std::vector<std::vector<NodeId>> adjacency_;
};

}  // namespace son
