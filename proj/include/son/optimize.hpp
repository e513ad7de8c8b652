#pragma once

// Action search: exploitation of Q values, exploration policies, and the
// channel / location heuristics with their exhaustive counterparts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "son/action.hpp"
#include "son/env.hpp"
#include "son/learn.hpp"

namespace son {

struct EpsilonGreedy {
  double epsilon = 0.1;
};

struct Boltzmann {
  double tau = 1.0;
};

// Exploration restricted by a constraint set: at most `max_switches` channel
// switches per `window` steps, and none while the node serves more than
// `serving_threshold` Mbps (when `forbid_while_serving`). Candidates that break
// a constraint are removed before the epsilon-greedy choice.
struct Controlled {
  double epsilon = 0.1;
  int max_switches = 1;
  int window = 10;
  bool forbid_while_serving = true;
  double serving_threshold = 1.0;
};

using ExplorationPolicy = std::variant<EpsilonGreedy, Boltzmann, Controlled>;

inline void validate(const ExplorationPolicy& policy) {
  struct V {
    void operator()(const EpsilonGreedy& p) const {
      if (!(p.epsilon >= 0 && p.epsilon <= 1)) throw Error("SpecValidation", "epsilon must be in [0,1]");
    }
    void operator()(const Boltzmann& p) const {
      if (!(p.tau > 0)) throw Error("SpecValidation", "tau must be > 0");
    }
    void operator()(const Controlled& p) const {
      if (!(p.epsilon >= 0 && p.epsilon <= 1)) throw Error("SpecValidation", "epsilon must be in [0,1]");
      if (p.max_switches < 0 || p.window < 1) throw Error("SpecValidation", "controlled switch budget invalid");
    }
  };
  std::visit(V{}, policy);
}

// One selectable action. `q_index` is its column in the Q table; `switches`
// marks a channel change of the acting node.
struct Candidate {
  Action action;
  std::size_t q_index = 0;
  bool switches = false;
};

struct SelectionContext {
  double served_demand = 0.0;  // aggregate demand on the acting node, Mbps
  int recent_switches = 0;     // channel switches inside the current window
};

struct Selection {
  Action action;
  std::size_t q_index = 0;
  bool explored = false;  // drawn by the exploration branch
};

// Softmax over the candidates' Q values (unexplored counts as 0).
inline std::vector<double> boltzmann_probabilities(const QTable& table, std::size_t s,
                                                   std::span<const Candidate> candidates, double tau) {
  std::vector<double> p(candidates.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    p[i] = table.at(s, candidates[i].q_index).value_or(0.0) / tau;
    top = std::max(top, p[i]);
  }
  double sum = 0.0;
  for (double& v : p) sum += (v = std::exp(v - top));
  for (double& v : p) v /= sum;
  return p;
}

// Best explored candidate (lowest Q index on ties); the first candidate when
// none is explored.
inline std::size_t greedy_candidate(const QTable& table, std::size_t s, std::span<const Candidate> candidates) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& q = table.at(s, candidates[i].q_index);
    if (!q) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double qb = *table.at(s, candidates[*best].q_index);
    if (*q > qb || (*q == qb && candidates[i].q_index < candidates[*best].q_index)) best = i;
  }
  return best.value_or(0);
}

inline bool allowed_by(const Controlled& c, const Candidate& cand, const SelectionContext& ctx) {
  if (!cand.switches) return true;
  if (c.forbid_while_serving && ctx.served_demand > c.serving_threshold) return false;
  return ctx.recent_switches < c.max_switches;
}

namespace detail {

inline Selection epsilon_greedy(const QTable& table, std::size_t s, std::span<const Candidate> candidates,
                                double epsilon, Rng& rng) {
  const bool explore = uniform01(rng) < epsilon;
  if (explore) {
    const auto& c = candidates[uniform_index(rng, candidates.size())];
    return {c.action, c.q_index, true};
  }
  const auto& c = candidates[greedy_candidate(table, s, candidates)];
  return {c.action, c.q_index, false};
}

}  // namespace detail

inline Selection select_action(const QTable& table, std::size_t s, const ExplorationPolicy& policy,
                               std::span<const Candidate> candidates, Rng& rng, const SelectionContext& ctx = {}) {
  if (candidates.empty()) throw Error("EmptyCandidates", "no candidate actions");
  if (const auto* eg = std::get_if<EpsilonGreedy>(&policy))
    return detail::epsilon_greedy(table, s, candidates, eg->epsilon, rng);
  if (const auto* bz = std::get_if<Boltzmann>(&policy)) {
    const auto p = boltzmann_probabilities(table, s, candidates, bz->tau);
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t pick = candidates.size() - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    const std::size_t g = greedy_candidate(table, s, candidates);
    return {candidates[pick].action, candidates[pick].q_index, pick != g};
  }
  const auto& ctl = std::get<Controlled>(policy);
  std::vector<Candidate> allowed;
  for (const auto& c : candidates)
    if (allowed_by(ctl, c, ctx)) allowed.push_back(c);
  if (allowed.empty()) throw Error("EmptyCandidates", "constraint set removed every candidate");
  return detail::epsilon_greedy(table, s, allowed, ctl.epsilon, rng);
}

// Welsh-Powell order (degree descending, id ascending); each node takes the
// lowest channel unused by its already-colored neighbors, cycling through the
// palette once it is exhausted.
inline std::vector<int> greedy_coloring(const MeshTopology& topo) {
  const std::size_t n = topo.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [a, b] : topo.edges) {
    adj[index_of(a)].push_back(index_of(b));
    adj[index_of(b)].push_back(index_of(a));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return adj[a].size() > adj[b].size(); });

  std::vector<int> channel(n, 0);
  int cycle = 0;
  for (std::size_t v : order) {
    std::vector<bool> used(static_cast<std::size_t>(topo.channel_count) + 1, false);
    for (std::size_t u : adj[v])
      if (channel[u] > 0) used[static_cast<std::size_t>(channel[u])] = true;
    for (int c = 1; c <= topo.channel_count; ++c) {
      if (!used[static_cast<std::size_t>(c)]) {
        channel[v] = c;
        break;
      }
    }
    if (channel[v] == 0) channel[v] = (cycle++ % topo.channel_count) + 1;
  }
  return channel;
}

struct ChannelOptimum {
  std::vector<int> channel_of;
  double value = 0.0;
};

using ChannelObjective = std::function<double(std::span<const int>)>;

inline constexpr std::uint64_t kMaxEnumeration = 1ULL << 20;

// Exhaustive minimum of `objective` over all assignments; first optimum in
// lexicographic order wins.
inline ChannelOptimum brute_force_channels(const MeshTopology& topo, const ChannelObjective& objective) {
  const std::size_t n = topo.size();
  const auto k = static_cast<std::uint64_t>(topo.channel_count);
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    total *= k;
    if (total > kMaxEnumeration) throw Error("TooLarge", "more than 2^20 channel assignments");
  }
  std::vector<int> assign(n, 1);
  ChannelOptimum best{assign, objective(assign)};
  for (std::uint64_t step = 1; step < total; ++step) {
    for (std::size_t i = n; i-- > 0;) {
      if (assign[i] < topo.channel_count) {
        ++assign[i];
        break;
      }
      assign[i] = 1;
    }
    const double v = objective(assign);
    if (v < best.value) best = {assign, v};
  }
  return best;
}

inline ChannelOptimum brute_force_channels(const MeshTopology& topo) {
  return brute_force_channels(topo, [&](std::span<const int> ch) { return static_cast<double>(count_conflicts(topo, ch)); });
}

// Allowed cells within one grid step (8-neighbourhood) of `current`, the
// current cell first.
inline std::vector<Cell> neighborhood(const MeshTopology& topo, NodeId node, Cell current) {
  std::vector<Cell> cells;
  if (topo.is_allowed(node, current)) cells.push_back(current);
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const Cell c{current.x + dx, current.y + dy};
      if ((dx != 0 || dy != 0) && topo.is_allowed(node, c)) cells.push_back(c);
    }
  return cells;
}

// Gains at or below this many Mbps count as ties.
inline constexpr double kMoveTolerance = 1e-9;

// Hill-climb step: best one-step cell by predicted served throughput; staying
// wins ties.
inline MoveTo location_search(const Environment& env, const EnvState& state, NodeId node) {
  const auto& topo = env.topology();
  if (index_of(node) >= topo.size()) throw Error("UnknownNode", "unknown node");
  const Cell current = state.position_of[index_of(node)];
  const auto cells = neighborhood(topo, node, current);
  if (cells.empty()) throw Error("NoAllowedCell", "node " + std::to_string(index_of(node)) + " has no allowed cell");
  Cell best = cells.front();
  double best_value = env.predicted_node_throughput(state, node, best);
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const double v = env.predicted_node_throughput(state, node, cells[i]);
    if (v > best_value + kMoveTolerance) {
      best = cells[i];
      best_value = v;
    }
  }
  return MoveTo{node, best};
}

}  // namespace son
