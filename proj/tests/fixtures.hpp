#pragma once

#include <vector>

#include "son/son.hpp"

namespace fixtures {

// Nodes fixed at the given cells, one channel each, optional explicit edges.
inline son::EnvConfig mesh(const std::vector<son::Cell>& cells, const std::vector<std::pair<int, int>>& edges,
                           int channels, const std::vector<int>& channel_of = {}) {
  son::EnvConfig cfg;
  cfg.topology.channel_count = channels;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    son::NodeSpec n;
    n.position = cells[i];
    n.allowed = {cells[i]};
    n.channel = channel_of.empty() ? 1 : channel_of[i];
    cfg.topology.nodes.push_back(n);
  }
  for (auto [a, b] : edges) cfg.topology.edges.emplace_back(son::node_id(a), son::node_id(b));
  return cfg;
}

inline son::EnvConfig with_users(son::EnvConfig cfg, const std::vector<son::Cell>& homes, double demand) {
  for (auto h : homes) cfg.users.push_back(son::UserSpec{h, son::DemandProfile::constant(demand)});
  return cfg;
}

inline son::MeshTopology graph(int n, const std::vector<std::pair<int, int>>& edges, int channels) {
  std::vector<son::Cell> cells;
  for (int i = 0; i < n; ++i) cells.push_back({i, 0});
  return mesh(cells, edges, channels).topology;
}

inline son::QTable reference_table() {
  // Rows State 1, State 2, State m; columns a_1, a_2, a_3, a_n.
  son::QTable q(3, 4);
  q.set(0, 1, 10.0);
  q.set(0, 2, 5.0);
  q.set(0, 3, 0.2);
  q.set(1, 0, 100.0);
  q.set(1, 1, 7.0);
  q.set(1, 3, 1.0);
  q.set(2, 0, 2.0);
  q.set(2, 2, 30.0);
  q.set(2, 3, 5.0);
  return q;
}

}  // namespace fixtures
