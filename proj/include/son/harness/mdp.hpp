#pragma once

// Explicit finite MDPs: value iteration (the reference fixed point) and a
// tabular Q-learning driver that exercises q_update / select_action on them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "son/learn.hpp"
#include "son/optimize.hpp"

namespace son {

inline constexpr const char* kMdpSchema = "son.mdp/1";

struct MdpSpec {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<std::vector<std::vector<double>>> transition;  // [s][a][s']
  std::vector<std::vector<double>> reward;                   // [s][a]
  double gamma = 0.9;

  void validate() const {
    if (states == 0 || actions == 0) throw Error("SpecValidation", "MDP needs at least one state and action");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("SpecValidation", "MDP gamma must be in [0,1)");
    if (transition.size() != states || reward.size() != states)
      throw Error("SpecValidation", "MDP tables do not match state count");
    for (std::size_t s = 0; s < states; ++s) {
      if (transition[s].size() != actions || reward[s].size() != actions)
        throw Error("SpecValidation", "MDP tables do not match action count");
      for (std::size_t a = 0; a < actions; ++a) {
        const auto& row = transition[s][a];
        if (row.size() != states) throw Error("SpecValidation", "MDP transition row has wrong length");
        double sum = 0.0;
        for (double p : row) {
          if (p < 0.0) throw Error("NonStochasticRow", "negative transition probability");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
          throw Error("NonStochasticRow",
                      "transition row (" + std::to_string(s) + "," + std::to_string(a) + ") sums to " + format_number(sum));
        if (!std::isfinite(reward[s][a])) throw Error("SpecValidation", "MDP reward must be finite");
      }
    }
  }
};

struct ValueIterationResult {
  std::vector<std::vector<double>> q;  // Q*[s][a]
  std::vector<std::size_t> policy;     // greedy action per state, lowest index on ties
  int sweeps = 0;
};

// Bellman backup of one Q table.
inline std::vector<std::vector<double>> bellman_backup(const MdpSpec& mdp, const std::vector<std::vector<double>>& q) {
  std::vector<double> v(mdp.states);
  for (std::size_t s = 0; s < mdp.states; ++s) v[s] = *std::max_element(q[s].begin(), q[s].end());
  auto next = q;
  for (std::size_t s = 0; s < mdp.states; ++s)
    for (std::size_t a = 0; a < mdp.actions; ++a) {
      double expect = 0.0;
      for (std::size_t s2 = 0; s2 < mdp.states; ++s2) expect += mdp.transition[s][a][s2] * v[s2];
      next[s][a] = mdp.reward[s][a] + mdp.gamma * expect;
    }
  return next;
}

// Sweeps until the max-norm change drops below tol. The returned table's
// Bellman residual is then below gamma * tol.
inline ValueIterationResult value_iteration(const MdpSpec& mdp, double tol) {
  mdp.validate();
  if (!(tol > 0)) throw Error("SpecValidation", "tolerance must be > 0");
  ValueIterationResult r;
  r.q.assign(mdp.states, std::vector<double>(mdp.actions, 0.0));
  while (true) {
    auto next = bellman_backup(mdp, r.q);
    double change = 0.0;
    for (std::size_t s = 0; s < mdp.states; ++s)
      for (std::size_t a = 0; a < mdp.actions; ++a) change = std::max(change, std::abs(next[s][a] - r.q[s][a]));
    r.q = std::move(next);
    ++r.sweeps;
    if (change < tol) break;
  }
  for (std::size_t s = 0; s < mdp.states; ++s)
    r.policy.push_back(static_cast<std::size_t>(std::max_element(r.q[s].begin(), r.q[s].end()) - r.q[s].begin()));
  return r;
}

struct QLearningOptions {
  QParams params{0.1, 0.9};
  ExplorationPolicy policy = EpsilonGreedy{0.2};
  long iterations = 50'000;
  std::uint64_t seed = 1;
  std::size_t start_state = 0;
  // Per-entry step size alpha / (1 + visits)^decay; 0 keeps alpha constant.
  double alpha_decay = 0.0;
};

// Online Q-learning along a single trajectory of the MDP.
inline QTable q_learning(const MdpSpec& mdp, const QLearningOptions& opt) {
  mdp.validate();
  opt.params.validate();
  QTable table(mdp.states, mdp.actions);
  std::vector<long> visits(mdp.states * mdp.actions, 0);
  std::vector<Candidate> candidates;
  for (std::size_t a = 0; a < mdp.actions; ++a) candidates.push_back(Candidate{SetChannel{NodeId{}, static_cast<int>(a + 1)}, a, false});
  Rng rng(mix_seed(opt.seed));
  std::size_t s = opt.start_state;
  for (long it = 0; it < opt.iterations; ++it) {
    const std::size_t a = select_action(table, s, opt.policy, candidates, rng).q_index;
    const double u = uniform01(rng);
    std::size_t s2 = mdp.states - 1;
    double acc = 0.0;
    for (std::size_t k = 0; k < mdp.states; ++k) {
      acc += mdp.transition[s][a][k];
      if (u < acc) {
        s2 = k;
        break;
      }
    }
    QParams p = opt.params;
    const long n = visits[s * mdp.actions + a]++;
    if (opt.alpha_decay > 0) p.alpha = opt.params.alpha / std::pow(1.0 + static_cast<double>(n), opt.alpha_decay);
    q_update(table, p, Transition{s, a, mdp.reward[s][a], s2});
    s = s2;
  }
  return table;
}

// YAML document:
//   schema: son.mdp/1
//   gamma: 0.9
//   reward: [[r00, r01], ...]            # states x actions
//   transition: [[[p000, p001], ...]]    # states x actions x states
inline MdpSpec parse_mdp(const std::string& text) {
  MdpSpec m;
  try {
    const YAML::Node root = YAML::Load(text);
    if (!root["schema"] || root["schema"].as<std::string>() != kMdpSchema)
      throw Error("SpecValidation", std::string("MDP must declare schema: ") + kMdpSchema);
    m.gamma = root["gamma"].as<double>();
    m.reward = root["reward"].as<std::vector<std::vector<double>>>();
    m.transition = root["transition"].as<std::vector<std::vector<std::vector<double>>>>();
    m.states = m.reward.size();
    m.actions = m.states ? m.reward[0].size() : 0;
  } catch (const YAML::Exception& e) {
    throw Error("SpecValidation", std::string("MDP parse error: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace son
