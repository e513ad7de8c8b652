#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "fixtures.hpp"

using namespace son;
namespace fs = std::filesystem;

namespace {

const std::string kSingle = R"(
schema: son.scenario/1
name: single
kind: channel-assignment
horizon: 30
env:
  channels: 1
  nodes:
    - position: [0, 0]
  users:
    - home: [0, 0]
      demand: 2
)";

const std::string kTriangle = R"(
schema: son.scenario/1
name: triangle
kind: channel-assignment
horizon: 200
seeds: 3..5
initial_channels: random
oracle: {channels: true}
env:
  channels: 3
  nodes:
    - {position: [0, 0]}
    - {position: [1, 0]}
    - {position: [0, 1]}
  interference_radius: 1.5
  users_per_node:
    demand: 5
agent:
  theta_m: 0.9
  activation_probability: 0.5
  policy: {type: epsilon-greedy, epsilon: 0.05}
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("son-harness-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return read_file(p.string()); }

}  // namespace

TEST(Scenario, ParsesTheGrammar) {
  const auto spec = parse_scenario(kTriangle);
  EXPECT_EQ(spec.name, "triangle");
  EXPECT_EQ(spec.horizon, 200);
  EXPECT_EQ(spec.seeds, (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_TRUE(spec.random_initial_channels);
  EXPECT_TRUE(spec.oracle_channels);
  EXPECT_EQ(spec.env.topology.edges.size(), 3u);
  EXPECT_EQ(spec.env.users.size(), 3u);
  EXPECT_EQ(spec.agent_nodes.size(), 3u);
  EXPECT_EQ(spec.agent.thresholds.similarity, 0.9);
  EXPECT_EQ(spec.agent.activation_probability, 0.5);
  ASSERT_TRUE(std::holds_alternative<EpsilonGreedy>(spec.agent.policy));
  EXPECT_EQ(std::get<EpsilonGreedy>(spec.agent.policy).epsilon, 0.05);
  // Default channel percept: own channel plus per-channel neighbour occupancy.
  EXPECT_EQ(spec.agent.features.size(), 4u);
  EXPECT_EQ(spec.agent.codec.bins, (std::vector<int>{3, 3, 3, 3}));
}

TEST(Scenario, BundledScenariosLoad) {
  for (const auto& entry : fs::directory_iterator(fs::path(SON_SOURCE_DIR) / "scenarios")) {
    if (entry.path().extension() != ".yaml") continue;
    SCOPED_TRACE(entry.path().string());
    if (entry.path().filename().string().rfind("mdp", 0) == 0)
      EXPECT_NO_THROW(parse_mdp(slurp(entry.path())));
    else
      EXPECT_NO_THROW(load_scenario(entry.path().string()));
  }
}

TEST(Scenario, RejectsBadInput) {
  const auto code_of = [](const std::string& text) {
    try {
      parse_scenario(text);
    } catch (const Error& e) {
      return e.code();
    }
    return std::string("none");
  };
  EXPECT_EQ(code_of("kind: channel-assignment\n"), "SpecValidation");
  EXPECT_EQ(code_of("schema: son.scenario/1\nkind: teleport\nenv: {nodes: [{position: [0,0]}]}\n"), "SpecValidation");
  EXPECT_EQ(code_of("schema: son.scenario/1\nenv: {channels: 2, nodes: [{position: [0,0], channel: 3}]}\n"),
            "SpecValidation");
  EXPECT_EQ(code_of("schema: son.scenario/1\nenv: {nodes: [{position: [0,0]}], edges: [[0, 0]]}\n"), "SpecValidation");
  EXPECT_EQ(code_of("schema: son.scenario/1\nenv: [unclosed\n"), "SpecValidation");
  EXPECT_EQ(code_of("schema: son.scenario/1\nhorizon: 5\nenv: {nodes: [{position: [0,0]}]}\n"
                    "agent: {features: [{name: bogus, min: 0, max: 1, bins: 2}]}\n"),
            "MissingFeature");
  try {
    load_scenario("/nonexistent/scenario.yaml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "IoFailure");
  }
}

TEST(Scenario, SeedRanges) {
  EXPECT_EQ(parse_seed_range("1..3"), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(parse_seed_range("7..7"), (std::vector<std::uint64_t>{7}));
  EXPECT_THROW(parse_seed_range("3..1"), Error);
  EXPECT_THROW(parse_seed_range("x"), Error);
}

TEST(Run, ZeroHorizonGivesEmptyTraceAndZeroedReport) {
  auto spec = parse_scenario(kTriangle);
  spec.horizon = 0;
  MemorySink sink;
  const auto result = run_scenario(spec, 1, &sink);
  EXPECT_TRUE(sink.events.empty());
  EXPECT_TRUE(sink.steps.empty());
  EXPECT_EQ(result.report.steps, 0);
  EXPECT_EQ(result.report.mean_throughput, 0.0);
  EXPECT_EQ(result.report.total_conflicts, 0);
  EXPECT_EQ(result.report.optimizer_invocations, 0);
}

TEST(Run, UnconstrainedSingleNodeIsFullySatisfied) {
  const auto r = run_scenario(parse_scenario(kSingle), 1).report;
  EXPECT_EQ(r.steps, 30);
  EXPECT_EQ(r.satisfaction, 1.0);
  EXPECT_EQ(r.triggered_ticks, 0);
  EXPECT_DOUBLE_EQ(r.mean_throughput, 2.0);
}

TEST(Run, OneEventPerAgentPerStepInNodeOrder) {
  MemorySink sink;
  run_scenario(parse_scenario(kTriangle), 4, &sink);
  ASSERT_EQ(sink.events.size(), 3u * 200u);
  for (std::size_t i = 0; i < sink.events.size(); ++i) {
    EXPECT_EQ(sink.events[i].t, static_cast<int>(i / 3));
    EXPECT_EQ(sink.events[i].node, node_id(i % 3));
  }
}

TEST(Run, TriangleReachesAProperColoring) {
  const auto spec = parse_scenario(kTriangle);
  for (auto seed : spec.seeds) {
    const auto r = run_scenario(spec, seed).report;
    EXPECT_EQ(r.final_conflicts, 0) << "seed " << seed;
    ASSERT_TRUE(r.oracle_optimum);
    EXPECT_EQ(*r.oracle_optimum, 0.0);
  }
}

TEST(Run, SameSeedGivesByteIdenticalOutputs) {
  const auto spec = parse_scenario(kTriangle);
  const auto a = scratch("det-a"), b = scratch("det-b"), c = scratch("det-c");
  run_and_emit(spec, 9, a);
  run_and_emit(spec, 9, b);
  run_and_emit(spec, 10, c);
  for (const char* f : {"trace.jsonl", "metrics.csv", "qtable-node-0.txt", "kb-node-2.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_NE(slurp(a / "trace.jsonl"), slurp(c / "trace.jsonl"));
}

TEST(Run, ReportMatchesTheTrace) {
  const auto spec = parse_scenario(kTriangle);
  const auto dir = scratch("consistency");
  const auto report = run_and_emit(spec, 5, dir);

  std::istringstream in(slurp(dir / "trace.jsonl"));
  std::string line;
  long steps = 0, conflicts = 0, disruptions = 0, triggered = 0, deferred = 0, reuse = 0, optimizer = 0;
  int last_conflicts = 0;
  double throughput = 0, demand = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["type"] == "step") {
      ++steps;
      throughput += j["throughput"].get<double>();
      demand += j["demand"].get<double>();
      conflicts += j["conflicts"].get<int>();
      last_conflicts = j["conflicts"].get<int>();
      disruptions += j["disruptions"].get<int>();
    } else {
      triggered += j["triggered"].get<bool>();
      deferred += j["outcome"] == "defer";
      reuse += j["outcome"] == "reuse";
      optimizer += j["optimizer"].get<bool>();
    }
  }
  EXPECT_EQ(report.steps, steps);
  EXPECT_EQ(report.total_conflicts, conflicts);
  EXPECT_EQ(report.final_conflicts, last_conflicts);
  EXPECT_EQ(report.disruptions, disruptions);
  EXPECT_EQ(report.triggered_ticks, triggered);
  EXPECT_EQ(report.deferred_ticks, deferred);
  EXPECT_EQ(report.reuse_ticks, reuse);
  EXPECT_EQ(report.optimizer_invocations, optimizer);
  EXPECT_NEAR(report.mean_throughput, throughput / steps, 1e-9);
  EXPECT_NEAR(report.satisfaction, std::min(1.0, throughput / demand), 1e-12);

  // The report file carries the same numbers.
  const std::string text = slurp(dir / "report.txt");
  EXPECT_NE(text.find("total_conflicts = " + std::to_string(conflicts) + "\n"), std::string::npos);
  EXPECT_NE(text.find("optimizer_invocations = " + std::to_string(optimizer) + "\n"), std::string::npos);
}

TEST(Run, KbSnapshotWarmStart) {
  auto spec = parse_scenario(kTriangle);
  const auto dir = scratch("warm");
  run_and_emit(spec, 3, dir);
  spec.kb_snapshot_dir = dir.string();
  const auto warm = run_scenario(spec, 3);
  std::size_t retained = 0;
  for (const auto& agent : warm.agents) {
    const auto cold = import_snapshot(nlohmann::json::parse(slurp(kb_snapshot_path(dir, agent.node()))));
    retained += cold.size();
    EXPECT_GE(agent.kb().size(), cold.size());
    for (const auto& c : cold.cases()) EXPECT_TRUE(agent.kb().find(c.id)) << static_cast<std::uint64_t>(c.id);
  }
  EXPECT_GT(retained, 0u);
}

// ---------------------------------------------------------------------------
// MDP oracle.

namespace {

MdpSpec single_state(double reward, double gamma) {
  MdpSpec m;
  m.states = 1;
  m.actions = 1;
  m.gamma = gamma;
  m.reward = {{reward}};
  m.transition = {{{1.0}}};
  return m;
}

}  // namespace

TEST(ValueIteration, GeometricSeries) {
  const auto vi = value_iteration(single_state(1.0, 0.5), 1e-12);
  EXPECT_NEAR(vi.q[0][0], 2.0, 1e-11);
}

TEST(ValueIteration, ZeroDiscountIsMyopic) {
  MdpSpec m;
  m.states = 2;
  m.actions = 2;
  m.gamma = 0.0;
  m.reward = {{1.0, 3.0}, {-2.0, 0.5}};
  m.transition = {{{0.0, 1.0}, {0.5, 0.5}}, {{1.0, 0.0}, {0.2, 0.8}}};
  const auto vi = value_iteration(m, 1e-12);
  EXPECT_EQ(vi.q, m.reward);
  EXPECT_EQ(vi.policy, (std::vector<std::size_t>{1, 1}));
}

TEST(ValueIteration, HandSolvedTwoStateChain) {
  // State 0: "stay" earns 1 and stays; "go" earns 0 and moves to state 1.
  // State 1 earns 2 forever. With gamma 0.9: V1 = 20, Q(0,go) = 18, Q(0,stay) = 1 + 0.9 * 18.
  MdpSpec m;
  m.states = 2;
  m.actions = 2;
  m.gamma = 0.9;
  m.reward = {{1.0, 0.0}, {2.0, 2.0}};
  m.transition = {{{1.0, 0.0}, {0.0, 1.0}}, {{0.0, 1.0}, {0.0, 1.0}}};
  const auto vi = value_iteration(m, 1e-12);
  EXPECT_NEAR(vi.q[1][0], 20.0, 1e-9);
  EXPECT_NEAR(vi.q[0][1], 18.0, 1e-9);
  EXPECT_NEAR(vi.q[0][0], 1.0 + 0.9 * 18.0, 1e-9);
  EXPECT_EQ(vi.policy[0], 1u);
}

TEST(ValueIteration, ResidualBelowTolerance) {
  Rng rng(mix_seed(61));
  for (int trial = 0; trial < 50; ++trial) {
    MdpSpec m;
    m.states = 2 + uniform_index(rng, 4);
    m.actions = 1 + uniform_index(rng, 3);
    m.gamma = uniform_real(rng, 0.0, 0.95);
    m.reward.assign(m.states, std::vector<double>(m.actions));
    m.transition.assign(m.states, std::vector<std::vector<double>>(m.actions, std::vector<double>(m.states, 0.0)));
    for (std::size_t s = 0; s < m.states; ++s)
      for (std::size_t a = 0; a < m.actions; ++a) {
        m.reward[s][a] = uniform_real(rng, -5, 5);
        // Integer weights over a power-of-two total keep rows exactly stochastic.
        std::vector<int> w(m.states);
        int left = 64;
        for (std::size_t k = 0; k + 1 < m.states; ++k) left -= (w[k] = static_cast<int>(uniform_index(rng, left + 1)));
        w.back() = left;
        for (std::size_t k = 0; k < m.states; ++k) m.transition[s][a][k] = w[k] / 64.0;
      }
    const double tol = 1e-8;
    const auto vi = value_iteration(m, tol);
    const auto next = bellman_backup(m, vi.q);
    for (std::size_t s = 0; s < m.states; ++s)
      for (std::size_t a = 0; a < m.actions; ++a) EXPECT_LT(std::abs(next[s][a] - vi.q[s][a]), tol);
  }
}

TEST(Mdp, ParseAndValidate) {
  const auto m = parse_mdp(R"(
schema: son.mdp/1
gamma: 0.5
reward: [[1]]
transition: [[[1.0]]]
)");
  EXPECT_EQ(m.states, 1u);
  EXPECT_NEAR(value_iteration(m, 1e-12).q[0][0], 2.0, 1e-11);
  try {
    parse_mdp("schema: son.mdp/1\ngamma: 0.5\nreward: [[1]]\ntransition: [[[0.7]]]\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "NonStochasticRow");
  }
  EXPECT_THROW(parse_mdp("schema: son.mdp/1\ngamma: 1.0\nreward: [[1]]\ntransition: [[[1.0]]]\n"), Error);
}

TEST(Mdp, QLearningConvergesOnTheChain) {
  MdpSpec m;
  m.states = 2;
  m.actions = 2;
  m.gamma = 0.5;
  m.reward = {{1.0, 0.0}, {2.0, 2.0}};
  m.transition = {{{0.5, 0.5}, {0.0, 1.0}}, {{0.5, 0.5}, {0.5, 0.5}}};
  const auto vi = value_iteration(m, 1e-12);
  QLearningOptions opt;
  opt.params = {1.0, m.gamma};
  opt.alpha_decay = 0.8;
  opt.iterations = 20'000;
  const auto q = q_learning(m, opt);
  for (std::size_t s = 0; s < 2; ++s) {
    EXPECT_EQ(greedy(q, s), vi.policy[s]);
    for (std::size_t a = 0; a < 2; ++a) EXPECT_NEAR(*q.at(s, a), vi.q[s][a], 0.05 * std::abs(vi.q[s][a]));
  }
}
