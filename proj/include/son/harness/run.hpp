#pragma once

// Run orchestration, metrics, and file emission.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "son/agent.hpp"
#include "son/harness/scenario.hpp"
#include "son/optimize.hpp"

namespace son {

// Network-wide metrics of the configuration produced by the actions of step t.
struct StepRecord {
  int t = 0;
  double throughput = 0.0;  // sum of achieved, Mbps
  double demand = 0.0;      // sum of demand, Mbps
  int conflicts = 0;
  int disruptions = 0;
};

struct RunReport {
  long steps = 0;
  double mean_throughput = 0.0;  // per step, summed over users (Mbps)
  double satisfaction = 0.0;     // total achieved / total demanded
  long total_conflicts = 0;      // summed over steps
  int final_conflicts = 0;
  long disruptions = 0;
  long optimizer_invocations = 0;
  long triggered_ticks = 0;
  long deferred_ticks = 0;  // triggered but backed off
  long reuse_ticks = 0;
  double kb_hit_rate = 0.0;  // reuse / (triggered - deferred)
  double wall_time_s = 0.0;
  std::optional<double> oracle_optimum;        // brute-force minimum conflicts
  std::optional<int> greedy_coloring_conflicts;
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void on_event(const TraceEvent& ev) = 0;
  virtual void on_step(const StepRecord& rec) = 0;
};

class MemorySink final : public TraceSink {
 public:
  void on_event(const TraceEvent& ev) override { events.push_back(ev); }
  void on_step(const StepRecord& rec) override { steps.push_back(rec); }

  std::vector<TraceEvent> events;
  std::vector<StepRecord> steps;
};

inline nlohmann::ordered_json to_json(const TraceEvent& ev) {
  nlohmann::ordered_json j;
  j["type"] = "agent";
  j["t"] = ev.t;
  j["node"] = index_of(ev.node);
  j["percept"] = ev.percept;
  j["triggered"] = ev.triggered;
  j["outcome"] = ev.outcome;
  j["action"] = ev.action ? action_to_json(*ev.action) : nlohmann::ordered_json(nullptr);
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
  j["similarity"] = opt(ev.similarity);
  j["explored"] = ev.explored;
  j["optimizer"] = ev.optimizer_invoked;
  j["reward"] = opt(ev.reward);
  j["L"] = opt(ev.coefficient);
  j["q_before"] = opt(ev.q_before);
  j["q_after"] = opt(ev.q_after);
  j["disruption"] = ev.disruption;
  if (!ev.error.empty()) j["error"] = ev.error;
  return j;
}

inline nlohmann::ordered_json to_json(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["type"] = "step";
  j["t"] = r.t;
  j["throughput"] = r.throughput;
  j["demand"] = r.demand;
  j["conflicts"] = r.conflicts;
  j["disruptions"] = r.disruptions;
  return j;
}

// One JSON object per line; a run's records appear in step order, agent
// events (ascending node) before the step record.
class JsonlSink final : public TraceSink {
 public:
  explicit JsonlSink(std::ostream& out) : out_(out) {}
  void on_event(const TraceEvent& ev) override { out_ << to_json(ev).dump() << '\n'; }
  void on_step(const StepRecord& rec) override { out_ << to_json(rec).dump() << '\n'; }

 private:
  std::ostream& out_;
};

class CsvMetricsSink final : public TraceSink {
 public:
  explicit CsvMetricsSink(std::ostream& out) : out_(out) {
    out_ << "t,throughput,demand,satisfaction,conflicts,disruptions,triggered,reuse,optimizer\n";
  }
  void on_event(const TraceEvent& ev) override {
    triggered_ += ev.triggered;
    reuse_ += ev.outcome == "reuse";
    optimizer_ += ev.optimizer_invoked;
  }
  void on_step(const StepRecord& r) override {
    out_ << r.t << ',' << format_number(r.throughput) << ',' << format_number(r.demand) << ','
         << format_number(r.demand > 0 ? r.throughput / r.demand : 1.0) << ',' << r.conflicts << ',' << r.disruptions
         << ',' << triggered_ << ',' << reuse_ << ',' << optimizer_ << '\n';
    triggered_ = reuse_ = optimizer_ = 0;
  }

 private:
  std::ostream& out_;
  int triggered_ = 0, reuse_ = 0, optimizer_ = 0;
};

class TeeSink final : public TraceSink {
 public:
  void add(TraceSink* s) {
    if (s) sinks_.push_back(s);
  }
  void on_event(const TraceEvent& ev) override {
    for (auto* s : sinks_) s->on_event(ev);
  }
  void on_step(const StepRecord& rec) override {
    for (auto* s : sinks_) s->on_step(rec);
  }

 private:
  std::vector<TraceSink*> sinks_;
};

// Share of reasoning decisions answered by reusing a stored case.
inline double hit_rate(const RunReport& r) {
  const long decisions = r.triggered_ticks - r.deferred_ticks;
  return decisions > 0 ? static_cast<double>(r.reuse_ticks) / static_cast<double>(decisions) : 0.0;
}

// Report aggregates over the records with t in [t_begin, t_end).
inline RunReport summarize(std::span<const StepRecord> steps, std::span<const TraceEvent> events, int t_begin = 0,
                           int t_end = std::numeric_limits<int>::max()) {
  RunReport r;
  double throughput = 0.0, demand = 0.0;
  for (const auto& s : steps) {
    if (s.t < t_begin || s.t >= t_end) continue;
    ++r.steps;
    throughput += s.throughput;
    demand += s.demand;
    r.total_conflicts += s.conflicts;
    r.final_conflicts = s.conflicts;
    r.disruptions += s.disruptions;
  }
  for (const auto& e : events) {
    if (e.t < t_begin || e.t >= t_end) continue;
    r.triggered_ticks += e.triggered;
    r.deferred_ticks += e.outcome == "defer";
    r.reuse_ticks += e.outcome == "reuse";
    r.optimizer_invocations += e.optimizer_invoked;
  }
  if (r.steps > 0) {
    r.mean_throughput = throughput / static_cast<double>(r.steps);
    r.satisfaction = demand > 0 ? std::min(throughput / demand, 1.0) : 1.0;
  }
  r.kb_hit_rate = hit_rate(r);
  return r;
}

struct RunResult {
  RunReport report;
  std::vector<Agent> agents;
  EnvState final_state;
  ThroughputReport final_report;
};

// Accumulates the report in a single pass without storing the trace.
class ReportSink final : public TraceSink {
 public:
  void on_event(const TraceEvent& ev) override {
    r_.triggered_ticks += ev.triggered;
    r_.deferred_ticks += ev.outcome == "defer";
    r_.reuse_ticks += ev.outcome == "reuse";
    r_.optimizer_invocations += ev.optimizer_invoked;
  }
  void on_step(const StepRecord& s) override {
    ++r_.steps;
    throughput_ += s.throughput;
    demand_ += s.demand;
    r_.total_conflicts += s.conflicts;
    r_.final_conflicts = s.conflicts;
    r_.disruptions += s.disruptions;
  }
  RunReport report() const {
    RunReport r = r_;
    if (r.steps > 0) {
      r.mean_throughput = throughput_ / static_cast<double>(r.steps);
      r.satisfaction = demand_ > 0 ? std::min(throughput_ / demand_, 1.0) : 1.0;
    }
    r.kb_hit_rate = hit_rate(r);
    return r;
  }

 private:
  RunReport r_;
  double throughput_ = 0.0, demand_ = 0.0;
};

inline std::filesystem::path kb_snapshot_path(const std::filesystem::path& dir, NodeId node) {
  return dir / ("kb-node-" + std::to_string(index_of(node)) + ".json");
}

// Executes the sense / reason / act loop for `spec.horizon` steps. Randomness
// comes from one generator seeded by `seed`: random initial channels are
// drawn first (ascending node), then agents draw per step in ascending node
// order.
inline RunResult run_scenario(const ScenarioSpec& spec, std::uint64_t seed, TraceSink* sink = nullptr) {
  spec.validate();
  const auto started = std::chrono::steady_clock::now();
  Rng rng(mix_seed(seed));

  EnvConfig cfg = spec.env;
  cfg.rng_seed = seed;
  cfg.horizon = spec.horizon;
  if (spec.random_initial_channels)
    for (auto& n : cfg.topology.nodes)
      n.channel = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cfg.topology.channel_count)));
  const Environment env(std::move(cfg));

  std::vector<Agent> agents;
  for (NodeId n : spec.agent_nodes) {
    agents.emplace_back(n, spec.agent, env);
    if (!spec.kb_snapshot_dir.empty()) {
      const auto path = kb_snapshot_path(spec.kb_snapshot_dir, n);
      if (std::filesystem::exists(path)) {
        auto kb = import_snapshot(nlohmann::json::parse(read_file(path.string())));
        agents.back().kb().restore(kb.cases(), kb.next_id());
      }
    }
  }

  ReportSink totals;
  TeeSink tee;
  tee.add(&totals);
  tee.add(sink);

  EnvState state = env.initial_state();
  ThroughputReport report = env.evaluate(state);
  std::vector<Action> actions;
  std::vector<TraceEvent> events(agents.size());
  for (int step = 0; step < spec.horizon; ++step) {
    actions.clear();
    const EnvView view{env, state, report};
    for (std::size_t i = 0; i < agents.size(); ++i) {
      auto [action, ev] = agents[i].tick(view, rng);
      if (action) actions.push_back(*action);
      events[i] = std::move(ev);
    }
    auto [next_state, next_report] = env.apply_and_step(state, actions);
    state = std::move(next_state);
    report = std::move(next_report);

    const EnvView after{env, state, report};
    for (std::size_t i = 0; i < agents.size(); ++i) {
      agents[i].feedback(after, events[i]);
      tee.on_event(events[i]);
    }
    StepRecord rec{step, 0.0, 0.0, report.conflicts, report.disruptions};
    for (double a : report.achieved) rec.throughput += a;
    for (double d : state.demand) rec.demand += d;
    tee.on_step(rec);
  }

  RunResult result{totals.report(), std::move(agents), std::move(state), std::move(report)};
  if (spec.oracle_channels && spec.kind == ScenarioKind::ChannelAssignment) {
    result.report.oracle_optimum = brute_force_channels(env.topology()).value;
    result.report.greedy_coloring_conflicts = count_conflicts(env.topology(), greedy_coloring(env.topology()));
  }
  result.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

// Flat "key = value" document.
inline std::string format_report(const RunReport& r) {
  std::ostringstream out;
  out << "steps = " << r.steps << '\n'
      << "mean_throughput_mbps = " << format_number(r.mean_throughput) << '\n'
      << "demand_satisfaction = " << format_number(r.satisfaction) << '\n'
      << "total_conflicts = " << r.total_conflicts << '\n'
      << "final_conflicts = " << r.final_conflicts << '\n'
      << "disruptions = " << r.disruptions << '\n'
      << "optimizer_invocations = " << r.optimizer_invocations << '\n'
      << "triggered_ticks = " << r.triggered_ticks << '\n'
      << "deferred_ticks = " << r.deferred_ticks << '\n'
      << "reuse_ticks = " << r.reuse_ticks << '\n'
      << "kb_hit_rate = " << format_number(r.kb_hit_rate) << '\n';
  if (r.oracle_optimum) out << "oracle_optimum_conflicts = " << format_number(*r.oracle_optimum) << '\n';
  if (r.greedy_coloring_conflicts) out << "greedy_coloring_conflicts = " << *r.greedy_coloring_conflicts << '\n';
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IoFailure", "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("IoFailure", "write failed for '" + path.string() + "'");
}

// Runs one seed and writes trace.jsonl, metrics.csv, report.txt and the
// per-agent Q-table / KB dumps into `dir`.
inline RunReport run_and_emit(const ScenarioSpec& spec, std::uint64_t seed, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("IoFailure", "cannot create '" + dir.string() + "': " + ec.message());

  std::ofstream trace, metrics;
  TeeSink tee;
  std::optional<JsonlSink> jsonl;
  std::optional<CsvMetricsSink> csv;
  if (spec.output.trace) {
    trace.open(dir / "trace.jsonl", std::ios::binary);
    if (!trace) throw Error("IoFailure", "cannot write trace in '" + dir.string() + "'");
    jsonl.emplace(trace);
    tee.add(&*jsonl);
  }
  if (spec.output.metrics) {
    metrics.open(dir / "metrics.csv", std::ios::binary);
    if (!metrics) throw Error("IoFailure", "cannot write metrics in '" + dir.string() + "'");
    csv.emplace(metrics);
    tee.add(&*csv);
  }
  RunResult result = run_scenario(spec, seed, &tee);
  trace.close();
  metrics.close();
  if ((spec.output.trace && !trace) || (spec.output.metrics && !metrics)) throw Error("IoFailure", "trace write failed");

  for (const auto& agent : result.agents) {
    const std::string id = std::to_string(index_of(agent.node()));
    if (spec.output.qtables) write_file(dir / ("qtable-node-" + id + ".txt"), dump_qtable(agent.q_table()));
    if (spec.output.kb) write_file(kb_snapshot_path(dir, agent.node()), export_snapshot(agent.kb()).dump(2) + "\n");
  }
  write_file(dir / "report.txt", format_report(result.report));
  return result.report;
}

}  // namespace son
