#pragma once

// One autonomous agent per controllable node: sense -> detect -> retrieve ->
// classify -> reuse / recompute / retain / reject -> act, then learn from the
// throughput the action produced.

#include <algorithm>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "son/env.hpp"
#include "son/kb.hpp"
#include "son/learn.hpp"
#include "son/optimize.hpp"
#include "son/reason.hpp"

namespace son {

enum class ScenarioKind { ChannelAssignment, LocationOptimization };

inline const char* to_string(ScenarioKind k) {
  return k == ScenarioKind::ChannelAssignment ? "channel-assignment" : "location-optimization";
}

// Which score gates ReuseAction: the case's stored L, or the Q value of the
// case's action expressed as a fraction of current demand.
enum class ReuseDriver { Coefficient, QValue };

struct AgentConfig {
  ScenarioKind kind = ScenarioKind::ChannelAssignment;
  FeatureSpec features;
  StateCodec codec;
  QParams q;
  ExplorationPolicy policy = EpsilonGreedy{0.1};
  Thresholds thresholds;
  std::size_t kb_capacity = 256;
  EvictionPolicy eviction = EvictionPolicy::LeastRecentlyUsed;
  ReuseDriver driver = ReuseDriver::Coefficient;
  double disruption_cost = 0.0;  // Mbps subtracted from the reward of a disruptive step
  // Chance that a triggered agent acts this step instead of deferring to the next one.
  double activation_probability = 1.0;

  void validate() const {
    features.validate();
    codec.validate(features.size());
    q.validate();
    son::validate(policy);
    const auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(thresholds.similarity) || !in01(thresholds.coefficient))
      throw Error("SpecValidation", "thresholds must lie in [0,1]");
    if (kb_capacity == 0) throw Error("SpecValidation", "KB capacity must be >= 1");
    if (disruption_cost < 0) throw Error("SpecValidation", "disruption cost must be >= 0");
    if (!(activation_probability > 0.0 && activation_probability <= 1.0))
      throw Error("SpecValidation", "activation probability must be in (0,1]");
  }
};

// Read-only view of the environment at one step.
struct EnvView {
  const Environment& env;
  const EnvState& state;
  const ThroughputReport& report;
};

// ---------------------------------------------------------------------------
// Sensing

// Measurement names understood by the sensing function:
//   x, y            node position
//   allowed         1 when the current cell is in the node's allowed set
//   channel         operating channel
//   conflicts       co-channel interference neighbours
//   degree          interference neighbours
//   occupancy_<c>   interference neighbours operating on channel c
//   users           associated users
//   associated      1 when at least one user is associated
//   demand          aggregate demand of associated users (Mbps)
//   throughput      aggregate achieved throughput (Mbps), i.e. node load
//   satisfaction    throughput / demand, clamped to [0,1]
//   demand_u<k>     demand of user k
//   throughput_u<k> achieved throughput of user k
struct MeasureKey {
  enum class Kind {
    X, Y, Allowed, Channel, Conflicts, Degree, Occupancy, Users, Associated,
    Demand, Throughput, Satisfaction, UserDemand, UserThroughput
  };
  Kind kind = Kind::X;
  int param = 0;
};

inline MeasureKey parse_measure(const std::string& name) {
  using K = MeasureKey::Kind;
  static const std::pair<const char*, K> plain[] = {
      {"x", K::X}, {"y", K::Y}, {"allowed", K::Allowed}, {"channel", K::Channel},
      {"conflicts", K::Conflicts}, {"degree", K::Degree}, {"users", K::Users},
      {"associated", K::Associated}, {"demand", K::Demand}, {"throughput", K::Throughput},
      {"load", K::Throughput}, {"satisfaction", K::Satisfaction}};
  for (const auto& [n, k] : plain)
    if (name == n) return {k, 0};
  const auto suffix_int = [&](const std::string& prefix) -> std::optional<int> {
    if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) return std::nullopt;
    const std::string tail = name.substr(prefix.size());
    if (!std::all_of(tail.begin(), tail.end(), [](char c) { return c >= '0' && c <= '9'; })) return std::nullopt;
    return std::stoi(tail);
  };
  if (auto c = suffix_int("occupancy_")) return {K::Occupancy, *c};
  if (auto u = suffix_int("demand_u")) return {K::UserDemand, *u};
  if (auto u = suffix_int("throughput_u")) return {K::UserThroughput, *u};
  throw Error("MissingFeature", "unknown measurement '" + name + "'");
}

inline double measure(const EnvView& view, NodeId node, MeasureKey key) {
  using K = MeasureKey::Kind;
  const auto& st = view.state;
  const std::size_t i = index_of(node);
  const auto user_at = [&](int k) -> std::size_t {
    if (k < 0 || static_cast<std::size_t>(k) >= view.env.user_count())
      throw Error("MissingFeature", "no user " + std::to_string(k));
    return static_cast<std::size_t>(k);
  };
  switch (key.kind) {
    case K::X: return st.position_of[i].x;
    case K::Y: return st.position_of[i].y;
    case K::Allowed: return view.env.topology().is_allowed(node, st.position_of[i]) ? 1.0 : 0.0;
    case K::Channel: return st.channel_of[i];
    case K::Conflicts: {
      int n = 0;
      for (NodeId nb : view.env.neighbors(node)) n += st.channel_of[index_of(nb)] == st.channel_of[i];
      return n;
    }
    case K::Degree: return static_cast<double>(view.env.neighbors(node).size());
    case K::Occupancy: {
      int n = 0;
      for (NodeId nb : view.env.neighbors(node)) n += st.channel_of[index_of(nb)] == key.param;
      return n;
    }
    case K::Users:
    case K::Associated: {
      const auto n = std::count(st.association.begin(), st.association.end(), node);
      return key.kind == K::Users ? static_cast<double>(n) : (n > 0 ? 1.0 : 0.0);
    }
    case K::Demand: return view.env.node_demand(st, node);
    case K::Throughput: return view.report.per_node_load[i];
    case K::Satisfaction: return learning_coefficient(view.report.per_node_load[i], view.env.node_demand(st, node));
    case K::UserDemand: return st.demand[user_at(key.param)];
    case K::UserThroughput: return view.report.achieved[user_at(key.param)];
  }
  return 0.0;
}

// Every measurement available for a node, keyed by name.
inline RawMeasurements measure_all(const EnvView& view, NodeId node) {
  RawMeasurements raw;
  for (const char* n : {"x", "y", "allowed", "channel", "conflicts", "degree", "users", "associated", "demand",
                        "throughput", "satisfaction"})
    raw[n] = measure(view, node, parse_measure(n));
  for (int c = 1; c <= view.env.topology().channel_count; ++c)
    raw["occupancy_" + std::to_string(c)] = measure(view, node, {MeasureKey::Kind::Occupancy, c});
  for (std::size_t u = 0; u < view.env.user_count(); ++u) {
    raw["demand_u" + std::to_string(u)] = view.state.demand[u];
    raw["throughput_u" + std::to_string(u)] = view.report.achieved[u];
  }
  return raw;
}

// One sensing sample: the percept plus the node's service level.
struct Sample {
  PerceptVector percept;
  double achieved = 0.0;
  double demanded = 0.0;

  bool satisfied() const { return achieved >= demanded - 1e-9; }
};

// Unsatisfactory only when two consecutive samples both fall short of demand.
inline bool detect_unsatisfactory(const Sample& prev, const Sample& curr) {
  if (prev.percept.node != curr.percept.node || curr.percept.t != prev.percept.t + 1)
    throw Error("NonConsecutiveSamples", "detection needs consecutive samples of one node");
  return !prev.satisfied() && !curr.satisfied();
}

// ---------------------------------------------------------------------------

struct TraceEvent {
  int t = 0;
  NodeId node{};
  std::vector<double> percept;
  bool triggered = false;
  std::string outcome = "idle";  // idle | defer | reuse | recompute | retain | reject | error
  std::optional<Action> action;
  std::optional<double> similarity;
  bool explored = false;
  bool optimizer_invoked = false;
  std::optional<double> reward;
  std::optional<double> coefficient;
  std::optional<double> q_before;
  std::optional<double> q_after;
  bool disruption = false;
  std::string error;
};

struct TickResult {
  std::optional<Action> action;
  TraceEvent event;
};

class Agent {
 public:
  Agent(NodeId node, AgentConfig config, const Environment& env)
      : node_(node), config_((config.validate(), std::move(config))), kb_(config_.kb_capacity, config_.eviction) {
    if (index_of(node) >= env.node_count()) throw Error("SpecValidation", "agent references unknown node");
    for (const auto& f : config_.features.features) keys_.push_back(parse_measure(f.name));
    const std::size_t actions = config_.kind == ScenarioKind::ChannelAssignment
                                    ? static_cast<std::size_t>(env.topology().channel_count)
                                    : 9;  // one column per displacement in the 3x3 neighbourhood
    q_ = QTable(config_.codec.state_count(), actions);
  }

  NodeId node() const noexcept { return node_; }
  const AgentConfig& config() const noexcept { return config_; }
  const KnowledgeBase<>& kb() const noexcept { return kb_; }
  KnowledgeBase<>& kb() noexcept { return kb_; }
  const QTable& q_table() const noexcept { return q_; }
  bool has_pending() const noexcept { return pending_.has_value(); }

  long triggered_ticks() const noexcept { return triggered_; }
  long reuse_ticks() const noexcept { return reused_; }
  long optimizer_invocations() const noexcept { return optimizer_calls_; }

  PerceptVector sense(const EnvView& view) const {
    std::vector<double> raw;
    raw.reserve(keys_.size());
    for (const auto& k : keys_) raw.push_back(measure(view, node_, k));
    PerceptVector p = normalize(raw, config_.features);
    p.t = view.state.t;
    p.node = node_;
    return p;
  }

  Sample sample(const EnvView& view) const {
    return Sample{sense(view), view.report.per_node_load[index_of(node_)], view.env.node_demand(view.state, node_)};
  }

  TickResult tick(const EnvView& view, Rng& rng) {
    TickResult out;
    TraceEvent& ev = out.event;
    ev.t = view.state.t;
    ev.node = node_;
    Sample curr = sample(view);
    ev.percept = curr.percept.values;
    const bool triggered = prev_ && detect_unsatisfactory(*prev_, curr);
    prev_ = curr;
    ev.triggered = triggered;
    if (!triggered) return out;
    ++triggered_;
    if (config_.activation_probability < 1.0 && uniform01(rng) >= config_.activation_probability) {
      ev.outcome = "defer";
      return out;
    }

    try {
      out.action = decide(view, curr, rng, ev);
    } catch (const Error& e) {
      ev.outcome = "error";
      ev.error = e.code() + ": " + e.what();
      ev.action.reset();
      out.action.reset();
      pending_.reset();
    }
    if (out.action) prev_.reset();  // wait for two post-action samples
    return out;
  }

  // Scores the pending action against the post-step view.
  void feedback(const EnvView& after, TraceEvent& ev) {
    if (!pending_) return;
    const Sample s = sample(after);
    const Pending p = *pending_;
    const bool disrupted = after.report.disrupted[index_of(node_)];
    const double reward = s.achieved - (disrupted ? config_.disruption_cost : 0.0);
    ev.q_before = q_.at(p.state, p.q_index);
    ev.coefficient = observe(Transition{p.state, p.q_index, reward, encode_state(s.percept, config_.codec)}, s.achieved,
                             s.demanded, after.state.t);
    ev.reward = reward;
    ev.q_after = q_.at(p.state, p.q_index);
    ev.disruption = disrupted;
  }

  // Revises the pending case's L and applies the Q update. Returns L.
  double observe(const Transition& tr, double achieved, double demanded, int now) {
    if (!pending_) throw Error("UnknownPendingAction", "no action awaiting feedback");
    const double L = learning_coefficient(achieved, demanded);
    if (pending_->case_id && kb_.find(*pending_->case_id)) kb_.revise(*pending_->case_id, std::nullopt, L, now);
    q_update(q_, config_.q, tr);
    pending_.reset();
    return L;
  }

 private:
  struct Pending {
    std::size_t state = 0;
    std::size_t q_index = 0;
    std::optional<CaseId> case_id;
  };

  std::optional<Action> decide(const EnvView& view, const Sample& curr, Rng& rng, TraceEvent& ev) {
    const int now = view.state.t;
    const std::size_t s = encode_state(curr.percept, config_.codec);
    const auto hit = kb_.retrieve(curr.percept, now);
    const SimilarityScore m = hit ? hit->score : SimilarityScore{0.0};
    if (hit) ev.similarity = m.m;

    Decision d = classify(m, hit ? reuse_score(*hit, s, curr.demanded, view) : 0.0, config_.thresholds, kb_.full());
    std::optional<Action> reused;
    std::optional<std::size_t> reused_index;
    if (d == Decision::ReuseAction) {
      reused_index = q_index_of(hit->match.action, view);
      bool permitted = reused_index && !view.env.check_action(view.state, hit->match.action);
      if (const auto* ctl = std::get_if<Controlled>(&config_.policy); permitted && ctl)
        permitted = allowed_by(*ctl, Candidate{hit->match.action, *reused_index, switches(hit->match.action, view)},
                               context(view));
      if (permitted)
        reused = hit->match.action;
      else
        d = Decision::RecomputeAction;
    }
    ev.outcome = to_string(d);

    Pending p{s, 0, std::nullopt};
    Action action;
    if (reused) {
      ++reused_;
      action = *reused;
      p.q_index = *reused_index;
      p.case_id = hit->id;
    } else {
      const auto candidates = make_candidates(view, rng);
      const Selection sel = select_action(q_, s, config_.policy, candidates, rng, context(view));
      ++optimizer_calls_;
      ev.optimizer_invoked = true;
      ev.explored = sel.explored;
      action = sel.action;
      p.q_index = sel.q_index;
      if (d == Decision::RecomputeAction) {
        kb_.revise(hit->id, action, std::nullopt, now);
        p.case_id = hit->id;
      } else if (d == Decision::RetainNew) {
        Case c;
        c.percept = curr.percept;
        c.action = action;
        c.coefficient = 0.0;
        c.created = c.last_used = now;
        p.case_id = kb_.retain(std::move(c));
      }
    }
    view.env.validate_action(view.state, action);
    if (switches(action, view)) switch_steps_.push_back(now);
    pending_ = p;
    ev.action = action;
    return action;
  }

  double reuse_score(const Retrieved& hit, std::size_t s, double demanded, const EnvView& view) const {
    if (config_.driver == ReuseDriver::Coefficient) return hit.match.coefficient;
    const auto a = q_index_of(hit.match.action, view);
    if (!a || !q_.explored(s, *a)) return 0.0;
    return learning_coefficient(std::max(*q_.at(s, *a), 0.0), demanded);
  }

  bool switches(const Action& a, const EnvView& view) const {
    const auto* sc = std::get_if<SetChannel>(&a);
    return sc && sc->channel != view.state.channel_of[index_of(node_)];
  }

  // Q column of an action for this node, or nullopt if it is not local.
  std::optional<std::size_t> q_index_of(const Action& a, const EnvView& view) const {
    if (target_node(a) != node_) return std::nullopt;
    if (const auto* sc = std::get_if<SetChannel>(&a)) {
      if (config_.kind != ScenarioKind::ChannelAssignment) return std::nullopt;
      if (sc->channel < 1 || static_cast<std::size_t>(sc->channel) > q_.action_count()) return std::nullopt;
      return static_cast<std::size_t>(sc->channel - 1);
    }
    if (config_.kind != ScenarioKind::LocationOptimization) return std::nullopt;
    const Cell cur = view.state.position_of[index_of(node_)];
    const Cell to = std::get<MoveTo>(a).cell;
    const int dx = to.x - cur.x, dy = to.y - cur.y;
    if (dx < -1 || dx > 1 || dy < -1 || dy > 1) return std::nullopt;
    return static_cast<std::size_t>((dy + 1) * 3 + (dx + 1));
  }

  // Local candidate set in heuristic preference order (used when the state
  // has no explored action yet).
  std::vector<Candidate> make_candidates(const EnvView& view, Rng& rng) const {
    std::vector<Candidate> out;
    const std::size_t i = index_of(node_);
    if (config_.kind == ScenarioKind::ChannelAssignment) {
      const int current = view.state.channel_of[i];
      const int channels = view.env.topology().channel_count;
      std::vector<int> occupancy(static_cast<std::size_t>(channels) + 1, 0);
      for (NodeId nb : view.env.neighbors(node_)) ++occupancy[static_cast<std::size_t>(view.state.channel_of[index_of(nb)])];
      // Least-occupied channel first; the current channel wins a tie, other
      // ties are broken by a random key.
      std::vector<std::pair<std::uint64_t, int>> keyed;
      for (int c = 1; c <= channels; ++c) keyed.emplace_back(c == current ? 0 : 1 + (rng() >> 1), c);
      std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
        const int oa = occupancy[static_cast<std::size_t>(a.second)], ob = occupancy[static_cast<std::size_t>(b.second)];
        return oa != ob ? oa < ob : a.first < b.first;
      });
      for (const auto& [key, c] : keyed)
        out.push_back(Candidate{SetChannel{node_, c}, static_cast<std::size_t>(c - 1), c != current});
      return out;
    }
    const Cell cur = view.state.position_of[i];
    std::vector<std::pair<double, Cell>> scored;
    for (Cell c : neighborhood(view.env.topology(), node_, cur))
      scored.emplace_back(view.env.predicted_node_throughput(view.state, node_, c), c);
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [v, c] : scored)
      out.push_back(Candidate{MoveTo{node_, c}, static_cast<std::size_t>((c.y - cur.y + 1) * 3 + (c.x - cur.x + 1)), false});
    return out;
  }

  SelectionContext context(const EnvView& view) {
    const int now = view.state.t;
    int window = 1;
    if (const auto* c = std::get_if<Controlled>(&config_.policy)) window = c->window;
    while (!switch_steps_.empty() && switch_steps_.front() <= now - window) switch_steps_.pop_front();
    return SelectionContext{view.env.node_demand(view.state, node_), static_cast<int>(switch_steps_.size())};
  }

  NodeId node_;
  AgentConfig config_;
  KnowledgeBase<> kb_;
  QTable q_;
  std::vector<MeasureKey> keys_;
  std::optional<Sample> prev_;
  std::optional<Pending> pending_;
  std::deque<int> switch_steps_;
  long triggered_ = 0;
  long reused_ = 0;
  long optimizer_calls_ = 0;
};

}  // namespace son
