#pragma once

// Capacity-bounded case store: retrieve / reuse / revise / retain over
// (percept, action, learning coefficient) triplets.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "son/action.hpp"
#include "son/reason.hpp"

namespace son {

enum class CaseId : std::uint64_t {};

struct Case {
  CaseId id{};
  PerceptVector percept;
  Action action;
  double coefficient = 0.0;  // L
  int hits = 0;
  int last_used = 0;
  int created = 0;
};

enum class EvictionPolicy { LeastRecentlyUsed, LowestCoefficient };

inline const char* to_string(EvictionPolicy p) {
  return p == EvictionPolicy::LeastRecentlyUsed ? "lru" : "lowest-coefficient";
}

inline EvictionPolicy parse_eviction(const std::string& s) {
  if (s == "lru") return EvictionPolicy::LeastRecentlyUsed;
  if (s == "lowest-coefficient" || s == "lowest-L") return EvictionPolicy::LowestCoefficient;
  throw Error("SpecValidation", "unknown eviction policy '" + s + "'");
}

struct Retrieved {
  CaseId id{};
  Case match;  // copy after the usage update
  SimilarityScore score;
};

inline void check_coefficient(double L) {
  if (!(L >= 0.0 && L <= 1.0)) throw Error("InvalidCoefficient", "learning coefficient outside [0,1]");
}

template <class Similarity = EuclideanSimilarity>
class KnowledgeBase {
 public:
  explicit KnowledgeBase(std::size_t capacity = 256, EvictionPolicy eviction = EvictionPolicy::LeastRecentlyUsed,
                         Similarity sim = {})
      : capacity_(capacity), eviction_(eviction), similarity_(sim) {
    if (capacity_ == 0) throw Error("SpecValidation", "KB capacity must be >= 1");
  }

  std::size_t size() const noexcept { return cases_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return cases_.empty(); }
  bool full() const noexcept { return cases_.size() >= capacity_; }
  EvictionPolicy eviction() const noexcept { return eviction_; }
  const std::vector<Case>& cases() const noexcept { return cases_; }

  const Case* find(CaseId id) const {
    auto it = std::find_if(cases_.begin(), cases_.end(), [id](const Case& c) { return c.id == id; });
    return it == cases_.end() ? nullptr : &*it;
  }

  // Most similar case; ties prefer the most recently used, then the earliest
  // inserted. Marks the returned case as used at step `now`.
  std::optional<Retrieved> retrieve(const PerceptVector& query, int now) {
    if (cases_.empty()) return std::nullopt;
    std::size_t best = 0;
    SimilarityScore best_score = similarity_(query, cases_[0].percept);
    for (std::size_t i = 1; i < cases_.size(); ++i) {
      const SimilarityScore s = similarity_(query, cases_[i].percept);
      if (s.m > best_score.m || (s.m == best_score.m && cases_[i].last_used > cases_[best].last_used)) {
        best = i;
        best_score = s;
      }
    }
    Case& c = cases_[best];
    ++c.hits;
    c.last_used = std::max(c.last_used, now);
    return Retrieved{c.id, c, best_score};
  }

  // Inserts a case. An exact-percept duplicate is revised in place instead;
  // otherwise a full KB evicts one case first.
  CaseId retain(Case c) {
    check_coefficient(c.coefficient);
    if (c.last_used < c.created) c.last_used = c.created;
    auto dup = std::find_if(cases_.begin(), cases_.end(),
                            [&](const Case& stored) { return stored.percept.values == c.percept.values; });
    if (dup != cases_.end()) {
      dup->action = c.action;
      dup->coefficient = c.coefficient;
      dup->last_used = std::max(dup->last_used, c.last_used);
      return dup->id;
    }
    if (full()) evict_one();
    c.id = static_cast<CaseId>(next_id_++);
    c.hits = std::max(c.hits, 0);
    cases_.push_back(std::move(c));
    return cases_.back().id;
  }

  void revise(CaseId id, std::optional<Action> action, std::optional<double> coefficient, int now) {
    if (coefficient) check_coefficient(*coefficient);
    auto it = std::find_if(cases_.begin(), cases_.end(), [id](const Case& c) { return c.id == id; });
    if (it == cases_.end())
      throw Error("UnknownCase", "no case with id " + std::to_string(static_cast<std::uint64_t>(id)));
    if (action) it->action = *action;
    if (coefficient) it->coefficient = *coefficient;
    it->last_used = std::max(it->last_used, now);
  }

  // Restores a snapshot verbatim (ids included).
  void restore(std::vector<Case> cases, std::uint64_t next_id) {
    if (cases.size() > capacity_) throw Error("SnapshotFormat", "snapshot exceeds KB capacity");
    for (const auto& c : cases) check_coefficient(c.coefficient);
    cases_ = std::move(cases);
    next_id_ = next_id;
  }

  std::uint64_t next_id() const noexcept { return next_id_; }

 private:
  void evict_one() {
    auto victim = cases_.begin();
    for (auto it = cases_.begin(); it != cases_.end(); ++it) {
      if (eviction_ == EvictionPolicy::LowestCoefficient) {
        if (it->coefficient < victim->coefficient ||
            (it->coefficient == victim->coefficient && it->last_used < victim->last_used))
          victim = it;
      } else if (it->last_used < victim->last_used) {
        victim = it;
      }
    }
    cases_.erase(victim);
  }

  std::size_t capacity_;
  EvictionPolicy eviction_;
  Similarity similarity_;
  std::vector<Case> cases_;
  std::uint64_t next_id_ = 0;
};

// ---------------------------------------------------------------------------
// Snapshot document: {"schema": "son.kb/1", "capacity", "eviction", "next_id",
// "cases": [{"id", "percept": [...], "node", "t", "action": {...}, "L",
// "hits", "last_used", "created"}]}

inline constexpr const char* kKbSchema = "son.kb/1";

inline nlohmann::ordered_json action_to_json(const Action& a) {
  nlohmann::ordered_json j;
  if (const auto* sc = std::get_if<SetChannel>(&a)) {
    j["kind"] = "set-channel";
    j["node"] = index_of(sc->node);
    j["channel"] = sc->channel;
  } else {
    const auto& mv = std::get<MoveTo>(a);
    j["kind"] = "move-to";
    j["node"] = index_of(mv.node);
    j["cell"] = {mv.cell.x, mv.cell.y};
  }
  return j;
}

inline Action action_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const NodeId node = node_id(j.at("node").get<std::size_t>());
  if (kind == "set-channel") return SetChannel{node, j.at("channel").get<int>()};
  if (kind == "move-to") return MoveTo{node, Cell{j.at("cell").at(0).get<int>(), j.at("cell").at(1).get<int>()}};
  throw Error("SnapshotFormat", "unknown action kind '" + kind + "'");
}

template <class S>
nlohmann::ordered_json export_snapshot(const KnowledgeBase<S>& kb) {
  nlohmann::ordered_json doc;
  doc["schema"] = kKbSchema;
  doc["capacity"] = kb.capacity();
  doc["eviction"] = to_string(kb.eviction());
  doc["next_id"] = kb.next_id();
  auto& list = doc["cases"] = nlohmann::ordered_json::array();
  for (const auto& c : kb.cases()) {
    nlohmann::ordered_json jc;
    jc["id"] = static_cast<std::uint64_t>(c.id);
    jc["percept"] = c.percept.values;
    jc["node"] = index_of(c.percept.node);
    jc["t"] = c.percept.t;
    jc["action"] = action_to_json(c.action);
    jc["L"] = c.coefficient;
    jc["hits"] = c.hits;
    jc["last_used"] = c.last_used;
    jc["created"] = c.created;
    list.push_back(std::move(jc));
  }
  return doc;
}

template <class S = EuclideanSimilarity>
KnowledgeBase<S> import_snapshot(const nlohmann::json& doc) {
  try {
    if (!doc.contains("schema") || doc.at("schema") != kKbSchema)
      throw Error("SnapshotFormat", std::string("expected schema ") + kKbSchema);
    KnowledgeBase<S> kb(doc.at("capacity").get<std::size_t>(), parse_eviction(doc.at("eviction").get<std::string>()));
    std::vector<Case> cases;
    for (const auto& jc : doc.at("cases")) {
      Case c;
      c.id = static_cast<CaseId>(jc.at("id").get<std::uint64_t>());
      c.percept.values = jc.at("percept").get<std::vector<double>>();
      c.percept.node = node_id(jc.value("node", std::size_t{0}));
      c.percept.t = jc.value("t", 0);
      c.action = action_from_json(jc.at("action"));
      c.coefficient = jc.at("L").get<double>();
      c.hits = jc.at("hits").get<int>();
      c.last_used = jc.at("last_used").get<int>();
      c.created = jc.at("created").get<int>();
      cases.push_back(std::move(c));
    }
    kb.restore(std::move(cases), doc.at("next_id").get<std::uint64_t>());
    return kb;
  } catch (const nlohmann::json::exception& e) {
    throw Error("SnapshotFormat", e.what());
  }
}

}  // namespace son
