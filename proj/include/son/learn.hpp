#pragma once

// Tabular Q-learning and the learning coefficient that scores stored cases.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "son/core.hpp"
#include "son/reason.hpp"

namespace son {

struct QParams {
  double alpha = 0.5;  // learning rate, (0,1]; 0 is accepted as a no-op
  double gamma = 0.0;  // discount, [0,1)

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("SpecValidation", "alpha must be in (0,1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("SpecValidation", "gamma must be in [0,1)");
  }
};

// State x action table with explicit unexplored entries. Indices are
// zero-based; text dumps label actions a_1..a_n.
class QTable {
 public:
  QTable() = default;
  QTable(std::size_t state_count, std::size_t action_count)
      : states_(state_count), actions_(action_count), entries_(state_count * action_count) {}

  std::size_t state_count() const noexcept { return states_; }
  std::size_t action_count() const noexcept { return actions_; }

  const std::optional<double>& at(std::size_t s, std::size_t a) const { return entries_[offset(s, a)]; }
  void set(std::size_t s, std::size_t a, std::optional<double> q) {
    if (q && !std::isfinite(*q)) throw Error("NonFinite", "Q value must be finite");
    entries_[offset(s, a)] = q;
  }

  bool explored(std::size_t s, std::size_t a) const { return at(s, a).has_value(); }

  // Max over explored actions of s; 0 when nothing in s is explored.
  double max_value(std::size_t s) const {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < actions_; ++a)
      if (const auto& q = at(s, a)) best = std::max(best, *q);
    return std::isinf(best) ? 0.0 : best;
  }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t offset(std::size_t s, std::size_t a) const {
    if (s >= states_ || a >= actions_)
      throw Error("IndexOutOfRange", "Q index (" + std::to_string(s) + "," + std::to_string(a) + ") out of range");
    return s * actions_ + a;
  }

  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::vector<std::optional<double>> entries_;
};

struct Transition {
  std::size_t s = 0;
  std::size_t a = 0;
  double r = 0.0;
  std::size_t s_next = 0;
};

// Q(s,a) <- Q(s,a) + alpha [r + gamma max_a' Q(s',a') - Q(s,a)].
// Returns the new value; an unexplored (s,a) starts from 0.
inline double q_update(QTable& table, const QParams& params, const Transition& tr) {
  if (!std::isfinite(tr.r)) throw Error("NonFinite", "reward must be finite");
  const double target = tr.r + params.gamma * table.max_value(tr.s_next);
  const double q = table.at(tr.s, tr.a).value_or(0.0);
  const double updated = q + params.alpha * (target - q);
  table.set(tr.s, tr.a, updated);
  return updated;
}

// Highest explored action of s, lowest index on ties.
inline std::size_t greedy(const QTable& table, std::size_t s) {
  std::optional<std::size_t> best;
  for (std::size_t a = 0; a < table.action_count(); ++a) {
    const auto& q = table.at(s, a);
    if (q && (!best || *q > *table.at(s, *best))) best = a;
  }
  if (!best) throw Error("NoExploredAction", "state " + std::to_string(s) + " has no explored action");
  return *best;
}

inline double learning_coefficient(double achieved, double demanded) {
  if (achieved < 0.0 || demanded < 0.0) throw Error("NegativeInput", "throughput must be >= 0");
  if (demanded == 0.0) return 1.0;
  return std::min(achieved / demanded, 1.0);
}

// Uniform per-feature binning combined row-major (first feature most significant).
struct StateCodec {
  std::vector<int> bins;

  std::size_t state_count() const {
    std::size_t n = 1;
    for (int b : bins) n *= static_cast<std::size_t>(b);
    return n;
  }

  void validate(std::size_t dimension) const {
    if (bins.size() != dimension) throw Error("SpecValidation", "state codec needs one bin count per feature");
    for (int b : bins)
      if (b < 1) throw Error("SpecValidation", "bin counts must be >= 1");
  }
};

inline std::size_t encode_state(const PerceptVector& p, const StateCodec& codec) {
  if (p.values.size() != codec.bins.size()) throw Error("DimensionMismatch", "percept does not match state codec");
  std::size_t index = 0;
  for (std::size_t i = 0; i < codec.bins.size(); ++i) {
    const int n = codec.bins[i];
    const double v = std::clamp(p.values[i], 0.0, 1.0);
    const int bin = std::min(static_cast<int>(std::floor(v * n)), n - 1);
    index = index * static_cast<std::size_t>(n) + static_cast<std::size_t>(bin);
  }
  return index;
}

// Rectangular text dump, '-' for unexplored:
//   state<TAB>a_1<TAB>...<TAB>a_n
//   State 1<TAB>-<TAB>10 ...
inline std::string dump_qtable(const QTable& table) {
  std::ostringstream out;
  out << "state";
  for (std::size_t a = 0; a < table.action_count(); ++a) out << "\ta_" << (a + 1);
  out << '\n';
  for (std::size_t s = 0; s < table.state_count(); ++s) {
    out << "State " << (s + 1);
    for (std::size_t a = 0; a < table.action_count(); ++a) {
      const auto& q = table.at(s, a);
      out << '\t' << (q ? format_number(*q) : std::string("-"));
    }
    out << '\n';
  }
  return out.str();
}

inline QTable parse_qtable(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("QTableFormat", "empty Q table");
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    return cells;
  };
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "state") throw Error("QTableFormat", "bad Q table header");
  const std::size_t actions = header.size() - 1;
  std::vector<std::vector<std::optional<double>>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != actions + 1) throw Error("QTableFormat", "ragged Q table row: " + line);
    std::vector<std::optional<double>> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i] == "-") {
        row.emplace_back();
        continue;
      }
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[i], &used);
        if (used != cells[i].size()) throw std::invalid_argument(cells[i]);
        row.emplace_back(v);
      } catch (const std::exception&) {
        throw Error("QTableFormat", "bad Q value '" + cells[i] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  QTable table(rows.size(), actions);
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (std::size_t a = 0; a < actions; ++a) table.set(s, a, rows[s][a]);
  return table;
}

}  // namespace son
