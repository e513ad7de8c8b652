#pragma once

#include <string>
#include <variant>

#include "son/core.hpp"

namespace son {

// Reconfigure the operating frequency of a node (channels are 1-based).
struct SetChannel {
  NodeId node{};
  int channel = 1;

  friend bool operator==(const SetChannel&, const SetChannel&) = default;
};

// Relocate a node to a grid cell.
struct MoveTo {
  NodeId node{};
  Cell cell{};

  friend bool operator==(const MoveTo&, const MoveTo&) = default;
};

using Action = std::variant<SetChannel, MoveTo>;

inline NodeId target_node(const Action& a) {
  return std::visit([](const auto& v) { return v.node; }, a);
}

inline std::string to_string(const Action& a) {
  struct Printer {
    std::string operator()(const SetChannel& s) const {
      return "SetChannel(" + std::to_string(index_of(s.node)) + "," + std::to_string(s.channel) + ")";
    }
    std::string operator()(const MoveTo& m) const {
      return "MoveTo(" + std::to_string(index_of(m.node)) + "," + std::to_string(m.cell.x) + "," +
             std::to_string(m.cell.y) + ")";
    }
  };
  return std::visit(Printer{}, a);
}

}  // namespace son
