#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "resplan/bits.hpp"
#include "resplan/error.hpp"

namespace resplan {

enum class Layer { power, subway, generic };

inline std::string_view to_string(Layer layer) {
  switch (layer) {
  case Layer::power:
    return "power";
  case Layer::subway:
    return "subway";
  case Layer::generic:
    return "generic";
  }
  return "generic";
}

inline Layer parse_layer(std::string_view text) {
  if (text == "power") {
    return Layer::power;
  }
  if (text == "subway") {
    return Layer::subway;
  }
  if (text == "generic") {
    return Layer::generic;
  }
  throw ParseError("field 'layer': unknown layer '" + std::string(text) + "'");
}

struct Node {
  int id = 0;
  std::string name;
  Layer layer = Layer::generic;
  /// Economic value per step while the node delivers service.
  double base_reward = 0.0;
  /// Optional site label shared by co-located nodes of different layers.
  std::string location;
};

/// Directed dependency: the state of `src` influences the transition of `dst`.
struct Edge {
  int src = 0;
  int dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Aggregated interdependency graph. A plain value; use validate() before
/// trusting it.
struct Network {
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  [[nodiscard]] int size() const noexcept { return static_cast<int>(nodes.size()); }
};

/// Every invariant violation found in `net`; empty iff well-formed.
inline std::vector<std::string> validate(const Network& net) {
  std::vector<std::string> report;
  const int n = net.size();
  for (int k = 0; k < n; ++k) {
    const Node& node = net.nodes[static_cast<std::size_t>(k)];
    if (node.id != k) {
      report.push_back("node at position " + std::to_string(k) + " has id " +
                       std::to_string(node.id) + " (ids must be dense 0..n-1 in order)");
    }
    if (!(node.base_reward >= 0.0)) {
      report.push_back("negative base_reward at node " + std::to_string(k));
    }
  }
  std::set<Edge> seen;
  for (const Edge& e : net.edges) {
    bool dangling = false;
    for (int end : {e.src, e.dst}) {
      if (end < 0 || end >= n) {
        report.push_back("unknown node id " + std::to_string(end));
        dangling = true;
      }
    }
    if (dangling) {
      continue;
    }
    if (e.src == e.dst) {
      report.push_back("self-loop at node " + std::to_string(e.src));
      continue;
    }
    if (!seen.insert(e).second) {
      report.push_back("duplicate edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                       ")");
    }
  }
  return report;
}

/// Parents of node i, sorted ascending.
inline std::vector<int> parents(const Network& net, int i) {
  if (i < 0 || i >= net.size()) {
    throw ContractError("node index " + std::to_string(i) + " out of range");
  }
  std::vector<int> out;
  for (const Edge& e : net.edges) {
    if (e.dst == i && e.src != i) {
      out.push_back(e.src);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Closed neighborhood {i} ∪ parents(i), sorted ascending. This is the
/// canonical scope order used by every factor table.
inline std::vector<int> neighborhood(const Network& net, int i) {
  std::vector<int> scope = parents(net, i);
  scope.insert(std::lower_bound(scope.begin(), scope.end(), i), i);
  return scope;
}

/// Percentage of edges whose endpoints are both working; 100 for an edgeless graph.
inline double connectivity_metric(const Network& net, const SystemState& x) {
  if (x.size() != net.nodes.size()) {
    throw ContractError("state length does not match node count");
  }
  if (net.edges.empty()) {
    return 100.0;
  }
  std::size_t alive = 0;
  for (const Edge& e : net.edges) {
    if (x[static_cast<std::size_t>(e.src)] && x[static_cast<std::size_t>(e.dst)]) {
      ++alive;
    }
  }
  return 100.0 * static_cast<double>(alive) / static_cast<double>(net.edges.size());
}

} // namespace resplan
