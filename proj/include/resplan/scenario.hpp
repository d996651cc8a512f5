#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "resplan/case_study_data.hpp"
#include "resplan/error.hpp"
#include "resplan/fmdp.hpp"
#include "resplan/network.hpp"
#include "resplan/rng.hpp"

namespace resplan {

/// State-relevance weights of the ALP objective.
enum class AlphaSpec { uniform, all_ones };

inline std::string_view to_string(AlphaSpec a) {
  return a == AlphaSpec::uniform ? "uniform" : "all_ones";
}

inline AlphaSpec parse_alpha(std::string_view text) {
  if (text == "uniform") {
    return AlphaSpec::uniform;
  }
  if (text == "all_ones" || text == "all-ones") {
    return AlphaSpec::all_ones;
  }
  throw ParseError("field 'alpha': expected \"uniform\" or \"all_ones\", got \"" +
                   std::string(text) + "\"");
}

struct CptOverride {
  int node = 0;
  std::vector<double> table;
};

/// Planning problem as read from a scenario document. Reward and CPT entries
/// hold only the explicit overrides; make_model() fills in the defaults.
struct Scenario {
  std::string name;
  std::vector<std::string> notes;
  Network network;
  double gamma = 0.9;
  double p0 = 0.01;
  double pc = 0.3;
  std::pair<double, double> default_cost{0.0, 1.0};
  std::map<int, std::pair<double, double>> cost_overrides;
  std::vector<RewardFactor> reward_factors;
  std::vector<CptOverride> cpts;
  AlphaSpec alpha = AlphaSpec::uniform;
  std::vector<int> controllable;

  [[nodiscard]] std::pair<double, double> cost_of(int i) const {
    auto it = cost_overrides.find(i);
    return it == cost_overrides.end() ? default_cost : it->second;
  }
};

/// Builds the factored MDP described by `s`. Nodes without an explicit reward
/// factor earn base_reward * x_i; nodes without an explicit CPT use the
/// parametric family with the scenario's p0 and pc.
inline FactoredModel make_model(const Scenario& s) {
  const Network& net = s.network;
  const int n = net.size();
  std::vector<LocalCpt> cpts;
  std::vector<RewardFactor> rewards;
  std::vector<CostFunction> costs;
  cpts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cpts.push_back(parametric_cpt(net, i, s.p0, s.pc));
    rewards.push_back(own_state_reward(i, net.nodes[static_cast<std::size_t>(i)].base_reward));
    const auto [c0, c1] = s.cost_of(i);
    costs.push_back(CostFunction{i, c0, c1});
  }
  for (const CptOverride& o : s.cpts) {
    cpts[static_cast<std::size_t>(o.node)] = explicit_cpt(net, o.node, o.table);
  }
  for (const RewardFactor& r : s.reward_factors) {
    rewards[static_cast<std::size_t>(r.node)] = r;
  }
  std::vector<bool> controllable(static_cast<std::size_t>(n), false);
  for (int id : s.controllable) {
    controllable[static_cast<std::size_t>(id)] = true;
  }
  return FactoredModel::create(net, std::move(cpts), std::move(rewards), std::move(costs), s.gamma,
                               std::move(controllable));
}

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError("missing field '" + where + key + "'");
  }
  return *it;
}

inline double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) {
    throw ParseError("field '" + field + "' must be a number");
  }
  return v.get<double>();
}

inline int as_id(const json& v, const std::string& field) {
  if (!v.is_number_integer()) {
    throw ParseError("field '" + field + "' must be an integer node id");
  }
  return v.get<int>();
}

inline std::string as_text(const json& v, const std::string& field) {
  if (!v.is_string()) {
    throw ParseError("field '" + field + "' must be a string");
  }
  return v.get<std::string>();
}

inline std::vector<double> as_numbers(const json& v, const std::string& field) {
  if (!v.is_array()) {
    throw ParseError("field '" + field + "' must be an array of numbers");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.push_back(as_number(v[k], field + "[" + std::to_string(k) + "]"));
  }
  return out;
}

inline std::pair<double, double> as_cost(const json& v, const std::string& field) {
  auto c = as_numbers(v, field);
  if (c.size() != 2) {
    throw ParseError("field '" + field + "' must be a pair [c0, c1]");
  }
  return {c[0], c[1]};
}

inline void check_cost(std::pair<double, double> c, const std::string& field) {
  if (!(c.first >= 0.0) || !(c.second >= c.first) || !std::isfinite(c.second)) {
    throw RangeError("field '" + field + "': costs must satisfy c1 >= c0 >= 0");
  }
}

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                           const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ParseError("unknown field '" + where + it.key() + "'");
    }
  }
}

} // namespace detail

/// Parses and validates a scenario document (JSON). Key order is irrelevant
/// and nodes may be listed in any order.
inline Scenario scenario_from_json(const nlohmann::json& doc) {
  using detail::json;
  if (!doc.is_object()) {
    throw ParseError("scenario document must be a JSON object");
  }
  detail::reject_unknown(doc,
                         {"name", "notes", "nodes", "edges", "gamma", "p0", "pc", "costs", "alpha",
                          "controllable", "reward_factors", "cpts"},
                         "");
  Scenario s;
  if (auto it = doc.find("name"); it != doc.end()) {
    s.name = detail::as_text(*it, "name");
  }
  if (auto it = doc.find("notes"); it != doc.end()) {
    if (it->is_string()) {
      s.notes.push_back(it->get<std::string>());
    } else if (it->is_array()) {
      for (const auto& line : *it) {
        s.notes.push_back(detail::as_text(line, "notes"));
      }
    } else {
      throw ParseError("field 'notes' must be a string or an array of strings");
    }
  }

  const json& nodes = detail::require(doc, "nodes", "");
  if (!nodes.is_array()) {
    throw ParseError("field 'nodes' must be an array");
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::string where = "nodes[" + std::to_string(k) + "].";
    const json& item = nodes[k];
    if (!item.is_object()) {
      throw ParseError("field 'nodes[" + std::to_string(k) + "]' must be an object");
    }
    detail::reject_unknown(item, {"id", "name", "layer", "base_reward", "location"}, where);
    Node node;
    node.id = detail::as_id(detail::require(item, "id", where), where + "id");
    if (auto it = item.find("name"); it != item.end()) {
      node.name = detail::as_text(*it, where + "name");
    }
    if (auto it = item.find("layer"); it != item.end()) {
      node.layer = parse_layer(detail::as_text(*it, where + "layer"));
    }
    if (auto it = item.find("base_reward"); it != item.end()) {
      node.base_reward = detail::as_number(*it, where + "base_reward");
    }
    if (auto it = item.find("location"); it != item.end()) {
      node.location = detail::as_text(*it, where + "location");
    }
    s.network.nodes.push_back(std::move(node));
  }
  std::stable_sort(s.network.nodes.begin(), s.network.nodes.end(),
                   [](const Node& a, const Node& b) { return a.id < b.id; });

  if (auto it = doc.find("edges"); it != doc.end()) {
    if (!it->is_array()) {
      throw ParseError("field 'edges' must be an array of [src, dst] pairs");
    }
    for (std::size_t k = 0; k < it->size(); ++k) {
      const json& e = (*it)[k];
      const std::string where = "edges[" + std::to_string(k) + "]";
      if (!e.is_array() || e.size() != 2) {
        throw ParseError("field '" + where + "' must be a [src, dst] pair");
      }
      s.network.edges.push_back(Edge{detail::as_id(e[0], where), detail::as_id(e[1], where)});
    }
  }
  if (auto report = validate(s.network); !report.empty()) {
    std::string msg = report.front();
    for (std::size_t k = 1; k < report.size(); ++k) {
      msg += "; " + report[k];
    }
    throw ValidationError(msg);
  }
  const int n = s.network.size();

  s.gamma = detail::as_number(detail::require(doc, "gamma", ""), "gamma");
  if (!(s.gamma > 0.0 && s.gamma < 1.0)) {
    throw RangeError("field 'gamma' must lie in (0,1), got " + std::to_string(s.gamma));
  }
  if (auto it = doc.find("p0"); it != doc.end()) {
    s.p0 = detail::as_number(*it, "p0");
  }
  if (auto it = doc.find("pc"); it != doc.end()) {
    s.pc = detail::as_number(*it, "pc");
  }
  for (auto [value, field] : {std::pair{s.p0, "p0"}, std::pair{s.pc, "pc"}}) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw RangeError(std::string("field '") + field + "' must lie in [0,1]");
    }
  }

  if (auto it = doc.find("costs"); it != doc.end()) {
    if (!it->is_object()) {
      throw ParseError("field 'costs' must be an object of [c0, c1] pairs");
    }
    for (auto c = it->begin(); c != it->end(); ++c) {
      const std::string field = "costs." + c.key();
      auto pair = detail::as_cost(c.value(), field);
      detail::check_cost(pair, field);
      if (c.key() == "default") {
        s.default_cost = pair;
        continue;
      }
      int id = -1;
      try {
        std::size_t used = 0;
        id = std::stoi(c.key(), &used);
        if (used != c.key().size()) {
          id = -1;
        }
      } catch (const std::exception&) {
        id = -1;
      }
      if (id < 0) {
        throw ParseError("field '" + field + "': key must be a node id or \"default\"");
      }
      if (id >= n) {
        throw ValidationError("unknown node id " + std::to_string(id) + " in costs");
      }
      s.cost_overrides[id] = pair;
    }
  }

  if (auto it = doc.find("alpha"); it != doc.end()) {
    s.alpha = parse_alpha(detail::as_text(*it, "alpha"));
  }

  auto ctrl = doc.find("controllable");
  if (ctrl == doc.end() || (ctrl->is_string() && ctrl->get<std::string>() == "all")) {
    s.controllable.resize(static_cast<std::size_t>(n));
    std::iota(s.controllable.begin(), s.controllable.end(), 0);
  } else if (ctrl->is_array()) {
    std::set<int> ids;
    for (std::size_t k = 0; k < ctrl->size(); ++k) {
      const int id = detail::as_id((*ctrl)[k], "controllable[" + std::to_string(k) + "]");
      if (id < 0 || id >= n) {
        throw ValidationError("unknown node id " + std::to_string(id) + " in controllable");
      }
      ids.insert(id);
    }
    s.controllable.assign(ids.begin(), ids.end());
  } else {
    throw ParseError("field 'controllable' must be \"all\" or an array of node ids");
  }

  std::set<int> seen_rewards;
  if (auto it = doc.find("reward_factors"); it != doc.end()) {
    if (!it->is_array()) {
      throw ParseError("field 'reward_factors' must be an array");
    }
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string where = "reward_factors[" + std::to_string(k) + "].";
      const json& item = (*it)[k];
      if (!item.is_object()) {
        throw ParseError("field 'reward_factors[" + std::to_string(k) + "]' must be an object");
      }
      detail::reject_unknown(item, {"node", "scope", "table"}, where);
      RewardFactor r;
      r.node = detail::as_id(detail::require(item, "node", where), where + "node");
      if (r.node < 0 || r.node >= n) {
        throw ValidationError("unknown node id " + std::to_string(r.node) + " in reward_factors");
      }
      if (!seen_rewards.insert(r.node).second) {
        throw ValidationError("duplicate reward factor for node " + std::to_string(r.node));
      }
      const json& scope = detail::require(item, "scope", where);
      if (!scope.is_array()) {
        throw ParseError("field '" + where + "scope' must be an array of node ids");
      }
      for (const auto& v : scope) {
        const int id = detail::as_id(v, where + "scope");
        if (id < 0 || id >= n) {
          throw ValidationError("unknown node id " + std::to_string(id) + " in " + where + "scope");
        }
        r.scope.push_back(id);
      }
      if (!std::is_sorted(r.scope.begin(), r.scope.end()) ||
          std::adjacent_find(r.scope.begin(), r.scope.end()) != r.scope.end()) {
        throw ValidationError("field '" + where + "scope' must be strictly ascending");
      }
      r.table = detail::as_numbers(detail::require(item, "table", where), where + "table");
      if (r.table.size() != (std::size_t{1} << r.scope.size())) {
        throw ValidationError("field '" + where + "table' needs " +
                              std::to_string(std::size_t{1} << r.scope.size()) + " entries");
      }
      s.reward_factors.push_back(std::move(r));
    }
    std::sort(s.reward_factors.begin(), s.reward_factors.end(),
              [](const RewardFactor& a, const RewardFactor& b) { return a.node < b.node; });
  }

  if (auto it = doc.find("cpts"); it != doc.end()) {
    if (!it->is_array()) {
      throw ParseError("field 'cpts' must be an array");
    }
    std::set<int> seen;
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string where = "cpts[" + std::to_string(k) + "].";
      const json& item = (*it)[k];
      if (!item.is_object()) {
        throw ParseError("field 'cpts[" + std::to_string(k) + "]' must be an object");
      }
      detail::reject_unknown(item, {"node", "table"}, where);
      CptOverride o;
      o.node = detail::as_id(detail::require(item, "node", where), where + "node");
      if (o.node < 0 || o.node >= n) {
        throw ValidationError("unknown node id " + std::to_string(o.node) + " in cpts");
      }
      if (!seen.insert(o.node).second) {
        throw ValidationError("duplicate CPT for node " + std::to_string(o.node));
      }
      o.table = detail::as_numbers(detail::require(item, "table", where), where + "table");
      s.cpts.push_back(std::move(o));
    }
    std::sort(s.cpts.begin(), s.cpts.end(),
              [](const CptOverride& a, const CptOverride& b) { return a.node < b.node; });
  }

  // Remaining table-level checks (sizes, probability ranges) live in the model.
  (void)make_model(s);
  return s;
}

inline Scenario load_scenario(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document.begin(), document.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

inline nlohmann::json to_json(const Scenario& s) {
  using nlohmann::json;
  json doc = json::object();
  if (!s.name.empty()) {
    doc["name"] = s.name;
  }
  if (!s.notes.empty()) {
    doc["notes"] = s.notes;
  }
  json nodes = json::array();
  for (const Node& node : s.network.nodes) {
    json item = {{"id", node.id},
                 {"name", node.name},
                 {"layer", std::string(to_string(node.layer))},
                 {"base_reward", node.base_reward}};
    if (!node.location.empty()) {
      item["location"] = node.location;
    }
    nodes.push_back(std::move(item));
  }
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const Edge& e : s.network.edges) {
    edges.push_back(json::array({e.src, e.dst}));
  }
  doc["edges"] = std::move(edges);
  doc["gamma"] = s.gamma;
  doc["p0"] = s.p0;
  doc["pc"] = s.pc;
  json costs = json::object();
  costs["default"] = json::array({s.default_cost.first, s.default_cost.second});
  for (const auto& [id, c] : s.cost_overrides) {
    costs[std::to_string(id)] = json::array({c.first, c.second});
  }
  doc["costs"] = std::move(costs);
  doc["alpha"] = std::string(to_string(s.alpha));
  if (static_cast<int>(s.controllable.size()) == s.network.size()) {
    doc["controllable"] = "all";
  } else {
    doc["controllable"] = s.controllable;
  }
  if (!s.reward_factors.empty()) {
    json rf = json::array();
    for (const RewardFactor& r : s.reward_factors) {
      rf.push_back({{"node", r.node}, {"scope", r.scope}, {"table", r.table}});
    }
    doc["reward_factors"] = std::move(rf);
  }
  if (!s.cpts.empty()) {
    json cpts = json::array();
    for (const CptOverride& o : s.cpts) {
      cpts.push_back({{"node", o.node}, {"table", o.table}});
    }
    doc["cpts"] = std::move(cpts);
  }
  return doc;
}

/// FNV-1a over the canonical JSON serialization, as 16 hex digits.
inline std::string scenario_hash(const Scenario& s) {
  const std::string text = to_json(s).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// The bundled twenty-node microgrid/subway case study.
inline Scenario builtin_case_study() { return load_scenario(kCaseStudyJson); }

/// Coupling partners are shuffled within blocks of this many ring positions.
inline constexpr int kDemoMatchingWindow = 4;

/// Randomly coupled two-layer network of `scale` nodes: two bidirectional rings
/// of scale/2 nodes (grid and transit) joined in both directions by a perfect
/// matching that is random within blocks of kDemoMatchingWindow positions.
/// Rewards are random and normalized to sum to 100.
inline Scenario demo_scenario(int scale, std::uint64_t seed) {
  if (scale < 6 || scale % 2 != 0) {
    throw RangeError("demo scale must be an even number >= 6");
  }
  const int half = scale / 2;
  Rng rng(splitmix64(seed ^ 0x64656d6fULL));
  Scenario s;
  s.name = "two-layer-demo-" + std::to_string(scale);
  s.notes.push_back("Generated two-layer coupled ring network, seed " + std::to_string(seed) + ".");
  std::vector<double> raw(static_cast<std::size_t>(scale));
  for (double& r : raw) {
    r = 0.5 + rng.uniform();
  }
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  for (int i = 0; i < scale; ++i) {
    Node node;
    node.id = i;
    node.layer = i < half ? Layer::power : Layer::subway;
    node.name = (i < half ? "grid-" : "transit-") + std::to_string(i < half ? i : i - half);
    node.base_reward = 100.0 * raw[static_cast<std::size_t>(i)] / total;
    s.network.nodes.push_back(std::move(node));
  }
  auto link = [&](int a, int b) {
    s.network.edges.push_back(Edge{a, b});
    s.network.edges.push_back(Edge{b, a});
  };
  for (int layer = 0; layer < 2; ++layer) {
    const int base = layer * half;
    for (int k = 0; k < half; ++k) {
      link(base + k, base + (k + 1) % half);
    }
  }
  // Couplings are a random matching shuffled within short windows along the
  // rings; a fully random matching would make the elimination width explode.
  std::vector<int> match(static_cast<std::size_t>(half));
  std::iota(match.begin(), match.end(), half);
  for (int start = 0; start < half; start += kDemoMatchingWindow) {
    const int len = std::min(kDemoMatchingWindow, half - start);
    for (int k = len - 1; k > 0; --k) {
      const auto j = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(k) + 1));
      std::swap(match[static_cast<std::size_t>(start + k)],
                match[static_cast<std::size_t>(start) + j]);
    }
  }
  for (int k = 0; k < half; ++k) {
    link(k, match[static_cast<std::size_t>(k)]);
  }
  s.gamma = 0.9;
  s.p0 = 0.01;
  s.pc = 0.3;
  s.controllable.resize(static_cast<std::size_t>(scale));
  std::iota(s.controllable.begin(), s.controllable.end(), 0);
  return s;
}

} // namespace resplan
