#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "resplan/bits.hpp"
#include "resplan/error.hpp"
#include "resplan/network.hpp"

namespace resplan {

/// Index of an assignment to a scope: bit k holds the value of scope[k], so the
/// lowest node id is the fastest-varying bit.
using ScopeIndex = std::uint32_t;

/// Largest scope (node plus parents) a factor table may have.
inline constexpr std::size_t kMaxScope = 24;

template <typename Tag>
ScopeIndex restrict_to_scope(const BinaryVector<Tag>& v, std::span<const int> scope) {
  ScopeIndex idx = 0;
  for (std::size_t k = 0; k < scope.size(); ++k) {
    if (v[static_cast<std::size_t>(scope[k])]) {
      idx |= ScopeIndex{1} << k;
    }
  }
  return idx;
}

enum class CptKind { parametric, explicit_table };

/// P(X_i' = 1 | x over the closed neighborhood, a_i).
///
/// Parametric form: a repair always succeeds, a failed node stays failed
/// without repair, and a working node survives with (1-p0)(1-pc)^f where f is
/// the number of failed parents. Explicit form: `table` has 2^(|scope|+1)
/// entries indexed by scope_index + (a_i << |scope|).
struct LocalCpt {
  int node = 0;
  std::vector<int> scope;
  CptKind kind = CptKind::parametric;
  double p0 = 0.0;
  double pc = 0.0;
  std::vector<double> table;

  [[nodiscard]] int self_position() const {
    for (std::size_t k = 0; k < scope.size(); ++k) {
      if (scope[k] == node) {
        return static_cast<int>(k);
      }
    }
    return -1;
  }

  [[nodiscard]] double prob_up(ScopeIndex idx, bool a) const {
    if (kind == CptKind::explicit_table) {
      return table[idx + (a ? (ScopeIndex{1} << scope.size()) : 0U)];
    }
    if (a) {
      return 1.0;
    }
    const int self = self_position();
    if (((idx >> self) & 1U) == 0U) {
      return 0.0;
    }
    const int working = std::popcount(idx);
    const int failed_parents = static_cast<int>(scope.size()) - working;
    return (1.0 - p0) * std::pow(1.0 - pc, failed_parents);
  }
};

/// Nonnegative local reward r_i over a subset of the closed neighborhood.
struct RewardFactor {
  int node = 0;
  std::vector<int> scope;
  std::vector<double> table;

  [[nodiscard]] double value(const SystemState& x) const {
    return table[restrict_to_scope(x, scope)];
  }
};

struct CostFunction {
  int node = 0;
  double c0 = 0.0;
  double c1 = 1.0;

  [[nodiscard]] double operator()(bool a) const noexcept { return a ? c1 : c0; }
  [[nodiscard]] double gap() const noexcept { return c1 - c0; }
};

/// Full factored MDP. Construct through FactoredModel::create, which checks
/// every structural invariant; afterwards the object is immutable by convention.
struct FactoredModel {
  Network network;
  std::vector<std::vector<int>> scopes;
  std::vector<LocalCpt> cpts;
  std::vector<RewardFactor> rewards;
  std::vector<CostFunction> costs;
  double gamma = 0.9;
  std::vector<bool> controllable;

  [[nodiscard]] int n() const noexcept { return network.size(); }
  [[nodiscard]] bool is_controllable(int i) const {
    return controllable[static_cast<std::size_t>(i)];
  }
  [[nodiscard]] std::vector<int> controllable_ids() const {
    std::vector<int> ids;
    for (int i = 0; i < n(); ++i) {
      if (is_controllable(i)) {
        ids.push_back(i);
      }
    }
    return ids;
  }
  [[nodiscard]] const LocalCpt& cpt(int i) const { return cpts[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const CostFunction& cost(int i) const { return costs[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const std::vector<int>& scope(int i) const {
    return scopes[static_cast<std::size_t>(i)];
  }

  static FactoredModel create(Network network, std::vector<LocalCpt> cpts,
                              std::vector<RewardFactor> rewards, std::vector<CostFunction> costs,
                              double gamma, std::vector<bool> controllable);
};

/// Parametric CPT of node i in `net`.
inline LocalCpt parametric_cpt(const Network& net, int i, double p0, double pc) {
  LocalCpt cpt;
  cpt.node = i;
  cpt.scope = neighborhood(net, i);
  cpt.kind = CptKind::parametric;
  cpt.p0 = p0;
  cpt.pc = pc;
  return cpt;
}

inline LocalCpt explicit_cpt(const Network& net, int i, std::vector<double> table) {
  LocalCpt cpt;
  cpt.node = i;
  cpt.scope = neighborhood(net, i);
  cpt.kind = CptKind::explicit_table;
  cpt.table = std::move(table);
  return cpt;
}

/// r_i(x) = reward * x_i.
inline RewardFactor own_state_reward(int i, double reward) {
  return RewardFactor{i, {i}, {0.0, reward}};
}

inline FactoredModel FactoredModel::create(Network network, std::vector<LocalCpt> cpts,
                                           std::vector<RewardFactor> rewards,
                                           std::vector<CostFunction> costs, double gamma,
                                           std::vector<bool> controllable) {
  if (auto report = validate(network); !report.empty()) {
    throw ValidationError(report.front());
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw RangeError("gamma must lie in (0,1), got " + std::to_string(gamma));
  }
  const std::size_t n = network.nodes.size();
  if (cpts.size() != n || rewards.size() != n || costs.size() != n || controllable.size() != n) {
    throw ValidationError("every node needs exactly one CPT, reward factor and cost function");
  }
  FactoredModel m;
  m.scopes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int id = static_cast<int>(i);
    m.scopes.push_back(neighborhood(network, id));
    const auto& scope = m.scopes.back();
    if (scope.size() > kMaxScope) {
      throw SizeError("neighborhood of node " + std::to_string(id) + " exceeds " +
                      std::to_string(kMaxScope) + " nodes");
    }
    LocalCpt& cpt = cpts[i];
    if (cpt.node != id || cpt.scope != scope) {
      throw ValidationError("CPT of node " + std::to_string(id) +
                            " must be indexed by the node's neighborhood");
    }
    if (cpt.kind == CptKind::parametric) {
      if (!(cpt.p0 >= 0.0 && cpt.p0 <= 1.0) || !(cpt.pc >= 0.0 && cpt.pc <= 1.0)) {
        throw RangeError("p0 and pc must lie in [0,1] (node " + std::to_string(id) + ")");
      }
    } else {
      if (cpt.table.size() != (std::size_t{1} << (scope.size() + 1))) {
        throw ValidationError("explicit CPT of node " + std::to_string(id) + " needs " +
                              std::to_string(std::size_t{1} << (scope.size() + 1)) + " entries");
      }
      for (double p : cpt.table) {
        if (!(p >= 0.0 && p <= 1.0)) {
          throw RangeError("CPT probability outside [0,1] at node " + std::to_string(id));
        }
      }
    }
    const RewardFactor& r = rewards[i];
    if (r.node != id) {
      throw ValidationError("reward factors must be listed in node order");
    }
    if (r.table.size() != (std::size_t{1} << r.scope.size())) {
      throw ValidationError("reward table of node " + std::to_string(id) + " needs " +
                            std::to_string(std::size_t{1} << r.scope.size()) + " entries");
    }
    for (std::size_t k = 0; k < r.scope.size(); ++k) {
      if (r.scope[k] < 0 || r.scope[k] >= static_cast<int>(n) ||
          (k > 0 && r.scope[k] <= r.scope[k - 1])) {
        throw ValidationError("reward scope of node " + std::to_string(id) +
                              " must be strictly ascending valid ids");
      }
    }
    for (double v : r.table) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw RangeError("reward values must be finite and nonnegative (node " +
                         std::to_string(id) + ")");
      }
    }
    const CostFunction& c = costs[i];
    if (c.node != id || !(c.c0 >= 0.0) || !(c.c1 >= c.c0) || !std::isfinite(c.c1)) {
      throw RangeError("cost of node " + std::to_string(id) + " must satisfy c1 >= c0 >= 0");
    }
  }
  m.network = std::move(network);
  m.cpts = std::move(cpts);
  m.rewards = std::move(rewards);
  m.costs = std::move(costs);
  m.gamma = gamma;
  m.controllable = std::move(controllable);
  return m;
}

namespace detail {

inline void check_node(const FactoredModel& model, int i) {
  if (i < 0 || i >= model.n()) {
    throw ContractError("node index " + std::to_string(i) + " out of range");
  }
}

inline ScopeIndex scope_bits_to_index(const FactoredModel& model, int i,
                                      std::span<const std::uint8_t> scope_bits) {
  check_node(model, i);
  if (scope_bits.size() != model.scope(i).size()) {
    throw ContractError("assignment covers " + std::to_string(scope_bits.size()) +
                        " variables but the neighborhood of node " + std::to_string(i) + " has " +
                        std::to_string(model.scope(i).size()));
  }
  ScopeIndex idx = 0;
  for (std::size_t k = 0; k < scope_bits.size(); ++k) {
    if (scope_bits[k] > 1) {
      throw ContractError("scope assignment entries must be 0 or 1");
    }
    idx |= static_cast<ScopeIndex>(scope_bits[k]) << k;
  }
  return idx;
}

inline void check_dims(const FactoredModel& model, std::size_t len, const char* what) {
  if (len != static_cast<std::size_t>(model.n())) {
    throw ContractError(std::string(what) + " has length " + std::to_string(len) + ", expected " +
                        std::to_string(model.n()));
  }
}

} // namespace detail

/// P(X_i' = 1 | x_scope, a_i) with the scope assignment given as a table index.
inline double local_transition(const FactoredModel& model, int i, ScopeIndex x_scope, bool a_i) {
  detail::check_node(model, i);
  if (x_scope >= (ScopeIndex{1} << model.scope(i).size())) {
    throw ContractError("scope index out of range for node " + std::to_string(i));
  }
  return model.cpt(i).prob_up(x_scope, a_i);
}

/// P(X_i' = 1 | x_scope, a_i) with the scope assignment spelled out in
/// canonical scope order.
inline double local_transition(const FactoredModel& model, int i,
                               std::span<const std::uint8_t> x_scope, bool a_i) {
  return model.cpt(i).prob_up(detail::scope_bits_to_index(model, i, x_scope), a_i);
}

inline double local_transition(const FactoredModel& model, int i, const SystemState& x, bool a_i) {
  detail::check_dims(model, x.size(), "state");
  detail::check_node(model, i);
  return model.cpt(i).prob_up(restrict_to_scope(x, model.scope(i)), a_i);
}

/// Expected next-step value of the indicator basis h_i(x) = x_i. With
/// per-node action dependence and indicator bases this collapses to the local
/// transition probability.
inline double g_value(const FactoredModel& model, int i, ScopeIndex x_scope, bool a_i) {
  return local_transition(model, i, x_scope, a_i);
}

inline double g_value(const FactoredModel& model, int i, std::span<const std::uint8_t> x_scope,
                      bool a_i) {
  return local_transition(model, i, x_scope, a_i);
}

inline double g_value(const FactoredModel& model, int i, const SystemState& x, bool a_i) {
  return local_transition(model, i, x, a_i);
}

/// Sum of local rewards over factor scopes minus the per-node action costs.
inline double reward(const FactoredModel& model, const SystemState& x, const ActionVector& a) {
  detail::check_dims(model, x.size(), "state");
  detail::check_dims(model, a.size(), "action");
  double total = 0.0;
  for (const RewardFactor& r : model.rewards) {
    total += r.value(x);
  }
  for (int i = 0; i < model.n(); ++i) {
    total -= model.cost(i)(a[static_cast<std::size_t>(i)]);
  }
  return total;
}

/// Reward part only (no action costs).
inline double state_reward(const FactoredModel& model, const SystemState& x) {
  detail::check_dims(model, x.size(), "state");
  double total = 0.0;
  for (const RewardFactor& r : model.rewards) {
    total += r.value(x);
  }
  return total;
}

inline constexpr int kJointTransitionGuard = 20;

/// Product of local transition probabilities.
inline double joint_transition(const FactoredModel& model, const SystemState& x,
                               const ActionVector& a, const SystemState& x_next,
                               int guard = kJointTransitionGuard) {
  detail::check_dims(model, x.size(), "state");
  detail::check_dims(model, a.size(), "action");
  detail::check_dims(model, x_next.size(), "next state");
  if (model.n() > guard) {
    throw SizeError("joint_transition refused: n = " + std::to_string(model.n()) +
                    " exceeds guard " + std::to_string(guard));
  }
  double p = 1.0;
  for (int i = 0; i < model.n(); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double up = model.cpt(i).prob_up(restrict_to_scope(x, model.scope(i)), a[k]);
    p *= x_next[k] ? up : 1.0 - up;
  }
  return p;
}

struct AssumptionReport {
  bool a1 = true; ///< local transitions depend only on the node's own action
  bool a2 = true; ///< reward separates into local rewards and per-node costs
  bool a3 = true; ///< effective repair, absorbing failure, strict cascade monotonicity
  std::vector<std::string> violations;

  [[nodiscard]] bool ok() const noexcept { return a1 && a2 && a3; }
};

inline AssumptionReport assumption_check(const FactoredModel& model, double tol = 1e-12) {
  AssumptionReport report;
  for (int i = 0; i < model.n(); ++i) {
    const std::string node = std::to_string(i);
    // A1 holds structurally: LocalCpt is indexed by (x_scope, a_i) only.
    const RewardFactor& r = model.rewards[static_cast<std::size_t>(i)];
    for (int v : r.scope) {
      if (!std::binary_search(model.scope(i).begin(), model.scope(i).end(), v)) {
        report.a2 = false;
        report.violations.push_back("reward scope of node " + node +
                                    " leaves its neighborhood (node " + std::to_string(v) + ")");
      }
    }

    const LocalCpt& cpt = model.cpt(i);
    const std::size_t width = cpt.scope.size();
    const ScopeIndex self_bit = ScopeIndex{1} << cpt.self_position();
    const ScopeIndex all_up = (ScopeIndex{1} << width) - 1U;
    bool repair_ok = true;
    bool dead_ok = true;
    for (ScopeIndex idx = 0; idx <= all_up; ++idx) {
      if (std::abs(cpt.prob_up(idx, true) - 1.0) > tol) {
        repair_ok = false;
      }
      if ((idx & self_bit) == 0U && std::abs(cpt.prob_up(idx, false)) > tol) {
        dead_ok = false;
      }
    }
    if (!repair_ok) {
      report.a3 = false;
      report.violations.push_back("repair not deterministic at node " + node);
    }
    if (!dead_ok) {
      report.a3 = false;
      report.violations.push_back("failed node recovers without repair at node " + node);
    }
    const double healthy = cpt.prob_up(all_up, false);
    for (ScopeIndex idx = 0; idx < all_up; ++idx) {
      if ((idx & self_bit) == 0U) {
        continue;
      }
      if (!(cpt.prob_up(idx, false) < healthy)) {
        report.a3 = false;
        report.violations.push_back("cascade monotonicity not strict at node " + node);
        break;
      }
    }
  }
  return report;
}

} // namespace resplan
