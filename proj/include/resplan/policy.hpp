#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "resplan/bits.hpp"
#include "resplan/error.hpp"
#include "resplan/factored_lp.hpp"
#include "resplan/fmdp.hpp"
#include "resplan/rng.hpp"

namespace resplan {

/// One-step lookahead value under the approximate value function:
/// R(x, a) + gamma * (bias + sum_i w_i g_i(x, a_i)).
inline double q_value(const FactoredModel& model, const Weights& w, const SystemState& x,
                      const ActionVector& a) {
  detail::check_dims(model, w.w.size(), "weight vector");
  double future = w.bias;
  for (int i = 0; i < model.n(); ++i) {
    future += w.w[static_cast<std::size_t>(i)] * g_value(model, i, x, a[static_cast<std::size_t>(i)]);
  }
  return reward(model, x, a) + model.gamma * future;
}

namespace detail {

/// Gain of acting over idling, gamma w_i (g_i(x, 1) - g_i(x, 0)) - (c_i(1) - c_i(0)).
/// Differencing the probabilities first keeps exact ties exact, so the sign
/// agrees with the threshold classification.
inline double node_gain(const FactoredModel& model, const Weights& w, const SystemState& x,
                        int i) {
  const double gw = model.gamma * w.w[static_cast<std::size_t>(i)];
  const double lift = g_value(model, i, x, true) - g_value(model, i, x, false);
  return gw * lift - model.cost(i).gap();
}

inline void require_separable(const FactoredModel& model, const char* who) {
  const AssumptionReport report = assumption_check(model);
  if (!report.a1 || !report.a2) {
    std::string msg = std::string(who) + " refused: the model is not separable per node";
    for (const std::string& v : report.violations) {
      msg += "; " + v;
    }
    throw AssumptionError(msg);
  }
}

} // namespace detail

/// Per-node greedy policy. Assumptions are checked once at construction.
class DistributedPolicy {
public:
  DistributedPolicy(const FactoredModel& model, Weights weights)
      : model_(&model), weights_(std::move(weights)) {
    detail::check_dims(model, weights_.w.size(), "weight vector");
    detail::require_separable(model, "distributed_action");
  }

  /// a_i = 1 iff the repair term strictly beats the idle term; idle wins ties.
  [[nodiscard]] ActionVector operator()(const SystemState& x) const {
    detail::check_dims(*model_, x.size(), "state");
    ActionVector a(x.size());
    for (int i = 0; i < model_->n(); ++i) {
      if (!model_->is_controllable(i)) {
        continue;
      }
      a.set(static_cast<std::size_t>(i), detail::node_gain(*model_, weights_, x, i) > 0.0);
    }
    return a;
  }

  [[nodiscard]] const Weights& weights() const noexcept { return weights_; }

private:
  const FactoredModel* model_;
  Weights weights_;
};

inline ActionVector distributed_action(const FactoredModel& model, const Weights& w,
                                       const SystemState& x) {
  return DistributedPolicy(model, w)(x);
}

inline constexpr int kCentralizedGuard = 20;

/// Exhaustive argmax of q_value over actions on the controllable nodes; ties
/// go to the lexicographically smallest action string.
inline ActionVector centralized_action(const FactoredModel& model, const Weights& w,
                                       const SystemState& x, int guard = kCentralizedGuard) {
  detail::check_dims(model, x.size(), "state");
  const std::vector<int> ids = model.controllable_ids();
  if (static_cast<int>(ids.size()) > guard) {
    throw SizeError("centralized_action refused: " + std::to_string(ids.size()) +
                    " controllable nodes exceed the guard of " + std::to_string(guard) +
                    "; use distributed_action");
  }
  const auto k = ids.size();
  ActionVector best(x.size());
  double best_q = q_value(model, w, x, best);
  // Walking masks with ids[0] as the most significant bit visits actions in
  // lexicographic order, so keeping the first maximum is the tie rule.
  for (std::uint64_t m = 1; m < (std::uint64_t{1} << k); ++m) {
    ActionVector a(x.size());
    for (std::size_t j = 0; j < k; ++j) {
      a.set(static_cast<std::size_t>(ids[j]), ((m >> (k - 1 - j)) & 1U) != 0U);
    }
    const double q = q_value(model, w, x, a);
    if (q > best_q) {
      best_q = q;
      best = a;
    }
  }
  return best;
}

enum class Regime {
  never_repair,
  repair_when_faulty_only,
  also_maintain_when_neighbors_degraded,
  always_maintain,
};

inline std::string_view to_string(Regime r) {
  switch (r) {
  case Regime::never_repair:
    return "never_repair";
  case Regime::repair_when_faulty_only:
    return "repair_when_faulty_only";
  case Regime::also_maintain_when_neighbors_degraded:
    return "also_maintain_when_neighbors_degraded";
  case Regime::always_maintain:
    return "always_maintain";
  }
  return "never_repair";
}

/// Survival probability of a working node under one neighbor pattern and
/// whether the node is maintained there.
struct PatternDecision {
  ScopeIndex scope_index = 0; ///< full scope assignment, own bit set
  double survival = 0.0;
  double threshold = 0.0;     ///< gamma w (1 - survival)
  bool maintain = false;
};

/// Threshold classification of one node. All thresholds carry the discount
/// factor, because that is what the per-node argmax compares against.
struct ThresholdReport {
  int node = 0;
  Regime regime = Regime::never_repair;
  double repair_threshold = 0.0;   ///< gamma w
  double healthy_threshold = 0.0;  ///< gamma w (1 - P[all neighborhood up])
  double degraded_threshold = 0.0; ///< gamma w (1 - min survival over degraded patterns)
  double cost_gap = 0.0;
  std::vector<PatternDecision> degraded; ///< one entry per degraded parent pattern
};

inline ThresholdReport threshold_classify(const FactoredModel& model, const Weights& w, int i) {
  detail::check_node(model, i);
  detail::check_dims(model, w.w.size(), "weight vector");
  const AssumptionReport check = assumption_check(model);
  if (!check.a3) {
    throw AssumptionError("threshold_classify refused: repair/absorption/cascade assumption fails");
  }
  const LocalCpt& cpt = model.cpt(i);
  const ScopeIndex self = ScopeIndex{1} << cpt.self_position();
  const ScopeIndex all_up = (ScopeIndex{1} << cpt.scope.size()) - 1U;
  const double gw = model.gamma * w.w[static_cast<std::size_t>(i)];
  ThresholdReport r;
  r.node = i;
  r.cost_gap = model.cost(i).gap();
  r.repair_threshold = gw;
  r.healthy_threshold = gw * (1.0 - cpt.prob_up(all_up, false));
  double min_survival = cpt.prob_up(all_up, false);
  for (ScopeIndex idx = 0; idx < all_up; ++idx) {
    if ((idx & self) == 0U) {
      continue;
    }
    PatternDecision d;
    d.scope_index = idx;
    d.survival = cpt.prob_up(idx, false);
    d.threshold = gw * (1.0 - d.survival);
    d.maintain = r.cost_gap < d.threshold;
    min_survival = std::min(min_survival, d.survival);
    r.degraded.push_back(d);
  }
  r.degraded_threshold = gw * (1.0 - min_survival);
  if (!model.is_controllable(i) || r.cost_gap >= r.repair_threshold) {
    r.regime = Regime::never_repair;
  } else if (r.cost_gap >= r.degraded_threshold) {
    r.regime = Regime::repair_when_faulty_only;
  } else if (r.cost_gap >= r.healthy_threshold) {
    r.regime = Regime::also_maintain_when_neighbors_degraded;
  } else {
    r.regime = Regime::always_maintain;
  }
  return r;
}

/// Action the report predicts for its node at a neighborhood assignment.
inline bool predicted_action(const ThresholdReport& r, const FactoredModel& model,
                             ScopeIndex scope_index) {
  const LocalCpt& cpt = model.cpt(r.node);
  const ScopeIndex self = ScopeIndex{1} << cpt.self_position();
  const ScopeIndex all_up = (ScopeIndex{1} << cpt.scope.size()) - 1U;
  switch (r.regime) {
  case Regime::never_repair:
    return false;
  case Regime::always_maintain:
    return true;
  case Regime::repair_when_faulty_only:
    return (scope_index & self) == 0U;
  case Regime::also_maintain_when_neighbors_degraded:
    if ((scope_index & self) == 0U) {
      return true;
    }
    if (scope_index == all_up) {
      return false;
    }
    for (const PatternDecision& d : r.degraded) {
      if (d.scope_index == scope_index) {
        return d.maintain;
      }
    }
    return false;
  }
  return false;
}

/// Per-node gain of acting over idling.
inline std::vector<double> action_gains(const FactoredModel& model, const Weights& w,
                                        const SystemState& x) {
  detail::check_dims(model, x.size(), "state");
  detail::check_dims(model, w.w.size(), "weight vector");
  std::vector<double> gains(x.size(), 0.0);
  for (int i = 0; i < model.n(); ++i) {
    if (model.is_controllable(i)) {
      gains[static_cast<std::size_t>(i)] = detail::node_gain(model, w, x, i);
    }
  }
  return gains;
}

/// At most `budget` actions: the positive gains, largest first, lower id on ties.
inline ActionVector budgeted_action(const FactoredModel& model, const Weights& w,
                                    const SystemState& x, int budget) {
  if (budget < 0) {
    throw RangeError("budget must be >= 0");
  }
  detail::require_separable(model, "budgeted_action");
  const std::vector<double> gains = action_gains(model, w, x);
  std::vector<int> order;
  for (int i = 0; i < model.n(); ++i) {
    if (model.is_controllable(i) && gains[static_cast<std::size_t>(i)] > 0.0) {
      order.push_back(i);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](int p, int q) {
    return gains[static_cast<std::size_t>(p)] > gains[static_cast<std::size_t>(q)];
  });
  ActionVector a(x.size());
  for (std::size_t k = 0; k < order.size() && k < static_cast<std::size_t>(budget); ++k) {
    a.set(static_cast<std::size_t>(order[k]), true);
  }
  return a;
}

enum class PolicyKind {
  optimal_distributed,
  optimal_centralized,
  repair_faulty,
  randomized,
  no_action,
  budgeted,
};

inline std::string_view to_string(PolicyKind k) {
  switch (k) {
  case PolicyKind::optimal_distributed:
    return "optimal";
  case PolicyKind::optimal_centralized:
    return "centralized";
  case PolicyKind::repair_faulty:
    return "repair-faulty";
  case PolicyKind::randomized:
    return "randomized";
  case PolicyKind::no_action:
    return "no-action";
  case PolicyKind::budgeted:
    return "budgeted";
  }
  return "optimal";
}

inline PolicyKind parse_policy_kind(std::string_view text) {
  for (PolicyKind k : {PolicyKind::optimal_distributed, PolicyKind::optimal_centralized,
                       PolicyKind::repair_faulty, PolicyKind::randomized, PolicyKind::no_action,
                       PolicyKind::budgeted}) {
    if (text == to_string(k)) {
      return k;
    }
  }
  throw ParseError("unknown policy '" + std::string(text) +
                   "' (expected optimal, centralized, repair-faulty, randomized, no-action, "
                   "budgeted)");
}

struct PolicySpec {
  PolicyKind kind = PolicyKind::optimal_distributed;
  int budget = 1;
  double p_repair = 0.8;   ///< randomized: repair probability of a failed node
  double p_maintain = 0.2; ///< randomized: maintenance probability of a working node
};

/// Non-optimizing policies. The randomized one draws one uniform per
/// controllable node from `rng`.
inline ActionVector baseline_action(const FactoredModel& model, const PolicySpec& spec,
                                    const SystemState& x, Rng& rng) {
  detail::check_dims(model, x.size(), "state");
  ActionVector a(x.size());
  switch (spec.kind) {
  case PolicyKind::no_action:
    return a;
  case PolicyKind::repair_faulty:
    for (int i = 0; i < model.n(); ++i) {
      if (model.is_controllable(i)) {
        a.set(static_cast<std::size_t>(i), !x[static_cast<std::size_t>(i)]);
      }
    }
    return a;
  case PolicyKind::randomized:
    if (!(spec.p_repair >= 0.0 && spec.p_repair <= 1.0) ||
        !(spec.p_maintain >= 0.0 && spec.p_maintain <= 1.0)) {
      throw RangeError("randomized policy probabilities must lie in [0,1]");
    }
    for (int i = 0; i < model.n(); ++i) {
      if (model.is_controllable(i)) {
        const bool up = x[static_cast<std::size_t>(i)];
        a.set(static_cast<std::size_t>(i), rng.bernoulli(up ? spec.p_maintain : spec.p_repair));
      }
    }
    return a;
  default:
    throw ContractError("baseline_action needs repair-faulty, randomized or no-action");
  }
}

/// A policy as used by the simulator; the generator is the policy stream.
using Policy = std::function<ActionVector(const SystemState&, Rng&)>;

/// `weights` is required for the optimal and budgeted kinds and ignored otherwise.
inline Policy make_policy(const FactoredModel& model, const PolicySpec& spec,
                          const Weights* weights = nullptr) {
  const bool needs_weights = spec.kind == PolicyKind::optimal_distributed ||
                             spec.kind == PolicyKind::optimal_centralized ||
                             spec.kind == PolicyKind::budgeted;
  if (needs_weights && weights == nullptr) {
    throw ContractError("policy '" + std::string(to_string(spec.kind)) + "' needs ALP weights");
  }
  switch (spec.kind) {
  case PolicyKind::optimal_distributed: {
    DistributedPolicy p(model, *weights);
    return [p](const SystemState& x, Rng&) { return p(x); };
  }
  case PolicyKind::optimal_centralized: {
    if (static_cast<int>(model.controllable_ids().size()) > kCentralizedGuard) {
      throw SizeError("centralized policy refused: more than " +
                      std::to_string(kCentralizedGuard) + " controllable nodes");
    }
    return [&model, w = *weights](const SystemState& x, Rng&) {
      return centralized_action(model, w, x);
    };
  }
  case PolicyKind::budgeted: {
    if (spec.budget < 0) {
      throw RangeError("budget must be >= 0");
    }
    detail::require_separable(model, "budgeted_action");
    return [&model, w = *weights, b = spec.budget](const SystemState& x, Rng&) {
      return budgeted_action(model, w, x, b);
    };
  }
  default:
    return [&model, spec](const SystemState& x, Rng& rng) {
      return baseline_action(model, spec, x, rng);
    };
  }
}

} // namespace resplan
