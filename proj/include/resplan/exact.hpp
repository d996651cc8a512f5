#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "resplan/bits.hpp"
#include "resplan/error.hpp"
#include "resplan/fmdp.hpp"
#include "resplan/lp.hpp"
#include "resplan/scenario.hpp"

namespace resplan {

/// Values over all 2^n states; index = state mask with node 0 as the least
/// significant bit.
struct ValueTable {
  int n = 0;
  std::vector<double> values;

  [[nodiscard]] double at(const SystemState& x) const { return values[x.to_mask()]; }
  [[nodiscard]] double at(std::uint64_t mask) const { return values[mask]; }

  /// CSV with header "state,value"; the state column spells node 0 first.
  void write_csv(std::ostream& out) const {
    out << "state,value\n";
    char buf[64];
    for (std::size_t m = 0; m < values.size(); ++m) {
      std::snprintf(buf, sizeof buf, "%.12g", values[m]);
      out << SystemState::from_mask(m, static_cast<std::size_t>(n)).to_string() << ',' << buf
          << '\n';
    }
  }
};

inline constexpr int kValueIterationGuard = 10;
inline constexpr int kExactLpGuard = 8;

namespace detail {

inline void exact_guard(const FactoredModel& model, int guard, const char* who) {
  if (model.n() > guard) {
    throw SizeError(std::string(who) + " refused: n = " + std::to_string(model.n()) +
                    " exceeds guard " + std::to_string(guard));
  }
}

inline std::uint64_t controllable_mask(const FactoredModel& model) {
  std::uint64_t m = 0;
  for (int i = 0; i < model.n(); ++i) {
    if (model.is_controllable(i)) {
      m |= std::uint64_t{1} << i;
    }
  }
  return m;
}

/// True when action mask p precedes q in lexicographic order of the action
/// string (node 0 first).
inline bool lex_less(std::uint64_t p, std::uint64_t q) {
  const std::uint64_t diff = p ^ q;
  return diff != 0 && (p & (diff & (~diff + 1))) == 0;
}

/// Per-state one-step model: survival probabilities for idle and acting.
struct StepModel {
  std::vector<double> up_idle;
  std::vector<double> up_act;
};

inline StepModel step_model(const FactoredModel& model, const SystemState& x) {
  StepModel s;
  for (int i = 0; i < model.n(); ++i) {
    const ScopeIndex idx = restrict_to_scope(x, model.scope(i));
    s.up_idle.push_back(model.cpt(i).prob_up(idx, false));
    s.up_act.push_back(model.controllable[static_cast<std::size_t>(i)]
                           ? model.cpt(i).prob_up(idx, true)
                           : s.up_idle.back());
  }
  return s;
}

/// E[V(X') | x, a] for every action mask a at once. Axis i of the next-state
/// table is contracted against the 2x2 matrix of node i's survival
/// probabilities, which turns it into the action axis.
inline std::vector<double> expected_next(const StepModel& s, const std::vector<double>& v) {
  std::vector<double> t = v;
  const std::size_t size = t.size();
  for (std::size_t i = 0; i < s.up_idle.size(); ++i) {
    const std::size_t bit = std::size_t{1} << i;
    const double p0 = s.up_idle[i];
    const double p1 = s.up_act[i];
    for (std::size_t m = 0; m < size; ++m) {
      if ((m & bit) != 0U) {
        continue;
      }
      const double down = t[m];
      const double up = t[m | bit];
      t[m] = (1.0 - p0) * down + p0 * up;
      t[m | bit] = (1.0 - p1) * down + p1 * up;
    }
  }
  return t;
}

inline double action_cost(const FactoredModel& model, std::uint64_t a) {
  double c = 0.0;
  for (int i = 0; i < model.n(); ++i) {
    c += model.cost(i)(((a >> i) & 1U) != 0U);
  }
  return c;
}

/// Best action and its Q-value at x under `v`; lexicographic tie-break.
inline std::pair<std::uint64_t, double> greedy(const FactoredModel& model,
                                               const std::vector<double>& costs,
                                               std::uint64_t control, const SystemState& x,
                                               const std::vector<double>& v) {
  const std::vector<double> next = expected_next(step_model(model, x), v);
  const double r = state_reward(model, x);
  std::uint64_t best = 0;
  double best_q = r - costs[0] + model.gamma * next[0];
  // Enumerates the subsets of the controllable mask.
  for (std::uint64_t a = control; a != 0; a = (a - 1) & control) {
    const double q = r - costs[a] + model.gamma * next[a];
    if (q > best_q || (q == best_q && lex_less(a, best))) {
      best = a;
      best_q = q;
    }
  }
  return {best, best_q};
}

inline std::vector<double> all_action_costs(const FactoredModel& model) {
  const std::uint64_t count = std::uint64_t{1} << model.n();
  std::vector<double> costs(count);
  for (std::uint64_t a = 0; a < count; ++a) {
    costs[a] = action_cost(model, a);
  }
  return costs;
}

} // namespace detail

/// Synchronous Bellman sweeps from V = 0 until the sup-norm change drops below
/// tol (1 - gamma) / gamma, which bounds the distance to V* by tol.
inline ValueTable value_iteration(const FactoredModel& model, double tol = 1e-8,
                                  int guard = kValueIterationGuard) {
  detail::exact_guard(model, guard, "value_iteration");
  if (!(tol > 0.0)) {
    throw RangeError("value_iteration tolerance must be > 0");
  }
  const int n = model.n();
  const std::uint64_t count = std::uint64_t{1} << n;
  const std::uint64_t control = detail::controllable_mask(model);
  const std::vector<double> costs = detail::all_action_costs(model);
  const double stop = tol * (1.0 - model.gamma) / model.gamma;
  std::vector<double> v(count, 0.0);
  std::vector<double> next(count);
  for (long sweep = 0;; ++sweep) {
    if (sweep > 1000000) {
      throw SolverError("value_iteration did not converge");
    }
    double change = 0.0;
    for (std::uint64_t m = 0; m < count; ++m) {
      const SystemState x = SystemState::from_mask(m, static_cast<std::size_t>(n));
      next[m] = detail::greedy(model, costs, control, x, v).second;
      change = std::max(change, std::abs(next[m] - v[m]));
    }
    v.swap(next);
    if (change < stop) {
      break;
    }
  }
  return ValueTable{n, std::move(v)};
}

/// One-step lookahead argmax of R + gamma E[V]; lexicographic tie-break.
inline ActionVector greedy_from_values(const FactoredModel& model, const ValueTable& v,
                                       const SystemState& x, int guard = kValueIterationGuard) {
  detail::exact_guard(model, guard, "greedy_from_values");
  detail::check_dims(model, x.size(), "state");
  if (v.n != model.n()) {
    throw ContractError("value table and model disagree on n");
  }
  const auto [a, q] = detail::greedy(model, detail::all_action_costs(model),
                                     detail::controllable_mask(model), x, v.values);
  (void)q;
  return ActionVector::from_mask(a, static_cast<std::size_t>(model.n()));
}

/// Value of the deterministic policy `actions` (one action mask per state)
/// by iteration to the same error bound as value_iteration.
inline ValueTable evaluate_policy(const FactoredModel& model,
                                  const std::vector<std::uint64_t>& actions, double tol = 1e-10,
                                  int guard = kValueIterationGuard) {
  detail::exact_guard(model, guard, "evaluate_policy");
  const int n = model.n();
  const std::uint64_t count = std::uint64_t{1} << n;
  if (actions.size() != count) {
    throw ContractError("evaluate_policy needs one action per state");
  }
  std::vector<detail::StepModel> steps;
  std::vector<double> rewards;
  for (std::uint64_t m = 0; m < count; ++m) {
    const SystemState x = SystemState::from_mask(m, static_cast<std::size_t>(n));
    steps.push_back(detail::step_model(model, x));
    rewards.push_back(state_reward(model, x) - detail::action_cost(model, actions[m]));
  }
  const double stop = tol * (1.0 - model.gamma) / model.gamma;
  std::vector<double> v(count, 0.0);
  std::vector<double> next(count);
  while (true) {
    double change = 0.0;
    for (std::uint64_t m = 0; m < count; ++m) {
      next[m] = rewards[m] + model.gamma * detail::expected_next(steps[m], v)[actions[m]];
      change = std::max(change, std::abs(next[m] - v[m]));
    }
    v.swap(next);
    if (change < stop) {
      break;
    }
  }
  return ValueTable{n, std::move(v)};
}

/// Exact LP over all states: minimize sum_x alpha(x) V(x) subject to
/// V(x) >= R(x, a) + gamma sum_x' P(x' | x, a) V(x') for every state and every
/// action on the controllable nodes.
template <typename Solver = lp::Simplex>
ValueTable solve_exact_lp(const FactoredModel& model, AlphaSpec alpha = AlphaSpec::uniform,
                          const Solver& solver = Solver{}, int guard = kExactLpGuard) {
  detail::exact_guard(model, guard, "solve_exact_lp");
  const int n = model.n();
  const std::uint64_t count = std::uint64_t{1} << n;
  const std::uint64_t control = detail::controllable_mask(model);
  lp::Problem p;
  for (std::uint64_t m = 0; m < count; ++m) {
    double a = 0.0;
    if (alpha == AlphaSpec::uniform) {
      a = 1.0 / static_cast<double>(count);
    } else if (m == count - 1) {
      a = 1.0;
    }
    p.add_var(a, -lp::kInf, lp::kInf);
  }
  for (std::uint64_t m = 0; m < count; ++m) {
    const SystemState x = SystemState::from_mask(m, static_cast<std::size_t>(n));
    const detail::StepModel s = detail::step_model(model, x);
    const double r = state_reward(model, x);
    auto add = [&](std::uint64_t a) {
      // Row: gamma P V - V(x) <= -(R(x, a)).
      std::vector<double> prob(1, 1.0);
      for (int i = 0; i < n; ++i) {
        const double up = ((a >> i) & 1U) != 0U ? s.up_act[static_cast<std::size_t>(i)]
                                                : s.up_idle[static_cast<std::size_t>(i)];
        std::vector<double> grown(prob.size() * 2);
        for (std::size_t k = 0; k < prob.size(); ++k) {
          grown[k] = prob[k] * (1.0 - up);
          grown[k + prob.size()] = prob[k] * up;
        }
        prob.swap(grown);
      }
      std::vector<std::pair<int, double>> coefs;
      for (std::uint64_t k = 0; k < count; ++k) {
        double c = model.gamma * prob[k];
        if (k == m) {
          c -= 1.0;
        }
        if (c != 0.0) {
          coefs.emplace_back(static_cast<int>(k), c);
        }
      }
      p.add_row(std::move(coefs), lp::Sense::less_equal, -(r - detail::action_cost(model, a)));
    };
    add(0);
    for (std::uint64_t a = control; a != 0; a = (a - 1) & control) {
      add(a);
    }
  }
  const lp::Solution sol = solver.solve(p);
  if (sol.status != lp::Status::optimal) {
    throw SolverError(std::string("exact LP ended ") + lp::to_string(sol.status));
  }
  return ValueTable{n, sol.values};
}

} // namespace resplan
