#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "resplan/error.hpp"
#include "resplan/fmdp.hpp"
#include "resplan/lp.hpp"
#include "resplan/scenario.hpp"

namespace resplan {

/// constant + sum coef * var over LP decision variables (weights and
/// auxiliary maxima). Terms are kept sorted by handle with no zero coefficients.
struct LinearExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  static LinearExpr constant_of(double c) { return LinearExpr{c, {}}; }
  static LinearExpr variable(int handle, double coef = 1.0) {
    LinearExpr e;
    if (coef != 0.0) {
      e.terms.emplace_back(handle, coef);
    }
    return e;
  }

  LinearExpr& operator+=(const LinearExpr& other) {
    constant += other.constant;
    if (other.terms.empty()) {
      return *this;
    }
    std::vector<std::pair<int, double>> merged;
    merged.reserve(terms.size() + other.terms.size());
    auto a = terms.begin();
    auto b = other.terms.begin();
    while (a != terms.end() || b != other.terms.end()) {
      if (b == other.terms.end() || (a != terms.end() && a->first < b->first)) {
        merged.push_back(*a++);
      } else if (a == terms.end() || b->first < a->first) {
        merged.push_back(*b++);
      } else {
        const double c = a->second + b->second;
        if (c != 0.0) {
          merged.emplace_back(a->first, c);
        }
        ++a;
        ++b;
      }
    }
    terms = std::move(merged);
    return *this;
  }

  friend LinearExpr operator+(LinearExpr lhs, const LinearExpr& rhs) {
    lhs += rhs;
    return lhs;
  }

  [[nodiscard]] LinearExpr scaled(double k) const {
    if (k == 0.0) {
      return {};
    }
    LinearExpr e{constant * k, terms};
    for (auto& t : e.terms) {
      t.second *= k;
    }
    return e;
  }

  [[nodiscard]] double coefficient(int handle) const {
    auto it = std::lower_bound(terms.begin(), terms.end(), std::pair{handle, -kDoubleMax});
    return it != terms.end() && it->first == handle ? it->second : 0.0;
  }

  [[nodiscard]] double evaluate(const std::vector<double>& values) const {
    double v = constant;
    for (auto [h, c] : terms) {
      v += c * values[static_cast<std::size_t>(h)];
    }
    return v;
  }

private:
  static constexpr double kDoubleMax = std::numeric_limits<double>::max();
};

/// Discrete (binary) variables of the factor graph: x_i has id i, a_i has id n + i.
struct FactorVars {
  int n = 0;
  [[nodiscard]] int state(int i) const noexcept { return i; }
  [[nodiscard]] int action(int i) const noexcept { return n + i; }
  [[nodiscard]] bool is_action(int v) const noexcept { return v >= n; }
  [[nodiscard]] std::string name(int v) const {
    return (is_action(v) ? "a" : "x") + std::to_string(is_action(v) ? v - n : v);
  }
};

/// Table of linear expressions over a small scope of binary variables. Entry k
/// corresponds to the assignment whose bit j is the value of scope[j].
struct Factor {
  std::vector<int> scope;
  std::vector<LinearExpr> entries;
};

enum class ConstraintSense { less_equal, equal };

/// expr (sense) rhs, where expr carries no constant term.
struct Constraint {
  LinearExpr expr;
  ConstraintSense sense = ConstraintSense::less_equal;
  double rhs = 0.0;
};

struct ConstraintSet {
  std::vector<std::string> variables; ///< LP variable names; weights come first
  int num_weights = 0;
  int bias_handle = -1; ///< handle of the constant-basis weight, -1 when absent
  std::vector<Constraint> constraints;
  std::vector<int> step_widths; ///< |Z| of each elimination step that did work

  int add_variable(std::string name) {
    variables.push_back(std::move(name));
    return static_cast<int>(variables.size()) - 1;
  }

  /// Adds `e <= 0`, moving the constant to the right-hand side.
  void add_nonpositive(LinearExpr e) {
    const double rhs = -e.constant;
    e.constant = 0.0;
    constraints.push_back(Constraint{std::move(e), ConstraintSense::less_equal, rhs});
  }

  [[nodiscard]] int max_width() const {
    return step_widths.empty() ? 0 : *std::max_element(step_widths.begin(), step_widths.end());
  }
};

/// ALP solution: one weight per indicator basis x_i plus the weight of the
/// constant basis function (zero when that basis is disabled).
struct Weights {
  std::vector<double> w;
  double bias = 0.0;

  [[nodiscard]] std::size_t size() const noexcept { return w.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return w[i]; }

  /// Approximate value bias + sum_i w_i x_i.
  [[nodiscard]] double value(const SystemState& x) const {
    double v = bias;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v += x[i] ? w[i] : 0.0;
    }
    return v;
  }
};

/// Declares w_0..w_{n-1} (handles 0..n-1) and, optionally, the constant-basis
/// weight w_const (handle n).
inline ConstraintSet weight_variables(int n, bool constant_basis = false) {
  ConstraintSet cs;
  for (int i = 0; i < n; ++i) {
    cs.add_variable("w_" + std::to_string(i));
  }
  cs.num_weights = n;
  if (constant_basis) {
    cs.bias_handle = cs.add_variable("w_const");
  }
  return cs;
}

/// sum_x alpha(x) V(x) = sum_i E_alpha[x_i] w_i (+ w_const, since alpha sums to 1).
inline LinearExpr build_objective(int n, AlphaSpec alpha, int bias_handle = -1) {
  const double mean = alpha == AlphaSpec::uniform ? 0.5 : 1.0;
  LinearExpr e;
  for (int i = 0; i < n; ++i) {
    e.terms.emplace_back(i, mean);
  }
  if (bias_handle >= 0) {
    e += LinearExpr::variable(bias_handle);
  }
  return e;
}

inline LinearExpr build_objective(const FactoredModel& model, AlphaSpec alpha,
                                  int bias_handle = -1) {
  return build_objective(model.n(), alpha, bias_handle);
}

/// Factor over (closed neighborhood of i, a_i) with entries
/// w_i * (gamma * g_i - h_i). The action variable is omitted (fixed at 0) for
/// nodes outside the controllable set.
inline Factor g_bar_factor(const FactoredModel& model, int i, int w_handle) {
  detail::check_node(model, i);
  const FactorVars vars{model.n()};
  const auto& nb = model.scope(i);
  const bool ctrl = model.is_controllable(i);
  Factor f;
  for (int v : nb) {
    f.scope.push_back(vars.state(v));
  }
  if (ctrl) {
    f.scope.push_back(vars.action(i));
  }
  const std::size_t width = nb.size();
  const ScopeIndex self_bit = ScopeIndex{1} << model.cpt(i).self_position();
  const ScopeIndex mask = (ScopeIndex{1} << width) - 1U;
  f.entries.resize(std::size_t{1} << f.scope.size());
  for (ScopeIndex k = 0; k < f.entries.size(); ++k) {
    const ScopeIndex x_idx = k & mask;
    const bool a = ctrl && ((k >> width) & 1U) != 0U;
    const double h = (x_idx & self_bit) != 0U ? 1.0 : 0.0;
    const double g = g_value(model, i, x_idx, a);
    f.entries[k] = LinearExpr::variable(w_handle, model.gamma * g - h);
  }
  return f;
}

/// One reward factor, one cost factor and one g-bar factor per node, in node order.
inline std::vector<Factor> collect_factors(const FactoredModel& model) {
  const FactorVars vars{model.n()};
  std::vector<Factor> factors;
  factors.reserve(3 * static_cast<std::size_t>(model.n()));
  for (int i = 0; i < model.n(); ++i) {
    const RewardFactor& r = model.rewards[static_cast<std::size_t>(i)];
    Factor rf;
    for (int v : r.scope) {
      rf.scope.push_back(vars.state(v));
    }
    for (double value : r.table) {
      rf.entries.push_back(LinearExpr::constant_of(value));
    }
    factors.push_back(std::move(rf));

    const CostFunction& c = model.cost(i);
    Factor cf;
    if (model.is_controllable(i)) {
      cf.scope = {vars.action(i)};
      cf.entries = {LinearExpr::constant_of(-c.c0), LinearExpr::constant_of(-c.c1)};
    } else {
      cf.entries = {LinearExpr::constant_of(-c.c0)};
    }
    factors.push_back(std::move(cf));

    factors.push_back(g_bar_factor(model, i, i));
  }
  return factors;
}

enum class OrderHeuristic { min_degree, min_fill, given };

namespace detail {

/// Greedy order on the interaction graph: eliminate the variable whose
/// neighbors need the fewest new edges to become a clique (ties: fewer
/// neighbors, then smallest id).
inline std::vector<int> min_fill_order(const std::vector<Factor>& factors) {
  std::map<int, std::set<int>> adj;
  for (const Factor& f : factors) {
    for (int u : f.scope) {
      auto& nb = adj[u];
      for (int v : f.scope) {
        if (v != u) {
          nb.insert(v);
        }
      }
    }
  }
  std::vector<int> order;
  order.reserve(adj.size());
  while (!adj.empty()) {
    int best = -1;
    std::size_t best_fill = 0;
    std::size_t best_degree = 0;
    for (const auto& [v, nb] : adj) {
      std::size_t fill = 0;
      for (auto a = nb.begin(); a != nb.end(); ++a) {
        const auto& na = adj.at(*a);
        for (auto b = std::next(a); b != nb.end(); ++b) {
          fill += na.count(*b) == 0 ? 1U : 0U;
        }
      }
      if (best < 0 || fill < best_fill || (fill == best_fill && nb.size() < best_degree)) {
        best = v;
        best_fill = fill;
        best_degree = nb.size();
      }
    }
    const std::set<int> nb = std::move(adj.at(best));
    adj.erase(best);
    for (int a : nb) {
      auto& na = adj.at(a);
      na.erase(best);
      for (int b : nb) {
        if (b != a) {
          na.insert(b);
        }
      }
    }
    order.push_back(best);
  }
  return order;
}

} // namespace detail

/// Elimination order over every variable that appears in some factor scope.
/// min_degree repeatedly picks the variable whose elimination produces the
/// smallest merged scope (ties: smallest id).
inline std::vector<int> elimination_order(const std::vector<Factor>& factors,
                                          OrderHeuristic heuristic,
                                          const std::vector<int>& given = {}) {
  if (heuristic == OrderHeuristic::given) {
    return given;
  }
  if (heuristic == OrderHeuristic::min_fill) {
    return detail::min_fill_order(factors);
  }
  std::vector<std::vector<int>> scopes;
  std::set<int> remaining;
  for (const Factor& f : factors) {
    if (!f.scope.empty()) {
      scopes.push_back(f.scope);
      remaining.insert(f.scope.begin(), f.scope.end());
    }
  }
  std::vector<int> order;
  order.reserve(remaining.size());
  while (!remaining.empty()) {
    int best_var = -1;
    std::size_t best_size = std::numeric_limits<std::size_t>::max();
    for (int v : remaining) {
      std::set<int> merged;
      for (const auto& s : scopes) {
        if (std::binary_search(s.begin(), s.end(), v)) {
          merged.insert(s.begin(), s.end());
        }
      }
      const std::size_t size = merged.size() - 1;
      if (size < best_size) {
        best_size = size;
        best_var = v;
      }
    }
    std::set<int> merged;
    std::vector<std::vector<int>> kept;
    for (auto& s : scopes) {
      if (std::binary_search(s.begin(), s.end(), best_var)) {
        merged.insert(s.begin(), s.end());
      } else {
        kept.push_back(std::move(s));
      }
    }
    merged.erase(best_var);
    if (!merged.empty()) {
      kept.emplace_back(merged.begin(), merged.end());
    }
    scopes = std::move(kept);
    remaining.erase(best_var);
    order.push_back(best_var);
  }
  return order;
}

namespace detail {

/// Index into a table over `scope` for the assignment described by
/// (z over `z_scope`, v = bit).
inline std::size_t project_index(const std::vector<int>& scope, const std::vector<int>& z_scope,
                                 std::size_t z, int v, unsigned bit) {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < scope.size(); ++k) {
    const int var = scope[k];
    unsigned value = 0;
    if (var == v) {
      value = bit;
    } else {
      const auto pos = static_cast<std::size_t>(
          std::lower_bound(z_scope.begin(), z_scope.end(), var) - z_scope.begin());
      value = static_cast<unsigned>((z >> pos) & 1U);
    }
    idx |= static_cast<std::size_t>(value) << k;
  }
  return idx;
}

inline std::size_t project_index(const Factor& f, const std::vector<int>& z_scope, std::size_t z,
                                 int v, unsigned bit) {
  return project_index(f.scope, z_scope, z, v, bit);
}

} // namespace detail

struct EliminationOptions {
  std::size_t max_width = 24;
  /// Exact size reductions: an entry whose two candidate sums differ only in
  /// their constant is stored directly (up to `inline_terms` terms) instead of
  /// through an auxiliary variable, and entries with identical candidate sums
  /// share one auxiliary variable across the whole compilation.
  bool compress = false;
  std::size_t inline_terms = 4;
};

/// Compiles "0 >= max over all variables of sum(factors)" into linear
/// constraints by variable elimination. `cs` must already declare every LP
/// variable referenced by the factors; auxiliary variables u_<step>_<index>
/// are appended to it.
inline void eliminate_into(std::vector<Factor> factors, const std::vector<int>& order,
                           ConstraintSet& cs, const EliminationOptions& options = {}) {
  const std::size_t max_width = options.max_width;
  using ExprKey = std::pair<double, std::vector<std::pair<int, double>>>;
  std::map<std::pair<ExprKey, ExprKey>, int> shared;
  std::set<int> all_vars;
  for (const Factor& f : factors) {
    if (f.entries.size() != (std::size_t{1} << f.scope.size())) {
      throw ContractError("factor table does not cover its scope");
    }
    all_vars.insert(f.scope.begin(), f.scope.end());
  }
  std::set<int> in_order;
  for (int v : order) {
    if (!in_order.insert(v).second) {
      throw ContractError("variable " + std::to_string(v) + " appears twice in the elimination order");
    }
  }
  for (int v : all_vars) {
    if (in_order.count(v) == 0) {
      throw ContractError("variable " + std::to_string(v) + " missing from the elimination order");
    }
  }

  for (std::size_t step = 0; step < order.size(); ++step) {
    const int v = order[step];
    std::vector<Factor> gathered;
    std::vector<Factor> kept;
    std::set<int> z_set;
    for (Factor& f : factors) {
      if (std::binary_search(f.scope.begin(), f.scope.end(), v)) {
        z_set.insert(f.scope.begin(), f.scope.end());
        gathered.push_back(std::move(f));
      } else {
        kept.push_back(std::move(f));
      }
    }
    if (gathered.empty()) {
      factors = std::move(kept);
      continue;
    }
    z_set.erase(v);
    std::vector<int> z_scope(z_set.begin(), z_set.end());
    if (z_scope.size() > max_width) {
      throw SizeError("elimination step produces a factor over " + std::to_string(z_scope.size()) +
                      " variables; choose a better order");
    }
    cs.step_widths.push_back(static_cast<int>(z_scope.size()));
    Factor merged;
    merged.scope = z_scope;
    const std::size_t count = std::size_t{1} << z_scope.size();
    merged.entries.reserve(count);
    for (std::size_t z = 0; z < count; ++z) {
      std::array<LinearExpr, 2> sums;
      for (unsigned bit = 0; bit < 2; ++bit) {
        for (const Factor& f : gathered) {
          sums[bit] += f.entries[detail::project_index(f, z_scope, z, v, bit)];
        }
      }
      std::size_t distinct = 2;
      if (options.compress) {
        if (sums[0].terms == sums[1].terms) {
          sums[0].constant = std::max(sums[0].constant, sums[1].constant);
          distinct = 1;
          if (sums[0].terms.size() <= options.inline_terms) {
            merged.entries.push_back(std::move(sums[0]));
            continue;
          }
        }
        ExprKey k0{sums[0].constant, sums[0].terms};
        ExprKey k1 = distinct == 1 ? k0 : ExprKey{sums[1].constant, sums[1].terms};
        if (k1 < k0) {
          std::swap(k0, k1);
        }
        auto [it, fresh] = shared.try_emplace({std::move(k0), std::move(k1)}, -1);
        if (!fresh) {
          merged.entries.push_back(LinearExpr::variable(it->second));
          continue;
        }
        it->second = static_cast<int>(cs.variables.size());
      }
      const int u = cs.add_variable("u_" + std::to_string(step) + "_" + std::to_string(z));
      for (std::size_t b = 0; b < distinct; ++b) {
        sums[b] += LinearExpr::variable(u, -1.0);
        cs.add_nonpositive(std::move(sums[b]));
      }
      merged.entries.push_back(LinearExpr::variable(u));
    }
    kept.push_back(std::move(merged));
    factors = std::move(kept);
  }

  LinearExpr residual;
  for (const Factor& f : factors) {
    residual += f.entries.front();
  }
  cs.add_nonpositive(std::move(residual));
}

/// Stand-alone form: LP variables are the weights w_0..w_{n-1} referenced by
/// the factors (n inferred from the largest referenced handle).
inline ConstraintSet eliminate(const std::vector<Factor>& factors, const std::vector<int>& order,
                               const EliminationOptions& options = {}) {
  int max_handle = -1;
  for (const Factor& f : factors) {
    for (const LinearExpr& e : f.entries) {
      for (auto [h, c] : e.terms) {
        max_handle = std::max(max_handle, h);
      }
    }
  }
  ConstraintSet cs = weight_variables(max_handle + 1);
  eliminate_into(factors, order, cs, options);
  return cs;
}

/// Factor with numeric entries, indexed like Factor.
struct ValueFactor {
  std::vector<int> scope;
  std::vector<double> table;
};

struct MaxResult {
  double value = 0.0;
  std::vector<std::uint8_t> assignment; ///< one maximizer; variables outside every scope are 0
};

/// Max-sum elimination compiled once for fixed scopes and order, then run on
/// any tables over those scopes. Ties go to value 0; variables outside every
/// scope are set to 0.
class MaxSumPlan {
public:
  MaxSumPlan(const std::vector<std::vector<int>>& scopes, const std::vector<int>& order,
             int num_vars)
      : num_vars_(num_vars), num_inputs_(scopes.size()) {
    std::vector<std::vector<int>> live_scopes = scopes;
    std::vector<std::size_t> live(scopes.size());
    std::iota(live.begin(), live.end(), std::size_t{0});
    std::size_t next_table = scopes.size();
    for (const int v : order) {
      Step step;
      step.v = v;
      std::set<int> z_set;
      std::vector<std::size_t> kept;
      for (std::size_t t : live) {
        const auto& sc = live_scopes[t];
        if (std::binary_search(sc.begin(), sc.end(), v)) {
          z_set.insert(sc.begin(), sc.end());
          step.inputs.push_back(t);
        } else {
          kept.push_back(t);
        }
      }
      if (step.inputs.empty()) {
        continue;
      }
      z_set.erase(v);
      step.z_scope.assign(z_set.begin(), z_set.end());
      const std::size_t count = std::size_t{1} << step.z_scope.size();
      step.index.resize(step.inputs.size() * count * 2);
      for (std::size_t g = 0; g < step.inputs.size(); ++g) {
        const auto& sc = live_scopes[step.inputs[g]];
        for (std::size_t z = 0; z < count; ++z) {
          for (unsigned bit = 0; bit < 2; ++bit) {
            step.index[(g * count + z) * 2 + bit] =
                detail::project_index(sc, step.z_scope, z, v, bit);
          }
        }
      }
      step.output = next_table++;
      live_scopes.push_back(step.z_scope);
      kept.push_back(step.output);
      live = std::move(kept);
      steps_.push_back(std::move(step));
    }
    for (std::size_t t : live) {
      if (!live_scopes[t].empty()) {
        throw ContractError("variable " + std::to_string(live_scopes[t].front()) +
                            " missing from the elimination order");
      }
      residual_.push_back(t);
    }
    num_tables_ = next_table;
  }

  /// `tables[k]` holds the entries of input factor k.
  [[nodiscard]] MaxResult run(std::vector<std::vector<double>> tables) const {
    if (tables.size() != num_inputs_) {
      throw ContractError("max-sum plan expects " + std::to_string(num_inputs_) + " tables");
    }
    tables.resize(num_tables_);
    std::vector<std::vector<std::uint8_t>> best(steps_.size());
    for (std::size_t s = 0; s < steps_.size(); ++s) {
      const Step& step = steps_[s];
      const std::size_t count = std::size_t{1} << step.z_scope.size();
      std::vector<double> out(count);
      best[s].resize(count);
      for (std::size_t z = 0; z < count; ++z) {
        double s0 = 0.0;
        double s1 = 0.0;
        for (std::size_t g = 0; g < step.inputs.size(); ++g) {
          const std::vector<double>& t = tables[step.inputs[g]];
          const std::size_t base = (g * count + z) * 2;
          s0 += t[step.index[base]];
          s1 += t[step.index[base + 1]];
        }
        best[s][z] = s1 > s0 ? 1 : 0;
        out[z] = std::max(s0, s1);
      }
      tables[step.output] = std::move(out);
    }
    MaxResult result;
    for (std::size_t t : residual_) {
      result.value += tables[t].front();
    }
    result.assignment.assign(static_cast<std::size_t>(num_vars_), 0);
    for (std::size_t s = steps_.size(); s-- > 0;) {
      const Step& step = steps_[s];
      std::size_t z = 0;
      for (std::size_t k = 0; k < step.z_scope.size(); ++k) {
        z |= static_cast<std::size_t>(result.assignment[static_cast<std::size_t>(step.z_scope[k])])
             << k;
      }
      result.assignment[static_cast<std::size_t>(step.v)] = best[s][z];
    }
    return result;
  }

private:
  struct Step {
    int v = 0;
    std::vector<int> z_scope;
    std::vector<std::size_t> inputs; ///< table ids gathered at this step
    std::vector<std::size_t> index;  ///< (input, z, bit) -> entry of that input table
    std::size_t output = 0;
  };

  int num_vars_ = 0;
  std::size_t num_inputs_ = 0;
  std::size_t num_tables_ = 0;
  std::vector<Step> steps_;
  std::vector<std::size_t> residual_;
};

/// max over all assignments of the sum of `factors` by max-sum elimination,
/// with the maximizer recovered by traceback.
inline MaxResult maximize(const std::vector<ValueFactor>& factors, const std::vector<int>& order,
                          int num_vars) {
  std::vector<std::vector<int>> scopes;
  std::vector<std::vector<double>> tables;
  for (const ValueFactor& f : factors) {
    scopes.push_back(f.scope);
    tables.push_back(f.table);
  }
  return MaxSumPlan(scopes, order, num_vars).run(std::move(tables));
}

inline constexpr int kEnumerationGuard = 10;

namespace detail {

/// The ALP constraint of one (x, a) pair in <= form.
inline Constraint enumerated_constraint(const FactoredModel& model, const SystemState& x,
                                        const ActionVector& a, int bias_handle) {
  Constraint c;
  for (int i = 0; i < model.n(); ++i) {
    const double coef = model.gamma * g_value(model, i, x, a[static_cast<std::size_t>(i)]) -
                        (x[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
    if (coef != 0.0) {
      c.expr.terms.emplace_back(i, coef);
    }
  }
  if (bias_handle >= 0) {
    c.expr.terms.emplace_back(bias_handle, model.gamma - 1.0);
  }
  c.rhs = -reward(model, x, a);
  return c;
}

} // namespace detail

/// One constraint per (x, a): sum_i w_i (gamma g_i(x,a) - x_i) <= -R(x,a),
/// plus (gamma - 1) w_const on the left when the constant basis is enabled.
/// Actions range over the controllable nodes only.
inline ConstraintSet enumerate_constraints(const FactoredModel& model, bool constant_basis = false,
                                           int guard = kEnumerationGuard) {
  const int n = model.n();
  if (n > guard) {
    throw SizeError("constraint enumeration refused: n = " + std::to_string(n) +
                    " exceeds guard " + std::to_string(guard));
  }
  ConstraintSet cs = weight_variables(n, constant_basis);
  const auto ctrl = model.controllable_ids();
  const std::uint64_t num_actions = std::uint64_t{1} << ctrl.size();
  for (std::uint64_t xm = 0; xm < (std::uint64_t{1} << n); ++xm) {
    const SystemState x = SystemState::from_mask(xm, static_cast<std::size_t>(n));
    for (std::uint64_t am = 0; am < num_actions; ++am) {
      ActionVector a(static_cast<std::size_t>(n));
      for (std::size_t k = 0; k < ctrl.size(); ++k) {
        a.set(static_cast<std::size_t>(ctrl[k]), ((am >> k) & 1U) != 0U);
      }
      cs.constraints.push_back(detail::enumerated_constraint(model, x, a, cs.bias_handle));
    }
  }
  return cs;
}

/// How the exponentially many ALP constraints are represented: compiled by
/// variable elimination, listed explicitly, or added lazily as cuts found by
/// max-sum elimination at the current weights.
enum class ConstraintMethod { variable_elimination, enumeration, constraint_generation };

struct AlpConfig {
  AlphaSpec alpha = AlphaSpec::uniform;
  /// Adds h_0(x) = 1 to the indicator bases. Without it V(0) = 0 for every w,
  /// and the LP is infeasible whenever repairing a failed node is worthwhile.
  bool constant_basis = true;
  OrderHeuristic order = OrderHeuristic::min_degree;
  std::vector<int> given_order;
  ConstraintMethod method = ConstraintMethod::variable_elimination;
  EliminationOptions elimination{.max_width = 24, .compress = true, .inline_terms = 4};
  /// The ALP optimum is often not unique in w. When set, a tiny generic
  /// perturbation of the objective selects one optimal vertex, so different but
  /// equivalent constraint sets return the same weights.
  bool canonical = true;
  /// constraint_generation: stop when no constraint is violated by more than
  /// cut_tolerance * (1 + reward scale); give up after max_cuts cuts.
  double cut_tolerance = 1e-9;
  long max_cuts = 200000;
  /// constraint_generation: weight in (0, 1) of the LP point in the second
  /// separation point of each round; anything else separates at the LP point only.
  double stabilization = 0.1;
  lp::Options lp;
};

struct AlpResult {
  Weights weights;
  lp::Status status = lp::Status::optimal;
  double objective = 0.0;
  std::size_t num_constraints = 0;
  std::size_t num_variables = 0;
  int max_width = 0;
  long iterations = 0;
  long rounds = 1; ///< LP solves (constraint generation only)
  std::vector<int> order;
};

/// LP over all ConstraintSet variables (free) minimizing `objective`.
inline lp::Problem to_lp_problem(const ConstraintSet& cs, const LinearExpr& objective) {
  lp::Problem p(cs.variables.size());
  for (auto [h, c] : objective.terms) {
    p.objective[static_cast<std::size_t>(h)] = c;
  }
  std::fill(p.lower.begin(), p.lower.end(), -lp::kInf);
  for (const Constraint& c : cs.constraints) {
    p.add_row(c.expr.terms,
              c.sense == ConstraintSense::equal ? lp::Sense::equal : lp::Sense::less_equal, c.rhs);
  }
  return p;
}

namespace detail {

/// Tilt applied to the objective when AlpConfig::canonical is set. Distinct
/// irrational-looking negative coefficients on the indicator weights pick a
/// single vertex of a degenerate optimal face, the one with the largest
/// weights, so exact ties between acting and idling are rare. The tilted
/// objective is still an expectation under a state-relevance distribution
/// (marginals E[x_i] - eps_i), so the ALP stays bounded.
inline LinearExpr tie_break_objective(const ConstraintSet& cs) {
  LinearExpr e;
  for (int h = 0; h < cs.num_weights; ++h) {
    const double golden = 0.6180339887498949 * static_cast<double>(h + 1);
    e.terms.emplace_back(h, -(1.0 + (golden - std::floor(golden))));
  }
  return e;
}

} // namespace detail

/// Builds the constraint set solve_alp would use, without solving it.
inline ConstraintSet compile_alp(const FactoredModel& model, const AlpConfig& config,
                                 std::vector<int>* order_out = nullptr) {
  if (config.method == ConstraintMethod::enumeration) {
    return enumerate_constraints(model, config.constant_basis);
  }
  if (config.method == ConstraintMethod::constraint_generation) {
    throw ContractError("constraint generation has no compiled constraint set; its cuts are "
                        "produced while solving");
  }
  auto factors = collect_factors(model);
  auto order = elimination_order(factors, config.order, config.given_order);
  ConstraintSet cs = weight_variables(model.n(), config.constant_basis);
  if (config.constant_basis) {
    factors.push_back(Factor{{}, {LinearExpr::variable(cs.bias_handle, model.gamma - 1.0)}});
  }
  eliminate_into(std::move(factors), order, cs, config.elimination);
  if (order_out != nullptr) {
    *order_out = std::move(order);
  }
  return cs;
}

namespace detail {

/// Upper bound on |R(x, a)| over all states and actions.
inline double reward_scale(const FactoredModel& model) {
  double total = 0.0;
  for (const RewardFactor& r : model.rewards) {
    double m = 0.0;
    for (double v : r.table) {
      m = std::max(m, std::abs(v));
    }
    total += m;
  }
  for (int i = 0; i < model.n(); ++i) {
    total += std::max(std::abs(model.cost(i).c0), std::abs(model.cost(i).c1));
  }
  return total;
}

/// Constraint generation: the LP holds only the weights and the cuts found so
/// far, re-optimized by an active-set dual simplex. Each round adds the most
/// violated constraint (max-sum elimination) at the LP point, and with
/// stabilization also at a point pulled toward the best known feasible
/// weights, which moves the feasible point when it finds nothing. The weights
/// get a large lower bound -L; the run restarts with a larger L if that bound
/// is active at the end.
inline AlpResult solve_alp_by_cuts(const FactoredModel& model, const AlpConfig& config,
                                   const LinearExpr& solved, const LinearExpr& objective) {
  const int n = model.n();
  const FactorVars vars{n};
  AlpResult result;
  ConstraintSet cs = weight_variables(n, config.constant_basis);
  std::vector<Factor> factors = collect_factors(model);
  if (config.constant_basis) {
    factors.push_back(Factor{{}, {LinearExpr::variable(cs.bias_handle, model.gamma - 1.0)}});
  }
  result.order = elimination_order(factors, config.order, config.given_order);
  std::vector<std::vector<int>> scopes;
  scopes.reserve(factors.size());
  for (const Factor& f : factors) {
    scopes.push_back(f.scope);
  }
  const MaxSumPlan plan(scopes, result.order, 2 * n);
  const double scale = 1.0 + reward_scale(model);
  const double tol = config.cut_tolerance * scale;
  const auto num_vars = cs.variables.size();
  std::vector<double> cost(num_vars, 0.0);
  for (auto [h, c] : solved.terms) {
    cost[static_cast<std::size_t>(h)] = c;
  }
  auto separate = [&](const std::vector<double>& at) {
    std::vector<std::vector<double>> tables;
    tables.reserve(factors.size());
    for (const Factor& f : factors) {
      std::vector<double> t;
      t.reserve(f.entries.size());
      for (const LinearExpr& e : f.entries) {
        t.push_back(e.evaluate(at));
      }
      tables.push_back(std::move(t));
    }
    return plan.run(std::move(tables));
  };
  // V = constant with a large bias satisfies every constraint strictly.
  std::vector<double> feasible(num_vars, 0.0);
  bool stabilize = config.stabilization > 0.0 && config.stabilization < 1.0 && cs.bias_handle >= 0;
  if (stabilize) {
    feasible[static_cast<std::size_t>(cs.bias_handle)] = 2.0 * scale / (1.0 - model.gamma);
    stabilize = separate(feasible).value <= -tol;
  }
  double shift = 10.0 * scale / (1.0 - model.gamma);

  for (int attempt = 0; attempt < 8; ++attempt, shift *= 100.0) {
    const std::vector<double> lower(num_vars, -shift);
    lp::ActiveSetDual dual(cost, lower, config.lp);
    std::set<std::vector<std::uint8_t>> pooled;
    long total_cuts = 0;
    auto add_cut = [&](const MaxResult& found) {
      std::vector<std::uint8_t> key(found.assignment.begin(), found.assignment.end());
      if (!pooled.insert(key).second) {
        return false;
      }
      SystemState x(static_cast<std::size_t>(n));
      ActionVector a(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        x.set(static_cast<std::size_t>(i), found.assignment[static_cast<std::size_t>(vars.state(i))]);
        a.set(static_cast<std::size_t>(i), found.assignment[static_cast<std::size_t>(vars.action(i))]);
      }
      const Constraint c = enumerated_constraint(model, x, a, cs.bias_handle);
      dual.add_row(c.expr.terms, c.rhs);
      if (++total_cuts > config.max_cuts) {
        throw SolverError("constraint generation: cut limit " + std::to_string(config.max_cuts) +
                          " reached");
      }
      return true;
    };
    std::vector<double> values(num_vars);
    std::vector<double> inner = feasible;
    result.rounds = 0;
    while (true) {
      if (!dual.optimize()) {
        throw SolverError("constraint generation: relaxation infeasible");
      }
      ++result.rounds;
      values = dual.values();
      const MaxResult worst = separate(values);
      if (worst.value <= tol) {
        break;
      }
      if (!add_cut(worst)) {
        throw SolverError("constraint generation: cut violated by " +
                          std::to_string(worst.value) + " is already in the LP");
      }
      if (stabilize) {
        std::vector<double> mid(num_vars);
        for (std::size_t k = 0; k < num_vars; ++k) {
          mid[k] = inner[k] + config.stabilization * (values[k] - inner[k]);
        }
        const MaxResult found = separate(mid);
        if (found.value > tol) {
          add_cut(found);
        } else {
          inner = std::move(mid);
        }
      }
    }
    result.iterations += dual.iterations();
    const bool bound_active = std::any_of(values.begin(), values.end(), [&](double v) {
      return v <= -shift * (1.0 - 1e-6);
    });
    if (bound_active) {
      continue;
    }
    result.status = lp::Status::optimal;
    result.num_constraints = static_cast<std::size_t>(total_cuts);
    result.num_variables = num_vars;
    result.objective = objective.evaluate(values);
    result.weights.w.assign(values.begin(), values.begin() + n);
    if (cs.bias_handle >= 0) {
      result.weights.bias = values[static_cast<std::size_t>(cs.bias_handle)];
    }
    return result;
  }
  throw SolverError("constraint generation: weights keep hitting the lower bound; the ALP looks "
                    "unbounded below");
}

} // namespace detail

template <typename Solver = lp::Simplex>
AlpResult solve_alp(const FactoredModel& model, const AlpConfig& config = {},
                    const Solver& solver = Solver{}) {
  if (config.method == ConstraintMethod::constraint_generation) {
    const int bias = config.constant_basis ? model.n() : -1;
    const LinearExpr objective = build_objective(model, config.alpha, bias);
    ConstraintSet shape = weight_variables(model.n(), config.constant_basis);
    const LinearExpr solved =
        config.canonical ? objective + detail::tie_break_objective(shape).scaled(1e-7) : objective;
    return detail::solve_alp_by_cuts(model, config, solved, objective);
  }
  AlpResult result;
  ConstraintSet cs = compile_alp(model, config, &result.order);
  const LinearExpr objective = build_objective(model, config.alpha, cs.bias_handle);
  const LinearExpr solved =
      config.canonical ? objective + detail::tie_break_objective(cs).scaled(1e-7) : objective;
  const lp::Solution sol = solver.solve(to_lp_problem(cs, solved));
  result.status = sol.status;
  result.num_constraints = cs.constraints.size();
  result.num_variables = cs.variables.size();
  result.max_width = cs.max_width();
  result.iterations = sol.iterations;
  if (sol.status == lp::Status::infeasible) {
    throw SolverError(config.constant_basis
                          ? "ALP reported infeasible although large weights are always feasible "
                            "with a constant basis; internal error"
                          : "ALP infeasible: indicator bases alone cannot represent V(0) > 0; "
                            "enable the constant basis");
  }
  if (sol.status == lp::Status::unbounded) {
    throw ModelingError("ALP is unbounded below; check the state-relevance weights");
  }
  result.objective = objective.evaluate(sol.values);
  const std::vector<double>& values = sol.values;
  result.weights.w.assign(values.begin(), values.begin() + model.n());
  if (cs.bias_handle >= 0) {
    result.weights.bias = values[static_cast<std::size_t>(cs.bias_handle)];
  }
  return result;
}

namespace detail {

inline std::string lp_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_lp_terms(std::ostream& os, const std::vector<std::pair<int, double>>& terms,
                           const std::vector<std::string>& names) {
  if (terms.empty()) {
    os << " 0";
    if (!names.empty()) {
      os << ' ' << names.front();
    }
    return;
  }
  bool first = true;
  for (auto [h, c] : terms) {
    os << (c < 0 ? " - " : (first ? " " : " + ")) << lp_number(std::abs(c)) << ' '
       << names[static_cast<std::size_t>(h)];
    first = false;
  }
}

} // namespace detail

/// Writes the LP in CPLEX LP text format (all variables free).
inline void write_lp_format(std::ostream& os, const ConstraintSet& cs,
                            const LinearExpr& objective) {
  os << "\\ approximate linear program over " << cs.num_weights << " weights\n";
  os << "Minimize\n obj:";
  detail::write_lp_terms(os, objective.terms, cs.variables);
  os << "\nSubject To\n";
  for (std::size_t k = 0; k < cs.constraints.size(); ++k) {
    const Constraint& c = cs.constraints[k];
    os << " c" << k << ':';
    detail::write_lp_terms(os, c.expr.terms, cs.variables);
    os << (c.sense == ConstraintSense::equal ? " = " : " <= ") << detail::lp_number(c.rhs)
       << '\n';
  }
  os << "Bounds\n";
  for (const std::string& name : cs.variables) {
    os << ' ' << name << " free\n";
  }
  os << "End\n";
}

} // namespace resplan
