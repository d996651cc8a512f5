#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "resplan/resplan.hpp"

namespace resplan::testing {

struct RandomShape {
  double edge_prob = 0.4;
  double explicit_cpt_prob = 0.3; ///< chance a node gets a random explicit CPT
  double wide_reward_prob = 0.3;  ///< chance a node's reward also reads a parent
  double control_prob = 1.0;
  int max_parents = 3;
};

/// Random scenario satisfying the separability and cascade assumptions.
inline Scenario random_scenario(std::uint64_t seed, int n, RandomShape shape = {}) {
  std::mt19937_64 gen(seed * 0x9E3779B97F4A7C15ULL + 17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scenario s;
  s.name = "random-" + std::to_string(seed);
  s.gamma = 0.5 + 0.45 * u(gen);
  s.p0 = 0.02 + 0.2 * u(gen);
  s.pc = 0.05 + 0.5 * u(gen);
  for (int i = 0; i < n; ++i) {
    Node node;
    node.id = i;
    node.name = "n" + std::to_string(i);
    node.base_reward = 0.5 + 5.0 * u(gen);
    s.network.nodes.push_back(node);
  }
  for (int dst = 0; dst < n; ++dst) {
    int added = 0;
    for (int src = 0; src < n; ++src) {
      if (src != dst && added < shape.max_parents && u(gen) < shape.edge_prob) {
        s.network.edges.push_back(Edge{src, dst});
        ++added;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    const double c0 = 0.3 * u(gen);
    const double c1 = c0 + 3.0 * u(gen);
    s.cost_overrides[i] = {c0, c1};
    if (u(gen) < shape.control_prob) {
      s.controllable.push_back(i);
    }
    const std::vector<int> scope = neighborhood(s.network, i);
    if (u(gen) < shape.explicit_cpt_prob) {
      const std::size_t w = scope.size();
      const auto self = static_cast<std::size_t>(
          std::find(scope.begin(), scope.end(), i) - scope.begin());
      const std::size_t count = std::size_t{1} << w;
      const double healthy = 0.55 + 0.44 * u(gen);
      std::vector<double> table(2 * count);
      for (std::size_t k = 0; k < count; ++k) {
        table[count + k] = 1.0;
        if (((k >> self) & 1U) == 0U) {
          table[k] = 0.0;
        } else if (k == count - 1) {
          table[k] = healthy;
        } else {
          table[k] = healthy * (0.1 + 0.85 * u(gen));
        }
      }
      s.cpts.push_back(CptOverride{i, std::move(table)});
    }
    const std::vector<int> par = parents(s.network, i);
    if (!par.empty() && u(gen) < shape.wide_reward_prob) {
      const int p = par[static_cast<std::size_t>(gen() % par.size())];
      RewardFactor r;
      r.node = i;
      r.scope = {std::min(i, p), std::max(i, p)};
      r.table = {0.0, 2.0 * u(gen), 2.0 * u(gen), 1.0 + 4.0 * u(gen)};
      s.reward_factors.push_back(std::move(r));
    }
  }
  return s;
}

/// Independent brute-force view of a scenario: transitions and rewards are
/// recomputed from the scenario data without the library's model helpers.
class Brute {
public:
  explicit Brute(const Scenario& s) : s_(s), n_(s.network.size()) {
    for (int i = 0; i < n_; ++i) {
      std::vector<int> scope{i};
      for (const Edge& e : s.network.edges) {
        if (e.dst == i) {
          scope.push_back(e.src);
        }
      }
      std::sort(scope.begin(), scope.end());
      scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
      scopes_.push_back(scope);
    }
    ctrl_mask_ = 0;
    for (int id : s.controllable) {
      ctrl_mask_ |= std::uint64_t{1} << id;
    }
  }

  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] double gamma() const { return s_.gamma; }
  [[nodiscard]] std::uint64_t control_mask() const { return ctrl_mask_; }
  [[nodiscard]] std::uint64_t states() const { return std::uint64_t{1} << n_; }

  [[nodiscard]] double up(int i, std::uint64_t x, bool a) const {
    for (const CptOverride& o : s_.cpts) {
      if (o.node == i) {
        const auto& sc = scopes_[static_cast<std::size_t>(i)];
        std::size_t k = 0;
        for (std::size_t j = 0; j < sc.size(); ++j) {
          k |= static_cast<std::size_t>((x >> sc[j]) & 1U) << j;
        }
        return o.table[k + (a ? (std::size_t{1} << sc.size()) : 0)];
      }
    }
    if (a) {
      return 1.0;
    }
    if (((x >> i) & 1U) == 0U) {
      return 0.0;
    }
    int failed = 0;
    for (int p : scopes_[static_cast<std::size_t>(i)]) {
      failed += p != i && ((x >> p) & 1U) == 0U ? 1 : 0;
    }
    return (1.0 - s_.p0) * std::pow(1.0 - s_.pc, failed);
  }

  [[nodiscard]] double prob(std::uint64_t x, std::uint64_t a, std::uint64_t next) const {
    double p = 1.0;
    for (int i = 0; i < n_; ++i) {
      const double q = up(i, x, ((a >> i) & 1U) != 0U);
      p *= ((next >> i) & 1U) != 0U ? q : 1.0 - q;
    }
    return p;
  }

  [[nodiscard]] double state_reward(std::uint64_t x) const {
    double r = 0.0;
    for (int i = 0; i < n_; ++i) {
      const RewardFactor* f = nullptr;
      for (const RewardFactor& rf : s_.reward_factors) {
        if (rf.node == i) {
          f = &rf;
        }
      }
      if (f == nullptr) {
        r += ((x >> i) & 1U) != 0U ? s_.network.nodes[static_cast<std::size_t>(i)].base_reward
                                   : 0.0;
      } else {
        std::size_t k = 0;
        for (std::size_t j = 0; j < f->scope.size(); ++j) {
          k |= static_cast<std::size_t>((x >> f->scope[j]) & 1U) << j;
        }
        r += f->table[k];
      }
    }
    return r;
  }

  [[nodiscard]] double cost(std::uint64_t a) const {
    double c = 0.0;
    for (int i = 0; i < n_; ++i) {
      const auto [c0, c1] = s_.cost_of(i);
      c += ((a >> i) & 1U) != 0U ? c1 : c0;
    }
    return c;
  }

  [[nodiscard]] double expected(std::uint64_t x, std::uint64_t a,
                                const std::vector<double>& v) const {
    double e = 0.0;
    for (std::uint64_t y = 0; y < states(); ++y) {
      e += prob(x, a, y) * v[y];
    }
    return e;
  }

  /// Actions restricted to controllable nodes, in increasing mask order.
  [[nodiscard]] std::vector<std::uint64_t> actions() const {
    std::vector<std::uint64_t> out;
    for (std::uint64_t a = 0; a < states(); ++a) {
      if ((a & ~ctrl_mask_) == 0U) {
        out.push_back(a);
      }
    }
    return out;
  }

  [[nodiscard]] double q(std::uint64_t x, std::uint64_t a, const std::vector<double>& v) const {
    return state_reward(x) - cost(a) + gamma() * expected(x, a, v);
  }

  /// Synchronous value iteration to sup-norm error below tol.
  [[nodiscard]] std::vector<double> value_iteration(double tol) const {
    std::vector<double> v(states(), 0.0);
    const auto acts = actions();
    const double stop = tol * (1.0 - gamma()) / gamma();
    while (true) {
      std::vector<double> next(states());
      double change = 0.0;
      for (std::uint64_t x = 0; x < states(); ++x) {
        double best = -1e300;
        for (std::uint64_t a : acts) {
          best = std::max(best, q(x, a, v));
        }
        next[x] = best;
        change = std::max(change, std::abs(next[x] - v[x]));
      }
      v.swap(next);
      if (change < stop) {
        return v;
      }
    }
  }

private:
  Scenario s_;
  int n_ = 0;
  std::vector<std::vector<int>> scopes_;
  std::uint64_t ctrl_mask_ = 0;
};

/// Random {0,1}^n state from a seeded generator.
inline SystemState random_state(std::mt19937_64& gen, int n) {
  SystemState x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x.set(static_cast<std::size_t>(i), (gen() & 1U) != 0U);
  }
  return x;
}

} // namespace resplan::testing
