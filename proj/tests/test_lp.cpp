#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "resplan/lp.hpp"

namespace resplan::lp {
namespace {

Solution solve(const Problem& p, PivotRule rule = PivotRule::hybrid) {
  Options o;
  o.rule = rule;
  return Simplex(o).solve(p);
}

TEST(Simplex, SmallMaximization) {
  Problem p(2);
  p.objective = {-3.0, -2.0};
  p.add_row({{0, 1.0}, {1, 1.0}}, Sense::less_equal, 4.0);
  p.add_row({{0, 1.0}, {1, 3.0}}, Sense::less_equal, 6.0);
  p.upper[0] = 3.0;
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective, -11.0, 1e-9);
  EXPECT_NEAR(s.values[0], 3.0, 1e-9);
  EXPECT_NEAR(s.values[1], 1.0, 1e-9);
  EXPECT_LE(s.max_violation, 1e-9);
}

TEST(Simplex, FreeVariablesAndEqualities) {
  Problem p;
  const int x = p.add_var(1.0, -kInf, kInf);
  const int y = p.add_var(1.0, -kInf, kInf);
  p.add_row({{x, 1.0}, {y, -1.0}}, Sense::equal, 2.0);
  p.add_row({{x, 1.0}, {y, 1.0}}, Sense::greater_equal, -4.0);
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective, -4.0, 1e-9);
  EXPECT_NEAR(s.values[0], -1.0, 1e-9);
  EXPECT_NEAR(s.values[1], -3.0, 1e-9);
}

TEST(Simplex, NegativeLowerBounds) {
  Problem p;
  p.add_var(1.0, -5.0, 2.0);
  p.add_var(-1.0, -1.0, 3.0);
  p.add_row({{0, 1.0}, {1, 1.0}}, Sense::greater_equal, -1.0);
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.values[0], -4.0, 1e-9);
  EXPECT_NEAR(s.values[1], 3.0, 1e-9);
}

TEST(Simplex, DetectsInfeasible) {
  Problem p(1);
  p.add_row({{0, 1.0}}, Sense::greater_equal, 2.0);
  p.add_row({{0, 1.0}}, Sense::less_equal, 1.0);
  EXPECT_EQ(solve(p).status, Status::infeasible);
}

TEST(Simplex, DetectsUnbounded) {
  Problem p(2);
  p.objective = {-1.0, 0.0};
  p.add_row({{0, 1.0}, {1, -1.0}}, Sense::less_equal, 1.0);
  EXPECT_EQ(solve(p).status, Status::unbounded);
}

// Beale's example cycles under the textbook largest-coefficient rule.
Problem beale() {
  Problem p(4);
  p.objective = {-0.75, 20.0, -0.5, 6.0};
  p.add_row({{0, 0.25}, {1, -8.0}, {2, -1.0}, {3, 9.0}}, Sense::less_equal, 0.0);
  p.add_row({{0, 0.5}, {1, -12.0}, {2, -0.5}, {3, 3.0}}, Sense::less_equal, 0.0);
  p.add_row({{2, 1.0}}, Sense::less_equal, 1.0);
  return p;
}

TEST(Simplex, BealeTerminatesUnderEveryRule) {
  for (PivotRule rule : {PivotRule::bland, PivotRule::hybrid}) {
    const Solution s = solve(beale(), rule);
    ASSERT_EQ(s.status, Status::optimal);
    EXPECT_NEAR(s.objective, -1.25, 1e-9);
    EXPECT_NEAR(s.values[0], 1.0, 1e-9);
    EXPECT_NEAR(s.values[2], 1.0, 1e-9);
  }
}

TEST(Simplex, EmptyProblem) {
  Problem p(2);
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_DOUBLE_EQ(s.objective, 0.0);
}

// Solves the square system A x = b by Gaussian elimination with pivoting.
std::optional<std::vector<double>> solve_square(std::vector<std::vector<double>> a,
                                                std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) {
        piv = r;
      }
    }
    if (std::abs(a[piv][c]) < 1e-10) {
      return std::nullopt;
    }
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r != c) {
        const double f = a[r][c] / a[c][c];
        for (std::size_t k = c; k < n; ++k) {
          a[r][k] -= f * a[c][k];
        }
        b[r] -= f * b[c];
      }
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    b[c] /= a[c][c];
  }
  return b;
}

// Minimum over all vertices of {x : G x <= h}, by trying every n-subset of rows.
std::optional<double> vertex_minimum(const std::vector<std::vector<double>>& g,
                                     const std::vector<double>& h, const std::vector<double>& c) {
  const std::size_t n = c.size();
  const std::size_t m = h.size();
  std::optional<double> best;
  std::vector<std::size_t> pick(n);
  const auto recurse = [&](auto&& self, std::size_t start, std::size_t depth) -> void {
    if (depth == n) {
      std::vector<std::vector<double>> a;
      std::vector<double> b;
      for (std::size_t k : pick) {
        a.push_back(g[k]);
        b.push_back(h[k]);
      }
      const auto x = solve_square(a, b);
      if (!x) {
        return;
      }
      for (std::size_t r = 0; r < m; ++r) {
        double lhs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          lhs += g[r][j] * (*x)[j];
        }
        if (lhs > h[r] + 1e-7) {
          return;
        }
      }
      double v = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        v += c[j] * (*x)[j];
      }
      if (!best || v < *best) {
        best = v;
      }
      return;
    }
    for (std::size_t k = start; k < m; ++k) {
      pick[depth] = k;
      self(self, k + 1, depth + 1);
    }
  };
  recurse(recurse, 0, 0);
  return best;
}

TEST(Simplex, MatchesVertexEnumeration) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 3);
    const std::size_t m = 3 + static_cast<std::size_t>(trial % 4);
    std::vector<std::vector<double>> g;
    std::vector<double> h;
    Problem p;
    std::vector<double> c(n);
    for (std::size_t j = 0; j < n; ++j) {
      c[j] = u(gen);
      p.add_var(c[j], -10.0, 10.0);
    }
    for (std::size_t r = 0; r < m; ++r) {
      std::vector<double> row(n);
      std::vector<std::pair<int, double>> coefs;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::round(4.0 * u(gen)) / 2.0;
        if (row[j] != 0.0) {
          coefs.emplace_back(static_cast<int>(j), row[j]);
        }
      }
      const double rhs = 3.0 * u(gen);
      g.push_back(row);
      h.push_back(rhs);
      p.add_row(coefs, Sense::less_equal, rhs);
    }
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> up(n, 0.0);
      up[j] = 1.0;
      g.push_back(up);
      h.push_back(10.0);
      up[j] = -1.0;
      g.push_back(up);
      h.push_back(10.0);
    }
    const auto oracle = vertex_minimum(g, h, c);
    const Solution s = solve(p);
    if (!oracle) {
      EXPECT_EQ(s.status, Status::infeasible) << "trial " << trial;
      continue;
    }
    ASSERT_EQ(s.status, Status::optimal) << "trial " << trial;
    EXPECT_NEAR(s.objective, *oracle, 1e-7) << "trial " << trial;
    EXPECT_LE(s.max_violation, 1e-8);
  }
}

TEST(ActiveSetDual, MatchesSimplexOnRandomCuttingPlanes) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 6;
    std::vector<double> cost(static_cast<std::size_t>(n));
    std::vector<double> lower(static_cast<std::size_t>(n));
    Problem p;
    for (int j = 0; j < n; ++j) {
      cost[static_cast<std::size_t>(j)] = 0.1 + u(gen);
      lower[static_cast<std::size_t>(j)] = -5.0 * u(gen);
      p.add_var(cost[static_cast<std::size_t>(j)], lower[static_cast<std::size_t>(j)], kInf);
    }
    ActiveSetDual dual(cost, lower);
    // Rows of the ALP shape: a . y <= b with a point y0 kept strictly feasible.
    std::vector<double> y0(static_cast<std::size_t>(n));
    for (double& v : y0) {
      v = 10.0 * u(gen);
    }
    for (int batch = 0; batch < 4; ++batch) {
      for (int r = 0; r < 3 * n; ++r) {
        std::vector<std::pair<int, double>> coefs;
        double lhs = 0.0;
        for (int j = 0; j < n; ++j) {
          const double a = u(gen) < 0.5 ? -u(gen) : 0.3 * u(gen);
          coefs.emplace_back(j, a);
          lhs += a * y0[static_cast<std::size_t>(j)];
        }
        const double rhs = lhs + u(gen);
        dual.add_row(coefs, rhs);
        p.add_row(coefs, Sense::less_equal, rhs);
      }
      ASSERT_TRUE(dual.optimize());
      const Solution s = Simplex().solve(p);
      ASSERT_EQ(s.status, Status::optimal);
      const std::vector<double>& y = dual.values();
      double obj = 0.0;
      for (int j = 0; j < n; ++j) {
        obj += cost[static_cast<std::size_t>(j)] * y[static_cast<std::size_t>(j)];
      }
      EXPECT_NEAR(obj, s.objective, 1e-7 * (1.0 + std::abs(s.objective)))
          << "trial " << trial << " batch " << batch;
      EXPECT_LE(max_violation(p, y), 1e-7);
    }
  }
}

TEST(ActiveSetDual, ReportsInfeasiblePool) {
  const std::vector<double> lower{0.0, 0.0};
  ActiveSetDual dual({1.0, 1.0}, lower);
  dual.add_row({{0, 1.0}, {1, 1.0}}, -1.0);
  EXPECT_FALSE(dual.optimize());
}

TEST(ActiveSetDual, RejectsNegativeCost) {
  const std::vector<double> lower{0.0};
  EXPECT_THROW(ActiveSetDual({-1.0}, lower), ContractError);
  EXPECT_THROW(ActiveSetDual({1.0, 1.0}, lower), ContractError);
}

} // namespace
} // namespace resplan::lp
