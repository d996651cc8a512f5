#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

namespace resplan {
namespace {

double max_diff(const Weights& a, const Weights& b) {
  double d = std::abs(a.bias - b.bias);
  for (std::size_t i = 0; i < a.w.size(); ++i) {
    d = std::max(d, std::abs(a.w[i] - b.w[i]));
  }
  return d;
}

AlpResult solve_with(const FactoredModel& m, ConstraintMethod method,
                     OrderHeuristic order = OrderHeuristic::min_degree, bool compress = true) {
  AlpConfig c;
  c.method = method;
  c.order = order;
  c.elimination.compress = compress;
  return solve_alp(m, c);
}

// ALP built directly from brute-force expectations, independent of the
// library's constraint compilers. Returns the optimal objective.
double oracle_alp_objective(const Scenario& s) {
  const testing::Brute b(s);
  const int n = b.n();
  lp::Problem p;
  for (int i = 0; i < n; ++i) {
    p.add_var(0.5, -lp::kInf, lp::kInf);
  }
  const int bias = p.add_var(1.0, -lp::kInf, lp::kInf);
  for (std::uint64_t x = 0; x < b.states(); ++x) {
    for (std::uint64_t a : b.actions()) {
      // R - c + gamma (bias + sum_i w_i E[x_i']) <= bias + sum_i w_i x_i.
      std::vector<std::pair<int, double>> coefs;
      for (int i = 0; i < n; ++i) {
        double marginal = 0.0;
        for (std::uint64_t y = 0; y < b.states(); ++y) {
          if (((y >> i) & 1U) != 0U) {
            marginal += b.prob(x, a, y);
          }
        }
        coefs.emplace_back(i, b.gamma() * marginal - static_cast<double>((x >> i) & 1U));
      }
      coefs.emplace_back(bias, b.gamma() - 1.0);
      p.add_row(coefs, lp::Sense::less_equal, -(b.state_reward(x) - b.cost(a)));
    }
  }
  const lp::Solution sol = lp::Simplex().solve(p);
  EXPECT_EQ(sol.status, lp::Status::optimal);
  return sol.objective;
}

TEST(LinearExpr, MergesSortedTerms) {
  LinearExpr a = LinearExpr::variable(1, 2.0) + LinearExpr::variable(3, 1.0);
  a += LinearExpr::variable(1, -2.0) + LinearExpr::variable(0, 4.0) + LinearExpr::constant_of(5.0);
  EXPECT_EQ(a.terms, (std::vector<std::pair<int, double>>{{0, 4.0}, {3, 1.0}}));
  EXPECT_DOUBLE_EQ(a.constant, 5.0);
  EXPECT_DOUBLE_EQ(a.coefficient(3), 1.0);
  EXPECT_DOUBLE_EQ(a.coefficient(1), 0.0);
  EXPECT_DOUBLE_EQ(a.evaluate({1.0, 0.0, 0.0, 2.0}), 11.0);
  EXPECT_TRUE(a.scaled(0.0).terms.empty());
}

TEST(MaxSum, MatchesBruteForce) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int num_vars = 3 + trial % 6;
    std::vector<ValueFactor> factors;
    const int count = 2 + trial % 5;
    for (int f = 0; f < count; ++f) {
      ValueFactor vf;
      for (int v = 0; v < num_vars; ++v) {
        if (gen() % 3 == 0) {
          vf.scope.push_back(v);
        }
      }
      vf.table.resize(std::size_t{1} << vf.scope.size());
      for (double& t : vf.table) {
        t = std::round(4.0 * u(gen)) / 4.0;
      }
      factors.push_back(std::move(vf));
    }
    std::vector<int> order(static_cast<std::size_t>(num_vars));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen);
    auto eval = [&](std::uint64_t z) {
      double total = 0.0;
      for (const ValueFactor& f : factors) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < f.scope.size(); ++j) {
          k |= static_cast<std::size_t>((z >> f.scope[j]) & 1U) << j;
        }
        total += f.table[k];
      }
      return total;
    };
    double best = -1e300;
    for (std::uint64_t z = 0; z < (std::uint64_t{1} << num_vars); ++z) {
      best = std::max(best, eval(z));
    }
    const MaxResult r = maximize(factors, order, num_vars);
    EXPECT_NEAR(r.value, best, 1e-12) << "trial " << trial;
    std::uint64_t z = 0;
    for (int v = 0; v < num_vars; ++v) {
      z |= static_cast<std::uint64_t>(r.assignment[static_cast<std::size_t>(v)]) << v;
    }
    EXPECT_NEAR(eval(z), best, 1e-12) << "maximizer of trial " << trial;
  }
}

TEST(MaxSum, RejectsIncompleteOrder) {
  const std::vector<std::vector<int>> scopes{{0, 1}};
  EXPECT_THROW(MaxSumPlan(scopes, {0}, 2), ContractError);
}

TEST(FactoredLp, EliminationMatchesEnumerationAndOracle) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const int n = 2 + static_cast<int>(seed % 3);
    const Scenario s = testing::random_scenario(seed, n);
    const FactoredModel m = make_model(s);
    const AlpResult ve = solve_with(m, ConstraintMethod::variable_elimination);
    const AlpResult en = solve_with(m, ConstraintMethod::enumeration);
    EXPECT_NEAR(ve.objective, en.objective, 1e-6) << "seed " << seed;
    EXPECT_LE(max_diff(ve.weights, en.weights), 1e-6) << "seed " << seed;
    EXPECT_NEAR(ve.objective, oracle_alp_objective(s), 1e-6) << "seed " << seed;
  }
}

TEST(FactoredLp, ConstraintGenerationMatchesElimination) {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const int n = 4 + static_cast<int>(seed % 5);
    const Scenario s = testing::random_scenario(seed, n, {.edge_prob = 0.3});
    const FactoredModel m = make_model(s);
    const AlpResult ve = solve_with(m, ConstraintMethod::variable_elimination);
    const AlpResult cg = solve_with(m, ConstraintMethod::constraint_generation);
    EXPECT_NEAR(ve.objective, cg.objective, 1e-6 * (1.0 + std::abs(ve.objective)))
        << "seed " << seed;
    EXPECT_LE(max_diff(ve.weights, cg.weights), 1e-5) << "seed " << seed;
    EXPECT_GE(cg.rounds, 1);
  }
}

TEST(FactoredLp, ConstraintGenerationWithoutStabilization) {
  const Scenario s = testing::random_scenario(31, 7);
  const FactoredModel m = make_model(s);
  AlpConfig c;
  c.method = ConstraintMethod::constraint_generation;
  c.stabilization = 0.0;
  const AlpResult plain = solve_alp(m, c);
  const AlpResult ve = solve_with(m, ConstraintMethod::variable_elimination);
  EXPECT_NEAR(plain.objective, ve.objective, 1e-6 * (1.0 + std::abs(ve.objective)));
}

TEST(FactoredLp, OrderAndCompressionDoNotChangeTheSolution) {
  for (std::uint64_t seed = 40; seed < 46; ++seed) {
    const Scenario s = testing::random_scenario(seed, 6);
    const FactoredModel m = make_model(s);
    const AlpResult base = solve_with(m, ConstraintMethod::variable_elimination);
    const AlpResult fill =
        solve_with(m, ConstraintMethod::variable_elimination, OrderHeuristic::min_fill);
    const AlpResult raw = solve_with(m, ConstraintMethod::variable_elimination,
                                     OrderHeuristic::min_degree, false);
    EXPECT_NEAR(base.objective, fill.objective, 1e-6);
    EXPECT_NEAR(base.objective, raw.objective, 1e-6);
    EXPECT_LE(max_diff(base.weights, fill.weights), 1e-6);
    EXPECT_LE(max_diff(base.weights, raw.weights), 1e-6);
    EXPECT_LE(base.num_constraints, raw.num_constraints);
  }
}

TEST(FactoredLp, EliminationIsSmallerThanEnumeration) {
  const Scenario s = testing::random_scenario(50, 9, {.edge_prob = 0.15, .max_parents = 2});
  const FactoredModel m = make_model(s);
  AlpConfig c;
  const ConstraintSet ve = compile_alp(m, c);
  c.method = ConstraintMethod::enumeration;
  const ConstraintSet en = compile_alp(m, c);
  EXPECT_EQ(en.constraints.size(), std::size_t{1} << 18);
  EXPECT_LT(ve.constraints.size(), en.constraints.size() / 10);
  EXPECT_GT(ve.max_width(), 0);
}

TEST(FactoredLp, AlpDominatesOptimalValue) {
  for (std::uint64_t seed = 60; seed < 66; ++seed) {
    const Scenario s = testing::random_scenario(seed, 3 + static_cast<int>(seed % 2));
    const FactoredModel m = make_model(s);
    const Weights w = solve_alp(m).weights;
    const std::vector<double> v = testing::Brute(s).value_iteration(1e-9);
    for (std::uint64_t x = 0; x < v.size(); ++x) {
      EXPECT_GE(w.value(SystemState::from_mask(x, static_cast<std::size_t>(m.n()))),
                v[x] - 1e-6);
    }
  }
}

TEST(FactoredLp, IndicatorBasesAloneAreInfeasible) {
  const Scenario s = testing::random_scenario(70, 2, {.edge_prob = 1.0});
  AlpConfig c;
  c.constant_basis = false;
  EXPECT_THROW(solve_alp(make_model(s), c), SolverError);
}

TEST(FactoredLp, ObjectiveUsesStateRelevanceMarginals) {
  const LinearExpr uniform = build_objective(3, AlphaSpec::uniform, 3);
  const LinearExpr ones = build_objective(3, AlphaSpec::all_ones, 3);
  EXPECT_DOUBLE_EQ(uniform.coefficient(0), 0.5);
  EXPECT_DOUBLE_EQ(ones.coefficient(2), 1.0);
  EXPECT_DOUBLE_EQ(uniform.coefficient(3), 1.0);
}

TEST(FactoredLp, EnumerationGuard) {
  const Scenario s = testing::random_scenario(80, 11, {.edge_prob = 0.1});
  EXPECT_THROW(enumerate_constraints(make_model(s), true), SizeError);
}

TEST(FactoredLp, CompiledCarriesNoCompiledSetForCuts) {
  AlpConfig c;
  c.method = ConstraintMethod::constraint_generation;
  EXPECT_THROW(compile_alp(make_model(testing::random_scenario(1, 3)), c), ContractError);
}

TEST(FactoredLp, LpDumpListsEveryConstraint) {
  const FactoredModel m = make_model(testing::random_scenario(90, 4));
  const ConstraintSet cs = compile_alp(m, AlpConfig{});
  std::ostringstream os;
  write_lp_format(os, cs, build_objective(m, AlphaSpec::uniform, cs.bias_handle));
  const std::string text = os.str();
  EXPECT_NE(text.find("Minimize"), std::string::npos);
  EXPECT_NE(text.find("Subject To"), std::string::npos);
  EXPECT_NE(text.find("w_const free"), std::string::npos);
  EXPECT_EQ(text.substr(text.size() - 4), "End\n");
  std::size_t rows = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    rows += line.rfind(" c", 0) == 0 && line.find(':') != std::string::npos ? 1 : 0;
  }
  EXPECT_EQ(rows, cs.constraints.size());
}

TEST(FactoredLp, CaseStudyByCuts) {
  const FactoredModel m = make_model(builtin_case_study());
  AlpConfig c;
  c.method = ConstraintMethod::constraint_generation;
  c.alpha = AlphaSpec::all_ones;
  EXPECT_NEAR(solve_alp(m, c).objective, 989.295341923, 1e-6);
  c.alpha = AlphaSpec::uniform;
  EXPECT_NEAR(solve_alp(m, c).objective, 929.830574827, 1e-6);
}

} // namespace
} // namespace resplan
