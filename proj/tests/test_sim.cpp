#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

namespace resplan {
namespace {

Policy fixed(const FactoredModel& m, PolicyKind kind) {
  PolicySpec spec;
  spec.kind = kind;
  return make_policy(m, spec);
}

// One isolated node that always fails when idle and is always repaired.
Scenario doomed_node() {
  Scenario s = testing::random_scenario(1, 1, {.explicit_cpt_prob = 0.0});
  s.cpts = {CptOverride{0, {0.0, 0.0, 1.0, 1.0}}};
  return s;
}

TEST(Sim, CompensatedSumKeepsSmallTerms) {
  CompensatedSum s;
  s.add(1e16);
  s.add(1.0);
  s.add(-1e16);
  EXPECT_DOUBLE_EQ(s.value(), 1.0);
  CompensatedSum t;
  for (int k = 0; k < 10; ++k) {
    t.add(0.1);
  }
  EXPECT_DOUBLE_EQ(t.value(), 1.0);
}

TEST(Sim, RolloutIsDeterministic) {
  const FactoredModel m = make_model(testing::random_scenario(3, 6));
  const Policy p = fixed(m, PolicyKind::randomized);
  const SystemState x0(6, true);
  const Trajectory a = rollout(m, p, x0, 40, 11, 3);
  const Trajectory b = rollout(m, p, x0, 40, 11, 3);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_EQ(a.rewards, b.rewards);
  const Trajectory c = rollout(m, p, x0, 40, 11, 4);
  EXPECT_NE(a.seed, c.seed);
  ASSERT_EQ(a.states.size(), 41U);
  ASSERT_EQ(a.rewards.size(), 40U);
}

TEST(Sim, PoliciesShareTransitionStream) {
  const FactoredModel m = make_model(testing::random_scenario(5, 7));
  // Randomized with zero probabilities never acts but still consumes the
  // policy stream; transitions must not notice.
  PolicySpec quiet;
  quiet.kind = PolicyKind::randomized;
  quiet.p_repair = 0.0;
  quiet.p_maintain = 0.0;
  const SystemState x0(7, true);
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    const Trajectory a = rollout(m, make_policy(m, quiet), x0, 60, 2, rep);
    const Trajectory b = rollout(m, fixed(m, PolicyKind::no_action), x0, 60, 2, rep);
    EXPECT_EQ(a.seed, b.seed);
    EXPECT_EQ(a.states, b.states);
  }
}

TEST(Sim, StepMatchesTransitionProbabilities) {
  const Scenario s = testing::random_scenario(9, 3);
  const FactoredModel m = make_model(s);
  const testing::Brute b(s);
  const SystemState x{1, 0, 1};
  const ActionVector a{0, 1, 0};
  Rng rng(5);
  std::vector<int> hits(8, 0);
  const int draws = 40000;
  for (int k = 0; k < draws; ++k) {
    ++hits[step(m, x, a, rng).to_mask()];
  }
  for (std::uint64_t y = 0; y < 8; ++y) {
    const double p = b.prob(x.to_mask(), a.to_mask(), y);
    EXPECT_NEAR(hits[y] / static_cast<double>(draws), p, 4.0 * std::sqrt(p * (1 - p) / draws) + 1e-9)
        << "next " << y;
  }
}

TEST(Sim, ImmunityHoldsForTheWindow) {
  const FactoredModel m = make_model(doomed_node());
  auto calls = std::make_shared<int>(0);
  const Policy once = [calls](const SystemState&, Rng&) {
    return ActionVector{(*calls)++ == 0 ? 1 : 0};
  };
  const Trajectory tr = rollout(m, once, SystemState{0}, 7, 1, 0, 3);
  std::string seen;
  for (const SystemState& x : tr.states) {
    seen += x.to_string();
  }
  EXPECT_EQ(seen, "01111000");
  const Policy idle = fixed(m, PolicyKind::no_action);
  const Trajectory none = rollout(m, idle, SystemState{1}, 3, 1, 0, 3);
  EXPECT_FALSE(none.states[1][0]);
}

TEST(Sim, RepairFaultyRestoresFailedNodes) {
  const FactoredModel m = make_model(doomed_node());
  const Trajectory tr =
      rollout(m, fixed(m, PolicyKind::repair_faulty), SystemState{0}, 10, 4);
  for (std::size_t t = 0; t < tr.states.size(); ++t) {
    EXPECT_EQ(tr.states[t][0], t % 2 == 1) << "step " << t;
  }
}

TEST(Sim, EstimateAveragesDiscountedReturns) {
  const FactoredModel m = make_model(testing::random_scenario(6, 5));
  const Policy p = fixed(m, PolicyKind::repair_faulty);
  const SystemState x0(5, true);
  const SimConfig cfg{.horizon = 30, .reps = 6, .seed = 9};
  const ValueEstimate e = estimate_value(m, p, x0, cfg);
  ASSERT_EQ(e.samples.size(), 6U);
  double total = 0.0;
  for (int rep = 0; rep < 6; ++rep) {
    const Trajectory tr = rollout(m, p, x0, 30, 9, static_cast<std::uint64_t>(rep));
    double v = 0.0;
    for (std::size_t t = 0; t < tr.rewards.size(); ++t) {
      v += std::pow(m.gamma, static_cast<double>(t)) * tr.rewards[t];
    }
    EXPECT_NEAR(e.samples[static_cast<std::size_t>(rep)], v, 1e-9);
    total += v;
  }
  EXPECT_NEAR(e.mean, total / 6.0, 1e-9);
  EXPECT_GT(e.std_error, 0.0);
  EXPECT_FALSE(e.single_rep);
  EXPECT_NEAR(e.truncation_budget,
              std::pow(m.gamma, 30.0) * max_step_reward(m) / (1.0 - m.gamma), 1e-12);
}

TEST(Sim, SingleReplicationIsFlagged) {
  const FactoredModel m = make_model(testing::random_scenario(6, 3));
  const ValueEstimate e = estimate_value(m, fixed(m, PolicyKind::no_action), SystemState(3, true),
                                         SimConfig{.horizon = 5, .reps = 1});
  EXPECT_TRUE(e.single_rep);
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(Sim, RejectsBadConfig) {
  const FactoredModel m = make_model(testing::random_scenario(6, 3));
  const Policy p = fixed(m, PolicyKind::no_action);
  const SystemState x0(3, true);
  EXPECT_THROW(estimate_value(m, p, x0, SimConfig{.horizon = 0}), RangeError);
  EXPECT_THROW(estimate_value(m, p, x0, SimConfig{.reps = 0}), RangeError);
  EXPECT_THROW(estimate_value(m, p, x0, SimConfig{.immunity = -1}), RangeError);
  EXPECT_THROW(estimate_value(m, p, SystemState(4, true), SimConfig{}), Error);
}

TEST(Sim, SeriesShape) {
  const FactoredModel m = make_model(builtin_case_study());
  const SystemState x0(static_cast<std::size_t>(m.n()), true);
  const ResilienceSeries s =
      resilience_series(m, fixed(m, PolicyKind::repair_faulty), x0,
                        SimConfig{.horizon = 25, .reps = 8, .seed = 3});
  ASSERT_EQ(s.rows.size(), 25U);
  EXPECT_EQ(s.reps, 8);
  EXPECT_DOUBLE_EQ(s.rows[0].mean_working, m.n());
  EXPECT_DOUBLE_EQ(s.rows[0].var_working, 0.0);
  EXPECT_DOUBLE_EQ(s.rows[0].mean_connectivity, 100.0);
  ASSERT_EQ(s.layers.size(), 2U);
  EXPECT_EQ(s.layers[0].nodes + s.layers[1].nodes, m.n());
  for (std::size_t t = 0; t < s.rows.size(); ++t) {
    EXPECT_GE(s.rows[t].var_working, 0.0);
    EXPECT_NEAR(s.layers[0].mean[t] + s.layers[1].mean[t], s.rows[t].mean_working, 1e-9);
    EXPECT_EQ(s.rows[t].step, static_cast<int>(t));
  }
}

TEST(Sim, PairedDifference) {
  ValueEstimate a;
  ValueEstimate b;
  a.samples = {3.0, 5.0, 7.0};
  b.samples = {1.0, 4.0, 4.0};
  const PairedDifference d = paired_difference(a, b);
  EXPECT_DOUBLE_EQ(d.mean, 2.0);
  EXPECT_NEAR(d.std_error, std::sqrt(1.0 / 3.0), 1e-12);
  b.samples.pop_back();
  EXPECT_THROW(paired_difference(a, b), ContractError);
}

TEST(Sim, CommonRandomNumbersSharpenComparisons) {
  const FactoredModel m = make_model(builtin_case_study());
  const SystemState x0(static_cast<std::size_t>(m.n()), true);
  const SimConfig cfg{.horizon = 60, .reps = 20, .seed = 5};
  const auto rows = compare_policies(
      m, {{"repair-faulty", fixed(m, PolicyKind::repair_faulty)},
          {"no-action", fixed(m, PolicyKind::no_action)}},
      x0, cfg);
  ASSERT_EQ(rows.size(), 2U);
  const PairedDifference d = paired_difference(rows[0].estimate, rows[1].estimate);
  EXPECT_GT(d.mean, 0.0);
  EXPECT_LT(d.std_error, std::hypot(rows[0].estimate.std_error, rows[1].estimate.std_error));
}

} // namespace
} // namespace resplan
