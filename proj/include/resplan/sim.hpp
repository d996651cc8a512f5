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
#include "resplan/network.hpp"
#include "resplan/policy.hpp"
#include "resplan/rng.hpp"

namespace resplan {

struct SimConfig {
  int horizon = 200;
  int reps = 50;
  std::uint64_t seed = 1;
  /// Transitions after an action during which the node cannot fail.
  int immunity = 0;
};

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + carry_; }

private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Remaining immune transitions per node.
struct ImmunityClock {
  int window = 0;
  std::vector<int> remaining;
};

/// Samples x' from the factored transition. Exactly one uniform is drawn per
/// node whatever the action or immunity, so runs that share a transition
/// stream stay aligned across policies.
inline SystemState step(const FactoredModel& model, const SystemState& x, const ActionVector& a,
                        Rng& rng, ImmunityClock* immunity = nullptr) {
  detail::check_dims(model, x.size(), "state");
  detail::check_dims(model, a.size(), "action");
  SystemState next(x.size());
  for (int i = 0; i < model.n(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double u = rng.uniform();
    const double up = local_transition(model, i, x, a[k]);
    bool value = u < up;
    if (immunity != nullptr) {
      int& left = immunity->remaining[k];
      if (left > 0) {
        value = true;
        --left;
      }
      if (a[k]) {
        left = immunity->window;
      }
    }
    next.set(k, value);
  }
  return next;
}

struct Trajectory {
  std::vector<SystemState> states; ///< T + 1 entries
  std::vector<ActionVector> actions;
  std::vector<double> rewards;
  std::uint64_t seed = 0; ///< transition-stream seed
};

/// T steps from x0. Transitions use stream 0 and the policy stream 1 of
/// replication `rep` under `master`.
inline Trajectory rollout(const FactoredModel& model, const Policy& policy, const SystemState& x0,
                          int horizon, std::uint64_t master, std::uint64_t rep = 0,
                          int immunity = 0) {
  if (horizon < 1) {
    throw RangeError("horizon must be >= 1");
  }
  if (immunity < 0) {
    throw RangeError("immunity window must be >= 0");
  }
  detail::check_dims(model, x0.size(), "initial state");
  Trajectory tr;
  tr.seed = Rng::derive_seed(master, rep, 0);
  Rng transitions(tr.seed);
  Rng decisions = Rng::for_stream(master, rep, 1);
  ImmunityClock clock{immunity, std::vector<int>(x0.size(), 0)};
  tr.states.push_back(x0);
  for (int t = 0; t < horizon; ++t) {
    const SystemState& x = tr.states.back();
    ActionVector a = policy(x, decisions);
    detail::check_dims(model, a.size(), "policy action");
    tr.rewards.push_back(reward(model, x, a));
    SystemState next = step(model, x, a, transitions, &clock);
    tr.actions.push_back(std::move(a));
    tr.states.push_back(std::move(next));
  }
  return tr;
}

/// Largest per-step reward: every reward table at its maximum, no costs.
inline double max_step_reward(const FactoredModel& model) {
  double total = 0.0;
  for (const RewardFactor& r : model.rewards) {
    double m = 0.0;
    for (double v : r.table) {
      m = std::max(m, v);
    }
    total += m;
  }
  return total;
}

struct ValueEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int reps = 0;
  int horizon = 0;
  /// gamma^T R_max / (1 - gamma): bound on the bias from truncating at T.
  double truncation_budget = 0.0;
  bool single_rep = false; ///< stderr is meaningless with one replication
  std::vector<double> samples;
};

namespace detail {

inline void check_sim(const SimConfig& cfg) {
  if (cfg.horizon < 1) {
    throw RangeError("horizon must be >= 1");
  }
  if (cfg.reps < 1) {
    throw RangeError("reps must be >= 1");
  }
  if (cfg.immunity < 0) {
    throw RangeError("immunity window must be >= 0");
  }
}

inline double discounted(const std::vector<double>& rewards, double gamma) {
  CompensatedSum sum;
  double g = 1.0;
  for (double r : rewards) {
    sum.add(g * r);
    g *= gamma;
  }
  return sum.value();
}

inline ValueEstimate summarize(std::vector<double> samples, const FactoredModel& model,
                               const SimConfig& cfg) {
  ValueEstimate e;
  e.reps = static_cast<int>(samples.size());
  e.horizon = cfg.horizon;
  CompensatedSum sum;
  for (double v : samples) {
    sum.add(v);
  }
  e.mean = sum.value() / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    CompensatedSum sq;
    for (double v : samples) {
      sq.add((v - e.mean) * (v - e.mean));
    }
    const double var = sq.value() / static_cast<double>(samples.size() - 1);
    e.std_error = std::sqrt(var / static_cast<double>(samples.size()));
  } else {
    e.single_rep = true;
  }
  e.truncation_budget =
      std::pow(model.gamma, cfg.horizon) * max_step_reward(model) / (1.0 - model.gamma);
  e.samples = std::move(samples);
  return e;
}

} // namespace detail

/// Monte Carlo estimate of the discounted value of `policy` from x0.
inline ValueEstimate estimate_value(const FactoredModel& model, const Policy& policy,
                                    const SystemState& x0, const SimConfig& cfg) {
  detail::check_sim(cfg);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(cfg.reps));
  for (int rep = 0; rep < cfg.reps; ++rep) {
    const Trajectory tr = rollout(model, policy, x0, cfg.horizon, cfg.seed,
                                  static_cast<std::uint64_t>(rep), cfg.immunity);
    samples.push_back(detail::discounted(tr.rewards, model.gamma));
  }
  return detail::summarize(std::move(samples), model, cfg);
}

struct SeriesRow {
  int step = 0;
  double mean_working = 0.0;
  double var_working = 0.0;
  double mean_reward = 0.0;
  double mean_connectivity = 0.0;
};

/// Working count of one layer across replications.
struct LayerSeries {
  Layer layer = Layer::generic;
  int nodes = 0;
  std::vector<double> mean;
  std::vector<double> var;
};

/// Row t describes state x_t and the reward collected at step t, t < T.
struct ResilienceSeries {
  std::vector<SeriesRow> rows;
  std::vector<LayerSeries> layers;
  int reps = 0;
};

inline ResilienceSeries resilience_series(const FactoredModel& model, const Policy& policy,
                                          const SystemState& x0, const SimConfig& cfg) {
  detail::check_sim(cfg);
  const auto steps = static_cast<std::size_t>(cfg.horizon);
  const auto reps = static_cast<double>(cfg.reps);
  std::vector<Layer> kinds;
  for (const Node& node : model.network.nodes) {
    if (std::find(kinds.begin(), kinds.end(), node.layer) == kinds.end()) {
      kinds.push_back(node.layer);
    }
  }
  std::sort(kinds.begin(), kinds.end());
  // working[t][rep] and per-layer counts, kept so the variance is two-pass.
  std::vector<std::vector<double>> working(steps);
  std::vector<std::vector<std::vector<double>>> by_layer(
      kinds.size(), std::vector<std::vector<double>>(steps));
  std::vector<CompensatedSum> reward_sum(steps);
  std::vector<CompensatedSum> conn_sum(steps);
  for (int rep = 0; rep < cfg.reps; ++rep) {
    const Trajectory tr = rollout(model, policy, x0, cfg.horizon, cfg.seed,
                                  static_cast<std::uint64_t>(rep), cfg.immunity);
    for (std::size_t t = 0; t < steps; ++t) {
      const SystemState& x = tr.states[t];
      working[t].push_back(static_cast<double>(x.count()));
      reward_sum[t].add(tr.rewards[t]);
      conn_sum[t].add(connectivity_metric(model.network, x));
      for (std::size_t l = 0; l < kinds.size(); ++l) {
        int up = 0;
        for (const Node& node : model.network.nodes) {
          if (node.layer == kinds[l] && x[static_cast<std::size_t>(node.id)]) {
            ++up;
          }
        }
        by_layer[l][t].push_back(static_cast<double>(up));
      }
    }
  }
  auto moments = [&](const std::vector<double>& v) {
    CompensatedSum s;
    for (double e : v) {
      s.add(e);
    }
    const double mean = s.value() / reps;
    CompensatedSum q;
    for (double e : v) {
      q.add((e - mean) * (e - mean));
    }
    const double var = v.size() > 1 ? q.value() / (reps - 1.0) : 0.0;
    return std::pair{mean, var};
  };
  ResilienceSeries out;
  out.reps = cfg.reps;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto [mean, var] = moments(working[t]);
    out.rows.push_back(SeriesRow{static_cast<int>(t), mean, var, reward_sum[t].value() / reps,
                                 conn_sum[t].value() / reps});
  }
  for (std::size_t l = 0; l < kinds.size(); ++l) {
    LayerSeries ls;
    ls.layer = kinds[l];
    for (const Node& node : model.network.nodes) {
      ls.nodes += node.layer == kinds[l] ? 1 : 0;
    }
    for (std::size_t t = 0; t < steps; ++t) {
      const auto [mean, var] = moments(by_layer[l][t]);
      ls.mean.push_back(mean);
      ls.var.push_back(var);
    }
    out.layers.push_back(std::move(ls));
  }
  return out;
}

inline void write_series_csv(std::ostream& out, const ResilienceSeries& s) {
  out << "step,mean_working,var_working,mean_reward,mean_connectivity\n";
  char buf[160];
  for (const SeriesRow& r : s.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g\n", r.step, r.mean_working,
                  r.var_working, r.mean_reward, r.mean_connectivity);
    out << buf;
  }
}

struct NamedPolicy {
  std::string name;
  Policy policy;
};

struct ComparisonRow {
  std::string name;
  ValueEstimate estimate;
};

/// One estimate per policy. Every policy sees the same seeds per replication
/// (common random numbers), so paired differences are sharp.
inline std::vector<ComparisonRow> compare_policies(const FactoredModel& model,
                                                   const std::vector<NamedPolicy>& policies,
                                                   const SystemState& x0, const SimConfig& cfg) {
  std::vector<ComparisonRow> rows;
  for (const NamedPolicy& p : policies) {
    rows.push_back(ComparisonRow{p.name, estimate_value(model, p.policy, x0, cfg)});
  }
  return rows;
}

struct PairedDifference {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean and standard error of a - b over replications paired by index.
inline PairedDifference paired_difference(const ValueEstimate& a, const ValueEstimate& b) {
  if (a.samples.size() != b.samples.size() || a.samples.empty()) {
    throw ContractError("paired_difference needs estimates over the same replications");
  }
  std::vector<double> d;
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    d.push_back(a.samples[k] - b.samples[k]);
  }
  CompensatedSum s;
  for (double v : d) {
    s.add(v);
  }
  const double n = static_cast<double>(d.size());
  PairedDifference out;
  out.mean = s.value() / n;
  if (d.size() > 1) {
    CompensatedSum q;
    for (double v : d) {
      q.add((v - out.mean) * (v - out.mean));
    }
    out.std_error = std::sqrt(q.value() / (n - 1.0) / n);
  }
  return out;
}

} // namespace resplan
