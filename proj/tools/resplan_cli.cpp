#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "resplan/resplan.hpp"

namespace {

using namespace resplan;
using nlohmann::json;

enum class Format { table, csv, json };

struct RunConfig {
  std::string subcommand;
  std::string scenario = "builtin:case-study";
  std::optional<double> gamma;
  std::uint64_t seed = 1;
  int reps = 50;
  int horizon = 200;
  int budget = 1;
  std::string policy = "optimal";
  std::string state;
  std::string output;
  std::string format = "table";
  std::optional<std::string> alpha;
  std::string order = "min-degree";
  std::string dump_lp;
  bool check_centralized = false;
  std::optional<int> immunity;
  std::string method = "auto";
  int scale = 100;
};

class UsageError : public Error {
public:
  using Error::Error;
};

std::string number(double v, const char* fmt = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

Format parse_format(const std::string& s) {
  if (s == "table") {
    return Format::table;
  }
  if (s == "csv") {
    return Format::csv;
  }
  if (s == "json") {
    return Format::json;
  }
  throw UsageError("--format must be table, csv or json");
}

OrderHeuristic parse_order(const std::string& s) {
  if (s == "min-degree" || s == "min_degree") {
    return OrderHeuristic::min_degree;
  }
  if (s == "min-fill" || s == "min_fill") {
    return OrderHeuristic::min_fill;
  }
  throw UsageError("--order must be min-degree or min-fill");
}

/// auto picks elimination for small models and constraint generation above.
ConstraintMethod parse_method(const std::string& s, int n) {
  if (s == "auto") {
    return n <= 12 ? ConstraintMethod::variable_elimination
                   : ConstraintMethod::constraint_generation;
  }
  if (s == "elimination") {
    return ConstraintMethod::variable_elimination;
  }
  if (s == "enumeration") {
    return ConstraintMethod::enumeration;
  }
  if (s == "cutting-plane") {
    return ConstraintMethod::constraint_generation;
  }
  throw UsageError("--method must be auto, elimination, enumeration or cutting-plane");
}

std::string_view method_name(ConstraintMethod m) {
  switch (m) {
  case ConstraintMethod::variable_elimination:
    return "elimination";
  case ConstraintMethod::enumeration:
    return "enumeration";
  case ConstraintMethod::constraint_generation:
    return "cutting-plane";
  }
  return "elimination";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open scenario file '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Scenario load(const RunConfig& cfg) {
  Scenario s;
  const std::string& src = cfg.scenario;
  if (src == "builtin:case-study") {
    s = builtin_case_study();
  } else if (src.rfind("builtin:demo-", 0) == 0) {
    int scale = 0;
    try {
      scale = std::stoi(src.substr(13));
    } catch (const std::exception&) {
      throw UsageError("builtin:demo-N needs an integer N");
    }
    s = demo_scenario(scale, cfg.seed);
  } else if (src.rfind("builtin:", 0) == 0) {
    throw UsageError("unknown builtin scenario '" + src +
                     "' (expected builtin:case-study or builtin:demo-N)");
  } else {
    s = load_scenario(read_file(src));
  }
  if (cfg.gamma) {
    s.gamma = *cfg.gamma;
  }
  if (cfg.alpha) {
    try {
      s.alpha = parse_alpha(*cfg.alpha);
    } catch (const ParseError& e) {
      throw UsageError(std::string("--alpha: ") + e.what());
    }
  }
  // Round trip so overrides pass through the scenario validator.
  return scenario_from_json(to_json(s));
}

/// Output sink: a file when --output is given, standard output otherwise.
class Sink {
public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) {
        throw ValidationError("cannot open output file '" + path + "'");
      }
    }
  }
  std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
  std::ofstream file_;
};

struct Context {
  RunConfig cfg;
  Format format = Format::table;
  Scenario scenario;
  FactoredModel model;
  std::vector<std::pair<std::string, std::string>> echo;
};

void add_echo(Context& ctx, std::string key, std::string value) {
  ctx.echo.emplace_back(std::move(key), std::move(value));
}

void write_echo(const Context& ctx, std::ostream& os) {
  for (const auto& [k, v] : ctx.echo) {
    os << "# " << k << ": " << v << '\n';
  }
}

json echo_json(const Context& ctx) {
  json j = json::object();
  for (const auto& [k, v] : ctx.echo) {
    j[k] = v;
  }
  return j;
}

Context make_context(const RunConfig& cfg, Scenario scenario) {
  Context ctx;
  ctx.cfg = cfg;
  ctx.format = parse_format(cfg.format);
  ctx.scenario = std::move(scenario);
  ctx.model = make_model(ctx.scenario);
  add_echo(ctx, "command", "resplan " + cfg.subcommand);
  add_echo(ctx, "scenario", cfg.scenario);
  add_echo(ctx, "scenario_name", ctx.scenario.name);
  add_echo(ctx, "scenario_hash", scenario_hash(ctx.scenario));
  add_echo(ctx, "nodes", std::to_string(ctx.model.n()));
  add_echo(ctx, "gamma", number(ctx.scenario.gamma) + (cfg.gamma ? " (override)" : ""));
  add_echo(ctx, "alpha",
           std::string(to_string(ctx.scenario.alpha)) + (cfg.alpha ? " (override)" : ""));
  return ctx;
}

void echo_sim(Context& ctx, int immunity) {
  add_echo(ctx, "seed", std::to_string(ctx.cfg.seed));
  add_echo(ctx, "reps", std::to_string(ctx.cfg.reps));
  add_echo(ctx, "horizon", std::to_string(ctx.cfg.horizon));
  add_echo(ctx, "immunity", std::to_string(immunity));
  add_echo(ctx, "rng", std::string(Rng::kAlgorithm));
}

AlpResult solve(Context& ctx) {
  AlpConfig alp;
  alp.alpha = ctx.scenario.alpha;
  alp.order = parse_order(ctx.cfg.order);
  alp.method = parse_method(ctx.cfg.method, ctx.model.n());
  add_echo(ctx, "method", std::string(method_name(alp.method)) +
                              (ctx.cfg.method == "auto" ? " (auto)" : ""));
  add_echo(ctx, "order", ctx.cfg.order);
  return solve_alp(ctx.model, alp);
}

SystemState parse_state(const Context& ctx) {
  if (ctx.cfg.state.empty()) {
    return SystemState(static_cast<std::size_t>(ctx.model.n()), true);
  }
  SystemState x = SystemState::parse(ctx.cfg.state);
  if (static_cast<int>(x.size()) != ctx.model.n()) {
    throw ValidationError("--state has " + std::to_string(x.size()) + " bits but the scenario has " +
                          std::to_string(ctx.model.n()) + " nodes");
  }
  return x;
}

SimConfig sim_config(const Context& ctx, int immunity) {
  SimConfig s;
  s.horizon = ctx.cfg.horizon;
  s.reps = ctx.cfg.reps;
  s.seed = ctx.cfg.seed;
  s.immunity = immunity;
  return s;
}

PolicySpec policy_spec(const Context& ctx) {
  PolicySpec spec;
  try {
    spec.kind = parse_policy_kind(ctx.cfg.policy);
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  }
  spec.budget = ctx.cfg.budget;
  return spec;
}

bool needs_weights(PolicyKind k) {
  return k == PolicyKind::optimal_distributed || k == PolicyKind::optimal_centralized ||
         k == PolicyKind::budgeted;
}

int cmd_solve(const RunConfig& cfg) {
  Context ctx = make_context(cfg, load(cfg));
  const AlpResult r = solve(ctx);
  if (!cfg.dump_lp.empty()) {
    AlpConfig alp;
    alp.order = parse_order(cfg.order);
    alp.method = parse_method(cfg.method, ctx.model.n()) == ConstraintMethod::enumeration
                     ? ConstraintMethod::enumeration
                     : ConstraintMethod::variable_elimination;
    const ConstraintSet cs = compile_alp(ctx.model, alp);
    std::ofstream lp(cfg.dump_lp, std::ios::binary);
    if (!lp) {
      throw ValidationError("cannot open LP dump file '" + cfg.dump_lp + "'");
    }
    write_lp_format(lp, cs, build_objective(ctx.model, ctx.scenario.alpha, cs.bias_handle));
    add_echo(ctx, "dump_lp", cfg.dump_lp);
  }
  Sink sink(cfg.output);
  std::ostream& os = sink.out();
  const auto& nodes = ctx.model.network.nodes;
  if (ctx.format == Format::json) {
    json doc;
    doc["config"] = echo_json(ctx);
    doc["objective"] = r.objective;
    doc["bias"] = r.weights.bias;
    json ws = json::array();
    for (int i = 0; i < ctx.model.n(); ++i) {
      ws.push_back({{"node", i},
                    {"name", nodes[static_cast<std::size_t>(i)].name},
                    {"weight", r.weights.w[static_cast<std::size_t>(i)]}});
    }
    doc["weights"] = std::move(ws);
    doc["stats"] = {{"status", lp::to_string(r.status)},
                    {"constraints", r.num_constraints},
                    {"variables", r.num_variables},
                    {"max_width", r.max_width},
                    {"iterations", r.iterations},
                    {"rounds", r.rounds}};
    os << doc.dump(2) << '\n';
    return 0;
  }
  write_echo(ctx, os);
  os << "# objective: " << number(r.objective, "%.12g") << '\n';
  os << "# status: " << lp::to_string(r.status) << '\n';
  os << "# constraints: " << r.num_constraints << '\n';
  os << "# variables: " << r.num_variables << '\n';
  os << "# max_width: " << r.max_width << '\n';
  os << "# iterations: " << r.iterations << '\n';
  os << "# rounds: " << r.rounds << '\n';
  if (ctx.format == Format::csv) {
    os << "node,name,weight\n";
    for (int i = 0; i < ctx.model.n(); ++i) {
      os << i << ',' << nodes[static_cast<std::size_t>(i)].name << ','
         << number(r.weights.w[static_cast<std::size_t>(i)], "%.12g") << '\n';
    }
    os << "bias,constant," << number(r.weights.bias, "%.12g") << '\n';
    return 0;
  }
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %-24s %16s\n", "node", "name", "weight");
  os << line;
  for (int i = 0; i < ctx.model.n(); ++i) {
    std::snprintf(line, sizeof line, "%-6d %-24s %16.8f\n", i,
                  nodes[static_cast<std::size_t>(i)].name.c_str(),
                  r.weights.w[static_cast<std::size_t>(i)]);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-6s %-24s %16.8f\n", "bias", "constant", r.weights.bias);
  os << line;
  return 0;
}

int cmd_act(const RunConfig& cfg) {
  Context ctx = make_context(cfg, load(cfg));
  const SystemState x = parse_state(ctx);
  const PolicySpec spec = policy_spec(ctx);
  add_echo(ctx, "state", x.to_string());
  add_echo(ctx, "policy", std::string(to_string(spec.kind)));
  if (spec.kind == PolicyKind::budgeted) {
    add_echo(ctx, "budget", std::to_string(spec.budget));
  }
  std::optional<Weights> weights;
  if (needs_weights(spec.kind) || cfg.check_centralized) {
    weights = solve(ctx).weights;
  }
  if (spec.kind == PolicyKind::randomized) {
    add_echo(ctx, "seed", std::to_string(cfg.seed));
  }
  Rng rng = Rng::for_stream(cfg.seed, 0, 1);
  const ActionVector a =
      make_policy(ctx.model, spec, weights ? &*weights : nullptr)(x, rng);
  int status = 0;
  std::string check = "not requested";
  double q_dist = 0.0;
  double q_cent = 0.0;
  std::string central;
  if (cfg.check_centralized) {
    if (static_cast<int>(ctx.model.controllable_ids().size()) > kCentralizedGuard) {
      check = "skipped: more than " + std::to_string(kCentralizedGuard) + " controllable nodes";
    } else {
      const ActionVector c = centralized_action(ctx.model, *weights, x);
      const ActionVector d = distributed_action(ctx.model, *weights, x);
      central = c.to_string();
      q_dist = q_value(ctx.model, *weights, x, d);
      q_cent = q_value(ctx.model, *weights, x, c);
      const bool equal = std::abs(q_dist - q_cent) <= 1e-12 * std::max(1.0, std::abs(q_cent));
      check = equal ? "equal" : "MISMATCH";
      status = equal ? 0 : 1;
    }
  }
  std::vector<int> acted;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]) {
      acted.push_back(static_cast<int>(i));
    }
  }
  Sink sink(cfg.output);
  std::ostream& os = sink.out();
  const auto& nodes = ctx.model.network.nodes;
  if (ctx.format == Format::json) {
    json doc;
    doc["config"] = echo_json(ctx);
    doc["action"] = a.to_string();
    doc["nodes"] = acted;
    if (weights) {
      doc["q_value"] = q_value(ctx.model, *weights, x, a);
    }
    doc["centralized_check"] = check;
    if (!central.empty()) {
      doc["centralized_action"] = central;
      doc["q_distributed"] = q_dist;
      doc["q_centralized"] = q_cent;
    }
    os << doc.dump(2) << '\n';
    return status;
  }
  write_echo(ctx, os);
  os << "# action: " << a.to_string() << '\n';
  if (weights) {
    os << "# q_value: " << number(q_value(ctx.model, *weights, x, a), "%.12g") << '\n';
  }
  os << "# centralized_check: " << check << '\n';
  if (!central.empty()) {
    os << "# centralized_action: " << central << '\n';
    os << "# q_distributed: " << number(q_dist, "%.17g") << '\n';
    os << "# q_centralized: " << number(q_cent, "%.17g") << '\n';
  }
  const std::vector<double> gains =
      weights ? action_gains(ctx.model, *weights, x) : std::vector<double>(x.size(), 0.0);
  if (ctx.format == Format::csv) {
    os << "node,name,state,action,gain\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
      os << i << ',' << nodes[i].name << ',' << x[i] << ',' << a[i] << ','
         << number(gains[i], "%.12g") << '\n';
    }
    return status;
  }
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %-24s %5s %6s %14s\n", "node", "name", "state", "action",
                "gain");
  os << line;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::snprintf(line, sizeof line, "%-6zu %-24s %5d %6s %14.6f\n", i, nodes[i].name.c_str(),
                  x[i] ? 1 : 0, a[i] ? (x[i] ? "maint" : "repair") : "-", gains[i]);
    os << line;
  }
  return status;
}

void write_series(std::ostream& os, Format format, const std::string& label,
                  const ResilienceSeries& s) {
  char line[200];
  if (format == Format::csv) {
    for (const SeriesRow& r : s.rows) {
      std::snprintf(line, sizeof line, "%s%s%d,%.10g,%.10g,%.10g,%.10g\n", label.c_str(),
                    label.empty() ? "" : ",", r.step, r.mean_working, r.var_working,
                    r.mean_reward, r.mean_connectivity);
      os << line;
    }
    return;
  }
  for (const SeriesRow& r : s.rows) {
    std::snprintf(line, sizeof line, "%-14s %6d %14.4f %14.4f %14.4f %14.4f\n", label.c_str(),
                  r.step, r.mean_working, r.var_working, r.mean_reward, r.mean_connectivity);
    os << line;
  }
}

json series_json(const ResilienceSeries& s) {
  json rows = json::array();
  for (const SeriesRow& r : s.rows) {
    rows.push_back({{"step", r.step},
                    {"mean_working", r.mean_working},
                    {"var_working", r.var_working},
                    {"mean_reward", r.mean_reward},
                    {"mean_connectivity", r.mean_connectivity}});
  }
  json layers = json::array();
  for (const LayerSeries& l : s.layers) {
    layers.push_back({{"layer", to_string(l.layer)},
                      {"nodes", l.nodes},
                      {"mean_working", l.mean},
                      {"var_working", l.var}});
  }
  return {{"reps", s.reps}, {"rows", std::move(rows)}, {"layers", std::move(layers)}};
}

const char* kSeriesHeader = "step,mean_working,var_working,mean_reward,mean_connectivity";

void print_series_header(std::ostream& os, Format format, bool labelled) {
  if (format == Format::csv) {
    os << (labelled ? "series," : "") << kSeriesHeader << '\n';
    return;
  }
  char line[200];
  std::snprintf(line, sizeof line, "%-14s %6s %14s %14s %14s %14s\n", "series", "step", "working",
                "var", "reward", "connectivity");
  os << line;
}

int cmd_simulate(const RunConfig& cfg) {
  Context ctx = make_context(cfg, load(cfg));
  const SystemState x0 = parse_state(ctx);
  const PolicySpec spec = policy_spec(ctx);
  const int immunity = cfg.immunity.value_or(0);
  add_echo(ctx, "policy", std::string(to_string(spec.kind)));
  add_echo(ctx, "state", x0.to_string());
  std::optional<Weights> weights;
  if (needs_weights(spec.kind)) {
    weights = solve(ctx).weights;
  }
  echo_sim(ctx, immunity);
  const Policy policy = make_policy(ctx.model, spec, weights ? &*weights : nullptr);
  const SimConfig sc = sim_config(ctx, immunity);
  const ResilienceSeries series = resilience_series(ctx.model, policy, x0, sc);
  const ValueEstimate v = estimate_value(ctx.model, policy, x0, sc);
  Sink sink(cfg.output);
  std::ostream& os = sink.out();
  if (ctx.format == Format::json) {
    json doc;
    doc["config"] = echo_json(ctx);
    doc["value"] = {{"mean", v.mean},
                    {"std_error", v.std_error},
                    {"truncation_budget", v.truncation_budget}};
    doc["series"] = series_json(series);
    os << doc.dump(2) << '\n';
    return 0;
  }
  write_echo(ctx, os);
  os << "# value_mean: " << number(v.mean, "%.10g") << '\n';
  os << "# value_std_error: " << number(v.std_error, "%.10g") << '\n';
  os << "# truncation_budget: " << number(v.truncation_budget, "%.6g") << '\n';
  print_series_header(os, ctx.format, false);
  write_series(os, ctx.format, ctx.format == Format::csv ? "" : cfg.policy, series);
  return 0;
}

int cmd_compare(const RunConfig& cfg) {
  Context ctx = make_context(cfg, load(cfg));
  const SystemState x0 = parse_state(ctx);
  const int immunity = cfg.immunity.value_or(0);
  add_echo(ctx, "state", x0.to_string());
  const AlpResult alp = solve(ctx);
  echo_sim(ctx, immunity);
  std::vector<NamedPolicy> policies;
  for (PolicyKind k : {PolicyKind::optimal_distributed, PolicyKind::repair_faulty,
                       PolicyKind::randomized, PolicyKind::no_action}) {
    PolicySpec spec;
    spec.kind = k;
    policies.push_back({std::string(to_string(k)), make_policy(ctx.model, spec, &alp.weights)});
  }
  const auto rows = compare_policies(ctx.model, policies, x0, sim_config(ctx, immunity));
  Sink sink(cfg.output);
  std::ostream& os = sink.out();
  if (ctx.format == Format::json) {
    json doc;
    doc["config"] = echo_json(ctx);
    doc["alp_objective"] = alp.objective;
    json list = json::array();
    for (const ComparisonRow& r : rows) {
      const PairedDifference d = paired_difference(rows.front().estimate, r.estimate);
      list.push_back({{"policy", r.name},
                      {"mean", r.estimate.mean},
                      {"std_error", r.estimate.std_error},
                      {"gap_to_optimal", d.mean},
                      {"gap_std_error", d.std_error}});
    }
    doc["policies"] = std::move(list);
    doc["truncation_budget"] = rows.front().estimate.truncation_budget;
    os << doc.dump(2) << '\n';
    return 0;
  }
  write_echo(ctx, os);
  os << "# alp_objective: " << number(alp.objective, "%.10g") << '\n';
  os << "# truncation_budget: " << number(rows.front().estimate.truncation_budget, "%.6g")
     << '\n';
  char line[200];
  if (ctx.format == Format::csv) {
    os << "policy,mean,std_error,gap_to_optimal,gap_std_error\n";
  } else {
    std::snprintf(line, sizeof line, "%-14s %12s %10s %14s %10s\n", "policy", "mean", "stderr",
                  "gap", "gap_se");
    os << line;
  }
  for (const ComparisonRow& r : rows) {
    const PairedDifference d = paired_difference(rows.front().estimate, r.estimate);
    std::snprintf(line, sizeof line,
                  ctx.format == Format::csv ? "%s,%.10g,%.10g,%.10g,%.10g\n"
                                            : "%-14s %12.4f %10.4f %14.4f %10.4f\n",
                  r.name.c_str(), r.estimate.mean, r.estimate.std_error, d.mean, d.std_error);
    os << line;
  }
  return 0;
}

int cmd_demo(const RunConfig& cfg) {
  RunConfig demo = cfg;
  demo.scenario = "builtin:demo-" + std::to_string(cfg.scale);
  Context ctx = make_context(demo, load(demo));
  const SystemState x0(static_cast<std::size_t>(ctx.model.n()), true);
  const int immunity = cfg.immunity.value_or(3);
  const AlpResult alp = solve(ctx);
  echo_sim(ctx, immunity);
  add_echo(ctx, "alp_objective", number(alp.objective, "%.10g"));
  const SimConfig sc = sim_config(ctx, immunity);
  PolicySpec idle;
  idle.kind = PolicyKind::no_action;
  PolicySpec best;
  best.kind = PolicyKind::optimal_distributed;
  const ResilienceSeries none =
      resilience_series(ctx.model, make_policy(ctx.model, idle), x0, sc);
  const ResilienceSeries opt =
      resilience_series(ctx.model, make_policy(ctx.model, best, &alp.weights), x0, sc);
  Sink sink(cfg.output);
  std::ostream& os = sink.out();
  if (ctx.format == Format::json) {
    json doc;
    doc["config"] = echo_json(ctx);
    doc["series"] = {{"no-action", series_json(none)}, {"optimal", series_json(opt)}};
    os << doc.dump(2) << '\n';
    return 0;
  }
  write_echo(ctx, os);
  print_series_header(os, ctx.format, true);
  write_series(os, ctx.format, "no-action", none);
  write_series(os, ctx.format, "optimal", opt);
  return 0;
}

int cmd_export(const RunConfig& cfg) {
  const Scenario s = load(cfg);
  Sink sink(cfg.output);
  sink.out() << to_json(s).dump(2) << '\n';
  return 0;
}

void common_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--scenario", cfg.scenario,
                  "Scenario file, builtin:case-study or builtin:demo-N");
  sub->add_option("--gamma", cfg.gamma, "Override the discount factor");
  sub->add_option("--alpha", cfg.alpha, "State-relevance weights: uniform or all-ones");
  sub->add_option("--output", cfg.output, "Write to this file instead of standard output");
}

void planning_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--order", cfg.order, "Elimination order: min-degree or min-fill");
  sub->add_option("--method", cfg.method,
                  "ALP constraints: auto, elimination, enumeration or cutting-plane");
  sub->add_option("--format", cfg.format, "table, csv or json");
  sub->add_option("--seed", cfg.seed, "Master seed");
}

void sim_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--reps", cfg.reps, "Replications");
  sub->add_option("--horizon", cfg.horizon, "Steps per replication");
  sub->add_option("--immunity", cfg.immunity, "Immune transitions after an action");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resilience planning for interdependent infrastructure networks"};
  app.require_subcommand(1);
  RunConfig cfg;

  CLI::App* solve_cmd = app.add_subcommand("solve", "Solve the ALP and print the weights");
  common_options(solve_cmd, cfg);
  planning_options(solve_cmd, cfg);
  solve_cmd->add_option("--dump-lp", cfg.dump_lp, "Write the compiled LP in LP format");

  CLI::App* act_cmd = app.add_subcommand("act", "Policy action at one state");
  common_options(act_cmd, cfg);
  planning_options(act_cmd, cfg);
  act_cmd->add_option("--state", cfg.state, "State bits, node 0 first (default all working)");
  act_cmd->add_option("--policy", cfg.policy, "Policy kind");
  act_cmd->add_option("--budget", cfg.budget, "Action budget for the budgeted policy");
  act_cmd->add_flag("--check-centralized", cfg.check_centralized,
                    "Compare Q-values with the exhaustive centralized action");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Resilience series of one policy");
  common_options(sim_cmd, cfg);
  planning_options(sim_cmd, cfg);
  sim_options(sim_cmd, cfg);
  sim_cmd->add_option("--policy", cfg.policy, "Policy kind");
  sim_cmd->add_option("--budget", cfg.budget, "Action budget for the budgeted policy");
  sim_cmd->add_option("--state", cfg.state, "Initial state bits (default all working)");

  CLI::App* cmp_cmd = app.add_subcommand("compare", "Value of four policies under shared seeds");
  common_options(cmp_cmd, cfg);
  planning_options(cmp_cmd, cfg);
  sim_options(cmp_cmd, cfg);
  cmp_cmd->add_option("--state", cfg.state, "Initial state bits (default all working)");

  CLI::App* demo_cmd =
      app.add_subcommand("demo", "Generated two-layer network: no action vs optimal series");
  demo_cmd->add_option("--scale", cfg.scale, "Number of nodes (even, >= 6)");
  demo_cmd->add_option("--gamma", cfg.gamma, "Override the discount factor");
  demo_cmd->add_option("--alpha", cfg.alpha, "State-relevance weights: uniform or all-ones");
  demo_cmd->add_option("--output", cfg.output, "Write to this file instead of standard output");
  planning_options(demo_cmd, cfg);
  sim_options(demo_cmd, cfg);

  CLI::App* export_cmd = app.add_subcommand("export-scenario", "Print a scenario as JSON");
  common_options(export_cmd, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  try {
    if (cfg.subcommand == "solve") {
      return cmd_solve(cfg);
    }
    if (cfg.subcommand == "act") {
      return cmd_act(cfg);
    }
    if (cfg.subcommand == "simulate") {
      return cmd_simulate(cfg);
    }
    if (cfg.subcommand == "compare") {
      return cmd_compare(cfg);
    }
    if (cfg.subcommand == "demo") {
      return cmd_demo(cfg);
    }
    return cmd_export(cfg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
