#ifndef CROWDSYNTH_COMMANDS_HPP_
#define CROWDSYNTH_COMMANDS_HPP_

// Batch commands behind the crowdsynth CLI. Each command writes its
// artifacts under one run directory with a report.json manifest and returns
// a process exit code:
//   0 success, 1 internal error, 2 validation failure,
//   3 no admissible contributor, 4 oracle size limit.

#include <charconv>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/demo.hpp"
#include "crowdsynth/evaluation.hpp"
#include "crowdsynth/scenario.hpp"
#include "crowdsynth/simulator.hpp"
#include "crowdsynth/synthesis.hpp"

namespace crowdsynth {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitValidation = 2,
  kExitInfeasible = 3,
  kExitGuard = 4,
};

struct CommandOptions {
  std::string scenario;
  std::string reward_profile;  // empty: first profile
  std::string out;
  std::string policy;          // path, "target", "synthesized" or "contributor:<id>"
  std::uint64_t seed = 0;
  std::size_t count = 10000;
  ScheduleMode mode = ScheduleMode::kPerTimeAndState;
  std::optional<std::size_t> grid_resolution;
  NormalizationMode normalization = NormalizationMode::kStrict;
};

// ---------------------------------------------------------------------------
// Formatting

/// Shortest decimal that parses back to the same double.
inline std::string format_number(double v) {
  if (v == kInfinity) return "inf";
  if (v == -kInfinity) return "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline Json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);  // JSON has no infinity literal
}

inline const char* to_string(ScheduleMode mode) {
  return mode == ScheduleMode::kPerTime ? "per-time" : "per-time-state";
}

inline std::string render_kernel_csv(const TransitionKernel& kernel, const StateSpace& states) {
  std::string out = "from";
  for (const auto& l : states.labels()) out += "," + to_string(l);
  out += "\n";
  for (std::size_t x = 0; x < kernel.size(); ++x) {
    out += to_string(states.label(x));
    for (double p : kernel.row(x).probs()) out += "," + format_number(p);
    out += "\n";
  }
  return out;
}

inline std::string render_selection_csv(const SynthesizedPolicy& policy, const StateSpace& states) {
  std::string out = "k,from,selected";
  for (const auto& id : policy.contributor_ids) out += ",score_" + id;
  out += "\n";
  for (std::size_t k = 1; k <= policy.horizon(); ++k) {
    for (std::size_t x = 0; x < states.size(); ++x) {
      const auto& dec = policy.decision(k, x);
      out += std::to_string(k) + "," + to_string(states.label(x)) + "," + policy.contributor_ids[dec.selected];
      for (double a : dec.scores) out += "," + format_number(a);
      out += "\n";
    }
  }
  return out;
}

/// Marginal pmf of x_k under the policy, one row per k = 0..N.
inline std::string render_marginals_csv(const AgentPolicy& policy, const StateSpace& states) {
  std::string out = "k";
  for (const auto& l : states.labels()) out += "," + to_string(l);
  out += "\n";
  const auto mu = propagate_marginals(policy);
  for (std::size_t k = 0; k < mu.size(); ++k) {
    out += std::to_string(k);
    for (double p : mu[k]) out += "," + format_number(p);
    out += "\n";
  }
  return out;
}

inline std::string render_route_csv(const Trajectory& t, const StateSpace& states) {
  std::string out = "k,state\n";
  for (std::size_t k = 0; k < t.states.size(); ++k) out += std::to_string(k) + "," + to_string(states.label(t.states[k])) + "\n";
  return out;
}

inline std::string render_trajectories_csv(const std::vector<Trajectory>& batch, const StateSpace& states) {
  std::string out = "trajectory";
  const std::size_t len = batch.empty() ? 0 : batch.front().states.size();
  for (std::size_t k = 0; k < len; ++k) out += ",x" + std::to_string(k);
  out += ",log_prob_policy,log_prob_target\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out += std::to_string(i);
    for (auto x : batch[i].states) out += "," + to_string(states.label(x));
    out += "," + format_number(batch[i].log_prob_policy) + "," + format_number(batch[i].log_prob_target) + "\n";
  }
  return out;
}

inline Json to_json(const CostBreakdown& cost) {
  Json steps = Json::array();
  for (std::size_t k = 0; k < cost.per_step.size(); ++k)
    steps.push_back({{"k", k + 1}, {"kl", number_json(cost.per_step[k].kl)}, {"reward", number_json(cost.per_step[k].reward)}});
  return {{"total", number_json(cost.total)},
          {"kl_part", number_json(cost.kl_part)},
          {"reward_part", number_json(cost.reward_part)},
          {"per_step", std::move(steps)}};
}

inline Json route_json(const Trajectory& t, const StateSpace& states) {
  Json out = Json::array();
  for (auto x : t.states) out.push_back(to_json(states.label(x)));
  return out;
}

inline Json policy_to_json(const AgentPolicy& policy, const Scenario& scenario) {
  return {{"policy_version", 1},
          {"scenario", scenario.name},
          {"states", labels_to_json(scenario.states)},
          {"initial", to_json(policy.initial)},
          {"kernels", to_json(policy.kernels)}};
}

inline AgentPolicy policy_from_json(const Json& j, const Scenario& scenario, NormalizationMode mode) {
  const auto& version = detail::require(j, "policy_version", "policy");
  if (!version.is_number_integer() || version.get<int>() != 1) throw ValidationError("unsupported policy_version");
  const auto& states = detail::require(j, "states", "policy");
  if (states != labels_to_json(scenario.states))
    throw ValidationError("policy states do not match the scenario's state labels");
  const std::size_t d = scenario.states.size();
  AgentPolicy policy;
  policy.initial = detail::read_pmf(detail::require(j, "initial", "policy"), d, mode, "policy.initial");
  policy.kernels = detail::read_kernels(j, d, scenario.horizon, mode, "policy");
  return policy;
}

// ---------------------------------------------------------------------------
// Shared plumbing

namespace detail {

inline Scenario load_for_command(const CommandOptions& opt) {
  if (opt.scenario.empty()) throw ValidationError("--scenario is required");
  try {
    return load_scenario(opt.scenario, opt.normalization);
  } catch (const IoError& e) {
    throw ValidationError(std::string(e.what()) + " (scenario path: " + opt.scenario + ")");
  }
}

inline std::string scenario_hash(const CommandOptions& opt) {
  return "fnv1a64:" + hex64(fnv1a64(read_file(opt.scenario)));
}

inline Json flags_json(const CommandOptions& opt) {
  Json f;
  f["scenario"] = opt.scenario;
  f["reward_profile"] = opt.reward_profile;
  f["policy"] = opt.policy;
  f["seed"] = opt.seed;
  f["count"] = opt.count;
  f["mode"] = to_string(opt.mode);
  f["grid_resolution"] = opt.grid_resolution ? Json(*opt.grid_resolution) : Json(nullptr);
  f["normalization"] = opt.normalization == NormalizationMode::kStrict ? "strict" : "renormalize";
  return f;
}

inline std::filesystem::path prepare_out(const CommandOptions& opt) {
  if (opt.out.empty()) throw ValidationError("--out is required");
  std::filesystem::path dir(opt.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
  return dir;
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

inline Json exclusions_json(const std::vector<Exclusion>& excluded, const StateSpace& states) {
  Json out = Json::array();
  for (const auto& e : excluded)
    out.push_back({{"id", e.id}, {"k", e.step}, {"from", to_json(states.label(e.from_state))}});
  return out;
}

inline ContributorSet admitted(const Scenario& s, const SynthesizedPolicy& policy) {
  ContributorSet out;
  for (auto i : policy.contributor_indices) out.push_back(s.contributors[i]);
  return out;
}

inline AgentPolicy resolve_policy(const CommandOptions& opt, const Scenario& s, const RewardSchedule& rewards) {
  const std::string& which = opt.policy;
  if (which.empty() || which == "synthesized") return synthesize(s.target, s.contributors, rewards).agent(s.target);
  if (which == "target") return s.target;
  if (which.rfind("contributor:", 0) == 0) {
    const auto id = which.substr(12);
    const auto* c = s.contributor(id);
    if (!c) throw ValidationError("unknown contributor '" + id + "'");
    return pure_contributor_policy(s.target, *c);
  }
  std::string text;
  try {
    text = read_file(which);
  } catch (const IoError& e) {
    throw ValidationError(e.what());
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    auto [line, col] = line_and_column(text, e.byte);
    throw ValidationError(which + ": JSON parse error at line " + std::to_string(line) + ", column " +
                          std::to_string(col));
  }
  return policy_from_json(j, s, opt.normalization);
}

struct SynthesisArtifacts {
  Json report;
  SynthesizedPolicy policy;
  AgentPolicy agent;
  Trajectory route;
  CostBreakdown exact;
};

// Synthesizes one reward profile and writes its artifacts into `dir`.
inline SynthesisArtifacts synthesize_into(const Scenario& s, const RewardProfile& profile,
                                          const std::filesystem::path& dir) {
  SynthesisArtifacts a;
  a.policy = synthesize(s.target, s.contributors, profile.schedule);
  a.agent = a.policy.agent(s.target);
  a.exact = evaluate_cost(a.agent, s.target, profile.schedule);
  a.route = most_likely_trajectory(a.agent, s.target);
  const double bound = bound_value(a.policy, s.target);

  Json files = Json::array();
  for (std::size_t k = 1; k <= a.policy.horizon(); ++k) {
    const auto name = "pi_k" + std::to_string(k) + ".csv";
    write_file_atomic(dir / name, render_kernel_csv(a.policy.kernels[k - 1], s.states));
    files.push_back(name);
  }
  write_file_atomic(dir / "selection.csv", render_selection_csv(a.policy, s.states));
  write_file_atomic(dir / "marginals.csv", render_marginals_csv(a.agent, s.states));
  write_file_atomic(dir / "route.csv", render_route_csv(a.route, s.states));
  write_json(dir / "policy.json", policy_to_json(a.agent, s));
  for (const char* f : {"selection.csv", "marginals.csv", "route.csv", "policy.json"}) files.push_back(f);

  Json selection = Json::array();
  for (std::size_t k = 1; k <= a.policy.horizon(); ++k) {
    Json row = Json::array();
    for (std::size_t x = 0; x < s.states.size(); ++x)
      row.push_back(a.policy.contributor_ids[a.policy.decision(k, x).selected]);
    selection.push_back(std::move(row));
  }
  Json pure = Json::object();
  bool dominates = true;
  for (auto i : a.policy.contributor_indices) {
    const auto& c = s.contributors[i];
    const double cost = evaluate_cost(pure_contributor_policy(s.target, c), s.target, profile.schedule).total;
    pure[c.id] = number_json(cost);
    dominates = dominates && a.exact.total <= cost;
  }

  a.report["reward_profile"] = profile.name;
  a.report["admitted"] = a.policy.contributor_ids;
  a.report["excluded"] = exclusions_json(a.policy.excluded, s.states);
  a.report["states"] = labels_to_json(s.states);
  a.report["selection"] = std::move(selection);
  a.report["bound_value"] = number_json(bound);
  a.report["exact_cost"] = to_json(a.exact);
  a.report["pure_costs"] = std::move(pure);
  a.report["dominates_all_pure"] = dominates;
  a.report["most_likely_route"] = route_json(a.route, s.states);
  a.report["files"] = std::move(files);
  return a;
}

template <typename F>
int guarded(std::ostream& err, const char* command, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  int code = kExitOk;
  try {
    code = body();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    code = kExitValidation;
  } catch (const StructuralError& e) {
    err << "error: " << e.what() << "\n";
    code = kExitValidation;
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << "\n";
    code = kExitInfeasible;
  } catch (const GuardError& e) {
    err << "error: " << e.what() << "\n";
    code = kExitGuard;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    code = kExitInternal;
  }
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  err << command << ": exit " << code << ", " << ms << " ms\n";
  return code;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline int cmd_validate(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, "validate", [&] {
    const auto s = detail::load_for_command(opt);
    out << "ok: '" << s.name << "' states=" << s.states.size() << " horizon=" << s.horizon
        << " contributors=" << s.contributors.size() << " reward_profiles=" << s.rewards.size() << "\n";
    const auto f = filter_contributors(s.target, s.contributors);
    for (const auto& e : f.excluded)
      out << "note: contributor '" << e.id << "' is not admissible (infinite KL at k=" << e.step << ", from state "
          << to_string(s.states.label(e.from_state)) << ")\n";
    return int{kExitOk};
  });
}

inline int cmd_synthesize(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, "synthesize", [&] {
    const auto s = detail::load_for_command(opt);
    const auto& profile = s.reward_profile(opt.reward_profile);
    const auto dir = detail::prepare_out(opt);
    auto a = detail::synthesize_into(s, profile, dir);
    Json report;
    report["command"] = "synthesize";
    report["scenario"] = s.name;
    report["scenario_hash"] = detail::scenario_hash(opt);
    report["flags"] = detail::flags_json(opt);
    for (auto& [k, v] : a.report.items()) report[k] = v;
    detail::write_json(dir / "report.json", report);
    out << report.dump(2) << "\n";
    return int{kExitOk};
  });
}

inline int cmd_evaluate(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, "evaluate", [&] {
    const auto s = detail::load_for_command(opt);
    const auto& profile = s.reward_profile(opt.reward_profile);
    const auto policy = detail::resolve_policy(opt, s, profile.schedule);
    const auto cost = evaluate_cost(policy, s.target, profile.schedule);
    Json j = to_json(cost);
    if (!opt.out.empty()) {
      Json report;
      report["command"] = "evaluate";
      report["scenario"] = s.name;
      report["scenario_hash"] = detail::scenario_hash(opt);
      report["flags"] = detail::flags_json(opt);
      report["reward_profile"] = profile.name;
      report["cost"] = j;
      detail::write_json(detail::prepare_out(opt) / "report.json", report);
    }
    out << j.dump(2) << "\n";
    return int{kExitOk};
  });
}

inline int cmd_oracle(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, "oracle", [&] {
    const auto s = detail::load_for_command(opt);
    const auto& profile = s.reward_profile(opt.reward_profile);
    const auto policy = synthesize(s.target, s.contributors, profile.schedule);
    const auto pool = detail::admitted(s, policy);
    const double bound = bound_value(policy, s.target);
    const auto oracle = pure_schedule_oracle(s.target, pool, profile.schedule, opt.mode);

    Json schedule = Json::array();
    for (const auto& step : oracle.schedule.choice) {
      Json row = Json::array();
      for (auto i : step) row.push_back(pool[i].id);
      schedule.push_back(std::move(row));
    }
    Json j;
    j["command"] = "oracle";
    j["scenario"] = s.name;
    j["scenario_hash"] = detail::scenario_hash(opt);
    j["flags"] = detail::flags_json(opt);
    j["reward_profile"] = profile.name;
    j["mode"] = to_string(opt.mode);
    j["method"] = oracle.method;
    j["evaluated"] = oracle.evaluated;
    j["oracle_cost"] = number_json(oracle.cost.total);
    j["oracle_schedule"] = std::move(schedule);
    j["synthesized_bound"] = number_json(bound);
    j["synthesized_exact"] = number_json(evaluate_cost(policy.agent(s.target), s.target, profile.schedule).total);
    j["gap"] = number_json(oracle.cost.total - bound);
    if (opt.grid_resolution) {
      const auto grid = simplex_grid_oracle(s.target, pool, profile.schedule, *opt.grid_resolution);
      Json weights = Json::array();
      for (const auto& w : grid.weights) weights.push_back(std::vector<double>(w.weights().begin(), w.weights().end()));
      j["grid"] = {{"resolution", *opt.grid_resolution},
                   {"points", grid.points},
                   {"cost", number_json(grid.cost.total)},
                   {"weights", std::move(weights)},
                   {"gap_vs_synthesized", number_json(grid.cost.total - bound)}};
    }
    if (!opt.out.empty()) detail::write_json(detail::prepare_out(opt) / "report.json", j);
    out << j.dump(2) << "\n";
    return int{kExitOk};
  });
}

inline int cmd_simulate(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, "simulate", [&] {
    const auto s = detail::load_for_command(opt);
    const auto& profile = s.reward_profile(opt.reward_profile);
    const auto policy = detail::resolve_policy(opt, s, profile.schedule);
    if (opt.count == 0) throw ValidationError("--count must be at least 1");
    const auto dir = detail::prepare_out(opt);
    const auto batch = sample_trajectories(policy, s.target, opt.count, opt.seed);
    write_file_atomic(dir / "trajectories.csv", render_trajectories_csv(batch, s.states));
    const auto mc = monte_carlo_cost(policy, s.target, profile.schedule, opt.count, opt.seed);
    const auto exact = evaluate_cost(policy, s.target, profile.schedule);

    Json j;
    j["command"] = "simulate";
    j["scenario"] = s.name;
    j["scenario_hash"] = detail::scenario_hash(opt);
    j["flags"] = detail::flags_json(opt);
    j["reward_profile"] = profile.name;
    j["monte_carlo"] = {{"mean", number_json(mc.mean)},
                        {"standard_error", number_json(mc.standard_error)},
                        {"count", mc.count},
                        {"seed", opt.seed}};
    j["exact_cost"] = to_json(exact);
    j["most_likely_route"] = route_json(most_likely_trajectory(policy, s.target), s.states);
    j["files"] = Json::array({"trajectories.csv"});
    detail::write_json(dir / "report.json", j);
    out << j.dump(2) << "\n";
    return int{kExitOk};
  });
}

/// Runs every reward profile of the bundled demo scenario; one subdirectory
/// per profile plus a summary report.json.
inline int cmd_demo(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, "demo", [&] {
    const auto s = demo::scenario();
    const auto dir = detail::prepare_out(opt);
    const auto text = dump_scenario(s);
    write_file_atomic(dir / "scenario.json", text);

    Json profiles = Json::array();
    for (const auto& profile : s.rewards) {
      const auto sub = dir / profile.name;
      std::filesystem::create_directories(sub);
      auto a = detail::synthesize_into(s, profile, sub);
      std::optional<std::size_t> arrival;
      for (std::size_t k = 0; k < a.route.states.size(); ++k) {
        if (a.route.states[k] == demo::kNodes - 1) {
          arrival = k;
          break;
        }
      }
      a.report["reaches_node_6_at"] = arrival ? Json(*arrival) : Json(nullptr);
      detail::write_json(sub / "report.json", a.report);
      profiles.push_back(a.report);
    }
    Json j;
    j["command"] = "demo";
    j["scenario"] = s.name;
    j["scenario_hash"] = "fnv1a64:" + hex64(fnv1a64(text));
    j["profiles"] = std::move(profiles);
    detail::write_json(dir / "report.json", j);

    for (const auto& p : j["profiles"]) {
      out << p["reward_profile"].get<std::string>() << ": route";
      for (const auto& x : p["most_likely_route"]) out << " " << x.dump();
      out << ", agent cost " << p["exact_cost"]["total"].dump();
      for (auto& [id, c] : p["pure_costs"].items()) out << ", " << id << " " << c.dump();
      out << "\n";
    }
    return int{kExitOk};
  });
}

}  // namespace crowdsynth

#endif  // CROWDSYNTH_COMMANDS_HPP_
