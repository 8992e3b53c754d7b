// crowdsynth: command-line front end.
//
//   crowdsynth validate   --scenario PATH [--renormalize]
//   crowdsynth synthesize --scenario PATH [--reward-profile NAME] --out DIR
//   crowdsynth evaluate   --scenario PATH [--policy POLICY] [--reward-profile NAME] [--out DIR]
//   crowdsynth oracle     --scenario PATH [--mode per-time|per-time-state] [--grid-resolution K] [--out DIR]
//   crowdsynth simulate   --scenario PATH [--policy POLICY] --count N --seed U64 --out DIR
//   crowdsynth demo       --out DIR

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "crowdsynth/commands.hpp"

namespace {

void add_scenario_flags(CLI::App* cmd, crowdsynth::CommandOptions& opt) {
  cmd->add_option("--scenario", opt.scenario, "Scenario JSON file")->required();
  auto* strict = cmd->add_flag_callback(
      "--strict", [&opt] { opt.normalization = crowdsynth::NormalizationMode::kStrict; },
      "Reject pmf rows whose sum is off by more than 1e-9 (default)");
  auto* renorm = cmd->add_flag_callback(
      "--renormalize", [&opt] { opt.normalization = crowdsynth::NormalizationMode::kRenormalize; },
      "Rescale pmf rows that do not sum to 1");
  strict->excludes(renorm);
}

void add_profile_flag(CLI::App* cmd, crowdsynth::CommandOptions& opt) {
  cmd->add_option("--reward-profile", opt.reward_profile, "Reward profile name (default: first in file)");
}

void add_policy_flag(CLI::App* cmd, crowdsynth::CommandOptions& opt) {
  cmd->add_option("--policy", opt.policy,
                  "Policy JSON file, or 'synthesized' (default), 'target', 'contributor:<id>'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesize a finite-horizon Markov behavior from contributor behaviors"};
  app.require_subcommand(1);
  crowdsynth::CommandOptions opt;

  auto* validate = app.add_subcommand("validate", "Load and validate a scenario");
  add_scenario_flags(validate, opt);

  auto* synth = app.add_subcommand("synthesize", "Synthesize the agent policy and write its artifacts");
  add_scenario_flags(synth, opt);
  add_profile_flag(synth, opt);
  synth->add_option("--out", opt.out, "Run directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Exact cost of a policy");
  add_scenario_flags(evaluate, opt);
  add_profile_flag(evaluate, opt);
  add_policy_flag(evaluate, opt);
  evaluate->add_option("--out", opt.out, "Run directory for report.json");

  auto* oracle = app.add_subcommand("oracle", "Compare the synthesized bound with exhaustive oracles");
  add_scenario_flags(oracle, opt);
  add_profile_flag(oracle, opt);
  const std::map<std::string, crowdsynth::ScheduleMode> modes{
      {"per-time", crowdsynth::ScheduleMode::kPerTime},
      {"per-time-state", crowdsynth::ScheduleMode::kPerTimeAndState}};
  oracle->add_option("--mode", opt.mode, "Pure-schedule class")->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
  oracle->add_option("--grid-resolution", opt.grid_resolution, "Also search time-constant mixtures on this simplex grid")
      ->check(CLI::PositiveNumber);
  oracle->add_option("--out", opt.out, "Run directory for report.json");

  auto* simulate = app.add_subcommand("simulate", "Sample trajectories and estimate the cost by Monte Carlo");
  add_scenario_flags(simulate, opt);
  add_profile_flag(simulate, opt);
  add_policy_flag(simulate, opt);
  simulate->add_option("--count", opt.count, "Number of trajectories")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", opt.seed, "PRNG seed");
  simulate->add_option("--out", opt.out, "Run directory")->required();

  auto* demo = app.add_subcommand("demo", "Run the bundled 6-node route scenario for every reward profile");
  demo->add_option("--out", opt.out, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : crowdsynth::kExitValidation;
  }

  if (validate->parsed()) return crowdsynth::cmd_validate(opt, std::cout, std::cerr);
  if (synth->parsed()) return crowdsynth::cmd_synthesize(opt, std::cout, std::cerr);
  if (evaluate->parsed()) return crowdsynth::cmd_evaluate(opt, std::cout, std::cerr);
  if (oracle->parsed()) return crowdsynth::cmd_oracle(opt, std::cout, std::cerr);
  if (simulate->parsed()) return crowdsynth::cmd_simulate(opt, std::cout, std::cerr);
  if (demo->parsed()) return crowdsynth::cmd_demo(opt, std::cout, std::cerr);
  return crowdsynth::kExitInternal;
}
