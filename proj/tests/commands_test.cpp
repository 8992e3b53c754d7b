#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "crowdsynth/commands.hpp"
#include "test_support.hpp"

namespace crowdsynth {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

template <typename Cmd>
Run run(Cmd cmd, const CommandOptions& opt) {
  std::ostringstream out, err;
  const int code = cmd(opt, out, err);
  return {code, out.str(), err.str()};
}

std::string demo_path() { return (testing::source_dir() / "scenarios" / "demo_graph.json").string(); }

Json read_json(const fs::path& p) { return Json::parse(read_file(p)); }

TEST(Validate, DemoScenario) {
  CommandOptions opt;
  opt.scenario = demo_path();
  const auto r = run(cmd_validate, opt);
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("states=6 horizon=4 contributors=2"), std::string::npos) << r.out;
}

TEST(Validate, MalformedRowReportsCoordinates) {
  const auto dir = testing::scratch_dir("cmd_validate_bad");
  auto text = read_file(demo_path());
  auto j = Json::parse(text);
  j["target"]["kernel"][0][0] = 0.5;
  write_file_atomic(dir / "bad.json", j.dump(2));
  CommandOptions opt;
  opt.scenario = (dir / "bad.json").string();
  const auto r = run(cmd_validate, opt);
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("target.kernel row from=0"), std::string::npos) << r.err;
  opt.normalization = NormalizationMode::kRenormalize;
  EXPECT_EQ(run(cmd_validate, opt).code, kExitOk);
}

TEST(Validate, MissingFileNamesThePath) {
  CommandOptions opt;
  opt.scenario = "/nonexistent/where.json";
  const auto r = run(cmd_validate, opt);
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("/nonexistent/where.json"), std::string::npos) << r.err;
}

TEST(Validate, ReportsInadmissibleContributor) {
  const auto dir = testing::scratch_dir("cmd_validate_note");
  auto s = demo::scenario();
  // Node 1 cannot reach node 4 under the target.
  auto rows = s.contributors[0].kernels[0].rows();
  rows[0] = StatePmf(std::vector<double>{0, 0.5, 0, 0.5, 0, 0});
  s.contributors[0].kernels[0] = TransitionKernel(rows);
  save_scenario(s, dir / "s.json");
  CommandOptions opt;
  opt.scenario = (dir / "s.json").string();
  const auto r = run(cmd_validate, opt);
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("'red' is not admissible (infinite KL at k=1, from state 1)"), std::string::npos) << r.out;
}

TEST(Synthesize, WritesArtifacts) {
  const auto dir = testing::scratch_dir("cmd_synth");
  CommandOptions opt;
  opt.scenario = demo_path();
  opt.out = dir.string();
  const auto r = run(cmd_synthesize, opt);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"pi_k1.csv", "pi_k2.csv", "pi_k3.csv", "pi_k4.csv", "selection.csv", "marginals.csv",
                        "route.csv", "policy.json", "report.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto report = read_json(dir / "report.json");
  EXPECT_EQ(report["reward_profile"], "favor-node-2");
  EXPECT_EQ(report["most_likely_route"], Json::parse("[1,2,4,6,6]"));
  EXPECT_NEAR(report["bound_value"].get<double>(), report["exact_cost"]["total"].get<double>(), 1e-9);
  EXPECT_TRUE(report["dominates_all_pure"].get<bool>());
  EXPECT_EQ(read_file(dir / "route.csv"), "k,state\n0,1\n1,2\n2,4\n3,6\n4,6\n");
  EXPECT_EQ(read_file(dir / "selection.csv").substr(0, 32), "k,from,selected,score_red,score_");
}

TEST(Synthesize, SingleContributorKernelsAreCopied) {
  const auto dir = testing::scratch_dir("cmd_synth_single");
  const auto s = testing::random_instance(21, 4, 3, 1);
  save_scenario(s, dir / "s.json");
  CommandOptions opt;
  opt.scenario = (dir / "s.json").string();
  opt.out = (dir / "out").string();
  ASSERT_EQ(run(cmd_synthesize, opt).code, kExitOk);
  for (std::size_t k = 1; k <= s.horizon; ++k)
    EXPECT_EQ(read_file(dir / "out" / ("pi_k" + std::to_string(k) + ".csv")),
              render_kernel_csv(s.contributors[0].kernel(k), s.states));
}

TEST(Synthesize, UnknownProfileAndMissingOut) {
  CommandOptions opt;
  opt.scenario = demo_path();
  opt.reward_profile = "no-such-profile";
  opt.out = testing::scratch_dir("cmd_synth_unknown").string();
  EXPECT_EQ(run(cmd_synthesize, opt).code, kExitValidation);
  opt.reward_profile.clear();
  opt.out.clear();
  EXPECT_EQ(run(cmd_synthesize, opt).code, kExitValidation);
}

TEST(Synthesize, NoAdmissibleContributorIsInfeasible) {
  const auto dir = testing::scratch_dir("cmd_infeasible");
  auto s = demo::scenario();
  for (auto& c : s.contributors) {
    auto rows = c.kernels[0].rows();
    rows[0] = StatePmf(std::vector<double>{0, 0, 0, 0, 0, 1});
    c.kernels[0] = TransitionKernel(rows);
  }
  save_scenario(s, dir / "s.json");
  CommandOptions opt;
  opt.scenario = (dir / "s.json").string();
  opt.out = (dir / "out").string();
  const auto r = run(cmd_synthesize, opt);
  EXPECT_EQ(r.code, kExitInfeasible);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Evaluate, TargetAgainstItselfIsZeroWithoutRewards) {
  const auto dir = testing::scratch_dir("cmd_eval_target");
  auto s = testing::random_instance(31, 4, 4, 2);
  s.rewards[0].schedule = RewardSchedule::zeros(s.horizon, s.states.size());
  save_scenario(s, dir / "s.json");
  CommandOptions opt;
  opt.scenario = (dir / "s.json").string();
  opt.policy = "target";
  const auto r = run(cmd_evaluate, opt);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(Json::parse(r.out)["total"].get<double>(), 0.0);
}

TEST(Evaluate, SavedPolicyMatchesSynthesisReport) {
  const auto dir = testing::scratch_dir("cmd_eval_policy");
  CommandOptions opt;
  opt.scenario = demo_path();
  opt.reward_profile = "favor-node-3";
  opt.out = (dir / "synth").string();
  ASSERT_EQ(run(cmd_synthesize, opt).code, kExitOk);
  const double reported = read_json(dir / "synth" / "report.json")["exact_cost"]["total"].get<double>();

  opt.out.clear();
  opt.policy = (dir / "synth" / "policy.json").string();
  const auto r = run(cmd_evaluate, opt);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NEAR(Json::parse(r.out)["total"].get<double>(), reported, 1e-12);
}

TEST(Evaluate, ContributorCostMatchesLibrary) {
  const auto s = demo::scenario();
  CommandOptions opt;
  opt.scenario = demo_path();
  opt.policy = "contributor:blue";
  const auto r = run(cmd_evaluate, opt);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const double expected =
      evaluate_cost(pure_contributor_policy(s.target, s.contributors[1]), s.target, s.rewards[0].schedule).total;
  EXPECT_EQ(Json::parse(r.out)["total"].get<double>(), expected);
  opt.policy = "contributor:green";
  EXPECT_EQ(run(cmd_evaluate, opt).code, kExitValidation);
}

TEST(Oracle, PerTimeStateMatchesBound) {
  CommandOptions opt;
  opt.scenario = demo_path();
  const auto r = run(cmd_oracle, opt);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_NEAR(j["gap"].get<double>(), 0.0, 1e-9);
}

TEST(Oracle, PerTimeNeverBeatsSynthesis) {
  CommandOptions opt;
  opt.scenario = demo_path();
  opt.mode = ScheduleMode::kPerTime;
  for (const char* profile : {"favor-node-2", "favor-node-3"}) {
    opt.reward_profile = profile;
    const auto r = run(cmd_oracle, opt);
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto j = Json::parse(r.out);
    EXPECT_EQ(j["evaluated"].get<std::size_t>(), 16u);
    EXPECT_GE(j["gap"].get<double>(), -1e-9) << profile;
  }
}

TEST(Oracle, GridGuardExitCode) {
  CommandOptions opt;
  opt.scenario = demo_path();
  opt.grid_resolution = 4;
  const auto r = run(cmd_oracle, opt);
  EXPECT_EQ(r.code, kExitGuard);
  EXPECT_NE(r.err.find("grid oracle refused"), std::string::npos) << r.err;
}

TEST(Oracle, GridSectionOnSmallInstance) {
  const auto dir = testing::scratch_dir("cmd_oracle_grid");
  RandomScenarioParams p;
  p.seed = 4;
  p.states = 3;
  p.horizon = 2;
  p.contributors = 2;
  save_scenario(generate_random_scenario(p), dir / "s.json");
  CommandOptions opt;
  opt.scenario = (dir / "s.json").string();
  opt.grid_resolution = 4;
  const auto r = run(cmd_oracle, opt);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j["grid"]["points"].get<std::size_t>(), 25u);
  EXPECT_GE(j["grid"]["gap_vs_synthesized"].get<double>(), -1e-9);
}

TEST(Simulate, WritesTrajectoriesAndReport) {
  const auto dir = testing::scratch_dir("cmd_simulate");
  CommandOptions opt;
  opt.scenario = demo_path();
  opt.count = 500;
  opt.seed = 11;
  opt.out = dir.string();
  const auto r = run(cmd_simulate, opt);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto csv = read_file(dir / "trajectories.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "trajectory,x0,x1,x2,x3,x4,log_prob_policy,log_prob_target");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 501u);
  const auto j = read_json(dir / "report.json");
  const double mean = j["monte_carlo"]["mean"].get<double>();
  const double se = j["monte_carlo"]["standard_error"].get<double>();
  EXPECT_LE(std::abs(mean - j["exact_cost"]["total"].get<double>()), 4.0 * se);
  opt.count = 0;
  EXPECT_EQ(run(cmd_simulate, opt).code, kExitValidation);
}

TEST(Simulate, ReproducibleOutputs) {
  const auto dir = testing::scratch_dir("cmd_simulate_repeat");
  CommandOptions opt;
  opt.scenario = demo_path();
  opt.count = 300;
  opt.seed = 5;
  opt.out = dir.string();
  ASSERT_EQ(run(cmd_simulate, opt).code, kExitOk);
  const auto first_csv = read_file(dir / "trajectories.csv");
  const auto first_report = read_file(dir / "report.json");
  ASSERT_EQ(run(cmd_simulate, opt).code, kExitOk);
  EXPECT_EQ(read_file(dir / "trajectories.csv"), first_csv);
  EXPECT_EQ(read_file(dir / "report.json"), first_report);
}

TEST(Demo, RoutesAndDominance) {
  const auto dir = testing::scratch_dir("cmd_demo");
  CommandOptions opt;
  opt.out = dir.string();
  const auto r = run(cmd_demo, opt);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(load_scenario(dir / "scenario.json") == demo::scenario());
  const auto a = read_json(dir / "favor-node-2" / "report.json");
  const auto b = read_json(dir / "favor-node-3" / "report.json");
  EXPECT_EQ(a["most_likely_route"], Json::parse("[1,2,4,6,6]"));
  EXPECT_EQ(b["most_likely_route"], Json::parse("[1,3,5,6,6]"));
  EXPECT_EQ(a["reaches_node_6_at"], 3);
  EXPECT_EQ(b["reaches_node_6_at"], 3);
  EXPECT_TRUE(a["dominates_all_pure"].get<bool>());
  EXPECT_TRUE(b["dominates_all_pure"].get<bool>());
  EXPECT_EQ(read_json(dir / "report.json")["profiles"].size(), 2u);
}

TEST(Formatting, NumbersRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-kInfinity), "-inf");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_TRUE(number_json(kInfinity).is_string());
}

}  // namespace
}  // namespace crowdsynth
