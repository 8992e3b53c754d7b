// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "crowdsynth/commands.hpp"
#include "crowdsynth/demo.hpp"
#include "crowdsynth/evaluation.hpp"
#include "crowdsynth/simulator.hpp"
#include "crowdsynth/synthesis.hpp"
#include "test_support.hpp"

namespace cs = crowdsynth;
namespace fs = std::filesystem;

namespace {

constexpr double kChainRuleTol = 1e-9;
constexpr double kLogSumTol = 1e-12;
constexpr double kTightnessTol = 1e-9;
constexpr double kDominanceTol = 1e-9;
constexpr double kOracleTol = 1e-9;
constexpr double kMonteCarloSigmas = 4.0;
constexpr double kRoundTripTol = 1e-15;

constexpr double kDemoSeconds = 1.0;
constexpr double kChainRuleSeconds = 30.0;
constexpr double kMonteCarloSeconds = 60.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

Outcome demo_routes() {
  const auto start = Clock::now();
  const auto s = cs::demo::scenario();
  Outcome o;
  const std::vector<std::pair<std::string, std::vector<std::size_t>>> expected{
      {"favor-node-2", {1, 2, 4, 6, 6}}, {"favor-node-3", {1, 3, 5, 6, 6}}};
  for (const auto& [profile, route] : expected) {
    const auto policy = cs::synthesize(s.target, s.contributors, s.reward_profile(profile).schedule);
    const auto t = cs::most_likely_trajectory(policy.agent(s.target), s.target);
    std::vector<std::size_t> nodes;
    for (auto x : t.states) nodes.push_back(x + 1);
    std::size_t arrival = 0;
    while (arrival < nodes.size() && nodes[arrival] != 6) ++arrival;
    std::string shown;
    for (auto n : nodes) shown += (shown.empty() ? "" : "-") + std::to_string(n);
    o.detail += profile + " route " + shown + " reaches 6 at k=" + std::to_string(arrival) + "; ";
    o.pass = o.pass && nodes == route && arrival == 3;
  }
  const double secs = seconds_since(start);
  o.detail += "runtime " + fmt(secs) + " s (limit " + fmt(kDemoSeconds) + ")";
  o.pass = o.pass && secs < kDemoSeconds;
  return o;
}

Outcome chain_rule() {
  const auto start = Clock::now();
  Outcome o;
  const std::size_t count = 200;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < count; ++seed) {
    const auto s = cs::testing::random_instance(1000 + seed, 3, 4, 3, seed % 4 == 0 ? 0.5 : 0.0);
    const auto& rewards = s.rewards[0].schedule;
    const auto policy = cs::synthesize(s.target, s.contributors, rewards).agent(s.target);
    const double a = cs::evaluate_cost(policy, s.target, rewards).kl_part;
    const double b = cs::trajectory_enumeration_cost(policy, s.target, rewards).kl_part;
    worst = std::max(worst, std::abs(a - b));
  }
  const double secs = seconds_since(start);
  o.pass = worst <= kChainRuleTol && secs < kChainRuleSeconds;
  o.detail = std::to_string(count) + " instances, max |diff| " + fmt(worst) + " (tol " + fmt(kChainRuleTol) +
             "), runtime " + fmt(secs) + " s";
  return o;
}

Outcome logsum() {
  Outcome o;
  cs::Rng rng(2024, 3);
  std::size_t total = 0, sparse = 0, violations = 0;
  double worst = -cs::kInfinity;
  auto pmf = [&](std::size_t d, const std::vector<bool>& support) {
    std::vector<double> p(d, 0.0);
    double sum = 0.0;
    for (std::size_t x = 0; x < d; ++x)
      if (support[x]) sum += p[x] = -std::log(1.0 - rng.uniform()) + 1e-6;
    for (auto& v : p) v /= sum;
    return cs::StatePmf(std::move(p));
  };
  for (std::size_t i = 0; i < 1200; ++i) {
    const std::size_t d = 2 + rng.next_u64() % 5;
    const std::size_t s = 1 + rng.next_u64() % 4;
    const bool make_sparse = i % 4 == 0;
    std::vector<bool> target_support(d, true);
    if (make_sparse) target_support[rng.next_u64() % d] = false;
    if (std::none_of(target_support.begin(), target_support.end(), [](bool b) { return b; })) target_support[0] = true;
    const auto target = pmf(d, target_support);
    std::vector<cs::StatePmf> components;
    bool any_zero = false;
    for (std::size_t j = 0; j < s; ++j) {
      auto support = target_support;
      if (make_sparse)
        for (std::size_t x = 0; x < d; ++x)
          if (support[x] && rng.uniform() < 0.4) support[x] = false;
      if (std::none_of(support.begin(), support.end(), [](bool b) { return b; }))
        support = target_support;
      for (std::size_t x = 0; x < d; ++x) any_zero = any_zero || !support[x];
      components.push_back(pmf(d, support));
    }
    std::vector<double> w(s);
    double sum = 0.0;
    for (auto& v : w) sum += v = -std::log(1.0 - rng.uniform());
    for (auto& v : w) v /= sum;
    const auto check = cs::logsum_bound_check(cs::WeightVector(w), components, target);
    ++total;
    if (make_sparse && any_zero) ++sparse;
    worst = std::max(worst, check.lhs - check.rhs);
    if (!(check.lhs <= check.rhs + kLogSumTol)) ++violations;
  }
  o.pass = total >= 1000 && sparse >= 100 && violations == 0;
  o.detail = std::to_string(total) + " triples (" + std::to_string(sparse) + " sparse), violations " +
             std::to_string(violations) + ", max lhs-rhs " + fmt(worst) + " (tol " + fmt(kLogSumTol) + ")";
  return o;
}

struct SuiteStats {
  std::size_t instances = 0;
  std::size_t non_vertex = 0;
  std::size_t loose = 0;
  std::size_t dominated = 0;
  std::size_t dp_mismatch = 0;
  std::size_t per_time_checked = 0;
  std::size_t per_time_beats = 0;
  double worst_tightness = 0.0;
  double worst_dp = 0.0;
};

SuiteStats run_synthesis_suite() {
  SuiteStats st;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto s = cs::testing::random_instance(5000 + seed, 5, 5, 4, seed % 3 == 0 ? 0.4 : 0.0);
    const auto& rewards = s.rewards[0].schedule;
    const auto policy = cs::synthesize(s.target, s.contributors, rewards);
    ++st.instances;
    for (std::size_t k = 1; k <= s.horizon; ++k)
      for (std::size_t x = 0; x < s.states.size(); ++x) {
        const auto& dec = policy.decision(k, x);
        if (dec.weights.vertex_index() != dec.selected) ++st.non_vertex;
      }
    const double bound = cs::bound_value(policy, s.target);
    const double exact = cs::evaluate_cost(policy.agent(s.target), s.target, rewards).total;
    st.worst_tightness = std::max(st.worst_tightness, std::abs(exact - bound));
    if (!(std::abs(exact - bound) <= kTightnessTol)) ++st.loose;
    for (const auto& c : s.contributors)
      if (!(exact <= cs::evaluate_cost(cs::pure_contributor_policy(s.target, c), s.target, rewards).total +
                         kDominanceTol))
        ++st.dominated;

    const auto dp = cs::pure_schedule_oracle(s.target, s.contributors, rewards, cs::ScheduleMode::kPerTimeAndState, 0);
    st.worst_dp = std::max(st.worst_dp, std::abs(dp.cost.total - bound));
    if (!(std::abs(dp.cost.total - bound) <= kOracleTol)) ++st.dp_mismatch;
    if (cs::checked_power(s.contributors.size(), s.horizon, 10000) <= 10000) {
      ++st.per_time_checked;
      const auto per_time = cs::pure_schedule_oracle(s.target, s.contributors, rewards, cs::ScheduleMode::kPerTime);
      if (per_time.cost.total < dp.cost.total - kOracleTol) ++st.per_time_beats;
    }
  }
  return st;
}

Outcome synthesis_properties(const SuiteStats& st) {
  Outcome o;
  o.pass = st.instances >= 500 && st.non_vertex == 0 && st.loose == 0 && st.dominated == 0;
  o.detail = std::to_string(st.instances) + " instances; non-vertex " + std::to_string(st.non_vertex) +
             ", exact vs bound max |diff| " + fmt(st.worst_tightness) + " (tol " + fmt(kTightnessTol) +
             "), dominated by a pure policy " + std::to_string(st.dominated);
  return o;
}

Outcome oracle_equivalence(const SuiteStats& st) {
  Outcome o;
  o.pass = st.dp_mismatch == 0 && st.per_time_beats == 0 && st.per_time_checked > 0;
  o.detail = "DP vs bound max |diff| " + fmt(st.worst_dp) + " (tol " + fmt(kOracleTol) + "); per-time oracle on " +
             std::to_string(st.per_time_checked) + " instances beat it " + std::to_string(st.per_time_beats) +
             " times";
  return o;
}

Outcome monte_carlo() {
  const auto start = Clock::now();
  Outcome o;
  std::size_t outside = 0;
  double worst = 0.0;
  const std::size_t instances = 50;
  for (std::uint64_t seed = 0; seed < instances; ++seed) {
    const auto s = cs::testing::random_instance(9000 + seed, 5, 5, 4);
    const auto& rewards = s.rewards[0].schedule;
    const auto policy = cs::synthesize(s.target, s.contributors, rewards).agent(s.target);
    const auto est = cs::monte_carlo_cost(policy, s.target, rewards, 100000, seed);
    const double exact = cs::evaluate_cost(policy, s.target, rewards).total;
    const double z = est.standard_error > 0 ? std::abs(est.mean - exact) / est.standard_error
                                            : (std::abs(est.mean - exact) <= 1e-12 ? 0.0 : cs::kInfinity);
    worst = std::max(worst, z);
    if (!(z <= kMonteCarloSigmas)) ++outside;
  }
  const double secs = seconds_since(start);
  o.pass = outside == 0 && secs < kMonteCarloSeconds;
  o.detail = std::to_string(instances) + " instances x 1e5 samples, outside " + fmt(kMonteCarloSigmas) +
             " SE: " + std::to_string(outside) + ", max z " + fmt(worst) + ", runtime " + fmt(secs) + " s";
  return o;
}

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), dir).string(), cs::read_file(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

double max_abs_diff(const cs::Scenario& a, const cs::Scenario& b) {
  double worst = 0.0;
  auto rows = [&](const cs::TransitionKernel& x, const cs::TransitionKernel& y) {
    for (std::size_t i = 0; i < x.rows().size(); ++i)
      for (std::size_t j = 0; j < x.rows()[i].size(); ++j) worst = std::max(worst, std::abs(x(i, j) - y(i, j)));
  };
  for (std::size_t x = 0; x < a.states.size(); ++x)
    worst = std::max(worst, std::abs(a.target.initial[x] - b.target.initial[x]));
  for (std::size_t k = 1; k <= a.horizon; ++k) {
    rows(a.target.kernel(k), b.target.kernel(k));
    for (std::size_t c = 0; c < a.contributors.size(); ++c) rows(a.contributors[c].kernel(k), b.contributors[c].kernel(k));
    for (std::size_t r = 0; r < a.rewards.size(); ++r)
      for (std::size_t x = 0; x < a.states.size(); ++x)
        worst = std::max(worst, std::abs(a.rewards[r].schedule.at(k)[x] - b.rewards[r].schedule.at(k)[x]));
  }
  return worst;
}

Outcome determinism() {
  Outcome o;
  const auto root = fs::temp_directory_path() / "crowdsynth_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string demo = (cs::testing::source_dir() / "scenarios" / "demo_graph.json").string();

  using Command = std::function<int(const cs::CommandOptions&, std::ostream&, std::ostream&)>;
  const std::vector<std::pair<std::string, Command>> commands{
      {"synthesize", cs::cmd_synthesize}, {"simulate", cs::cmd_simulate}, {"oracle", cs::cmd_oracle},
      {"evaluate", cs::cmd_evaluate},     {"demo", cs::cmd_demo}};
  std::size_t files = 0, differing = 0, failures = 0;
  for (const auto& [name, cmd] : commands) {
    cs::CommandOptions opt;
    opt.scenario = demo;
    opt.reward_profile = "favor-node-3";
    opt.count = 20000;
    opt.seed = 99;
    opt.out = (root / name).string();
    std::vector<std::vector<std::pair<std::string, std::string>>> runs;
    for (int rep = 0; rep < 2; ++rep) {
      std::ostringstream out, err;
      if (cmd(opt, out, err) != cs::kExitOk) ++failures;
      runs.push_back(snapshot(root / name));
    }
    files += runs[0].size();
    if (runs[0] != runs[1]) ++differing;
  }

  double worst = 0.0;
  std::size_t mismatched = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = cs::testing::random_instance(700 + seed, 5, 5, 4, 0.3);
    cs::save_scenario(s, root / "roundtrip.json");
    const auto back = cs::load_scenario(root / "roundtrip.json");
    if (!(back == s)) ++mismatched;
    worst = std::max(worst, max_abs_diff(s, back));
  }
  fs::remove_all(root);
  o.pass = failures == 0 && differing == 0 && files > 0 && mismatched == 0 && worst <= kRoundTripTol;
  o.detail = std::to_string(commands.size()) + " commands run twice, " + std::to_string(files) +
             " files compared, differing commands " + std::to_string(differing) + ", failed runs " +
             std::to_string(failures) + "; 50 round trips, max |diff| " + fmt(worst) + " (tol " +
             fmt(kRoundTripTol) + ")";
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](const char* id, const char* title, const std::function<Outcome()>& body) {
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%s %s %s: %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
    std::fflush(stdout);
  };

  report("AC1", "demo routes", demo_routes);
  report("AC2", "chain-rule KL", chain_rule);
  report("AC3", "log-sum bound", logsum);
  SuiteStats suite;
  try {
    suite = run_synthesis_suite();
  } catch (const std::exception& e) {
    std::printf("synthesis suite aborted: %s\n", e.what());
  }
  report("AC4", "vertex selection, tightness, dominance", [&] { return synthesis_properties(suite); });
  report("AC5", "oracle equivalence", [&] { return oracle_equivalence(suite); });
  report("AC6", "Monte Carlo consistency", monte_carlo);
  report("AC7", "determinism and round trip", determinism);

  std::printf("%d of 7 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
