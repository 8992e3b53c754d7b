#ifndef CROWDSYNTH_SCENARIO_HPP_
#define CROWDSYNTH_SCENARIO_HPP_

// On-disk scenario format (JSON, see docs/scenario.schema.json), validation,
// and a seeded random-scenario generator.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/random.hpp"
#include "crowdsynth/synthesis.hpp"
#include "json.hpp"

namespace crowdsynth {

using Json = nlohmann::ordered_json;

inline constexpr int kScenarioVersion = 1;

struct RewardProfile {
  std::string name;
  RewardSchedule schedule;

  friend bool operator==(const RewardProfile&, const RewardProfile&) = default;
};

struct Scenario {
  std::string name;
  StateSpace states;
  std::size_t horizon = 0;
  Behavior target;
  ContributorSet contributors;
  std::vector<RewardProfile> rewards;
  Json metadata = Json::object();

  /// Empty name selects the first profile.
  const RewardProfile& reward_profile(const std::string& profile) const {
    if (profile.empty()) return rewards.at(0);
    for (const auto& r : rewards)
      if (r.name == profile) return r;
    std::string known;
    for (const auto& r : rewards) known += (known.empty() ? "" : ", ") + r.name;
    throw ValidationError("unknown reward profile '" + profile + "' (available: " + known + ")");
  }

  const Contributor* contributor(const std::string& id) const {
    for (const auto& c : contributors)
      if (c.id == id) return &c;
    return nullptr;
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Cross-checks dimensions and horizon of every component.
inline void validate_scenario(const Scenario& s) {
  const std::size_t d = s.states.size();
  if (d == 0) throw ValidationError("scenario has no states");
  if (s.horizon == 0) throw ValidationError("horizon must be positive");
  if (s.target.dim() != d) throw ValidationError("target initial pmf does not match the state space");
  if (s.target.horizon() != s.horizon) throw ValidationError("target horizon does not match 'horizon'");
  if (s.contributors.empty()) throw ValidationError("contributor list is empty");
  if (s.rewards.empty()) throw ValidationError("reward profile list is empty");
  try {
    s.target.check();
    check_contributors(s.target, s.contributors);
    for (const auto& r : s.rewards) r.schedule.check(s.horizon, d);
  } catch (const StructuralError& e) {
    throw ValidationError(e.what());
  }
  for (std::size_t i = 0; i < s.contributors.size(); ++i)
    for (std::size_t j = i + 1; j < s.contributors.size(); ++j)
      if (s.contributors[i].id == s.contributors[j].id)
        throw ValidationError("duplicate contributor id '" + s.contributors[i].id + "'");
  for (std::size_t i = 0; i < s.rewards.size(); ++i)
    for (std::size_t j = i + 1; j < s.rewards.size(); ++j)
      if (s.rewards[i].name == s.rewards[j].name)
        throw ValidationError("duplicate reward profile '" + s.rewards[i].name + "'");
}

// ---------------------------------------------------------------------------
// JSON decoding

namespace detail {

inline const Json& require(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + ": missing field '" + key + "'");
  return *it;
}

inline std::vector<double> read_numbers(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(where + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

inline StatePmf read_pmf(const Json& j, std::size_t d, NormalizationMode mode, const std::string& where) {
  auto probs = read_numbers(j, where);
  if (probs.size() != d)
    throw ValidationError(where + ": has " + std::to_string(probs.size()) + " entries, expected " +
                          std::to_string(d));
  try {
    return StatePmf(std::move(probs), mode);
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

inline TransitionKernel read_kernel(const Json& j, std::size_t d, NormalizationMode mode, const std::string& where) {
  if (!j.is_array() || j.size() != d)
    throw ValidationError(where + ": expected " + std::to_string(d) + " rows");
  std::vector<StatePmf> rows;
  rows.reserve(d);
  for (std::size_t x = 0; x < d; ++x) rows.push_back(read_pmf(j[x], d, mode, where + " row from=" + std::to_string(x)));
  return TransitionKernel(std::move(rows));
}

// Accepts either "kernels": [N kernels] or the time-homogeneous shorthand
// "kernel": one kernel replicated N times.
inline std::vector<TransitionKernel> read_kernels(const Json& obj, std::size_t d, std::size_t n,
                                                  NormalizationMode mode, const std::string& where) {
  if (obj.contains("kernels") && obj.contains("kernel"))
    throw ValidationError(where + ": give either 'kernels' or 'kernel', not both");
  if (obj.contains("kernel")) {
    auto k = read_kernel(obj["kernel"], d, mode, where + ".kernel");
    return std::vector<TransitionKernel>(n, k);
  }
  const auto& arr = require(obj, "kernels", where);
  if (!arr.is_array() || arr.size() != n)
    throw ValidationError(where + ".kernels: expected " + std::to_string(n) + " kernels (one per step)");
  std::vector<TransitionKernel> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    out.push_back(read_kernel(arr[k], d, mode, where + ".kernels k=" + std::to_string(k + 1)));
  return out;
}

inline std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& j, NormalizationMode mode = NormalizationMode::kStrict) {
  const std::string root = "scenario";
  const auto& version = detail::require(j, "scenario_version", root);
  if (!version.is_number_integer() || version.get<int>() != kScenarioVersion)
    throw ValidationError("unsupported scenario_version (expected " + std::to_string(kScenarioVersion) + ")");

  Scenario s;
  const auto& name = detail::require(j, "name", root);
  if (!name.is_string()) throw ValidationError("name: expected a string");
  s.name = name.get<std::string>();

  const auto& states = detail::require(j, "states", root);
  if (!states.is_array()) throw ValidationError("states: expected an array of labels");
  std::vector<StateLabel> labels;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].is_number_integer()) {
      labels.emplace_back(states[i].get<std::int64_t>());
    } else if (states[i].is_string()) {
      labels.emplace_back(states[i].get<std::string>());
    } else {
      throw ValidationError("states[" + std::to_string(i) + "]: expected an integer or string label");
    }
  }
  s.states = StateSpace(std::move(labels));
  const std::size_t d = s.states.size();

  const auto& horizon = detail::require(j, "horizon", root);
  if (!horizon.is_number_integer() || horizon.get<std::int64_t>() < 1)
    throw ValidationError("horizon: expected a positive integer");
  s.horizon = horizon.get<std::size_t>();

  const auto& target = detail::require(j, "target", root);
  s.target.initial = detail::read_pmf(detail::require(target, "initial", "target"), d, mode, "target.initial");
  s.target.kernels = detail::read_kernels(target, d, s.horizon, mode, "target");

  const auto& contributors = detail::require(j, "contributors", root);
  if (!contributors.is_array()) throw ValidationError("contributors: expected an array");
  for (std::size_t i = 0; i < contributors.size(); ++i) {
    const std::string where = "contributors[" + std::to_string(i) + "]";
    const auto& id = detail::require(contributors[i], "id", where);
    if (!id.is_string()) throw ValidationError(where + ".id: expected a string");
    s.contributors.push_back(Contributor{id.get<std::string>(), detail::read_kernels(contributors[i], d, s.horizon,
                                                                                     mode, where + " ('" + id.get<std::string>() + "')")});
  }

  const auto& rewards = detail::require(j, "rewards", root);
  if (!rewards.is_array()) throw ValidationError("rewards: expected an array");
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const std::string where = "rewards[" + std::to_string(i) + "]";
    const auto& r = rewards[i];
    const auto& rname = detail::require(r, "name", where);
    if (!rname.is_string()) throw ValidationError(where + ".name: expected a string");
    RewardProfile profile{rname.get<std::string>(), {}};
    if (r.contains("value") && r.contains("values"))
      throw ValidationError(where + ": give either 'values' or 'value', not both");
    if (r.contains("value")) {
      profile.schedule.values.assign(s.horizon, detail::read_numbers(r["value"], where + ".value"));
    } else {
      const auto& values = detail::require(r, "values", where);
      if (!values.is_array() || values.size() != s.horizon)
        throw ValidationError(where + ".values: expected " + std::to_string(s.horizon) + " vectors (one per step)");
      for (std::size_t k = 0; k < s.horizon; ++k)
        profile.schedule.values.push_back(detail::read_numbers(values[k], where + ".values k=" + std::to_string(k + 1)));
    }
    s.rewards.push_back(std::move(profile));
  }

  if (j.contains("metadata")) {
    if (!j["metadata"].is_object()) throw ValidationError("metadata: expected an object");
    s.metadata = j["metadata"];
  }
  validate_scenario(s);
  return s;
}

inline Scenario parse_scenario(const std::string& text, NormalizationMode mode = NormalizationMode::kStrict) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    auto [line, col] = detail::line_and_column(text, e.byte);
    throw ValidationError("JSON parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": " + e.what());
  }
  return scenario_from_json(j, mode);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Scenario load_scenario(const std::filesystem::path& path, NormalizationMode mode = NormalizationMode::kStrict) {
  const auto text = read_file(path);
  try {
    return parse_scenario(text, mode);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// JSON encoding

inline Json to_json(const StateLabel& label) {
  if (const auto* i = std::get_if<std::int64_t>(&label)) return *i;
  return std::get<std::string>(label);
}

inline Json to_json(const StatePmf& p) { return p.vector(); }

inline Json to_json(const TransitionKernel& kernel) {
  Json rows = Json::array();
  for (const auto& r : kernel.rows()) rows.push_back(to_json(r));
  return rows;
}

inline Json to_json(const std::vector<TransitionKernel>& kernels) {
  Json out = Json::array();
  for (const auto& k : kernels) out.push_back(to_json(k));
  return out;
}

inline Json labels_to_json(const StateSpace& states) {
  Json out = Json::array();
  for (const auto& l : states.labels()) out.push_back(to_json(l));
  return out;
}

/// Always writes the expanded per-step form.
inline Json to_json(const Scenario& s) {
  Json j;
  j["scenario_version"] = kScenarioVersion;
  j["name"] = s.name;
  j["states"] = labels_to_json(s.states);
  j["horizon"] = s.horizon;
  j["target"] = {{"initial", to_json(s.target.initial)}, {"kernels", to_json(s.target.kernels)}};
  Json contributors = Json::array();
  for (const auto& c : s.contributors) contributors.push_back({{"id", c.id}, {"kernels", to_json(c.kernels)}});
  j["contributors"] = std::move(contributors);
  Json rewards = Json::array();
  for (const auto& r : s.rewards) rewards.push_back({{"name", r.name}, {"values", r.schedule.values}});
  j["rewards"] = std::move(rewards);
  j["metadata"] = s.metadata;
  return j;
}

inline std::string dump_scenario(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

/// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into '" + path.string() + "'");
  }
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  validate_scenario(s);
  write_file_atomic(path, dump_scenario(s));
}

/// 64-bit FNV-1a, used as a content fingerprint in run reports.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return out;
}

// ---------------------------------------------------------------------------
// Random scenarios

struct RandomScenarioParams {
  std::uint64_t seed = 0;
  std::size_t states = 3;
  std::size_t horizon = 3;
  std::size_t contributors = 2;
  double sparsity = 0.0;  // probability of zeroing a contributor entry
  double reward_min = -1.0;
  double reward_max = 1.0;
};

namespace detail {

inline StatePmf random_pmf(Rng& rng, std::size_t d, double sparsity) {
  std::vector<double> w(d);
  bool any = false;
  for (auto& v : w) {
    const bool drop = sparsity > 0.0 && rng.uniform() < sparsity;
    // Exponential draws give Dirichlet(1) rows after normalization; the
    // offset keeps kept entries strictly positive.
    v = drop ? 0.0 : 1e-3 - std::log1p(-rng.uniform());
    any = any || v > 0.0;
  }
  if (!any) w[static_cast<std::size_t>(rng.next_u64() % d)] = 1.0;
  double sum = 0.0;
  for (double v : w) sum += v;
  for (auto& v : w) v /= sum;
  return StatePmf(std::move(w), NormalizationMode::kRenormalize);
}

inline std::vector<TransitionKernel> random_kernels(Rng& rng, std::size_t d, std::size_t n, double sparsity) {
  std::vector<TransitionKernel> out;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<StatePmf> rows;
    for (std::size_t x = 0; x < d; ++x) rows.push_back(random_pmf(rng, d, sparsity));
    out.emplace_back(std::move(rows));
  }
  return out;
}

}  // namespace detail

/// Deterministic in the seed. Target rows are strictly positive, so every
/// contributor is admissible.
inline Scenario generate_random_scenario(const RandomScenarioParams& p) {
  if (p.states < 1 || p.horizon < 1 || p.contributors < 1)
    throw StructuralError("random scenario needs at least one state, step and contributor");
  if (!(p.sparsity >= 0.0 && p.sparsity < 1.0)) throw StructuralError("sparsity must lie in [0, 1)");
  if (!(p.reward_min <= p.reward_max) || !std::isfinite(p.reward_min) || !std::isfinite(p.reward_max))
    throw StructuralError("reward range must be finite with min <= max");

  Rng rng(p.seed);
  Scenario s;
  s.name = "random-" + std::to_string(p.seed);
  s.states = StateSpace::integers(p.states, 0);
  s.horizon = p.horizon;
  s.target.initial = detail::random_pmf(rng, p.states, 0.0);
  s.target.kernels = detail::random_kernels(rng, p.states, p.horizon, 0.0);
  for (std::size_t i = 0; i < p.contributors; ++i)
    s.contributors.push_back(
        Contributor{"c" + std::to_string(i + 1), detail::random_kernels(rng, p.states, p.horizon, p.sparsity)});
  RewardProfile reward{"random", {}};
  for (std::size_t k = 0; k < p.horizon; ++k) {
    std::vector<double> r(p.states);
    for (auto& v : r) v = rng.uniform(p.reward_min, p.reward_max);
    reward.schedule.values.push_back(std::move(r));
  }
  s.rewards.push_back(std::move(reward));
  s.metadata = {{"generator", "mt19937_64/seed_seq"},
                {"seed", p.seed},
                {"sparsity", p.sparsity},
                {"reward_min", p.reward_min},
                {"reward_max", p.reward_max}};
  return s;
}

}  // namespace crowdsynth

#endif  // CROWDSYNTH_SCENARIO_HPP_
