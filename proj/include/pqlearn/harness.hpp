// Copyright 2026 The pqlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pqlearn/bellman.hpp"
#include "pqlearn/io.hpp"
#include "pqlearn/mdp.hpp"
#include "pqlearn/pq.hpp"
#include "pqlearn/rng.hpp"

namespace pqlearn {

/// Error in an experiment config; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeneratorSpec {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  double gamma = 0.9;
  std::uint64_t seed = 0;
  std::size_t branching = 0;

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

enum class Algorithm { kPq, kStandard };
enum class DistributionSource { kUniform, kFromMdp, kFile };

struct ExperimentConfig {
  std::optional<std::string> mdp_path;
  std::optional<GeneratorSpec> generator;
  DistributionSource distribution = DistributionSource::kUniform;
  std::string distribution_path;
  Algorithm algorithm = Algorithm::kPq;
  std::size_t outer_iters = 0;
  std::vector<std::uint64_t> inner_steps;
  std::uint64_t total_steps = 0;
  std::optional<double> epsilon;
  StepSchedule schedule;
  bool theory_schedule = true;
  InitKind init = InitKind::kZeros;
  double init_value = 0.0;
  std::vector<double> init_table;
  std::uint64_t seed = 0;
  std::size_t num_seeds = 1;
  std::uint64_t eval_every = 1000;
  bool global_step_index = false;
  bool boundary_v_gap = false;
  std::string output;
  std::size_t threads = 1;
  std::vector<std::string> warnings;
};

struct Problem {
  TabularMdp mdp;
  SamplingDistribution distribution;
};

inline constexpr const char* kOutDirEnv = "PQLEARN_OUT_DIR";

/// Loads or generates the MDP and distribution named by the config.
inline Problem resolve_problem(const ExperimentConfig& cfg) {
  Problem p;
  std::optional<SamplingDistribution> embedded;
  if (cfg.generator) {
    const auto& g = *cfg.generator;
    p.mdp = random_mdp(g.seed, g.num_states, g.num_actions, g.gamma,
                       g.branching);
  } else if (cfg.mdp_path) {
    MdpDocument doc = load_mdp(*cfg.mdp_path);
    p.mdp = std::move(doc.mdp);
    embedded = std::move(doc.distribution);
  } else {
    throw ConfigError("config: one of \"mdp\" or \"generator\" is required");
  }
  switch (cfg.distribution) {
    case DistributionSource::kUniform:
      p.distribution = uniform_distribution(p.mdp.num_states, p.mdp.num_actions);
      break;
    case DistributionSource::kFromMdp:
      if (!embedded) {
        throw ConfigError("distribution: MDP document has no distribution");
      }
      p.distribution = *embedded;
      break;
    case DistributionSource::kFile: {
      const auto text = detail::read_file(cfg.distribution_path);
      const auto j = detail::parse_json(text, "distribution");
      p.distribution = make_distribution(
          p.mdp.num_states, p.mdp.num_actions,
          detail::flatten_matrix(j, p.mdp.num_states, p.mdp.num_actions,
                                 "distribution"));
      break;
    }
  }
  return p;
}

namespace detail {

inline std::string resolve_path(const std::string& base_dir,
                                const std::string& path) {
  if (base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).string();
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: field \"") + key +
                      "\" has the wrong type");
  }
}

inline std::uint64_t get_count(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
    throw ConfigError(std::string("config: field \"") + key +
                      "\" must be a positive integer");
  }
  return v.get<std::uint64_t>();
}

}  // namespace detail

/// Parses an experiment config document.
///
/// Keys:
///   mdp | generator {S, A, gamma, seed, branching}   problem source
///   distribution   "uniform" | "mdp" | {"file": path}
///   algorithm      "pq" | "standard"
///   T, N           outer iterations and inner steps (N: integer or array)
///   total_steps    sample budget for "standard"
///   epsilon        target accuracy; fills T and N from the sample-complexity
///                  formulas when they are omitted
///   beta, lambda   step-size schedule (theory schedule when omitted)
///   init           "zeros" | number | [[s][a]] table
///   seed, seeds, eval_every, global_step_index, v_gap_at_boundaries,
///   output, threads
/// Relative paths resolve against `base_dir`. Unknown keys are rejected.
inline ExperimentConfig parse_config(const std::string& text,
                                     const std::string& base_dir = "") {
  static const char* const kKeys[] = {
      "mdp",        "generator", "distribution", "algorithm",
      "T",          "N",         "total_steps",  "epsilon",
      "beta",       "lambda",    "init",         "seed",
      "seeds",      "eval_every", "global_step_index",
      "v_gap_at_boundaries",     "output",       "threads"};
  nlohmann::json j;
  try {
    j = detail::parse_json(text, "config");
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(std::begin(kKeys), std::end(kKeys),
                     [&](const char* k) { return key == k; })) {
      throw ConfigError("config: unknown key \"" + key + "\"");
    }
  }

  ExperimentConfig cfg;
  if (j.contains("mdp") == j.contains("generator")) {
    throw ConfigError("config: exactly one of \"mdp\" or \"generator\" is required");
  }
  if (j.contains("mdp")) {
    cfg.mdp_path =
        detail::resolve_path(base_dir, detail::get_field<std::string>(j, "mdp"));
  } else {
    const auto& g = j["generator"];
    if (!g.is_object()) throw ConfigError("config: \"generator\" must be an object");
    for (const auto& [key, value] : g.items()) {
      if (key != "S" && key != "A" && key != "gamma" && key != "seed" &&
          key != "branching") {
        throw ConfigError("config: unknown key \"generator." + key + "\"");
      }
    }
    for (const char* k : {"S", "A", "gamma"}) {
      if (!g.contains(k)) {
        throw ConfigError(std::string("config: missing key \"generator.") + k +
                          "\"");
      }
    }
    GeneratorSpec gen;
    gen.num_states = detail::get_count(g, "S");
    gen.num_actions = detail::get_count(g, "A");
    gen.gamma = detail::get_field<double>(g, "gamma");
    gen.seed = g.contains("seed") ? detail::get_field<std::uint64_t>(g, "seed") : 0;
    gen.branching =
        g.contains("branching") ? detail::get_count(g, "branching") : gen.num_states;
    if (!(gen.gamma > 0.0 && gen.gamma < 1.0)) {
      throw ConfigError("config: \"generator.gamma\" must lie in (0, 1)");
    }
    if (gen.branching > gen.num_states) {
      throw ConfigError("config: \"generator.branching\" must be <= S");
    }
    cfg.generator = gen;
  }

  if (j.contains("distribution")) {
    const auto& d = j["distribution"];
    if (d == "uniform") {
      cfg.distribution = DistributionSource::kUniform;
    } else if (d == "mdp") {
      cfg.distribution = DistributionSource::kFromMdp;
    } else if (d.is_object() && d.size() == 1 && d.contains("file") &&
               d["file"].is_string()) {
      cfg.distribution = DistributionSource::kFile;
      cfg.distribution_path =
          detail::resolve_path(base_dir, d["file"].get<std::string>());
    } else {
      throw ConfigError(
          "config: \"distribution\" must be \"uniform\", \"mdp\" or {\"file\": path}");
    }
  }

  if (j.contains("algorithm")) {
    const auto name = detail::get_field<std::string>(j, "algorithm");
    if (name == "pq") {
      cfg.algorithm = Algorithm::kPq;
    } else if (name == "standard") {
      cfg.algorithm = Algorithm::kStandard;
    } else {
      throw ConfigError("config: \"algorithm\" must be \"pq\" or \"standard\"");
    }
  }

  if (j.contains("epsilon")) {
    cfg.epsilon = detail::get_field<double>(j, "epsilon");
    if (!(*cfg.epsilon > 0.0)) throw ConfigError("config: \"epsilon\" must be > 0");
  }
  if (j.contains("T")) cfg.outer_iters = detail::get_count(j, "T");
  if (j.contains("N")) {
    const auto& n = j["N"];
    if (n.is_array()) {
      for (std::size_t i = 0; i < n.size(); ++i) {
        if (!n[i].is_number_unsigned() || n[i].get<std::uint64_t>() == 0) {
          throw ConfigError("config: \"N[" + std::to_string(i) +
                            "]\" must be a positive integer");
        }
        cfg.inner_steps.push_back(n[i].get<std::uint64_t>());
      }
      if (cfg.inner_steps.empty()) throw ConfigError("config: \"N\" is empty");
    } else {
      cfg.inner_steps = {detail::get_count(j, "N")};
    }
  }
  if (j.contains("total_steps")) cfg.total_steps = detail::get_count(j, "total_steps");

  if (j.contains("beta") != j.contains("lambda")) {
    throw ConfigError("config: \"beta\" and \"lambda\" must be given together");
  }
  if (j.contains("beta")) {
    cfg.theory_schedule = false;
    cfg.schedule.beta = detail::get_field<double>(j, "beta");
    cfg.schedule.lambda = detail::get_field<double>(j, "lambda");
    if (!(cfg.schedule.beta > 0.0)) throw ConfigError("config: \"beta\" must be > 0");
    if (!(cfg.schedule.lambda > 0.0)) {
      throw ConfigError("config: \"lambda\" must be > 0");
    }
  }

  if (j.contains("init")) {
    const auto& init = j["init"];
    if (init == "zeros") {
      cfg.init = InitKind::kZeros;
    } else if (init.is_number()) {
      cfg.init = InitKind::kConstant;
      cfg.init_value = init.get<double>();
    } else if (init.is_array()) {
      cfg.init = InitKind::kCustom;
    } else {
      throw ConfigError("config: \"init\" must be \"zeros\", a number or a table");
    }
  }

  if (j.contains("seed")) cfg.seed = detail::get_field<std::uint64_t>(j, "seed");
  if (j.contains("seeds")) cfg.num_seeds = detail::get_count(j, "seeds");
  if (j.contains("eval_every")) cfg.eval_every = detail::get_count(j, "eval_every");
  if (j.contains("global_step_index")) {
    cfg.global_step_index = detail::get_field<bool>(j, "global_step_index");
  }
  if (j.contains("v_gap_at_boundaries")) {
    cfg.boundary_v_gap = detail::get_field<bool>(j, "v_gap_at_boundaries");
  }
  if (j.contains("output")) {
    cfg.output =
        detail::resolve_path(base_dir, detail::get_field<std::string>(j, "output"));
  }
  if (j.contains("threads")) cfg.threads = detail::get_count(j, "threads");

  // Everything below needs the concrete problem.
  Problem problem;
  try {
    problem = resolve_problem(cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: cannot resolve problem: ") + e.what());
  }
  const auto& mdp = problem.mdp;
  const auto& d = problem.distribution;
  if (!shapes_match(mdp, d)) {
    throw ConfigError("config: distribution shape does not match the MDP");
  }
  if (cfg.init == InitKind::kCustom) {
    try {
      cfg.init_table = detail::flatten_matrix(j["init"], mdp.num_states,
                                              mdp.num_actions, "init");
    } catch (const FormatError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  const double init_bound = 1.0 / (1.0 - mdp.gamma);
  const bool init_ok =
      cfg.init == InitKind::kCustom
          ? std::all_of(cfg.init_table.begin(), cfg.init_table.end(),
                        [&](double v) { return std::abs(v) <= init_bound; })
          : std::abs(cfg.init_value) <= init_bound;
  if (!init_ok) {
    throw ConfigError("config: \"init\" entries must lie in [-1/(1-gamma), 1/(1-gamma)]");
  }

  if (cfg.theory_schedule) cfg.schedule = theory_schedule(d);
  else if (!is_theory_compliant(cfg.schedule, d)) {
    cfg.warnings.push_back("schedule: beta/lambda exceeds c/(8L); outside the "
                           "regime covered by the inner convergence rate");
  }

  if (cfg.algorithm == Algorithm::kPq) {
    if (cfg.inner_steps.empty()) {
      if (!cfg.epsilon) {
        throw ConfigError("config: \"N\" is required for algorithm pq "
                          "(or give \"epsilon\")");
      }
      const auto n = required_inner_steps(*cfg.epsilon, mdp.gamma,
                                          mdp.num_states, mdp.num_actions,
                                          d.c_min(), d.l_max());
      cfg.inner_steps = {n};
      cfg.warnings.push_back("N: filled from the sample-complexity formula, N = " +
                             std::to_string(n) + " samples per outer iteration");
    }
    if (cfg.outer_iters == 0) {
      if (!cfg.epsilon) {
        throw ConfigError("config: \"T\" is required for algorithm pq "
                          "(or give \"epsilon\")");
      }
      cfg.outer_iters = std::max<std::uint64_t>(
          1, required_outer_iters(*cfg.epsilon, mdp.gamma));
    }
    if (cfg.inner_steps.size() != 1 && cfg.inner_steps.size() != cfg.outer_iters) {
      throw ConfigError("config: \"N\" must be an integer or have T entries");
    }
    if (cfg.total_steps != 0) {
      throw ConfigError("config: \"total_steps\" applies to algorithm standard only");
    }
  } else {
    if (cfg.total_steps == 0) {
      throw ConfigError("config: \"total_steps\" is required for algorithm standard");
    }
    if (cfg.outer_iters != 0 || !cfg.inner_steps.empty()) {
      throw ConfigError("config: \"T\" and \"N\" apply to algorithm pq only");
    }
  }
  if (cfg.epsilon && !epsilon_in_bounded_regime(*cfg.epsilon, mdp.gamma)) {
    cfg.warnings.push_back(
        "epsilon: exceeds (1-gamma)^2; the bounded-estimate regime does not apply");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  const auto base = std::filesystem::path(path).parent_path().string();
  return parse_config(detail::read_file(path), base);
}

/// Canonical JSON of the resolved config (defaults applied). Output location
/// and thread count are excluded since they do not affect results.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  if (cfg.generator) {
    const auto& g = *cfg.generator;
    j["generator"] = {{"S", g.num_states},   {"A", g.num_actions},
                      {"gamma", g.gamma},    {"seed", g.seed},
                      {"branching", g.branching}};
  } else {
    j["mdp"] = *cfg.mdp_path;
  }
  switch (cfg.distribution) {
    case DistributionSource::kUniform: j["distribution"] = "uniform"; break;
    case DistributionSource::kFromMdp: j["distribution"] = "mdp"; break;
    case DistributionSource::kFile:
      j["distribution"] = {{"file", cfg.distribution_path}};
      break;
  }
  if (cfg.algorithm == Algorithm::kPq) {
    j["algorithm"] = "pq";
    j["T"] = cfg.outer_iters;
    if (cfg.inner_steps.size() == 1) j["N"] = cfg.inner_steps.front();
    else j["N"] = cfg.inner_steps;
  } else {
    j["algorithm"] = "standard";
    j["total_steps"] = cfg.total_steps;
  }
  if (cfg.epsilon) j["epsilon"] = *cfg.epsilon;
  j["beta"] = cfg.schedule.beta;
  j["lambda"] = cfg.schedule.lambda;
  switch (cfg.init) {
    case InitKind::kZeros: j["init"] = "zeros"; break;
    case InitKind::kConstant: j["init"] = cfg.init_value; break;
    case InitKind::kCustom: j["init"] = cfg.init_table; break;
  }
  j["seed"] = cfg.seed;
  j["seeds"] = cfg.num_seeds;
  j["eval_every"] = cfg.eval_every;
  j["global_step_index"] = cfg.global_step_index;
  j["v_gap_at_boundaries"] = cfg.boundary_v_gap;
  return j;
}

/// 64-bit FNV-1a of the canonical config JSON, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(cfg).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Per-seed run seed: derive_seed(config seed, seed index).
inline std::uint64_t run_seed(const ExperimentConfig& cfg, std::size_t index) {
  return derive_seed(cfg.seed, index);
}

inline PqConfig to_pq_config(const ExperimentConfig& cfg, const TabularMdp& mdp,
                             std::uint64_t seed) {
  PqConfig pq;
  if (cfg.algorithm == Algorithm::kStandard) {
    StandardQConfig s;
    s.total_steps = cfg.total_steps;
    s.schedule = cfg.schedule;
    s.seed = seed;
    s.eval_every = cfg.eval_every;
    pq = as_pq_config(s);
  } else {
    pq.outer_iters = cfg.outer_iters;
    pq.inner_steps = cfg.inner_steps;
    pq.schedule = cfg.schedule;
    pq.seed = seed;
    pq.eval_every = cfg.eval_every;
    pq.global_step_index = cfg.global_step_index;
    pq.boundary_v_gap = cfg.boundary_v_gap;
  }
  pq.init = cfg.init;
  pq.init_value = cfg.init_value;
  if (cfg.init == InitKind::kCustom) {
    pq.init_table = QTable(mdp.num_states, mdp.num_actions, cfg.init_table);
  }
  return pq;
}

struct MeanStd {
  double mean = 0.0;
  /// Sample standard deviation over sqrt(count); 0 for a single value.
  double standard_error = 0.0;
};

inline MeanStd mean_and_se(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    const double n = static_cast<double>(xs.size());
    out.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

struct SummaryRow {
  std::string config_hash;
  std::size_t num_seeds = 0;
  std::uint64_t samples_used = 0;
  MeanStd q_inf_error;
  MeanStd v_gap;
  double wall_time_s = 0.0;
};

inline constexpr const char* kSummaryHeader =
    "config_hash,num_seeds,samples_used,mean_q_inf_error,se_q_inf_error,"
    "mean_v_gap,se_v_gap";

/// Summary CSV. Wall time is reported in metadata.json so that this file is
/// reproducible byte for byte.
inline std::string summary_to_csv(const SummaryRow& row) {
  std::string out = kSummaryHeader;
  out += '\n';
  out += row.config_hash + ',' + std::to_string(row.num_seeds) + ',' +
         std::to_string(row.samples_used) + ',' +
         format_real(row.q_inf_error.mean) + ',' +
         format_real(row.q_inf_error.standard_error) + ',' +
         format_real(row.v_gap.mean) + ',' + format_real(row.v_gap.standard_error) +
         '\n';
  return out;
}

/// Seed averages of the synchronized-target records, one row per k.
struct OuterSummary {
  std::size_t k = 0;
  MeanStd q_inf_error;
  MeanStd epsilon;
};

inline constexpr const char* kOuterHeader =
    "outer_k,mean_q_inf_error,se_q_inf_error,mean_epsilon,se_epsilon";

struct ExperimentResult {
  SummaryRow summary;
  std::vector<RunTrace> traces;
  std::vector<std::uint64_t> seeds;
  std::vector<OuterSummary> outer;
  Oracle oracle;
};

inline std::vector<OuterSummary> summarize_outer(
    const std::vector<RunTrace>& traces) {
  std::vector<OuterSummary> out;
  if (traces.empty()) return out;
  const std::size_t count = traces.front().outer.size();
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> err;
    std::vector<double> eps;
    for (const auto& t : traces) {
      err.push_back(t.outer[k].q_inf_error);
      if (k > 0) eps.push_back(t.outer[k].epsilon);
    }
    OuterSummary row;
    row.k = k;
    row.q_inf_error = mean_and_se(err);
    if (k > 0) row.epsilon = mean_and_se(eps);
    else row.epsilon = {kNotComputed, kNotComputed};
    out.push_back(row);
  }
  return out;
}

/// Runs every seed of `cfg` against a precomputed oracle. Seeds are spread
/// over `cfg.threads` workers; results are stored by seed index so the
/// output does not depend on scheduling.
inline ExperimentResult execute_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const Problem problem = resolve_problem(cfg);
  ExperimentResult result;
  result.oracle = make_oracle(problem.mdp);
  result.traces.resize(cfg.num_seeds);
  for (std::size_t i = 0; i < cfg.num_seeds; ++i) {
    result.seeds.push_back(run_seed(cfg, i));
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cfg.num_seeds);
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.num_seeds; i = next++) {
      try {
        const PqConfig pq =
            to_pq_config(cfg, problem.mdp, result.seeds[i]);
        result.traces[i] =
            run_pq(problem.mdp, problem.distribution, pq, &result.oracle);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(
      1, std::min(cfg.threads, cfg.num_seeds));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<double> q_err;
  std::vector<double> v_gap;
  for (const auto& t : result.traces) {
    q_err.push_back(t.records.back().q_inf_error);
    v_gap.push_back(t.records.back().v_gap);
  }
  auto& row = result.summary;
  row.config_hash = config_hash(cfg);
  row.num_seeds = cfg.num_seeds;
  row.samples_used = result.traces.front().samples_used;
  row.q_inf_error = mean_and_se(q_err);
  row.v_gap = mean_and_se(v_gap);
  result.outer = summarize_outer(result.traces);
  row.wall_time_s = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  return result;
}

inline std::string trace_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trace_seed_%04zu.csv", index);
  return buf;
}

/// Measured errors below this are flagged as limited by oracle accuracy.
inline constexpr double kOracleLimitedError = 1e-8;

/// Writes trace_seed_NNNN.csv per seed, summary.csv, outer.csv (pq only) and
/// metadata.json into `dir`.
inline void write_experiment(const ExperimentConfig& cfg,
                             const ExperimentResult& result,
                             const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  for (std::size_t i = 0; i < result.traces.size(); ++i) {
    detail::write_file((root / trace_file_name(i)).string(),
                       trace_to_csv(result.traces[i]));
  }
  detail::write_file((root / "summary.csv").string(),
                     summary_to_csv(result.summary));
  if (!result.outer.empty()) {
    std::string outer = kOuterHeader;
    outer += '\n';
    for (const auto& r : result.outer) {
      outer += std::to_string(r.k) + ',' + format_real(r.q_inf_error.mean) +
               ',' + format_real(r.q_inf_error.standard_error) + ',' +
               format_real(r.epsilon.mean) + ',' +
               format_real(r.epsilon.standard_error) + '\n';
    }
    detail::write_file((root / "outer.csv").string(), outer);
  }
  bool oracle_limited = false;
  for (const auto& t : result.traces) {
    oracle_limited =
        oracle_limited || t.records.back().q_inf_error < kOracleLimitedError;
  }
  nlohmann::json meta;
  meta["config"] = config_to_json(cfg);
  meta["config_hash"] = result.summary.config_hash;
  meta["run_seeds"] = result.seeds;
  meta["seed_derivation"] = "derive_seed(seed, index) = mix64(seed ^ mix64(index)), mix64 = SplitMix64";
  meta["oracle_tolerance"] = result.oracle.tolerance;
  meta["oracle_limited"] = oracle_limited;
  meta["warnings"] = cfg.warnings;
  meta["wall_time_s"] = result.summary.wall_time_s;
  detail::write_file((root / "metadata.json").string(), meta.dump(2) + "\n");
}

/// Output directory: explicit value, else $PQLEARN_OUT_DIR, else ./pqlearn_out.
inline std::string default_output_dir(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
    return env;
  }
  return "pqlearn_out";
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result = execute_experiment(cfg);
  write_experiment(cfg, result, default_output_dir(cfg.output));
  return result;
}

// ---------------------------------------------------------------------------
// Matched-budget comparison
// ---------------------------------------------------------------------------

struct ComparisonRow {
  std::uint64_t samples_used = 0;
  MeanStd pq;
  MeanStd standard;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  /// Sample-complexity annotations at the PQ config's epsilon (NaN when it
  /// has none, policy bound NaN when epsilon > 1).
  double bound_q = kNotComputed;
  double bound_policy = kNotComputed;
  ExperimentResult pq;
  ExperimentResult standard;
};

inline constexpr const char* kComparisonHeader =
    "samples_used,pq_mean_q_inf_error,pq_se_q_inf_error,"
    "standard_mean_q_inf_error,standard_se_q_inf_error,"
    "sample_complexity_q,sample_complexity_policy";

inline std::uint64_t experiment_budget(const ExperimentConfig& cfg) {
  if (cfg.algorithm == Algorithm::kStandard) return cfg.total_steps;
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < cfg.outer_iters; ++k) {
    total += cfg.inner_steps.size() == 1 ? cfg.inner_steps.front()
                                         : cfg.inner_steps[k];
  }
  return total;
}

/// Seed-averaged q_inf_error at every sample count recorded in all traces.
inline std::map<std::uint64_t, MeanStd> error_by_samples(
    const std::vector<RunTrace>& traces) {
  std::map<std::uint64_t, std::vector<double>> by;
  for (const auto& t : traces) {
    for (const auto& r : t.records) by[r.samples_used].push_back(r.q_inf_error);
  }
  std::map<std::uint64_t, MeanStd> out;
  for (const auto& [samples, values] : by) {
    if (values.size() == traces.size()) out[samples] = mean_and_se(values);
  }
  return out;
}

inline Comparison compare(const ExperimentConfig& cfg_pq,
                          const ExperimentConfig& cfg_std,
                          std::uint64_t matched_budget) {
  if (cfg_pq.algorithm != Algorithm::kPq) {
    throw ConfigError("compare: first config must use algorithm pq");
  }
  if (cfg_std.algorithm != Algorithm::kStandard) {
    throw ConfigError("compare: baseline config must use algorithm standard");
  }
  if (experiment_budget(cfg_pq) != matched_budget ||
      experiment_budget(cfg_std) != matched_budget) {
    throw ConfigError("compare: budget mismatch (pq uses " +
                      std::to_string(experiment_budget(cfg_pq)) +
                      ", standard uses " +
                      std::to_string(experiment_budget(cfg_std)) +
                      ", requested " + std::to_string(matched_budget) + ")");
  }
  const Problem a = resolve_problem(cfg_pq);
  const Problem b = resolve_problem(cfg_std);
  if (!(a.mdp == b.mdp) || !(a.distribution == b.distribution)) {
    throw ConfigError("compare: configs target different MDPs or distributions");
  }
  Comparison out;
  out.pq = execute_experiment(cfg_pq);
  out.standard = execute_experiment(cfg_std);
  if (cfg_pq.epsilon) {
    const auto& d = a.distribution;
    const double eps = *cfg_pq.epsilon;
    out.bound_q = sample_complexity_q(eps, a.mdp.gamma, a.mdp.num_states,
                                      a.mdp.num_actions, d.c_min(), d.l_max());
    if (eps <= 1.0) {
      out.bound_policy =
          sample_complexity_policy(eps, a.mdp.gamma, a.mdp.num_states,
                                   a.mdp.num_actions, d.c_min(), d.l_max());
    }
  }
  const auto pq_rows = error_by_samples(out.pq.traces);
  const auto std_rows = error_by_samples(out.standard.traces);
  for (const auto& [samples, stats] : pq_rows) {
    if (auto it = std_rows.find(samples); it != std_rows.end()) {
      out.rows.push_back({samples, stats, it->second});
    }
  }
  return out;
}

inline std::string comparison_to_csv(const Comparison& c) {
  std::string out = kComparisonHeader;
  out += '\n';
  for (const auto& r : c.rows) {
    out += std::to_string(r.samples_used) + ',' + format_real(r.pq.mean) + ',' +
           format_real(r.pq.standard_error) + ',' +
           format_real(r.standard.mean) + ',' +
           format_real(r.standard.standard_error) + ',' +
           format_real(c.bound_q) + ',' + format_real(c.bound_policy) + '\n';
  }
  return out;
}

/// Writes pq/ and standard/ experiment outputs plus compare.csv into `dir`.
inline void write_comparison(const ExperimentConfig& cfg_pq,
                             const ExperimentConfig& cfg_std,
                             const Comparison& c, const std::string& dir) {
  const std::filesystem::path root(dir);
  write_experiment(cfg_pq, c.pq, (root / "pq").string());
  write_experiment(cfg_std, c.standard, (root / "standard").string());
  detail::write_file((root / "compare.csv").string(), comparison_to_csv(c));
}

}  // namespace pqlearn
