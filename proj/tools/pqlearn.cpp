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


// pqlearn: command-line driver for periodic Q-learning experiments.
//
//   pqlearn run      --config exp.json [--out DIR] [--seeds N] [--threads N]
//   pqlearn compare  --config pq.json --baseline std.json --budget M [...]
//   pqlearn bounds   --epsilon E --gamma G --states S --actions A [--c C --L L]
//   pqlearn validate --mdp model.json
//
// The output directory defaults to $PQLEARN_OUT_DIR, then ./pqlearn_out.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pqlearn/harness.hpp"
#include "pqlearn/io.hpp"
#include "pqlearn/pq.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::string out;
  std::size_t seeds = 0;
  std::size_t threads = 0;
};

void apply_overrides(pqlearn::ExperimentConfig& cfg, const RunFlags& flags) {
  if (flags.seeds > 0) cfg.num_seeds = flags.seeds;
  if (flags.threads > 0) cfg.threads = flags.threads;
  cfg.output = pqlearn::default_output_dir(flags.out.empty() ? cfg.output
                                                            : flags.out);
}

void print_warnings(const pqlearn::ExperimentConfig& cfg) {
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_run(const RunFlags& flags) {
  auto cfg = pqlearn::load_config(flags.config);
  apply_overrides(cfg, flags);
  print_warnings(cfg);
  const auto result = pqlearn::run_experiment(cfg);
  const auto& s = result.summary;
  std::cout << "config_hash " << s.config_hash << "\n"
            << "seeds " << s.num_seeds << "\n"
            << "samples_used " << s.samples_used << "\n"
            << "mean_q_inf_error " << pqlearn::format_real(s.q_inf_error.mean)
            << " (se " << pqlearn::format_real(s.q_inf_error.standard_error)
            << ")\n"
            << "mean_v_gap " << pqlearn::format_real(s.v_gap.mean) << " (se "
            << pqlearn::format_real(s.v_gap.standard_error) << ")\n"
            << "output " << cfg.output << "\n";
  return 0;
}

int cmd_compare(const RunFlags& flags, const std::string& baseline,
                std::uint64_t budget) {
  auto cfg_pq = pqlearn::load_config(flags.config);
  auto cfg_std = pqlearn::load_config(baseline);
  apply_overrides(cfg_pq, flags);
  apply_overrides(cfg_std, flags);
  print_warnings(cfg_pq);
  print_warnings(cfg_std);
  const auto c = pqlearn::compare(cfg_pq, cfg_std, budget);
  pqlearn::write_comparison(cfg_pq, cfg_std, c, cfg_pq.output);
  std::cout << "budget " << budget << "\n"
            << "aligned_rows " << c.rows.size() << "\n";
  if (!c.rows.empty()) {
    const auto& last = c.rows.back();
    std::cout << "pq_mean_q_inf_error " << pqlearn::format_real(last.pq.mean)
              << " (se " << pqlearn::format_real(last.pq.standard_error) << ")\n"
              << "standard_mean_q_inf_error "
              << pqlearn::format_real(last.standard.mean) << " (se "
              << pqlearn::format_real(last.standard.standard_error) << ")\n";
  }
  std::cout << "sample_complexity_q " << pqlearn::format_real(c.bound_q) << "\n"
            << "sample_complexity_policy "
            << pqlearn::format_real(c.bound_policy) << "\n"
            << "output " << cfg_pq.output << "\n";
  return 0;
}

struct BoundsFlags {
  double epsilon = 0.0;
  double gamma = 0.0;
  std::size_t states = 0;
  std::size_t actions = 0;
  std::optional<double> c;
  std::optional<double> l;
};

int cmd_bounds(const BoundsFlags& f) {
  const double uniform = 1.0 / static_cast<double>(f.states * f.actions);
  const double c = f.c.value_or(uniform);
  const double l = f.l.value_or(uniform);
  if (!(c > 0.0) || c > l || c > uniform || l < uniform) {
    std::cerr << "error: need 0 < c <= 1/(|S||A|) <= L\n";
    return 2;
  }
  const auto schedule = pqlearn::theory_schedule(c, l);
  std::cout << "c " << pqlearn::format_real(c) << "\n"
            << "L " << pqlearn::format_real(l) << "\n"
            << "beta " << pqlearn::format_real(schedule.beta) << "\n"
            << "lambda " << pqlearn::format_real(schedule.lambda) << "\n"
            << "required_inner_steps "
            << pqlearn::required_inner_steps(f.epsilon, f.gamma, f.states,
                                             f.actions, c, l)
            << "\n"
            << "required_outer_iters "
            << pqlearn::required_outer_iters(f.epsilon, f.gamma) << "\n"
            << "sample_complexity_q "
            << pqlearn::format_real(pqlearn::sample_complexity_q(
                   f.epsilon, f.gamma, f.states, f.actions, c, l))
            << "\n";
  if (f.epsilon <= 1.0) {
    std::cout << "sample_complexity_policy "
              << pqlearn::format_real(pqlearn::sample_complexity_policy(
                     f.epsilon, f.gamma, f.states, f.actions, c, l))
              << "\n";
  } else {
    std::cout << "sample_complexity_policy n/a (epsilon > 1)\n";
  }
  if (!pqlearn::epsilon_in_bounded_regime(f.epsilon, f.gamma)) {
    std::cerr << "warning: epsilon exceeds (1-gamma)^2\n";
  }
  return 0;
}

int cmd_validate(const std::string& path) {
  try {
    const auto doc = pqlearn::load_mdp(path);
    std::cout << "valid: " << doc.mdp.num_states << " states, "
              << doc.mdp.num_actions << " actions, gamma "
              << pqlearn::format_real(doc.mdp.gamma)
              << (doc.distribution ? ", with distribution" : "") << "\n";
    return 0;
  } catch (const pqlearn::FormatError& e) {
    std::cout << "invalid: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic Q-learning experiments"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run an experiment config over seeds");
  auto add_run_flags = [](CLI::App* sub, RunFlags& f) {
    sub->add_option("--config", f.config, "Experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--seeds", f.seeds, "Number of seeds (overrides config)");
    sub->add_option("--threads", f.threads, "Worker threads");
  };
  add_run_flags(run, run_flags);

  RunFlags compare_flags;
  std::string baseline;
  std::uint64_t budget = 0;
  auto* cmp = app.add_subcommand(
      "compare", "PQ-learning vs standard Q-learning at a matched budget");
  add_run_flags(cmp, compare_flags);
  cmp->add_option("--baseline", baseline, "Standard Q-learning config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmp->add_option("--budget", budget, "Total samples for both algorithms")
      ->required();

  BoundsFlags bounds_flags;
  double c_flag = 0.0;
  double l_flag = 0.0;
  auto* bounds =
      app.add_subcommand("bounds", "Evaluate the sample-complexity formulas");
  bounds->add_option("--epsilon", bounds_flags.epsilon, "Target accuracy")
      ->required()
      ->check(CLI::PositiveNumber);
  bounds->add_option("--gamma", bounds_flags.gamma, "Discount factor")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  bounds->add_option("--states", bounds_flags.states, "|S|")
      ->required()
      ->check(CLI::PositiveNumber);
  bounds->add_option("--actions", bounds_flags.actions, "|A|")
      ->required()
      ->check(CLI::PositiveNumber);
  auto* c_opt = bounds->add_option("--c", c_flag, "min d_a(s) (default uniform)");
  auto* l_opt = bounds->add_option("--L", l_flag, "max d_a(s) (default uniform)");

  std::string mdp_path;
  auto* validate = app.add_subcommand("validate", "Check an MDP file");
  validate->add_option("--mdp,mdp", mdp_path, "MDP document (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_flags);
    if (*cmp) return cmd_compare(compare_flags, baseline, budget);
    if (*bounds) {
      if (*c_opt) bounds_flags.c = c_flag;
      if (*l_opt) bounds_flags.l = l_flag;
      if (!(bounds_flags.gamma > 0.0 && bounds_flags.gamma < 1.0)) {
        std::cerr << "error: gamma must lie in (0, 1)\n";
        return 2;
      }
      return cmd_bounds(bounds_flags);
    }
    if (*validate) return cmd_validate(mdp_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
