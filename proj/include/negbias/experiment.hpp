#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "negbias/cmle.hpp"
#include "negbias/core.hpp"
#include "negbias/policy_config.hpp"

namespace negbias {

/// One arm configuration and horizon. A spec runs every policy on every case.
struct CaseSpec {
  std::string label;
  std::vector<ArmModel> arms;
  int horizon = 0;
};

struct GridSpec {
  int size = 41;
  std::vector<int> horizons{3, 10};
};

enum class HeldoutBudget {
  Equal,  // T/2 rounds, each with a twin: T samples in total
  Twin,   // T rounds, each with a twin
};

struct ExperimentSpec {
  std::vector<CaseSpec> cases;
  std::vector<PolicyConfig> policies;
  int n_trials = 1000;
  std::optional<int> cmle_trials;  // defaults to n_trials
  std::vector<int> checkpoints;     // empty: every round from K to T
  std::uint64_t master_seed = 1;
  std::vector<std::string> estimators{"naive", "heldout", "propensity", "cmle"};
  CmleConfig cmle;
  CmleConfig cmle_thompson = CmleConfig::thompson_defaults();
  double gumbel_tau = 1.0;
  HeldoutBudget heldout_budget = HeldoutBudget::Equal;
  int init_pulls = 1;  // bias-curves, joint-bias and scatter only
  int snapshot = 100;
  GridSpec grid;
  int threads = 1;
  std::filesystem::path out_dir = "out";

  bool wants(const std::string& estimator) const;
  int effective_cmle_trials() const { return cmle_trials.value_or(n_trials); }
  void validate() const;
};

/// Parses a JSON spec. Unknown keys, type errors and invalid values throw
/// Error(InvalidConfig) with a "source:line: " prefix.
ExperimentSpec parse_spec(const std::string& text, const std::string& source = "<spec>");
ExperimentSpec load_spec(const std::filesystem::path& path);

/// Canonical form: every field written out, excluding threads and out_dir.
nlohmann::json spec_to_json(const ExperimentSpec& spec);
/// 16 hex digits of FNV-1a over the canonical JSON.
std::string spec_hash(const ExperimentSpec& spec);

struct CommandResult {
  std::vector<std::filesystem::path> files;
  std::string text;  // human-readable summary
};

CommandResult cmd_bias_curves(const ExperimentSpec& spec);
CommandResult cmd_joint_bias(const ExperimentSpec& spec);
CommandResult cmd_debias(const ExperimentSpec& spec);
CommandResult cmd_analytic_check(const ExperimentSpec& spec);
CommandResult cmd_scatter(const ExperimentSpec& spec);

/// Summary of one estimator on one (case, policy) cell.
struct MethodSummary {
  std::string method;
  int trials = 0;
  std::vector<double> bias, se, mse;  // per arm
  double pooled_bias = 0.0;           // mean over arms
  double pooled_bias_se = 0.0;
  double pooled_mse = 0.0;
};

struct DebiasCell {
  std::string case_label;
  PolicyConfig policy;
  std::vector<MethodSummary> methods;
  const MethodSummary* find(const std::string& method) const;
};

/// The computation behind cmd_debias, without file output.
std::vector<DebiasCell> run_debias(const ExperimentSpec& spec);

}  // namespace negbias
