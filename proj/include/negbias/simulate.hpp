#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "negbias/core.hpp"
#include "negbias/policy_config.hpp"

namespace negbias {

struct TrialOptions {
  bool split = false;  // draw a held-out twin from the selected arm every round
  int init_pulls = 1;  // round-robin passes over the arms before the policy takes over
};

/// One collection run: rounds 1..K * init_pulls round-robin, the rest by the policy.
/// Streams are keyed by (master_seed, trial_index).
Trace run_trial(const std::vector<ArmModel>& arms, const PolicyConfig& policy, int horizon,
                std::uint64_t master_seed, std::uint64_t trial_index, TrialOptions options = {});

/// Runs fn(i) for i in [0, n) on a pool of workers. Every call writes only its
/// own slot, so results are independent of the pool size.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct ArmStats {
  double bias = 0.0;
  double se = 0.0;
  double mse = 0.0;
  int n_defined = 0;  // trials where the arm had a sample by the checkpoint
};

struct CheckpointReport {
  int round = 0;
  std::vector<ArmStats> arms;
  double pooled_bias = 0.0;  // mean over arms of per-arm bias
  double pooled_bias_se = 0.0;
  double pooled_mse = 0.0;
  std::vector<double> joint_bias;  // f(m): fraction of trials with m arms strictly below their mean
};

struct ExperimentReport {
  PolicyConfig policy;
  std::vector<ArmModel> arms;
  int horizon = 0;
  int n_trials = 0;
  std::uint64_t master_seed = 0;
  std::vector<CheckpointReport> checkpoints;

  const CheckpointReport& at(int round) const;
};

struct CampaignOptions {
  std::vector<int> checkpoints;  // empty: only T
  int threads = 1;
  int init_pulls = 1;
};

ExperimentReport run_campaign(const std::vector<ArmModel>& arms, const PolicyConfig& policy, int horizon,
                              int n_trials, std::uint64_t master_seed, const CampaignOptions& options = {});

/// Exact E[mean_T^(k)] - mu_k for two Bernoulli arms by dynamic programming
/// over (n1, s1, s2) states. Works for any index policy (hard, epsilon or Gumbel).
struct ExactBias {
  double bias1 = 0.0;
  double bias2 = 0.0;
};
inline constexpr int kMaxExactHorizon = 64;
ExactBias enumerate_bernoulli_exact(double mu1, double mu2, const PolicyConfig& policy, int horizon);

struct ScatterPoint {
  double snapshot_bias = 0.0;  // mean of arm 1 at the snapshot minus its true mean
  int future_count = 0;        // draws of arm 1 in rounds (snapshot, T]
};

std::vector<ScatterPoint> future_samples_scatter(const std::vector<ArmModel>& arms, const PolicyConfig& policy,
                                                 int t_snapshot, int horizon, int n_trials,
                                                 std::uint64_t master_seed, int threads = 1, int init_pulls = 1);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace negbias
