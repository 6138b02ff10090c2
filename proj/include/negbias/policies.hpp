#pragma once

#include <span>
#include <vector>

#include "negbias/core.hpp"
#include "negbias/policy_config.hpp"

namespace negbias {

/// Per-arm decision statistics U_t, one entry per arm.
using DecisionStats = std::vector<double>;

/// Exploration bonus added to the sample mean by lil' UCB for an arm with n draws.
double lil_ucb_bonus(int n, const LilUcbParams& params);

struct Posterior {
  double mean = 0.0;
  double var = 0.0;
};

/// Gaussian posterior of an arm mean under a Normal prior and known observation std.
Posterior thompson_posterior(double sample_sum, int n, const ThompsonPrior& prior, double obs_std);

/// Deterministic index statistics from per-arm means and counts.
/// Defined for Greedy, EpsGreedy and LilUCB; Thompson needs posterior draws.
DecisionStats index_stats(std::span<const double> means, std::span<const int> counts,
                          const PolicyConfig& config);

/// Decision statistics after round t (t >= K). Recomputed from the sample
/// prefix for index policies; for Thompson the recorded posterior draws.
DecisionStats decision_stats(const Trace& trace, int t, const PolicyConfig& config);

/// The random seed omega of one selection: a uniform for the epsilon branch
/// and one Gumbel draw per arm (ignored by hard variants).
struct SelectionNoise {
  double omega = 1.0;
  std::vector<double> gumbel;
};

SelectionNoise draw_selection_noise(const PolicyConfig& config, int num_arms, RngStream& stream);

/// Lowest-index argmax.
int argmax(std::span<const double> values);

/// f(U_t, omega) with the noise pinned.
int select_with_noise(std::span<const double> stats, const PolicyConfig& config, const SelectionNoise& noise);

/// s_{t+1} for the trace's history after round t, drawing omega from the stream.
int select(const Trace& trace, int t, const PolicyConfig& config, RngStream& noise_stream);

/// Softmax exp(u_k / tau) / sum_i exp(u_i / tau), max-subtracted.
std::vector<double> softmax(std::span<const double> stats, double tau);

/// P[f(U) = k | U] for every arm, marginalising omega.
std::vector<double> selection_distribution(std::span<const double> stats, const PolicyConfig& config);

/// P[f(U) = chosen | U]. Requesting a differentiable probability from a hard
/// argmax policy throws HardMaxUndifferentiable.
double selection_probability(std::span<const double> stats, int chosen, const PolicyConfig& config,
                             bool differentiable = false);

}  // namespace negbias
