#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "negbias/policy_config.hpp"

namespace negbias {

enum class ErrorCode {
  InvalidConfig,
  UndefinedMean,
  NonpositiveLogArgument,
  HardMaxUndifferentiable,
  StateSpaceTooLarge,
  SplitMissing,
  ZeroPropensity,
  HardMaxTrace,
  Divergence,
  MissingPosteriorDraws,
  MalformedTrace,
};

const char* to_string(ErrorCode code);

// All library failures surface as this exception; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class ArmFamily { Gaussian, Bernoulli };

struct ArmModel {
  ArmFamily family = ArmFamily::Gaussian;
  double mean = 0.0;
  double obs_std = 1.0;  // Gaussian only

  static ArmModel gaussian(double mean, double obs_std = 1.0);
  static ArmModel bernoulli(double p);

  void validate() const;
};

std::vector<ArmModel> gaussian_arms(std::span<const double> means, double obs_std = 1.0);
std::vector<ArmModel> bernoulli_arms(std::span<const double> means);

enum class StreamPurpose : std::uint32_t { ArmDraw = 1, PolicyNoise = 2, GumbelNoise = 3, HeldOut = 4, Mcmc = 5 };

/// A single-owner random stream keyed by (master seed, trial, purpose).
///
/// The engine state is derived by hashing the key, so a trial's draws never
/// depend on which worker ran it or on what other trials consumed.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t trial_index, StreamPurpose purpose);

  RngStream(const RngStream&) = delete;
  RngStream& operator=(const RngStream&) = delete;
  RngStream(RngStream&&) = default;
  RngStream& operator=(RngStream&&) = default;

  double uniform();  // [0, 1)
  double normal();   // standard normal
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Mean-zero Gumbel with scale tau (location -tau * Euler gamma).
  double gumbel(double tau);
  int uniform_int(int n);  // [0, n)

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t trial_index() const { return trial_index_; }
  StreamPurpose purpose() const { return purpose_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t trial_index_;
  StreamPurpose purpose_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t trial_index, StreamPurpose purpose);

inline constexpr double kEulerGamma = 0.57721566490153286061;

double draw_sample(const ArmModel& arm, RngStream& stream);

/// Full record of one collection run.
///
/// Rounds are numbered 1..T. Round t's selected arm is selections[t - 1].
/// Decision rows cover rounds t = K..T-1: row (t - K) holds the statistics
/// computed from the history after round t that picked selections[t].
struct Trace {
  std::vector<ArmModel> arms;
  PolicyConfig policy;
  int horizon = 0;
  std::vector<int> selections;
  std::vector<std::vector<double>> samples;       // per arm, in draw order
  std::vector<std::vector<double>> decision_stats;
  std::vector<std::vector<double>> gumbel_draws;  // empty unless randomized
  bool split = false;
  int init_pulls = 1;  // round-robin passes before the policy; forced rounds still get rows
  std::vector<std::vector<double>> held_out;      // per arm, when split
  std::map<std::string, std::vector<double>> estimates;

  int num_arms() const { return static_cast<int>(arms.size()); }

  /// N_t^(arm): draws of arm within rounds 1..t.
  int count(int arm, int t) const;
  std::vector<int> counts(int t) const;
  /// Round (1-based) at which the arm's m-th (0-based) sample was drawn.
  std::vector<std::vector<int>> draw_rounds() const;

  /// Structural checks: counts, sample list sizes, row shapes.
  void validate() const;
};

double sample_mean(const Trace& trace, int arm, int t);

/// Means and counts of every arm after round t. Arms not yet drawn get NaN.
struct ArmSummary {
  std::vector<double> means;
  std::vector<int> counts;
};
ArmSummary summarize(const Trace& trace, int t);

}  // namespace negbias
