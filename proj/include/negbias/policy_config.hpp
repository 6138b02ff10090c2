#pragma once

#include <optional>
#include <string>

namespace negbias {

enum class PolicyKind { Greedy, EpsGreedy, LilUCB, Thompson };

const char* to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& name);

struct LilUcbParams {
  double beta = 1.0;
  double epsilon = 0.01;
  double delta = 0.005;
  double alpha = 9.0;  // stopping-rule constant; recorded, never used at fixed horizon
};

struct ThompsonPrior {
  double mu0 = 0.0;
  double sigma0_sq = 25.0;
};

struct GumbelNoise {
  double tau = 1.0;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::Greedy;
  double eps_greedy_epsilon = 0.1;
  LilUcbParams lilucb;
  ThompsonPrior thompson_prior;
  std::optional<GumbelNoise> gumbel;  // absent: hard argmax

  static PolicyConfig greedy() { return {}; }
  static PolicyConfig eps_greedy(double epsilon);
  static PolicyConfig lil_ucb(LilUcbParams params = {});
  static PolicyConfig thompson(ThompsonPrior prior = {});

  PolicyConfig with_gumbel(double tau) const;

  bool randomized() const { return gumbel.has_value(); }
  /// Throws Error(InvalidConfig or NonpositiveLogArgument) on bad parameters.
  void validate() const;
  std::string label() const;
};

bool operator==(const PolicyConfig& a, const PolicyConfig& b);

}  // namespace negbias
